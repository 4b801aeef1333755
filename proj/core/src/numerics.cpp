#include "owleye/numerics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "owleye/error.hpp"

namespace owleye {

namespace {

void center_columns(Matrix& x) {
  const std::size_t n = x.rows(), p = x.cols();
  for (std::size_t c = 0; c < p; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
    mean /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) x(r, c) -= mean;
  }
}

// Flips v (in place) so its largest-magnitude entry is non-negative; ties go
// to the lowest index.
bool fix_sign(std::vector<double>& v) {
  std::size_t arg = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double a = std::fabs(v[i]);
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  if (v[arg] < 0.0) {
    for (double& e : v) e = -e;
    return true;
  }
  return false;
}

struct EigenPairs {
  std::vector<double> values;               // descending
  std::vector<std::vector<double>> vectors;  // matching order, unit norm
};

EigenPairs symmetric_eigen_descending(const Matrix& s) {
  using EigenColMajor = Eigen::MatrixXd;
  EigenColMajor m(s.rows(), s.cols());
  for (std::size_t r = 0; r < s.rows(); ++r)
    for (std::size_t c = 0; c < s.cols(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = s(r, c);
  Eigen::SelfAdjointEigenSolver<EigenColMajor> solver(m);
  if (solver.info() != Eigen::Success)
    throw NumericalError("symmetric eigendecomposition failed to converge");
  const auto& vals = solver.eigenvalues();
  const auto& vecs = solver.eigenvectors();
  EigenPairs out;
  const std::size_t k = s.rows();
  out.values.resize(k);
  out.vectors.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto src = static_cast<Eigen::Index>(k - 1 - i);  // ascending -> descending
    out.values[i] = vals(src);
    out.vectors[i].resize(k);
    for (std::size_t j = 0; j < k; ++j)
      out.vectors[i][j] = vecs(static_cast<Eigen::Index>(j), src);
  }
  return out;
}

// (sum, error) with no magnitude precondition.
inline void two_sum(double a, double b, double& sum, double& err) {
  sum = a + b;
  double bv = sum - a;
  double av = sum - bv;
  err = (a - av) + (b - bv);
}

// (sum, error); requires |a| >= |b|.
inline void fast_two_sum(double a, double b, double& sum, double& err) {
  sum = a + b;
  err = b - (sum - a);
}

}  // namespace

Matrix pca_fit_transform(const Matrix& x, std::size_t target_dim, Rng& rng) {
  if (x.rows() == 0) throw InvalidArgument("pca_fit_transform: empty input");
  if (target_dim == 0) throw InvalidArgument("pca_fit_transform: target_dim must be positive");

  const std::size_t n = x.rows();
  Matrix work = x;
  if (x.cols() < target_dim) {
    // Low-dimension rule: Gaussian random projection up to max(cols, 256)
    // columns before the decomposition.
    const std::size_t proj_cols = std::max<std::size_t>(x.cols(), 256);
    const double scale = 1.0 / std::sqrt(static_cast<double>(proj_cols));
    Matrix projection(x.cols(), proj_cols);
    for (std::size_t i = 0; i < projection.size(); ++i)
      projection.data()[i] = rng.normal() * scale;
    work = matmul(x, projection);
  }
  center_columns(work);
  const std::size_t p = work.cols();

  // Component loadings in the (possibly projected) p-dimensional space.
  std::vector<std::vector<double>> components;
  if (p <= n) {
    Matrix cov = matmul_tn(work, work);  // scatter matrix; eigvecs match covariance
    EigenPairs eig = symmetric_eigen_descending(cov);
    const double tol =
        std::max(eig.values.empty() ? 0.0 : eig.values[0], 0.0) * 1e-12;
    for (std::size_t i = 0; i < eig.values.size() && components.size() < target_dim; ++i) {
      if (!(eig.values[i] > tol) || !(eig.values[i] > 0.0)) break;
      components.push_back(std::move(eig.vectors[i]));
    }
  } else {
    Matrix gram = matmul_nt(work, work);  // n x n route for wide matrices
    EigenPairs eig = symmetric_eigen_descending(gram);
    const double tol =
        std::max(eig.values.empty() ? 0.0 : eig.values[0], 0.0) * 1e-12;
    for (std::size_t i = 0; i < eig.values.size() && components.size() < target_dim; ++i) {
      if (!(eig.values[i] > tol) || !(eig.values[i] > 0.0)) break;
      const double inv = 1.0 / std::sqrt(eig.values[i]);
      std::vector<double> v(p, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        const double w = eig.vectors[i][r] * inv;
        for (std::size_t c = 0; c < p; ++c) v[c] += w * work(r, c);
      }
      components.push_back(std::move(v));
    }
  }
  for (auto& v : components) fix_sign(v);

  Matrix out(n, target_dim, 0.0);
  for (std::size_t j = 0; j < components.size(); ++j) {
    const auto& v = components[j];
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < p; ++c) s += work(r, c) * v[c];
      out(r, j) = s;
    }
  }
  return out;
}

Matrix masked_softmax(const Matrix& logits,
                      const std::vector<std::vector<std::size_t>>& masked,
                      double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidArgument("masked_softmax: temperature must be positive");
  if (!masked.empty() && masked.size() != logits.rows())
    throw InvalidArgument("masked_softmax: mask set count must match row count");

  const std::size_t rows = logits.rows(), cols = logits.cols();
  Matrix out(rows, cols, 0.0);
  std::vector<bool> is_masked(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill(is_masked.begin(), is_masked.end(), false);
    std::size_t masked_count = 0;
    if (!masked.empty()) {
      for (std::size_t idx : masked[r]) {
        if (idx >= cols)
          throw InvalidArgument("masked_softmax: mask index " + std::to_string(idx) +
                                " out of range in row " + std::to_string(r));
        if (!is_masked[idx]) {
          is_masked[idx] = true;
          ++masked_count;
        }
      }
    }
    if (masked_count == cols)
      throw InvalidArgument("masked_softmax: row " + std::to_string(r) +
                            " is fully masked");

    double max_z = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c)
      if (!is_masked[c]) max_z = std::max(max_z, logits(r, c) / temperature);
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      if (!is_masked[c]) denom += std::exp(logits(r, c) / temperature - max_z);
    for (std::size_t c = 0; c < cols; ++c)
      if (!is_masked[c]) out(r, c) = std::exp(logits(r, c) / temperature - max_z) / denom;
  }
  return out;
}

std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& loss_fn,
    const std::vector<double>& params, double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite_diff_grad: step must be positive");
  std::vector<double> grad(params.size());
  std::vector<double> probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + step;
    const double up = loss_fn(probe);
    probe[i] = params[i] - step;
    const double down = loss_fn(probe);
    probe[i] = params[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericalError("finite_diff_grad: non-finite loss at coordinate " +
                           std::to_string(i));
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

void ExactSum::add(double value) {
  // Grow-expansion (Shewchuk): thread the new value through every component
  // with exact two_sum steps, keeping the non-zero residuals.
  double q = value;
  std::size_t write = 0;
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    double sum, err;
    two_sum(q, parts_[i], sum, err);
    q = sum;
    if (err != 0.0) parts_[write++] = err;
  }
  parts_.resize(write);
  if (q != 0.0) parts_.push_back(q);
}

double ExactSum::round() const {
  if (parts_.empty()) return 0.0;
  // COMPRESS (Shewchuk): after the downward and upward sweeps the leading
  // component is within half an ulp of the represented sum, i.e. correctly
  // rounded.
  const std::size_t m = parts_.size();
  std::vector<double> g(m, 0.0);
  double q = parts_[m - 1];
  std::size_t bottom = m - 1;
  for (std::size_t ii = m - 1; ii-- > 0;) {
    double sum, err;
    fast_two_sum(q, parts_[ii], sum, err);
    q = sum;
    if (err != 0.0) {
      g[bottom--] = q;
      q = err;
    }
  }
  g[bottom] = q;
  double top = g[bottom];
  for (std::size_t i = bottom + 1; i < m; ++i) {
    double sum, err;
    fast_two_sum(g[i], top, sum, err);
    top = sum;
  }
  return top;
}

Matrix exact_mean(const std::vector<Matrix>& terms) {
  if (terms.empty()) throw InvalidArgument("exact_mean: empty term list");
  for (const Matrix& t : terms)
    if (!t.same_shape(terms.front()))
      throw InvalidArgument("exact_mean: mismatched term shapes");
  const double inv_count = static_cast<double>(terms.size());
  Matrix out(terms.front().rows(), terms.front().cols());
  ExactSum acc;
  for (std::size_t i = 0; i < out.size(); ++i) {
    acc.reset();
    for (const Matrix& t : terms) acc.add(t.data()[i]);
    out.data()[i] = acc.round() / inv_count;
  }
  return out;
}

}  // namespace owleye

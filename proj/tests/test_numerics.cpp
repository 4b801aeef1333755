#include <doctest.h>

#include <cmath>

#include "owleye/error.hpp"
#include "owleye/matrix.hpp"
#include "owleye/numerics.hpp"
#include "owleye/rng.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace owleye;

TEST_CASE("matrix basics") {
  Matrix a = Matrix::of({{1, 2}, {3, 4}});
  Matrix b = Matrix::of({{5, 6}, {7, 8}});
  CHECK(matmul(a, b) == Matrix::of({{19, 22}, {43, 50}}));
  CHECK(matmul_nt(a, b) == matmul(a, transpose(b)));
  CHECK(matmul_tn(a, b) == matmul(transpose(a), b));
  CHECK(hadamard(a, b) == Matrix::of({{5, 12}, {21, 32}}));
  CHECK((a + b) == Matrix::of({{6, 8}, {10, 12}}));
  CHECK_THROWS_AS(matmul(a, Matrix(3, 3)), InvalidArgument);

  std::vector<std::size_t> idx{1, 0, 1};
  CHECK(gather_rows(a, idx) == Matrix::of({{3, 4}, {1, 2}, {3, 4}}));
  CHECK(row_norms(Matrix::of({{3, 4}}))[0] == doctest::Approx(5.0));
}

TEST_CASE("rng determinism and portability surface") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(42), d(43);
  bool all_equal = true;
  for (int i = 0; i < 10; ++i) all_equal &= (c.next_u64() == d.next_u64());
  CHECK_FALSE(all_equal);

  // mt19937_64 reference value fixed by the standard: 10000th draw.
  std::mt19937_64 reference(5489u);
  for (int i = 0; i < 9999; ++i) reference();
  CHECK(reference() == 9981545732273789042ULL);

  Rng base(7);
  Rng s1 = base.derive(Rng::kDictSample, 0);
  Rng s2 = base.derive(Rng::kDictSample, 1);
  Rng s3 = base.derive(Rng::kTripletPairs, 0);
  CHECK(s1.next_u64() != s2.next_u64());
  CHECK(base.derive(Rng::kDictSample, 0).next_u64() !=
        s3.derive(Rng::kDictSample, 0).next_u64());
  CHECK(base.derive(Rng::kDictSample, 0).next_u64() ==
        Rng(7).derive(Rng::kDictSample, 0).next_u64());

  Rng u(1);
  auto sample = u.sample_without_replacement(10, 10);
  std::vector<bool> seen(10, false);
  for (auto v : sample) {
    CHECK(v < 10);
    CHECK_FALSE(seen[v]);
    seen[v] = true;
  }
  CHECK_THROWS_AS(u.sample_without_replacement(3, 4), InvalidArgument);

  Rng g(3);
  double mean = 0.0, var = 0.0;
  const int draws = 20000;
  std::vector<double> xs(draws);
  for (int i = 0; i < draws; ++i) {
    xs[i] = g.normal();
    mean += xs[i];
  }
  mean /= draws;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= draws;
  CHECK(std::fabs(mean) < 0.05);
  CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("masked_softmax analytic examples") {
  // (0, ln 2) with no mask: (1/3, 2/3).
  Matrix logits = Matrix::of({{0.0, std::log(2.0)}});
  Matrix out = masked_softmax(logits, {}, 1.0);
  CHECK(out(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(out(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  // Mask {0} on a 1x3 row: position 0 exactly 0, rest sums to 1.
  Matrix l3 = Matrix::of({{5.0, 1.0, -2.0}});
  Matrix m3 = masked_softmax(l3, {{0}}, 1.0);
  CHECK(m3(0, 0) == 0.0);
  CHECK(m3(0, 1) + m3(0, 2) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(masked_softmax(l3, {{0, 1, 2}}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(masked_softmax(l3, {}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(masked_softmax(l3, {{7}}, 1.0), InvalidArgument);
}

TEST_CASE("masked_softmax matches exp/normalize oracle") {
  Rng rng(11);
  Matrix logits = testutil::random_matrix(2, 4, rng, 2.0);
  std::vector<std::vector<std::size_t>> masks{{3}, {3}};
  Matrix out = masked_softmax(logits, masks, 0.5);
  for (std::size_t r = 0; r < 2; ++r) {
    oracle::Vec row(4);
    std::vector<bool> keep(4, true);
    keep[3] = false;
    for (std::size_t c = 0; c < 4; ++c) row[c] = logits(r, c);
    const auto expect = oracle::softmax_row(row, keep, 0.5);
    for (std::size_t c = 0; c < 4; ++c)
      CHECK(out(r, c) == doctest::Approx(expect[c]).epsilon(1e-12));
  }
}

TEST_CASE("masked_softmax rows sum to 1 over random mask configurations") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.uniform_index(4);
    const std::size_t cols = 2 + rng.uniform_index(6);
    Matrix logits = testutil::random_matrix(rows, cols, rng, 3.0);
    std::vector<std::vector<std::size_t>> masks(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t n_mask = rng.uniform_index(cols);  // keeps >= 1 unmasked
      masks[r] = rng.sample_without_replacement(cols, n_mask);
    }
    Matrix out = masked_softmax(logits, masks, 0.25 + rng.uniform01());
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < cols; ++c) sum += out(r, c);
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("pca: identical rows collapse to zeros") {
  Matrix x = Matrix::of({{7, -1}, {7, -1}, {7, -1}});
  Rng rng(0);
  Matrix out = pca_fit_transform(x, 1, rng);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.0);
}

TEST_CASE("pca: collinear points preserve spacing with fixed sign") {
  Matrix x = Matrix::of({{1, 1}, {2, 2}, {3, 3}});
  Rng rng(0);
  Matrix out = pca_fit_transform(x, 1, rng);
  CHECK(out(0, 0) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
  CHECK(out(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out(2, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("pca variances match the Jacobi eigensolver oracle") {
  Rng rng(17);
  Matrix x = testutil::random_matrix(5, 4, rng);
  Rng prng(0);
  Matrix out = pca_fit_transform(x, 2, prng);

  // Oracle: covariance eigenvalues from an independent Jacobi solver.
  oracle::Mat centered(5, oracle::Vec(4));
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 5; ++r) mean += x(r, c);
    mean /= 5.0;
    for (std::size_t r = 0; r < 5; ++r) centered[r][c] = x(r, c) - mean;
  }
  oracle::Mat cov = oracle::zeros(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      for (std::size_t r = 0; r < 5; ++r) cov[i][j] += centered[r][i] * centered[r][j];
      cov[i][j] /= 4.0;  // sample covariance, n - 1
    }
  const auto eig = oracle::jacobi_eigen(cov);

  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 5; ++r) mean += out(r, j);
    mean /= 5.0;
    double var = 0.0;
    for (std::size_t r = 0; r < 5; ++r) var += (out(r, j) - mean) * (out(r, j) - mean);
    var /= 4.0;
    CHECK(var == doctest::Approx(eig.values[j]).epsilon(1e-8));
  }
}

TEST_CASE("pca invariants: orthogonality and variance budget") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 6 + rng.uniform_index(10);
    const std::size_t p = 3 + rng.uniform_index(4);
    Matrix x = testutil::random_matrix(n, p, rng);
    Rng prng(trial);
    Matrix out = pca_fit_transform(x, p, prng);

    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a + 1; b < p; ++b) {
        double dot = 0.0;
        for (std::size_t r = 0; r < n; ++r) dot += out(r, a) * out(r, b);
        CHECK(std::fabs(dot) < 1e-8);
      }

    double total_in = 0.0, total_out = 0.0;
    for (std::size_t c = 0; c < p; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
      mean /= static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) total_in += (x(r, c) - mean) * (x(r, c) - mean);
      for (std::size_t r = 0; r < n; ++r) total_out += out(r, c) * out(r, c);
    }
    CHECK(total_out <= total_in * (1.0 + 1e-8));
    // d >= rank here, so the budget is met exactly.
    CHECK(total_out == doctest::Approx(total_in).epsilon(1e-8));
  }
}

TEST_CASE("pca low-dimension rule pads past the data rank") {
  // 4 nodes, 2 raw dims, target 8: random projection to 256 then PCA can
  // expose at most rank(centered) = 2 directions; the rest must be zero.
  Rng data_rng(3);
  Matrix x = testutil::random_matrix(4, 2, data_rng);
  Rng rng(9);
  Matrix out = pca_fit_transform(x, 8, rng);
  CHECK(out.cols() == 8);
  for (std::size_t j = 2; j < 8; ++j)
    for (std::size_t r = 0; r < 4; ++r) CHECK(out(r, j) == 0.0);
  // Leading directions survive the projection.
  double var0 = 0.0;
  for (std::size_t r = 0; r < 4; ++r) var0 += out(r, 0) * out(r, 0);
  CHECK(var0 > 0.0);
}

TEST_CASE("pca determinism and error contracts") {
  Rng data_rng(8);
  Matrix x = testutil::random_matrix(6, 3, data_rng);
  Rng r1(4), r2(4);
  CHECK(pca_fit_transform(x, 2, r1) == pca_fit_transform(x, 2, r2));
  Rng r3(0);
  CHECK_THROWS_AS(pca_fit_transform(Matrix(0, 0), 1, r3), InvalidArgument);
  CHECK_THROWS_AS(pca_fit_transform(x, 0, r3), InvalidArgument);
}

TEST_CASE("finite_diff_grad on analytic functions") {
  auto square = [](const std::vector<double>& p) { return p[0] * p[0]; };
  auto g = finite_diff_grad(square, {3.0}, 1e-4);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-7));

  auto constant = [](const std::vector<double>&) { return 5.5; };
  auto gc = finite_diff_grad(constant, {1.0, 2.0, 3.0}, 1e-4);
  for (double v : gc) CHECK(v == 0.0);

  auto bad = [](const std::vector<double>& p) { return std::log(p[0]); };
  CHECK_THROWS_AS(finite_diff_grad(bad, {1e-9}, 1.0), NumericalError);
  CHECK_THROWS_AS(finite_diff_grad(square, {1.0}, 0.0), InvalidArgument);
}

TEST_CASE("ExactSum: duplicated term lists halve to the same mean") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.uniform_index(9);
    std::vector<double> terms(m);
    for (double& t : terms) t = rng.normal() * std::pow(10.0, rng.uniform(-12.0, 12.0));

    ExactSum once;
    for (double t : terms) once.add(t);
    ExactSum twice;
    for (double t : terms) twice.add(t);
    for (double t : terms) twice.add(t);
    const double mean1 = once.round() / static_cast<double>(m);
    const double mean2 = twice.round() / static_cast<double>(2 * m);
    CHECK(mean1 == mean2);  // bitwise
  }
}

TEST_CASE("exact_mean equals plain mean on benign data and is shape-checked") {
  Rng rng(12);
  std::vector<Matrix> terms;
  for (int i = 0; i < 3; ++i) terms.push_back(testutil::random_matrix(2, 3, rng));
  Matrix mean = exact_mean(terms);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double direct =
        (terms[0].data()[i] + terms[1].data()[i] + terms[2].data()[i]) / 3.0;
    CHECK(mean.data()[i] == doctest::Approx(direct).epsilon(1e-15));
  }
  terms.push_back(Matrix(1, 1));
  CHECK_THROWS_AS(exact_mean(terms), InvalidArgument);
  CHECK_THROWS_AS(exact_mean({}), InvalidArgument);
}

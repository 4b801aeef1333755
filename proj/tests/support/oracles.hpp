#pragma once

// Independent test oracles. Everything here is deliberately written without
// the library's linear-algebra or metric code paths: plain loops, naive
// algorithms, and a self-contained Jacobi eigensolver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, Vec(c, 0.0)); }

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat out = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

// Cyclic Jacobi rotations for a symmetric matrix; returns (eigenvalues,
// eigenvectors as columns), descending order.
struct EigenResult {
  Vec values;
  Mat vectors;  // vectors[i][j]: component i of eigenvector j
};

inline EigenResult jacobi_eigen(Mat a) {
  const std::size_t n = a.size();
  Mat v = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (std::size_t j = 0; j < n; ++j) {
          const double apj = a[p][j], aqj = a[q][j];
          a[p][j] = c * apj - s * aqj;
          a[q][j] = s * apj + c * aqj;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v[i][p], viq = v[i][q];
          v[i][p] = c * vip - s * viq;
          v[i][q] = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  EigenResult out;
  out.values.resize(n);
  out.vectors = zeros(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a[order[j]][order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors[i][j] = v[i][order[j]];
  }
  return out;
}

// Plain exp/normalize softmax of one row over the kept set.
inline Vec softmax_row(const Vec& logits, const std::vector<bool>& keep, double temp) {
  Vec out(logits.size(), 0.0);
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (keep[i]) denom += std::exp(logits[i] / temp);
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (keep[i]) out[i] = std::exp(logits[i] / temp) / denom;
  return out;
}

// AUROC by counting every (positive, negative) pair; ties credit 1/2.
inline double auroc_pairs(const Vec& scores, const std::vector<std::uint8_t>& labels) {
  double wins = 0.0;
  std::size_t positives = 0, negatives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    ++positives;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (!labels[j]) ++negatives;
  return wins / (static_cast<double>(positives) * static_cast<double>(negatives));
}

// Average precision by rank walk; ranking built by repeated argmax with
// lower-index preference on ties (no std::sort involved).
inline double auprc_rank_walk(const Vec& scores, const std::vector<std::uint8_t>& labels) {
  const std::size_t n = scores.size();
  std::vector<bool> used(n, false);
  std::size_t positives = 0;
  for (auto l : labels) positives += l;
  double sum = 0.0;
  std::size_t tp = 0;
  for (std::size_t rank = 1; rank <= n; ++rank) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      if (best == n || scores[i] > scores[best]) best = i;
    }
    used[best] = true;
    if (labels[best]) {
      ++tp;
      sum += static_cast<double>(tp) / static_cast<double>(rank);
    }
  }
  return sum / static_cast<double>(positives);
}

}  // namespace oracle

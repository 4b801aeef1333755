#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "owleye/matrix.hpp"
#include "owleye/rng.hpp"

namespace owleye {

/// Scores of the top `target_dim` principal components of the column-centered
/// input, ordered by descending explained variance. Sign convention: the
/// largest-magnitude entry of each component vector is non-negative (ties go
/// to the lowest index). If the input has fewer columns than `target_dim`, a
/// seeded Gaussian random projection to max(cols, 256) columns is applied
/// first; components beyond the rank of the centered data are zero columns.
Matrix pca_fit_transform(const Matrix& x, std::size_t target_dim, Rng& rng);

/// Per row: masked entries are exactly 0, the rest are
/// softmax(logit / temperature) over the unmasked positions and sum to 1.
/// `masked` is either empty (no masking anywhere) or one index set per row;
/// a fully masked row is an error.
Matrix masked_softmax(const Matrix& logits,
                      const std::vector<std::vector<std::size_t>>& masked,
                      double temperature);

/// Central-difference gradient (loss(p + h e_i) - loss(p - h e_i)) / 2h.
/// Throws NumericalError naming the coordinate if a probe evaluates
/// non-finite. Test oracle for the analytic gradient engine.
std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& loss_fn,
    const std::vector<double>& params, double step);

/// Accumulates doubles exactly (Shewchuk expansion arithmetic); round()
/// returns the correctly rounded sum. Used where a reduction must be
/// invariant under duplicating its term list.
class ExactSum {
public:
  void add(double value);
  double round() const;
  void reset() { parts_.clear(); }

private:
  std::vector<double> parts_;  // non-overlapping, increasing magnitude
};

/// Elementwise mean of `terms` (all same shape) with correctly rounded
/// per-element sums, so a duplicated term list yields bit-identical output.
Matrix exact_mean(const std::vector<Matrix>& terms);

}  // namespace owleye

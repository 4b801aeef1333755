#pragma once

#include <cstdint>
#include <vector>

namespace owleye {

struct MetricsReport {
  double auroc = 0.0;
  double auprc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Probability that a random positive outscores a random negative, ties
/// counted half (Mann-Whitney rank statistic; exact). Requires both classes.
double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Average precision: descending score walk, precision accumulated at each
/// positive rank. Ties are broken by node order (lower index ranks first).
/// Requires at least one positive.
double auprc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

MetricsReport evaluate_scores(const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& labels);

}  // namespace owleye

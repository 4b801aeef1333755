#include "owleye/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "owleye/error.hpp"

namespace owleye {

namespace {

void check_inputs(const std::vector<double>& scores,
                  const std::vector<std::uint8_t>& labels, std::size_t& positives,
                  std::size_t& negatives) {
  if (scores.size() != labels.size())
    throw InvalidArgument("metrics: score/label count mismatch");
  if (scores.empty()) throw InvalidArgument("metrics: empty input");
  positives = negatives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw InvalidArgument("metrics: labels must be 0/1");
    if (!std::isfinite(scores[i])) throw InvalidArgument("metrics: non-finite score");
    if (labels[i]) ++positives;
    else ++negatives;
  }
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  std::size_t positives = 0, negatives = 0;
  check_inputs(scores, labels, positives, negatives);
  if (positives == 0 || negatives == 0)
    throw InvalidArgument("auroc: needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks within tie groups; rank sums stay exact in doubles.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]]) positive_rank_sum += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

double auprc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  std::size_t positives = 0, negatives = 0;
  check_inputs(scores, labels, positives, negatives);
  if (positives == 0) throw InvalidArgument("auprc: needs at least one positive");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double sum = 0.0;
  std::size_t true_positives = 0;
  for (std::size_t rank = 1; rank <= order.size(); ++rank) {
    if (labels[order[rank - 1]]) {
      ++true_positives;
      sum += static_cast<double>(true_positives) / static_cast<double>(rank);
    }
  }
  return sum / static_cast<double>(positives);
}

MetricsReport evaluate_scores(const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& labels) {
  MetricsReport report;
  std::size_t positives = 0, negatives = 0;
  check_inputs(scores, labels, positives, negatives);
  report.positives = positives;
  report.negatives = negatives;
  report.auroc = auroc(scores, labels);
  report.auprc = auprc(scores, labels);
  return report;
}

}  // namespace owleye

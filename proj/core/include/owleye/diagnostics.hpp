#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "owleye/graph.hpp"
#include "owleye/matrix.hpp"
#include "owleye/rng.hpp"

namespace owleye {

inline constexpr std::size_t kDiagnosticHistogramBins = 50;

struct ClassDistanceStats {
  std::string pair_class;  // "NN", "NA", "AA"
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double hist_lo = 0.0;
  double hist_hi = 0.0;
  std::vector<std::size_t> histogram;  // kDiagnosticHistogramBins bins
};

struct DistanceDiagnostic {
  std::array<ClassDistanceStats, 3> classes;  // NN, NA, AA
  bool exact_pairs = false;  // all unordered pairs enumerated (no sampling)
  Matrix scatter;            // n x 2 PCA projection of the stage matrix
};

/// Distance structure of one pipeline stage: pairwise Euclidean distances of
/// sampled node pairs, bucketed by label class (normal-normal, normal-anomaly,
/// anomaly-anomaly), plus a 2-component PCA scatter of the stage features.
/// When the graph has at most sample_pairs unordered pairs they are all
/// enumerated; identical seeds sample identical pair sets, so stages can be
/// compared pair-for-pair.
DistanceDiagnostic distance_diagnostic(const GraphDataset& g, const Matrix& x_stage,
                                       std::size_t sample_pairs, const Rng& rng);

/// Writes <stage>_summary.csv, <stage>_hist.csv and <stage>_scatter.csv.
void write_distance_diagnostic(const DistanceDiagnostic& diag, const GraphDataset& g,
                               const std::filesystem::path& dir,
                               const std::string& stage);

}  // namespace owleye

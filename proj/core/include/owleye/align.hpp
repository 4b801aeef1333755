#pragma once

#include <string>
#include <utility>
#include <vector>

#include "owleye/graph.hpp"
#include "owleye/matrix.hpp"
#include "owleye/rng.hpp"

namespace owleye {

enum class Aggregation { kMedian, kMean };

/// Pairwise-distance statistics of one graph's projected features.
struct GraphAlignStats {
  std::string graph_id;
  double avg_norm = 0.0;           // mean row norm N
  double mean_dist = 0.0;          // mean pairwise distance over all ordered pairs
  double mean_dist_normed = 0.0;   // same after dividing rows by N
  double scale = 1.0;              // factor f
  bool degenerate = false;         // a zero entered f's ratio; f fell back to 1
  bool approx_dist = false;        // distances estimated by pair sampling
};

/// Collection-level alignment state; persisted in checkpoints so unseen
/// graphs can be normalized consistently at inference time.
struct AlignmentStats {
  std::vector<GraphAlignStats> per_graph;
  double dist_median = 0.0;
  double dist_median_normed = 0.0;
  double tau = 1.0;
  std::size_t dim = 0;  // common feature dimension d
  Aggregation aggregation = Aggregation::kMedian;
};

struct AlignedGraph {
  std::string graph_id;
  Matrix x;  // n x dim, fully normalized
};

/// PCA projection to the common dimension (with the low-dimension random
/// projection rule). The projection stream is derived from the graph name so
/// results do not depend on the graph's position in a collection.
Matrix project_features(const GraphDataset& g, std::size_t dim, const Rng& base_rng);

/// Mean row norm N, mean pairwise distance over all n^2 ordered pairs
/// (including j = k), and the same after dividing rows by N. Exact up to
/// n = 20000 nodes; beyond that a seeded sample of 10^7 ordered pairs is used
/// and `approx_dist` is set. All-zero features yield mean_dist_normed = 0
/// with the degenerate flag.
GraphAlignStats graph_norm_stats(const Matrix& x_tilde);

/// Componentwise median of (dist, dist_N) pairs; even counts average the two
/// middle values.
std::pair<double, double> median_stats(const std::vector<std::pair<double, double>>& per_graph);

/// (x / N) * max(f, tau). Requires avg_norm > 0.
Matrix apply_normalization(const Matrix& x_tilde, const GraphAlignStats& gs, double tau);

/// f = sqrt((dist_med * dist_N) / (dist * dist_med_N)), falling back to 1
/// (degenerate) when any factor in the ratio is zero.
void compute_scale(GraphAlignStats& gs, double dist_median, double dist_median_normed);

/// Full alignment of a collection: project every graph, compute per-graph
/// stats, aggregate over exactly the supplied graphs, then normalize.
std::pair<std::vector<AlignedGraph>, AlignmentStats> align_collection(
    const std::vector<GraphDataset>& graphs, std::size_t dim, double tau,
    const Rng& base_rng, Aggregation aggregation = Aggregation::kMedian);

/// Test-time rule: an unseen graph is normalized with aggregates recomputed
/// over the training graphs plus itself (or training-only in strict mode).
AlignedGraph align_new_graph(const AlignmentStats& train_stats, const GraphDataset& g,
                             const Rng& base_rng, bool strict_train_aggregate = false,
                             GraphAlignStats* stats_out = nullptr);

}  // namespace owleye

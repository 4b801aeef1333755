#include "owleye/align.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "owleye/error.hpp"
#include "owleye/numerics.hpp"

namespace owleye {

namespace {

constexpr std::size_t kExactPairLimit = 20000;
constexpr std::size_t kSampledPairs = 10'000'000;

std::uint64_t hash64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Mean Euclidean distance over all n^2 ordered row pairs (j = k included).
double mean_pairwise_distance(const Matrix& x, bool* approx) {
  const std::size_t n = x.rows();
  std::vector<double> sq(n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v * v;
    sq[r] = s;
  }

  if (n <= kExactPairLimit) {
    if (approx) *approx = false;
    double total = 0.0;
    const std::size_t block = 256;
    std::vector<std::size_t> rows_idx(block);
    for (std::size_t r0 = 0; r0 < n; r0 += block) {
      const std::size_t b = std::min(block, n - r0);
      rows_idx.resize(b);
      for (std::size_t i = 0; i < b; ++i) rows_idx[i] = r0 + i;
      Matrix gram = matmul_nt(gather_rows(x, rows_idx), x);  // b x n
      for (std::size_t i = 0; i < b; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double d2 = sq[r0 + i] + sq[j] - 2.0 * gram(i, j);
          if (j != r0 + i && d2 > 0.0) row_sum += std::sqrt(d2);
        }
        total += row_sum;
      }
    }
    return total / (static_cast<double>(n) * static_cast<double>(n));
  }

  if (approx) *approx = true;
  Rng rng(hash64("owleye.pairwise_distance_sample"));
  double total = 0.0;
  for (std::size_t t = 0; t < kSampledPairs; ++t) {
    const std::size_t a = static_cast<std::size_t>(rng.uniform_index(n));
    const std::size_t b = static_cast<std::size_t>(rng.uniform_index(n));
    double d2 = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double diff = x(a, c) - x(b, c);
      d2 += diff * diff;
    }
    total += std::sqrt(d2);
  }
  return total / static_cast<double>(kSampledPairs);
}

double aggregate(std::vector<double> values, Aggregation agg) {
  if (values.empty()) throw InvalidArgument("aggregate: empty value list");
  if (agg == Aggregation::kMean) {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  if (m % 2 == 1) return values[m / 2];
  return 0.5 * (values[m / 2 - 1] + values[m / 2]);
}

}  // namespace

Matrix project_features(const GraphDataset& g, std::size_t dim, const Rng& base_rng) {
  Rng rng = base_rng.derive(Rng::kProjection, hash64(g.name));
  return pca_fit_transform(g.x_raw, dim, rng);
}

GraphAlignStats graph_norm_stats(const Matrix& x_tilde) {
  if (x_tilde.rows() == 0) throw InvalidArgument("graph_norm_stats: empty matrix");
  GraphAlignStats gs;
  const auto norms = row_norms(x_tilde);
  double total = 0.0;
  for (double v : norms) total += v;
  gs.avg_norm = total / static_cast<double>(norms.size());
  gs.mean_dist = mean_pairwise_distance(x_tilde, &gs.approx_dist);

  if (gs.avg_norm == 0.0) {
    gs.mean_dist_normed = 0.0;
    gs.degenerate = true;
    std::cerr << "owleye: warning: all-zero features; normalized distance set to 0\n";
    return gs;
  }
  Matrix scaled = x_tilde;
  scaled *= 1.0 / gs.avg_norm;
  gs.mean_dist_normed = mean_pairwise_distance(scaled, nullptr);
  return gs;
}

std::pair<double, double> median_stats(
    const std::vector<std::pair<double, double>>& per_graph) {
  if (per_graph.empty()) throw InvalidArgument("median_stats: empty collection");
  std::vector<double> dist, dist_normed;
  dist.reserve(per_graph.size());
  dist_normed.reserve(per_graph.size());
  for (const auto& [d, dn] : per_graph) {
    dist.push_back(d);
    dist_normed.push_back(dn);
  }
  return {aggregate(std::move(dist), Aggregation::kMedian),
          aggregate(std::move(dist_normed), Aggregation::kMedian)};
}

void compute_scale(GraphAlignStats& gs, double dist_median, double dist_median_normed) {
  if (gs.mean_dist == 0.0 || dist_median == 0.0 || dist_median_normed == 0.0) {
    gs.scale = 1.0;
    gs.degenerate = true;
    return;
  }
  gs.scale = std::sqrt((dist_median * gs.mean_dist_normed) /
                       (gs.mean_dist * dist_median_normed));
}

Matrix apply_normalization(const Matrix& x_tilde, const GraphAlignStats& gs, double tau) {
  if (gs.avg_norm == 0.0)
    throw InvalidArgument("apply_normalization: cannot normalize all-zero features");
  Matrix out = x_tilde;
  out *= (1.0 / gs.avg_norm) * std::max(gs.scale, tau);
  return out;
}

std::pair<std::vector<AlignedGraph>, AlignmentStats> align_collection(
    const std::vector<GraphDataset>& graphs, std::size_t dim, double tau,
    const Rng& base_rng, Aggregation aggregation) {
  if (graphs.empty()) throw InvalidArgument("align_collection: no graphs");

  AlignmentStats stats;
  stats.tau = tau;
  stats.dim = dim;
  stats.aggregation = aggregation;

  std::vector<Matrix> projected(graphs.size());
  stats.per_graph.resize(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    projected[i] = project_features(graphs[i], dim, base_rng);
    stats.per_graph[i] = graph_norm_stats(projected[i]);
    stats.per_graph[i].graph_id = graphs[i].name;
  }

  std::vector<double> dist, dist_normed;
  for (const auto& gs : stats.per_graph) {
    dist.push_back(gs.mean_dist);
    dist_normed.push_back(gs.mean_dist_normed);
  }
  stats.dist_median = aggregate(dist, aggregation);
  stats.dist_median_normed = aggregate(dist_normed, aggregation);

  std::vector<AlignedGraph> aligned(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    compute_scale(stats.per_graph[i], stats.dist_median, stats.dist_median_normed);
    aligned[i].graph_id = graphs[i].name;
    aligned[i].x = apply_normalization(projected[i], stats.per_graph[i], tau);
  }
  return {std::move(aligned), std::move(stats)};
}

AlignedGraph align_new_graph(const AlignmentStats& train_stats, const GraphDataset& g,
                             const Rng& base_rng, bool strict_train_aggregate,
                             GraphAlignStats* stats_out) {
  Matrix projected = project_features(g, train_stats.dim, base_rng);
  GraphAlignStats gs = graph_norm_stats(projected);
  gs.graph_id = g.name;

  std::vector<double> dist, dist_normed;
  for (const auto& tg : train_stats.per_graph) {
    dist.push_back(tg.mean_dist);
    dist_normed.push_back(tg.mean_dist_normed);
  }
  if (!strict_train_aggregate) {
    dist.push_back(gs.mean_dist);
    dist_normed.push_back(gs.mean_dist_normed);
  }
  const double med = aggregate(std::move(dist), train_stats.aggregation);
  const double med_normed = aggregate(std::move(dist_normed), train_stats.aggregation);
  compute_scale(gs, med, med_normed);

  AlignedGraph out;
  out.graph_id = g.name;
  out.x = apply_normalization(projected, gs, train_stats.tau);
  if (stats_out) *stats_out = gs;
  return out;
}

}  // namespace owleye

#include "owleye/synth.hpp"

#include <cmath>
#include <set>

#include "owleye/error.hpp"

namespace owleye {

GraphDataset make_synthetic_graph(const std::string& name, const SynthSpec& spec,
                                  const Rng& base_rng) {
  if (spec.nodes < 8 || spec.clusters == 0 || spec.raw_dim == 0 ||
      spec.nodes < 2 * spec.clusters)
    throw InvalidArgument("make_synthetic_graph: bad spec");

  Rng rng = base_rng.derive(Rng::kSynthesis);
  GraphDataset g;
  g.name = name;
  g.domain_tag = "synthetic";
  g.n = spec.nodes;

  // Cluster centers on a sphere of radius center_spread: every cluster sits
  // at the same distance from the global mean, so feature norms carry no
  // cluster identity of their own.
  Matrix centers(spec.clusters, spec.raw_dim);
  for (std::size_t c = 0; c < spec.clusters; ++c) {
    double norm = 0.0;
    for (std::size_t f = 0; f < spec.raw_dim; ++f) {
      centers(c, f) = rng.normal();
      norm += centers(c, f) * centers(c, f);
    }
    norm = std::sqrt(norm);
    for (std::size_t f = 0; f < spec.raw_dim; ++f)
      centers(c, f) *= spec.center_spread / norm;
  }

  g.x_raw = Matrix(spec.nodes, spec.raw_dim);
  std::vector<std::size_t> cluster_of(spec.nodes);
  for (std::size_t v = 0; v < spec.nodes; ++v) {
    const std::size_t c = v % spec.clusters;
    cluster_of[v] = c;
    for (std::size_t f = 0; f < spec.raw_dim; ++f)
      g.x_raw(v, f) = (centers(c, f) + rng.normal() * spec.noise) * spec.feature_scale;
  }

  // Near-regular topology: an intra-cluster ring plus a chord give every node
  // a concentrated base degree; edges_per_node random draws add variety
  // (mostly intra-cluster). Cluster c holds node indices c, c+K, c+2K, ...
  std::set<std::pair<std::uint32_t, std::uint32_t>> edge_set;
  auto add = [&](std::size_t a, std::size_t b) {
    if (a != b)
      edge_set.emplace(static_cast<std::uint32_t>(std::min(a, b)),
                       static_cast<std::uint32_t>(std::max(a, b)));
  };
  const std::size_t k_clusters = spec.clusters;
  for (std::size_t v = 0; v < spec.nodes; ++v) {
    const std::size_t c = cluster_of[v];
    const std::size_t size = (spec.nodes - c + k_clusters - 1) / k_clusters;
    const std::size_t pos = v / k_clusters;
    add(v, c + k_clusters * ((pos + 1) % size));
    add(v, c + k_clusters * ((pos + 2) % size));
    for (std::size_t e = 0; e < spec.edges_per_node; ++e) {
      std::size_t target;
      if (rng.uniform01() < spec.intra_cluster_prob)
        target = c + k_clusters * rng.uniform_index(size);
      else
        target = rng.uniform_index(spec.nodes);
      add(v, target);
    }
  }
  g.edges.assign(edge_set.begin(), edge_set.end());
  g.validate();

  Rng inject_rng = base_rng.derive(Rng::kInjection);
  return inject_anomalies(g, spec.n_cliques, spec.clique_size, spec.n_contextual,
                          inject_rng);
}

}  // namespace owleye

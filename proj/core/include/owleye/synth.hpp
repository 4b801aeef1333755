#pragma once

#include <string>

#include "owleye/graph.hpp"
#include "owleye/rng.hpp"

namespace owleye {

/// Desk-scale synthetic attributed graph: Gaussian feature clusters at equal
/// radius from the origin, a near-regular intra-cluster topology (ring +
/// chord + random draws), then injected structural (clique) and contextual
/// (far-feature swap) anomalies. Used by the demo tooling and the experiment
/// smoke tests.
struct SynthSpec {
  std::size_t nodes = 300;
  std::size_t raw_dim = 48;
  std::size_t clusters = 4;
  std::size_t edges_per_node = 1;   // random draws beyond the ring and chord
  double intra_cluster_prob = 1.0;  // random draw stays in the own cluster
  double center_spread = 6.0;       // distance of every cluster center from 0
  double noise = 0.5;               // within-cluster feature noise
  double feature_scale = 1.0;       // per-graph global scaling (domain flavor)
  std::size_t n_cliques = 2;
  std::size_t clique_size = 7;
  std::size_t n_contextual = 1;
};

GraphDataset make_synthetic_graph(const std::string& name, const SynthSpec& spec,
                                  const Rng& base_rng);

}  // namespace owleye

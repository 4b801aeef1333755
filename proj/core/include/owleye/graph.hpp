#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "owleye/matrix.hpp"
#include "owleye/rng.hpp"

namespace owleye {

/// One attributed graph. Edges are undirected, stored canonically as (u, v)
/// with u < v, sorted and deduplicated; self-loops are never stored (the
/// adjacency normalization adds them).
struct GraphDataset {
  std::string name;
  std::string domain_tag;
  std::size_t n = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  Matrix x_raw;                                       // n x d_raw
  std::optional<std::vector<std::uint8_t>> labels;    // 0/1 per node

  /// Throws InvalidArgument if any structural invariant is broken.
  void validate() const;
};

enum class AdjacencyMode {
  kSymNorm,  // D^{-1/2} (A + I) D^{-1/2}
  kRaw,      // binary A, no self-loops (literal-reading escape hatch)
};

struct NormalizedAdjacency {
  std::size_t n = 0;
  Matrix values;  // n x n, symmetric
};

/// Loads a graph directory: edges.csv plus features.fmat or features.csv
/// (binary preferred when both exist), optional labels.csv and meta.json.
/// Duplicate and reversed edge lines collapse to one edge; self-loop and
/// duplicate lines are dropped with a warning on stderr.
GraphDataset load_graph_dir(const std::filesystem::path& dir);

/// Writes the full directory layout for load_graph_dir. Features go to
/// features.fmat when binary_features is set (bit-exact round-trip),
/// otherwise to features.csv with 17 significant digits. All files are
/// written atomically (temp file + rename).
void save_graph_dir(const GraphDataset& g, const std::filesystem::path& dir,
                    bool binary_features = true);

NormalizedAdjacency build_normalized_adjacency(const GraphDataset& g,
                                               AdjacencyMode mode = AdjacencyMode::kSymNorm);

/// Injects labeled anomalies: n_cliques disjoint node groups of clique_size
/// are fully interconnected (structural), and n_contextual further nodes get
/// their feature row replaced by the farthest row among 50 random candidates
/// (contextual). All touched nodes are labeled 1, everything else 0.
GraphDataset inject_anomalies(const GraphDataset& g, std::size_t n_cliques,
                              std::size_t clique_size, std::size_t n_contextual,
                              Rng& rng);

}  // namespace owleye

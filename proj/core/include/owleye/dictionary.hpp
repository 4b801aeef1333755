#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "owleye/encoder.hpp"
#include "owleye/matrix.hpp"
#include "owleye/rng.hpp"

namespace owleye {

enum class EntrySource : std::uint8_t {
  kTrainNormal = 0,  // sampled from a labeled training graph's normal nodes
  kTestPseudo = 1,   // unlabeled pseudo-support sample from a test graph
  kAuxNormal = 2,    // continual-learning addition from an auxiliary graph
};

/// Patterns extracted from one graph: sampled node indices plus the matching
/// attribute- and structure-level embedding rows.
struct DictEntry {
  std::string graph_id;
  EntrySource source = EntrySource::kTrainNormal;
  std::vector<std::size_t> idx;  // unique, in draw order
  Matrix dict_h;                 // |idx| x emb_dim
  Matrix dict_r;                 // |idx| x emb_dim

  std::size_t pattern_count() const { return idx.size(); }
  void validate() const;
};

/// Ordered, appendable collection of per-graph pattern entries. Values are
/// immutable in use; merge returns a new dictionary.
struct PatternDictionary {
  std::uint32_t version = 1;
  std::size_t emb_dim = 0;
  std::vector<DictEntry> entries;

  void validate() const;
};

/// Samples min(n_sup, candidates) node indices uniformly without replacement
/// and gathers their embedding rows. With labels present only label-0 nodes
/// are candidates; without labels every node is (pseudo-support rule). The
/// source tag defaults to kTrainNormal / kTestPseudo accordingly.
DictEntry extract_patterns(const std::string& graph_id, const Embeddings& emb,
                           const std::vector<std::uint8_t>* labels, std::size_t n_sup,
                           Rng& rng,
                           std::optional<EntrySource> source = std::nullopt);

struct SimilarityTrace {
  Matrix b;                        // query * w1
  Matrix softmax;                  // n x patterns
  std::vector<std::size_t> argmax;  // per-row max position (first on ties)
};

/// Per-query-node max over the softmax of query * w1 * patternsᵀ. Core of
/// the graph-to-entry similarity; returns the n-vector of scores.
std::vector<double> similarity_scores(const Matrix& query, const Matrix& patterns,
                                      const Matrix& w1, SimilarityTrace* trace = nullptr);

/// Structure-level similarity of every query node against one entry,
/// broadcast across all embedding columns (n x emb_dim).
Matrix similarity(const Matrix& emb_r_query, const DictEntry& entry, const Matrix& w1);

/// Binary round-trip (magic OWLD). Load validates magic, version and shape
/// consistency; errors name the byte offset.
void save_dictionary(const PatternDictionary& dict, const std::filesystem::path& path);
PatternDictionary load_dictionary(const std::filesystem::path& path);

void write_dictionary(const PatternDictionary& dict, std::ostream& os);
PatternDictionary read_dictionary(std::istream& is, const std::string& source_name);

/// Appends entries in order; existing entries and model parameters untouched.
PatternDictionary merge(PatternDictionary dict, std::vector<DictEntry> new_entries);

}  // namespace owleye

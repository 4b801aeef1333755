#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "owleye/dictionary.hpp"
#include "owleye/reconstruction.hpp"
#include "owleye/training.hpp"

namespace owleye {

/// Per-node anomaly scores with their channel breakdown:
/// score = attr_term + beta * struct_term.
struct ScoreVector {
  std::string graph_id;
  double beta = 0.0;
  std::vector<double> scores;
  std::vector<double> attr_term;    // squared attribute-channel residual
  std::vector<double> struct_term;  // squared structure-channel residual
};

ScoreVector anomaly_scores(const Embeddings& emb, const Reconstruction& rec, double beta);

struct ZeroShotOptions {
  std::size_t n_sup = 2000;
  AttentionConfig attn;
  bool strict_train_aggregate = false;
  bool keep_attention_maps = false;
  /// Sample the support entry from true normal nodes (labels required);
  /// the oracle variant of the pseudo-support protocol.
  bool oracle_normal_support = false;
  /// Extra dictionary entries appended before the test entry (continual
  /// learning without retraining).
  std::vector<DictEntry> extra_entries;

  static ZeroShotOptions from_config(const RunConfig& config) {
    ZeroShotOptions opt;
    opt.n_sup = config.n_sup;
    opt.attn = config.attention();
    opt.strict_train_aggregate = config.strict_train_median;
    return opt;
  }
};

struct ZeroShotResult {
  ScoreVector scores;
  std::size_t pseudo_count = 0;            // sampled support nodes
  std::size_t pseudo_anomaly_count = 0;    // audit: how many were truly anomalous
  GraphAlignStats test_stats;
  Embeddings emb;
  Reconstruction rec;  // attention maps populated only when requested
};

/// Full zero-shot pipeline on an unseen graph: project and normalize with the
/// checkpoint's alignment state (aggregates recomputed over training graphs
/// plus this one), encode, sample an unlabeled pseudo-support entry, append it
/// (after any extra entries) to the trained dictionary for this call only,
/// reconstruct and score. The checkpoint is never mutated.
ZeroShotResult zero_shot_score(const Checkpoint& ckpt, const GraphDataset& test_graph,
                               const ZeroShotOptions& opt, const Rng& rng);

/// Encodes a graph with a trained model (alignment via the checkpoint stats)
/// and extracts one dictionary entry from it; the continual-learning path
/// behind `dict add`. Labeled graphs contribute normal-node patterns.
DictEntry extract_entry_for_graph(const Checkpoint& ckpt, const GraphDataset& g,
                                  std::size_t n_sup, const Rng& rng,
                                  std::optional<EntrySource> source = std::nullopt);

}  // namespace owleye

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "owleye/dictionary.hpp"
#include "owleye/encoder.hpp"
#include "owleye/matrix.hpp"

namespace owleye {

/// Truncated-attention settings. `truncation` below 1 is a fraction of each
/// entry's pattern count (rounded up, capped at patterns - 1); 1 or more is
/// an absolute per-row count and must stay below every entry's pattern count.
struct AttentionConfig {
  double truncation = 0.5;
  double tau_a = 0.001;
  bool drop_outer_sqrt = true;  // false applies sign(x)*sqrt(|x|) to the logits
  bool keep_attention_maps = true;

  std::size_t truncation_for(std::size_t pattern_count) const;
};

/// Intermediate state of one truncated-attention evaluation, kept for the
/// backward pass.
struct AttentionTrace {
  Matrix q;                                      // query * wq
  Matrix k;                                      // patterns * wk
  Matrix raw;                                    // q kᵀ / sqrt(emb_dim), pre-sqrt
  Matrix alpha;                                  // final attention weights
  std::vector<std::vector<std::size_t>> masked;  // per-row truncated pattern ids
};

/// Scaled dot-product attention of query rows over pattern rows where the k
/// lowest-scoring patterns per row are masked before the softmax (ties at the
/// boundary mask the lower pattern index). Row sums of the result are 1 with
/// exactly k zeros.
Matrix truncated_attention(const Matrix& query, const Matrix& patterns,
                           const Matrix& wq, const Matrix& wk,
                           const AttentionConfig& cfg,
                           AttentionTrace* trace = nullptr);

struct Reconstruction {
  Matrix h_hat;  // n x emb_dim
  Matrix r_hat;
  std::vector<Matrix> attn_h;  // per entry, n x patterns (empty when not kept)
  std::vector<Matrix> attn_r;
  std::vector<std::vector<double>> sim;  // per entry, similarity score per node
};

/// Per-entry state captured during reconstruct for the training backward.
struct ReconEntryTrace {
  SimilarityTrace sim_r;   // structure-channel similarity
  SimilarityTrace sim_h;   // only used in per-channel similarity mode
  AttentionTrace attn_h;
  AttentionTrace attn_r;
  Matrix context_h;        // attn_h.alpha * dict_h
  Matrix context_r;
  std::vector<double> sim_scores_h;  // weights applied to context_h
  std::vector<double> sim_scores_r;
};

struct ReconTrace {
  std::vector<ReconEntryTrace> entries;
};

/// Reconstructs both channels of a graph from every dictionary entry:
/// similarity-weighted, truncated-attention contexts averaged over the
/// current entry count. The per-element mean is exactly rounded, so a
/// duplicated dictionary reproduces the reconstruction bit for bit.
Reconstruction reconstruct(const Embeddings& emb, const PatternDictionary& dict,
                           const EncoderParams& params, const AttentionConfig& cfg,
                           ReconTrace* trace = nullptr);

/// One CSV per requested node and channel: row j holds the node's attention
/// weights over entry j's patterns. Requires attention maps to have been kept.
void export_attention_maps(const Reconstruction& rec,
                           const std::vector<std::size_t>& node_ids,
                           const std::filesystem::path& dir);

}  // namespace owleye

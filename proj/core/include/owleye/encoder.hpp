#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "owleye/graph.hpp"
#include "owleye/matrix.hpp"
#include "owleye/rng.hpp"

namespace owleye {

enum class Channel { kAttribute, kStructure };

/// Every learnable matrix of the model. Layer weights are square (d x d);
/// the similarity and attention weights act on the concatenated embedding
/// space of dimension (layers - 1) * width.
struct EncoderParams {
  std::size_t layers = 0;  // L >= 2
  std::size_t width = 0;   // d

  std::vector<Matrix> w_attr;   // one per layer, t = 1..L
  std::vector<Matrix> w_struc;  // one per layer
  Matrix w1;                    // similarity weight (structure channel)
  std::optional<Matrix> w1_attr;  // only in per-channel similarity mode
  Matrix wq_attr, wk_attr;        // attention weights, attribute channel
  std::optional<Matrix> wq_struc, wk_struc;  // absent when tied to attribute

  std::size_t emb_dim() const { return (layers - 1) * width; }
  bool shared_qk() const { return !wq_struc.has_value(); }

  const Matrix& wq(Channel c) const {
    return (c == Channel::kAttribute || shared_qk()) ? wq_attr : *wq_struc;
  }
  const Matrix& wk(Channel c) const {
    return (c == Channel::kAttribute || shared_qk()) ? wk_attr : *wk_struc;
  }
  /// Similarity weight used for the given reconstruction channel; in
  /// structure-only mode both channels share w1.
  const Matrix& similarity_weight(Channel c) const {
    return (c == Channel::kAttribute && w1_attr) ? *w1_attr : w1;
  }

  /// Stable (name, matrix) view over every allocated matrix; the order
  /// defines optimizer and serialization layout.
  std::vector<std::pair<std::string, Matrix*>> named_matrices();
  std::vector<std::pair<std::string, const Matrix*>> named_matrices() const;

  void validate() const;
};

/// Glorot-uniform initialization of all weights, deterministic under seed.
/// per_channel_similarity allocates a second similarity weight for the
/// attribute channel; share_qk ties the attention weights across channels.
EncoderParams init_params(std::size_t layers, std::size_t width, Rng& rng,
                          bool per_channel_similarity = false, bool share_qk = false);

/// Layer states kept for the backward pass: pre[t] and post[t] hold the
/// pre-activation and activation of layer t+1 (t = 0..L-1).
struct EncoderTrace {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
};

/// Attribute channel: H0 = x, Ht = relu(A H(t-1) Wt), output is the
/// concatenation of (Ht - H1) for t = 2..L, shape n x (L-1)d.
Matrix encode_attribute(const Matrix& x, const NormalizedAdjacency& adj,
                        const EncoderParams& params, EncoderTrace* trace = nullptr);

/// Structure channel: identical recursion starting from an all-ones n x d
/// input, so the result depends on the adjacency only.
Matrix encode_structure(std::size_t n, const NormalizedAdjacency& adj,
                        const EncoderParams& params, EncoderTrace* trace = nullptr);

struct Embeddings {
  Matrix h;  // attribute channel, n x emb_dim
  Matrix r;  // structure channel, n x emb_dim
};

Embeddings encode_graph(const Matrix& x, const NormalizedAdjacency& adj,
                        const EncoderParams& params,
                        EncoderTrace* attr_trace = nullptr,
                        EncoderTrace* struc_trace = nullptr);

}  // namespace owleye

#include "owleye/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "io_util.hpp"
#include "owleye/error.hpp"
#include "owleye/numerics.hpp"

namespace owleye {

std::size_t AttentionConfig::truncation_for(std::size_t pattern_count) const {
  if (pattern_count == 0)
    throw InvalidArgument("AttentionConfig: entry with zero patterns");
  if (truncation < 0.0 || !std::isfinite(truncation))
    throw InvalidArgument("AttentionConfig: truncation must be non-negative");
  if (truncation < 1.0) {
    const auto k = static_cast<std::size_t>(
        std::ceil(truncation * static_cast<double>(pattern_count)));
    return std::min(k, pattern_count - 1);
  }
  const auto k = static_cast<std::size_t>(truncation);
  if (k >= pattern_count)
    throw InvalidArgument("truncated_attention: k = " + std::to_string(k) +
                          " must be below the pattern count " +
                          std::to_string(pattern_count));
  return k;
}

Matrix truncated_attention(const Matrix& query, const Matrix& patterns,
                           const Matrix& wq, const Matrix& wk,
                           const AttentionConfig& cfg, AttentionTrace* trace) {
  if (query.cols() != patterns.cols())
    throw InvalidArgument("truncated_attention: query/pattern dimension mismatch");
  if (wq.rows() != query.cols() || wq.rows() != wq.cols() || !wq.same_shape(wk))
    throw InvalidArgument("truncated_attention: bad attention weight shapes");
  if (!(cfg.tau_a > 0.0))
    throw InvalidArgument("truncated_attention: tau_a must be positive");

  const std::size_t k = cfg.truncation_for(patterns.rows());
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(query.cols()));

  Matrix q = matmul(query, wq);
  Matrix km = matmul(patterns, wk);
  Matrix raw = matmul_nt(q, km);
  raw *= inv_sqrt_dim;

  Matrix logits = raw;
  if (!cfg.drop_outer_sqrt) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double v = logits.data()[i];
      logits.data()[i] = v < 0.0 ? -std::sqrt(-v) : std::sqrt(v);
    }
  }

  // Per row, mask the k smallest logits; boundary ties mask the lower index.
  std::vector<std::vector<std::size_t>> masked(logits.rows());
  if (k > 0) {
    std::vector<std::size_t> order(logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double la = logits(r, a), lb = logits(r, b);
        return la < lb || (la == lb && a < b);
      });
      masked[r].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    }
  }

  Matrix alpha = masked_softmax(logits, masked, cfg.tau_a);
  if (trace) {
    trace->q = std::move(q);
    trace->k = std::move(km);
    trace->raw = std::move(raw);
    trace->alpha = alpha;
    trace->masked = std::move(masked);
  }
  return alpha;
}

Reconstruction reconstruct(const Embeddings& emb, const PatternDictionary& dict,
                           const EncoderParams& params, const AttentionConfig& cfg,
                           ReconTrace* trace) {
  if (dict.entries.empty()) throw InvalidArgument("reconstruct: empty dictionary");
  dict.validate();
  if (emb.h.cols() != dict.emb_dim || emb.r.cols() != dict.emb_dim)
    throw InvalidArgument("reconstruct: embedding dimension " +
                          std::to_string(emb.h.cols()) + " != dictionary dimension " +
                          std::to_string(dict.emb_dim));

  const std::size_t n = emb.h.rows();
  const bool per_channel = params.w1_attr.has_value();

  Reconstruction rec;
  if (trace) trace->entries.resize(dict.entries.size());

  std::vector<Matrix> terms_h, terms_r;
  terms_h.reserve(dict.entries.size());
  terms_r.reserve(dict.entries.size());
  for (std::size_t j = 0; j < dict.entries.size(); ++j) {
    const DictEntry& entry = dict.entries[j];
    ReconEntryTrace* et = trace ? &trace->entries[j] : nullptr;

    std::vector<double> sim_r = similarity_scores(emb.r, entry.dict_r, params.w1,
                                                  et ? &et->sim_r : nullptr);
    std::vector<double> sim_h =
        per_channel ? similarity_scores(emb.h, entry.dict_h, *params.w1_attr,
                                        et ? &et->sim_h : nullptr)
                    : sim_r;

    Matrix alpha_h =
        truncated_attention(emb.h, entry.dict_h, params.wq(Channel::kAttribute),
                            params.wk(Channel::kAttribute), cfg,
                            et ? &et->attn_h : nullptr);
    Matrix alpha_r =
        truncated_attention(emb.r, entry.dict_r, params.wq(Channel::kStructure),
                            params.wk(Channel::kStructure), cfg,
                            et ? &et->attn_r : nullptr);

    Matrix context_h = matmul(alpha_h, entry.dict_h);
    Matrix context_r = matmul(alpha_r, entry.dict_r);

    Matrix term_h = context_h;
    Matrix term_r = context_r;
    for (std::size_t r = 0; r < n; ++r) {
      for (double& v : term_h.row(r)) v *= sim_h[r];
      for (double& v : term_r.row(r)) v *= sim_r[r];
    }

    if (et) {
      et->context_h = std::move(context_h);
      et->context_r = std::move(context_r);
      et->sim_scores_h = sim_h;
      et->sim_scores_r = sim_r;
    }
    if (cfg.keep_attention_maps) {
      rec.attn_h.push_back(std::move(alpha_h));
      rec.attn_r.push_back(std::move(alpha_r));
    }
    rec.sim.push_back(std::move(sim_r));
    terms_h.push_back(std::move(term_h));
    terms_r.push_back(std::move(term_r));
  }

  rec.h_hat = exact_mean(terms_h);
  rec.r_hat = exact_mean(terms_r);
  return rec;
}

void export_attention_maps(const Reconstruction& rec,
                           const std::vector<std::size_t>& node_ids,
                           const std::filesystem::path& dir) {
  if (rec.attn_h.empty())
    throw InvalidArgument("export_attention_maps: attention maps were not kept");
  const std::size_t n = rec.h_hat.rows();
  for (std::size_t node : node_ids)
    if (node >= n)
      throw InvalidArgument("export_attention_maps: node " + std::to_string(node) +
                            " out of range");

  auto write_channel = [&](const std::vector<Matrix>& maps, const char* tag) {
    for (std::size_t node : node_ids) {
      const auto path = dir / ("attn_" + std::string(tag) + "_node" +
                               std::to_string(node) + ".csv");
      io::atomic_write(path, [&](std::ostream& os) {
        for (const Matrix& m : maps) {
          for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) os << ',';
            os << io::format_double(m(node, c));
          }
          os << '\n';
        }
      });
    }
  };
  write_channel(rec.attn_h, "attr");
  write_channel(rec.attn_r, "struc");
}

}  // namespace owleye

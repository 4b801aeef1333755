#include "owleye/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "owleye/error.hpp"
#include "owleye/numerics.hpp"

namespace owleye {

void TrainConfig::validate() const {
  // lr = 0 is allowed as a no-op diagnostic mode (parameters must stay fixed).
  if (lr < 0.0 || !std::isfinite(lr)) throw InvalidArgument("TrainConfig: bad learning rate");
  if (lambda < 0.0) throw InvalidArgument("TrainConfig: lambda must be non-negative");
  if (beta < 0.0) throw InvalidArgument("TrainConfig: beta must be non-negative");
  if (epochs < 1) throw InvalidArgument("TrainConfig: epochs must be at least 1");
}

namespace {

double row_dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double row_norm(std::span<const double> a) { return std::sqrt(row_dot(a, a)); }

}  // namespace

double recon_loss(const Matrix& h, const Matrix& h_hat,
                  const std::vector<std::size_t>& normals,
                  const std::vector<std::size_t>& anomalies) {
  if (!h.same_shape(h_hat)) throw InvalidArgument("recon_loss: shape mismatch");
  if (normals.empty() && anomalies.empty())
    throw InvalidArgument("recon_loss: both index sets are empty");

  std::size_t skipped = 0;
  auto accumulate = [&](const std::vector<std::size_t>& set, double sign, double& total) {
    for (std::size_t v : set) {
      if (v >= h.rows()) throw InvalidArgument("recon_loss: node index out of range");
      const double na = row_norm(h.row(v));
      const double nb = row_norm(h_hat.row(v));
      if (na == 0.0 || nb == 0.0) {
        ++skipped;
        continue;
      }
      total += sign * row_dot(h.row(v), h_hat.row(v)) / (na * nb);
    }
  };
  double total = 0.0;
  accumulate(anomalies, 1.0, total);
  accumulate(normals, -1.0, total);
  if (skipped > 0)
    std::cerr << "owleye: warning: recon_loss skipped " << skipped
              << " zero-norm row(s) (cosine undefined)\n";
  return total;
}

double triplet_loss(const Matrix& h, const Matrix& h_hat, const Matrix& r,
                    const Matrix& r_hat, const std::vector<TripletPair>& pairs,
                    double lambda, double beta) {
  if (!h.same_shape(h_hat) || !r.same_shape(r_hat) || h.rows() != r.rows())
    throw InvalidArgument("triplet_loss: shape mismatch");
  if (pairs.empty()) {
    std::cerr << "owleye: warning: triplet_loss called with no pairs\n";
    return 0.0;
  }

  auto sq_dist = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = a[i] - b[i];
      s += diff * diff;
    }
    return s;
  };

  double total = 0.0;
  for (const auto& [vj, vk] : pairs) {
    if (vj >= h.rows() || vk >= h.rows())
      throw InvalidArgument("triplet_loss: pair index out of range");
    const double arg_h = sq_dist(h_hat.row(vj), h.row(vj)) -
                         sq_dist(h_hat.row(vj), h_hat.row(vk)) + lambda;
    if (arg_h > 0.0) total += arg_h;
    const double arg_r = sq_dist(r_hat.row(vj), r.row(vj)) -
                         sq_dist(r_hat.row(vj), r_hat.row(vk)) + lambda;
    if (arg_r > 0.0) total += beta * arg_r;
  }
  return total;
}

namespace detail {

ParamGrads zero_grads(const EncoderParams& params) {
  ParamGrads g = params;
  for (auto& [name, m] : g.named_matrices())
    std::fill(m->data(), m->data() + m->size(), 0.0);
  return g;
}

namespace {

// Gradient targets routed the same way the forward pass reads its weights.
Matrix& grad_wq(ParamGrads& g, const EncoderParams& p, Channel c) {
  return (c == Channel::kAttribute || p.shared_qk()) ? g.wq_attr : *g.wq_struc;
}
Matrix& grad_wk(ParamGrads& g, const EncoderParams& p, Channel c) {
  return (c == Channel::kAttribute || p.shared_qk()) ? g.wk_attr : *g.wk_struc;
}
Matrix& grad_sim_weight(ParamGrads& g, const EncoderParams& p, Channel c) {
  return (c == Channel::kAttribute && p.w1_attr) ? *g.w1_attr : g.w1;
}

// dL/dz for alpha = softmax(z / tau) rows (masked positions carry alpha = 0
// and come out zero automatically).
Matrix softmax_temperature_backward(const Matrix& alpha, const Matrix& d_alpha,
                                    double tau) {
  Matrix dz(alpha.rows(), alpha.cols());
  for (std::size_t r = 0; r < alpha.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < alpha.cols(); ++c) s += d_alpha(r, c) * alpha(r, c);
    for (std::size_t c = 0; c < alpha.cols(); ++c)
      dz(r, c) = alpha(r, c) * (d_alpha(r, c) - s) / tau;
  }
  return dz;
}

struct GraphState {
  EncoderTrace attr_trace;
  EncoderTrace struc_trace;
  Embeddings emb;
  Reconstruction rec;
  ReconTrace recon;
  Matrix d_h, d_r;          // dL/dH, dL/dR (accumulated)
  Matrix d_h_hat, d_r_hat;  // dL/dHhat, dL/dRhat
};

void loss_backward(const ActiveGraph& ag, GraphState& st, double lambda, double beta) {
  const Matrix& h = st.emb.h;
  const Matrix& h_hat = st.rec.h_hat;
  const Matrix& r = st.emb.r;
  const Matrix& r_hat = st.rec.r_hat;
  const std::size_t dim = h.cols();

  auto cosine_backward = [&](const std::vector<std::size_t>& set, double sign) {
    for (std::size_t v : set) {
      const auto a = h.row(v);
      const auto b = h_hat.row(v);
      const double na = row_norm(a), nb = row_norm(b);
      if (na == 0.0 || nb == 0.0) continue;
      const double cosv = row_dot(a, b) / (na * nb);
      for (std::size_t c = 0; c < dim; ++c) {
        st.d_h(v, c) += sign * (b[c] / (na * nb) - cosv * a[c] / (na * na));
        st.d_h_hat(v, c) += sign * (a[c] / (na * nb) - cosv * b[c] / (nb * nb));
      }
    }
  };
  cosine_backward(ag.anomalies, 1.0);
  cosine_backward(ag.normals, -1.0);

  for (const auto& [vj, vk] : ag.pairs) {
    {
      double arg = lambda;
      for (std::size_t c = 0; c < dim; ++c) {
        const double d1 = h_hat(vj, c) - h(vj, c);
        const double d2 = h_hat(vj, c) - h_hat(vk, c);
        arg += d1 * d1 - d2 * d2;
      }
      if (arg > 0.0) {
        for (std::size_t c = 0; c < dim; ++c) {
          const double d1 = h_hat(vj, c) - h(vj, c);
          const double d2 = h_hat(vj, c) - h_hat(vk, c);
          st.d_h_hat(vj, c) += 2.0 * (d1 - d2);
          st.d_h(vj, c) += -2.0 * d1;
          st.d_h_hat(vk, c) += 2.0 * d2;
        }
      }
    }
    {
      double arg = lambda;
      for (std::size_t c = 0; c < dim; ++c) {
        const double d1 = r_hat(vj, c) - r(vj, c);
        const double d2 = r_hat(vj, c) - r_hat(vk, c);
        arg += d1 * d1 - d2 * d2;
      }
      if (arg > 0.0) {
        for (std::size_t c = 0; c < dim; ++c) {
          const double d1 = r_hat(vj, c) - r(vj, c);
          const double d2 = r_hat(vj, c) - r_hat(vk, c);
          st.d_r_hat(vj, c) += beta * 2.0 * (d1 - d2);
          st.d_r(vj, c) += -beta * 2.0 * d1;
          st.d_r_hat(vk, c) += beta * 2.0 * d2;
        }
      }
    }
  }
}

// Backward through one (graph, entry) attention branch. Returns gradients
// into the query embedding and, when wanted, the entry's pattern matrix.
void attention_backward(const Matrix& query_emb, const Matrix& patterns,
                        const EncoderParams& params, Channel channel,
                        const AttentionTrace& tr, const Matrix& d_alpha,
                        double tau_a, bool drop_outer_sqrt, ParamGrads& grads,
                        Matrix& d_query_emb, Matrix* d_patterns) {
  Matrix dz = softmax_temperature_backward(tr.alpha, d_alpha, tau_a);
  if (!drop_outer_sqrt) {
    // logits were sign(x) * sqrt(|x|); d/dx = 1 / (2 sqrt(|x|)), 0 at x = 0.
    for (std::size_t i = 0; i < dz.size(); ++i) {
      const double raw = tr.raw.data()[i];
      dz.data()[i] = raw == 0.0 ? 0.0 : dz.data()[i] * 0.5 / std::sqrt(std::fabs(raw));
    }
  }
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(query_emb.cols()));
  dz *= inv_sqrt_dim;

  Matrix d_q = matmul(dz, tr.k);      // n x D
  Matrix d_k = matmul_tn(dz, tr.q);   // patterns x D

  grad_wq(grads, params, channel) += matmul_tn(query_emb, d_q);
  d_query_emb += matmul_nt(d_q, params.wq(channel));
  grad_wk(grads, params, channel) += matmul_tn(patterns, d_k);
  if (d_patterns) *d_patterns += matmul_nt(d_k, params.wk(channel));
}

// Backward through one similarity branch (row-max of a plain softmax).
void similarity_backward(const Matrix& query_emb, const Matrix& patterns,
                         const EncoderParams& params, Channel channel,
                         const SimilarityTrace& tr, const std::vector<double>& d_sim,
                         ParamGrads& grads, Matrix& d_query_emb, Matrix* d_patterns) {
  const std::size_t n = tr.softmax.rows(), s = tr.softmax.cols();
  Matrix d_probs(n, s, 0.0);
  for (std::size_t r = 0; r < n; ++r) d_probs(r, tr.argmax[r]) = d_sim[r];
  Matrix d_logits = softmax_temperature_backward(tr.softmax, d_probs, 1.0);

  Matrix d_b = matmul(d_logits, patterns);  // n x D
  const Matrix& w1 = params.similarity_weight(channel);
  grad_sim_weight(grads, params, channel) += matmul_tn(query_emb, d_b);
  d_query_emb += matmul_nt(d_b, w1);
  if (d_patterns) *d_patterns += matmul_tn(d_logits, tr.b);
}

}  // namespace

void encoder_backward(const Matrix& input, const NormalizedAdjacency& adj,
                      const std::vector<Matrix>& weights, const EncoderTrace& trace,
                      const Matrix& d_out, std::vector<Matrix>& d_weights) {
  const std::size_t layers = weights.size();
  const std::size_t n = input.rows();
  const std::size_t d = weights.front().cols();

  // Split the concatenated output gradient into per-layer activation grads.
  std::vector<Matrix> d_acts(layers, Matrix(n, d, 0.0));
  for (std::size_t t = 1; t < layers; ++t) {
    const std::size_t block = (t - 1) * d;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        const double g = d_out(r, block + c);
        d_acts[t](r, c) += g;
        d_acts[0](r, c) -= g;
      }
  }

  Matrix d_current = std::move(d_acts[layers - 1]);
  for (std::size_t idx = layers; idx-- > 0;) {
    Matrix d_pre = std::move(d_current);
    const Matrix& pre = trace.pre[idx];
    for (std::size_t i = 0; i < d_pre.size(); ++i)
      if (pre.data()[i] <= 0.0) d_pre.data()[i] = 0.0;

    const Matrix& prev_act = idx == 0 ? input : trace.post[idx - 1];
    d_weights[idx] += matmul_tn(matmul(adj.values, prev_act), d_pre);
    if (idx > 0) {
      d_current = matmul(adj.values, matmul_nt(d_pre, weights[idx]));
      d_current += d_acts[idx - 1];
    }
  }
}

double loss_and_gradients(const EncoderParams& params,
                          const std::vector<ActiveGraph>& active,
                          const std::vector<DictEntry>& constant_entries,
                          const AttentionConfig& attn, double lambda, double beta,
                          ParamGrads* grads) {
  params.validate();
  if (active.empty()) throw InvalidArgument("loss_and_gradients: no active graphs");
  const bool want_grads = grads != nullptr;
  const std::size_t dim = params.emb_dim();

  std::vector<GraphState> st(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) {
    const TrainGraph& g = *active[i].graph;
    st[i].emb = encode_graph(g.x, g.adj, params,
                             want_grads ? &st[i].attr_trace : nullptr,
                             want_grads ? &st[i].struc_trace : nullptr);
  }

  // Constant entries first, then one live entry per active graph: the same
  // order inference uses when a test entry joins a trained dictionary.
  PatternDictionary dict;
  dict.emb_dim = dim;
  dict.entries = constant_entries;
  const std::size_t live_base = dict.entries.size();
  for (std::size_t i = 0; i < active.size(); ++i) {
    DictEntry entry;
    entry.graph_id = active[i].graph->id;
    entry.source = EntrySource::kTrainNormal;
    entry.idx = active[i].dict_idx;
    entry.dict_h = gather_rows(st[i].emb.h, entry.idx);
    entry.dict_r = gather_rows(st[i].emb.r, entry.idx);
    dict.entries.push_back(std::move(entry));
  }

  AttentionConfig cfg = attn;
  cfg.keep_attention_maps = false;

  double total = 0.0;
  for (std::size_t i = 0; i < active.size(); ++i) {
    st[i].rec = reconstruct(st[i].emb, dict, params, cfg,
                            want_grads ? &st[i].recon : nullptr);
    const double graph_loss =
        recon_loss(st[i].emb.h, st[i].rec.h_hat, active[i].normals, active[i].anomalies) +
        triplet_loss(st[i].emb.h, st[i].rec.h_hat, st[i].emb.r, st[i].rec.r_hat,
                     active[i].pairs, lambda, beta);
    if (!std::isfinite(graph_loss))
      throw NumericalError("graph \"" + active[i].graph->id + "\": non-finite loss");
    total += graph_loss;
  }
  if (!want_grads) return total;

  const bool per_channel = params.w1_attr.has_value();
  const std::size_t entry_count = dict.entries.size();
  const double inv_m = 1.0 / static_cast<double>(entry_count);

  // Pattern-side gradients per live entry, scattered into the owning graph's
  // embedding gradients at the end.
  std::vector<Matrix> d_dict_h(active.size()), d_dict_r(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) {
    const std::size_t s = active[i].dict_idx.size();
    d_dict_h[i] = Matrix(s, dim, 0.0);
    d_dict_r[i] = Matrix(s, dim, 0.0);
  }

  for (std::size_t i = 0; i < active.size(); ++i) {
    GraphState& gs = st[i];
    const std::size_t n = gs.emb.h.rows();
    gs.d_h = Matrix(n, dim, 0.0);
    gs.d_r = Matrix(n, dim, 0.0);
    gs.d_h_hat = Matrix(n, dim, 0.0);
    gs.d_r_hat = Matrix(n, dim, 0.0);
    loss_backward(active[i], gs, lambda, beta);

    for (std::size_t j = 0; j < entry_count; ++j) {
      const DictEntry& entry = dict.entries[j];
      const ReconEntryTrace& et = gs.recon.entries[j];
      const bool live = j >= live_base;
      Matrix* dh_patterns = live ? &d_dict_h[j - live_base] : nullptr;
      Matrix* dr_patterns = live ? &d_dict_r[j - live_base] : nullptr;

      // Mean of sim-weighted contexts: peel off the entry's contribution.
      Matrix d_context_h(n, dim), d_context_r(n, dim);
      std::vector<double> d_sim_h(n, 0.0), d_sim_r(n, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        double acc_h = 0.0, acc_r = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
          d_context_h(r, c) = gs.d_h_hat(r, c) * et.sim_scores_h[r] * inv_m;
          d_context_r(r, c) = gs.d_r_hat(r, c) * et.sim_scores_r[r] * inv_m;
          acc_h += gs.d_h_hat(r, c) * et.context_h(r, c);
          acc_r += gs.d_r_hat(r, c) * et.context_r(r, c);
        }
        d_sim_h[r] = acc_h * inv_m;
        d_sim_r[r] = acc_r * inv_m;
      }

      // context = alpha * patterns
      Matrix d_alpha_h = matmul_nt(d_context_h, entry.dict_h);
      Matrix d_alpha_r = matmul_nt(d_context_r, entry.dict_r);
      if (dh_patterns) *dh_patterns += matmul_tn(et.attn_h.alpha, d_context_h);
      if (dr_patterns) *dr_patterns += matmul_tn(et.attn_r.alpha, d_context_r);

      attention_backward(gs.emb.h, entry.dict_h, params, Channel::kAttribute,
                         et.attn_h, d_alpha_h, cfg.tau_a, cfg.drop_outer_sqrt,
                         *grads, gs.d_h, dh_patterns);
      attention_backward(gs.emb.r, entry.dict_r, params, Channel::kStructure,
                         et.attn_r, d_alpha_r, cfg.tau_a, cfg.drop_outer_sqrt,
                         *grads, gs.d_r, dr_patterns);

      if (per_channel) {
        similarity_backward(gs.emb.h, entry.dict_h, params, Channel::kAttribute,
                            et.sim_h, d_sim_h, *grads, gs.d_h, dh_patterns);
        similarity_backward(gs.emb.r, entry.dict_r, params, Channel::kStructure,
                            et.sim_r, d_sim_r, *grads, gs.d_r, dr_patterns);
      } else {
        // One structure-channel similarity weights both reconstructions.
        std::vector<double> d_sim(n);
        for (std::size_t r = 0; r < n; ++r) d_sim[r] = d_sim_h[r] + d_sim_r[r];
        similarity_backward(gs.emb.r, entry.dict_r, params, Channel::kStructure,
                            et.sim_r, d_sim, *grads, gs.d_r, dr_patterns);
      }
    }
  }

  // Live pattern rows are embedding rows: scatter and run the encoders back.
  for (std::size_t i = 0; i < active.size(); ++i) {
    GraphState& gs = st[i];
    const auto& idx = active[i].dict_idx;
    for (std::size_t p = 0; p < idx.size(); ++p) {
      for (std::size_t c = 0; c < dim; ++c) {
        gs.d_h(idx[p], c) += d_dict_h[i](p, c);
        gs.d_r(idx[p], c) += d_dict_r[i](p, c);
      }
    }
    const TrainGraph& g = *active[i].graph;
    encoder_backward(g.x, g.adj, params.w_attr, gs.attr_trace, gs.d_h, grads->w_attr);
    encoder_backward(Matrix::ones(g.x.rows(), params.width), g.adj, params.w_struc,
                     gs.struc_trace, gs.d_r, grads->w_struc);
  }
  return total;
}

}  // namespace detail

namespace {

struct AdamState {
  std::vector<Matrix> m, v;
  std::size_t t = 0;
};

AdamState make_adam_state(EncoderParams& params) {
  AdamState s;
  for (auto& [name, mat] : params.named_matrices()) {
    s.m.emplace_back(mat->rows(), mat->cols(), 0.0);
    s.v.emplace_back(mat->rows(), mat->cols(), 0.0);
  }
  return s;
}

void adam_step(EncoderParams& params, detail::ParamGrads& grads, AdamState& state,
               const TrainConfig& cfg) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
  auto named_p = params.named_matrices();
  auto named_g = grads.named_matrices();
  for (std::size_t i = 0; i < named_p.size(); ++i) {
    Matrix& p = *named_p[i].second;
    const Matrix& g = *named_g[i].second;
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    for (std::size_t e = 0; e < p.size(); ++e) {
      const double grad = g.data()[e];
      m.data()[e] = cfg.adam_beta1 * m.data()[e] + (1.0 - cfg.adam_beta1) * grad;
      v.data()[e] = cfg.adam_beta2 * v.data()[e] + (1.0 - cfg.adam_beta2) * grad * grad;
      const double m_hat = m.data()[e] / bc1;
      const double v_hat = v.data()[e] / bc2;
      p.data()[e] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

std::vector<std::size_t> label_indices(const std::vector<std::uint8_t>& labels,
                                       std::uint8_t value) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == value) out.push_back(i);
  return out;
}

std::vector<TripletPair> sample_pairs(const std::vector<std::size_t>& anomalies,
                                      const std::vector<std::size_t>& normals,
                                      std::size_t pairs_per_graph, Rng& rng) {
  std::vector<TripletPair> pairs;
  if (pairs_per_graph == 0) {  // exact full-pair mode
    pairs.reserve(anomalies.size() * normals.size());
    for (std::size_t a : anomalies)
      for (std::size_t n : normals) pairs.emplace_back(a, n);
    return pairs;
  }
  pairs.reserve(pairs_per_graph);
  for (std::size_t p = 0; p < pairs_per_graph; ++p) {
    const std::size_t a = anomalies[rng.uniform_index(anomalies.size())];
    const std::size_t n = normals[rng.uniform_index(normals.size())];
    pairs.emplace_back(a, n);
  }
  return pairs;
}

TrainConfig train_config_of(const RunConfig& config) {
  TrainConfig tc;
  tc.lr = config.lr;
  tc.epochs = config.epochs;
  tc.lambda = config.lambda;
  tc.beta = config.beta;
  tc.pairs_per_graph = config.pairs_per_graph;
  tc.seed = config.seed;
  tc.patience = config.patience;
  return tc;
}

}  // namespace

namespace {

// Label split plus one frozen pattern-index sample per graph.
std::vector<detail::ActiveGraph> prepare_active(const std::vector<TrainGraph>& graphs,
                                                std::size_t n_sup, const Rng& base_rng) {
  if (graphs.empty()) throw InvalidArgument("fit: no training graphs");
  std::vector<detail::ActiveGraph> active(graphs.size());
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const TrainGraph& tg = graphs[g];
    if (tg.x.rows() != tg.adj.n || tg.labels.size() != tg.x.rows())
      throw InvalidArgument("fit: graph \"" + tg.id + "\": inconsistent sizes");
    active[g].graph = &tg;
    active[g].normals = label_indices(tg.labels, 0);
    active[g].anomalies = label_indices(tg.labels, 1);
    if (active[g].normals.empty() || active[g].anomalies.empty())
      throw InvalidArgument("fit: graph \"" + tg.id +
                            "\" needs at least one normal and one anomalous node");
    Rng dict_rng = base_rng.derive(Rng::kDictSample, g);
    const std::size_t take = std::min(n_sup, active[g].normals.size());
    for (std::size_t p : dict_rng.sample_without_replacement(active[g].normals.size(), take))
      active[g].dict_idx.push_back(active[g].normals[p]);
  }
  return active;
}

// Full-batch Adam loop over the active graphs; returns the epochs actually run.
std::size_t training_loop(EncoderParams& params, std::vector<detail::ActiveGraph>& active,
                          const AttentionConfig& attn, const TrainConfig& tc,
                          std::size_t epochs, const Rng& base_rng,
                          std::vector<double>& loss_history) {
  AdamState adam = make_adam_state(params);
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t epoch = 0;
  for (; epoch < epochs; ++epoch) {
    for (std::size_t g = 0; g < active.size(); ++g) {
      Rng pair_rng = base_rng.derive(Rng::kTripletPairs, epoch * active.size() + g);
      active[g].pairs = sample_pairs(active[g].anomalies, active[g].normals,
                                     tc.pairs_per_graph, pair_rng);
    }
    detail::ParamGrads grads = detail::zero_grads(params);
    double loss = 0.0;
    try {
      loss = detail::loss_and_gradients(params, active, {}, attn, tc.lambda, tc.beta,
                                        &grads);
    } catch (const NumericalError& e) {
      throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    adam_step(params, grads, adam, tc);
    loss_history.push_back(loss);

    if (loss < best_loss) {
      best_loss = loss;
      since_best = 0;
    } else if (++since_best >= tc.patience && tc.patience > 0) {
      ++epoch;
      break;
    }
  }
  return epoch;
}

PatternDictionary extract_training_dict(const std::vector<TrainGraph>& graphs,
                                        const std::vector<detail::ActiveGraph>& active,
                                        const EncoderParams& params) {
  PatternDictionary dict;
  dict.emb_dim = params.emb_dim();
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    Embeddings emb = encode_graph(graphs[g].x, graphs[g].adj, params);
    DictEntry entry;
    entry.graph_id = graphs[g].id;
    entry.source = EntrySource::kTrainNormal;
    entry.idx = active[g].dict_idx;
    entry.dict_h = gather_rows(emb.h, entry.idx);
    entry.dict_r = gather_rows(emb.r, entry.idx);
    dict.entries.push_back(std::move(entry));
  }
  return dict;
}

}  // namespace

Checkpoint fit(const std::vector<TrainGraph>& graphs, const RunConfig& config,
               const AlignmentStats& align_stats, const Rng& base_rng) {
  const TrainConfig tc = train_config_of(config);
  tc.validate();
  auto active = prepare_active(graphs, config.n_sup, base_rng);

  Rng init_rng = base_rng.derive(Rng::kParamInit);
  EncoderParams params = init_params(
      config.layers, config.d, init_rng,
      config.similarity_channel == SimilarityChannel::kPerChannel, config.share_qk);

  Checkpoint ckpt;
  try {
    ckpt.epoch = training_loop(params, active, config.attention(), tc, tc.epochs,
                               base_rng, ckpt.loss_history);
  } catch (const NumericalError& e) {
    throw NumericalError("fit: " + std::string(e.what()));
  }
  ckpt.params = std::move(params);
  ckpt.config = config;
  ckpt.align_stats = align_stats;
  ckpt.dict = extract_training_dict(graphs, active, ckpt.params);
  return ckpt;
}

Checkpoint continue_fit(const Checkpoint& base, const std::vector<TrainGraph>& graphs,
                        std::size_t epochs, const Rng& base_rng) {
  TrainConfig tc = train_config_of(base.config);
  tc.validate();
  auto active = prepare_active(graphs, base.config.n_sup, base_rng);

  Checkpoint out = base;
  if (epochs > 0) {
    std::vector<double> history;
    std::size_t run = 0;
    try {
      run = training_loop(out.params, active, base.config.attention(), tc, epochs,
                          base_rng, history);
    } catch (const NumericalError& e) {
      throw NumericalError("continue_fit: " + std::string(e.what()));
    }
    out.epoch = base.epoch + run;
    out.loss_history.insert(out.loss_history.end(), history.begin(), history.end());
  }
  out.dict = extract_training_dict(graphs, active, out.params);
  return out;
}

Checkpoint finetune(const Checkpoint& base, const TrainGraph& test_graph,
                    const std::vector<std::size_t>& labeled_normals,
                    const std::vector<std::size_t>& labeled_anomalies,
                    std::size_t epochs, const Rng& base_rng) {
  if (labeled_normals.empty() || labeled_anomalies.empty())
    throw InvalidArgument("finetune: labeled set needs at least one normal and one anomaly");
  for (std::size_t v : labeled_normals)
    if (v >= test_graph.x.rows())
      throw InvalidArgument("finetune: labeled node out of range");
  for (std::size_t v : labeled_anomalies)
    if (v >= test_graph.x.rows())
      throw InvalidArgument("finetune: labeled node out of range");

  TrainConfig tc = train_config_of(base.config);
  tc.epochs = std::max<std::size_t>(epochs, 1);  // validation only; loop uses `epochs`
  tc.validate();

  detail::ActiveGraph ag;
  ag.graph = &test_graph;
  ag.normals = labeled_normals;
  ag.anomalies = labeled_anomalies;
  Rng pseudo_rng = base_rng.derive(Rng::kPseudoSupport);
  const std::size_t take = std::min(base.config.n_sup, test_graph.x.rows());
  ag.dict_idx = pseudo_rng.sample_without_replacement(test_graph.x.rows(), take);

  Checkpoint out = base;
  AdamState adam = make_adam_state(out.params);
  const AttentionConfig attn = base.config.attention();

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Rng pair_rng = base_rng.derive(Rng::kTripletPairs, epoch);
    ag.pairs = sample_pairs(ag.anomalies, ag.normals, tc.pairs_per_graph, pair_rng);
    detail::ParamGrads grads = detail::zero_grads(out.params);
    double loss = 0.0;
    try {
      loss = detail::loss_and_gradients(out.params, {ag}, base.dict.entries, attn,
                                        tc.lambda, tc.beta, &grads);
    } catch (const NumericalError& e) {
      throw NumericalError("finetune: epoch " + std::to_string(epoch) + ": " + e.what());
    }
    adam_step(out.params, grads, adam, tc);
    out.loss_history.push_back(loss);
  }
  out.epoch = base.epoch + epochs;

  // Final pseudo entry extracted with the adapted parameters.
  Embeddings emb = encode_graph(test_graph.x, test_graph.adj, out.params);
  DictEntry entry;
  entry.graph_id = test_graph.id;
  entry.source = EntrySource::kTestPseudo;
  entry.idx = ag.dict_idx;
  entry.dict_h = gather_rows(emb.h, entry.idx);
  entry.dict_r = gather_rows(emb.r, entry.idx);
  out.dict = merge(std::move(out.dict), {std::move(entry)});
  return out;
}

}  // namespace owleye

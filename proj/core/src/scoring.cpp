#include "owleye/scoring.hpp"

#include <cmath>

#include "owleye/error.hpp"

namespace owleye {

ScoreVector anomaly_scores(const Embeddings& emb, const Reconstruction& rec, double beta) {
  if (!emb.h.same_shape(rec.h_hat) || !emb.r.same_shape(rec.r_hat) ||
      emb.h.rows() != emb.r.rows())
    throw InvalidArgument("anomaly_scores: shape mismatch");
  if (beta < 0.0) throw InvalidArgument("anomaly_scores: beta must be non-negative");

  const std::size_t n = emb.h.rows();
  ScoreVector sv;
  sv.beta = beta;
  sv.scores.resize(n);
  sv.attr_term.resize(n);
  sv.struct_term.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    double attr = 0.0, structural = 0.0;
    for (std::size_t c = 0; c < emb.h.cols(); ++c) {
      const double dh = rec.h_hat(v, c) - emb.h(v, c);
      attr += dh * dh;
      const double dr = rec.r_hat(v, c) - emb.r(v, c);
      structural += dr * dr;
    }
    sv.attr_term[v] = attr;
    sv.struct_term[v] = structural;
    sv.scores[v] = attr + beta * structural;
  }
  return sv;
}

ZeroShotResult zero_shot_score(const Checkpoint& ckpt, const GraphDataset& test_graph,
                               const ZeroShotOptions& opt, const Rng& rng) {
  test_graph.validate();
  if (ckpt.align_stats.per_graph.empty())
    throw InvalidArgument("zero_shot_score: checkpoint has no alignment stats");
  if (opt.oracle_normal_support && !test_graph.labels)
    throw InvalidArgument("zero_shot_score: oracle support mode needs labels");

  ZeroShotResult result;
  AlignedGraph aligned = align_new_graph(ckpt.align_stats, test_graph, rng,
                                         opt.strict_train_aggregate, &result.test_stats);
  const NormalizedAdjacency adj =
      build_normalized_adjacency(test_graph, ckpt.config.adjacency);
  result.emb = encode_graph(aligned.x, adj, ckpt.params);

  Rng pseudo_rng = rng.derive(Rng::kPseudoSupport);
  const std::vector<std::uint8_t>* support_labels =
      opt.oracle_normal_support ? &*test_graph.labels : nullptr;
  DictEntry pseudo = extract_patterns(test_graph.name, result.emb, support_labels,
                                      opt.n_sup, pseudo_rng, EntrySource::kTestPseudo);
  result.pseudo_count = pseudo.idx.size();
  if (test_graph.labels) {
    for (std::size_t v : pseudo.idx)
      if ((*test_graph.labels)[v]) ++result.pseudo_anomaly_count;
  }

  PatternDictionary dict = ckpt.dict;
  dict = merge(std::move(dict), opt.extra_entries);
  dict = merge(std::move(dict), {std::move(pseudo)});

  AttentionConfig attn = opt.attn;
  attn.keep_attention_maps = opt.keep_attention_maps;
  result.rec = reconstruct(result.emb, dict, ckpt.params, attn);

  result.scores = anomaly_scores(result.emb, result.rec, ckpt.config.beta);
  result.scores.graph_id = test_graph.name;
  return result;
}

DictEntry extract_entry_for_graph(const Checkpoint& ckpt, const GraphDataset& g,
                                  std::size_t n_sup, const Rng& rng,
                                  std::optional<EntrySource> source) {
  g.validate();
  AlignedGraph aligned = align_new_graph(ckpt.align_stats, g, rng);
  const NormalizedAdjacency adj = build_normalized_adjacency(g, ckpt.config.adjacency);
  Embeddings emb = encode_graph(aligned.x, adj, ckpt.params);
  Rng sample_rng = rng.derive(Rng::kDictSample);
  const std::vector<std::uint8_t>* labels = g.labels ? &*g.labels : nullptr;
  if (!source && labels) source = EntrySource::kAuxNormal;
  return extract_patterns(g.name, emb, labels, n_sup, sample_rng, source);
}

}  // namespace owleye

// Microbenchmarks for the numeric hot paths: PCA projection, truncated
// attention, full reconstruction and one training step.

#include <benchmark/benchmark.h>

#include <set>

#include "owleye/align.hpp"
#include "owleye/numerics.hpp"
#include "owleye/reconstruction.hpp"
#include "owleye/synth.hpp"
#include "owleye/training.hpp"

namespace {

using namespace owleye;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

void BM_PcaFitTransform(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix x = random_matrix(n, 64, 1);
  for (auto _ : state) {
    Rng rng(2);
    benchmark::DoNotOptimize(pca_fit_transform(x, 32, rng));
  }
}
BENCHMARK(BM_PcaFitTransform)->Arg(300)->Arg(1000);

void BM_TruncatedAttention(benchmark::State& state) {
  const auto n_sup = static_cast<std::size_t>(state.range(0));
  Matrix query = random_matrix(300, 64, 3);
  Matrix patterns = random_matrix(n_sup, 64, 4);
  Matrix wq = random_matrix(64, 64, 5);
  Matrix wk = random_matrix(64, 64, 6);
  AttentionConfig cfg;
  cfg.truncation = 0.5;
  cfg.tau_a = 0.001;
  for (auto _ : state)
    benchmark::DoNotOptimize(truncated_attention(query, patterns, wq, wk, cfg));
}
BENCHMARK(BM_TruncatedAttention)->Arg(64)->Arg(512)->Arg(2000);

void BM_Reconstruct(benchmark::State& state) {
  const auto entries = static_cast<std::size_t>(state.range(0));
  Rng prng(7);
  EncoderParams params = init_params(3, 32, prng);
  Embeddings emb;
  emb.h = random_matrix(300, 64, 8);
  emb.r = random_matrix(300, 64, 9);
  PatternDictionary dict;
  dict.emb_dim = 64;
  for (std::size_t j = 0; j < entries; ++j) {
    DictEntry e;
    e.graph_id = "e" + std::to_string(j);
    e.dict_h = random_matrix(64, 64, 10 + j);
    e.dict_r = random_matrix(64, 64, 20 + j);
    e.idx.resize(64);
    for (std::size_t i = 0; i < 64; ++i) e.idx[i] = i;
    dict.entries.push_back(std::move(e));
  }
  AttentionConfig cfg;
  cfg.truncation = 0.5;
  cfg.tau_a = 0.001;
  cfg.keep_attention_maps = false;
  for (auto _ : state)
    benchmark::DoNotOptimize(reconstruct(emb, dict, params, cfg));
}
BENCHMARK(BM_Reconstruct)->Arg(2)->Arg(5)->Arg(10);

void BM_TrainingEpoch(benchmark::State& state) {
  SynthSpec spec;
  spec.nodes = 300;
  spec.raw_dim = 48;
  std::vector<GraphDataset> graphs;
  for (int i = 0; i < 4; ++i)
    graphs.push_back(make_synthetic_graph("g" + std::to_string(i), spec, Rng(i)));
  RunConfig cfg;
  cfg.d = 32;
  cfg.n_sup = 64;
  cfg.epochs = 1;
  Rng rng(0);
  auto [aligned, stats] = align_collection(graphs, cfg.d, cfg.tau, rng);
  std::vector<TrainGraph> tg(4);
  for (int i = 0; i < 4; ++i) {
    tg[i].id = graphs[i].name;
    tg[i].x = aligned[i].x;
    tg[i].adj = build_normalized_adjacency(graphs[i]);
    tg[i].labels = *graphs[i].labels;
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit(tg, cfg, stats, rng));
}
BENCHMARK(BM_TrainingEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "owleye/align.hpp"
#include "owleye/config.hpp"
#include "owleye/dictionary.hpp"
#include "owleye/encoder.hpp"
#include "owleye/graph.hpp"
#include "owleye/matrix.hpp"
#include "owleye/reconstruction.hpp"
#include "owleye/rng.hpp"

namespace owleye {

/// Optimizer-loop settings (Adam constants are fixed).
struct TrainConfig {
  double lr = 3e-5;
  std::size_t epochs = 100;
  double lambda = 0.2;  // triplet margin
  double beta = 0.01;   // structure-channel weight
  std::size_t pairs_per_graph = 512;  // 0 = every (anomaly, normal) pair
  std::uint64_t seed = 0;
  std::size_t patience = 0;  // plateau epochs before stopping; 0 = off
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

/// Sum over anomalies of cos(H_v, Hhat_v) minus the same sum over normals.
/// Rows whose norm is zero in either matrix are excluded with a warning.
double recon_loss(const Matrix& h, const Matrix& h_hat,
                  const std::vector<std::size_t>& normals,
                  const std::vector<std::size_t>& anomalies);

using TripletPair = std::pair<std::size_t, std::size_t>;  // (anomaly, normal)

/// Hinge contrast over sampled pairs, both channels (structure scaled by
/// beta). An empty pair list returns 0 with a warning.
double triplet_loss(const Matrix& h, const Matrix& h_hat, const Matrix& r,
                    const Matrix& r_hat, const std::vector<TripletPair>& pairs,
                    double lambda, double beta);

/// One fully prepared training graph: aligned features, normalized adjacency
/// and binary labels.
struct TrainGraph {
  std::string id;
  Matrix x;  // n x d, aligned
  NormalizedAdjacency adj;
  std::vector<std::uint8_t> labels;
};

struct Checkpoint {
  EncoderParams params;
  RunConfig config;          // snapshot of the run that produced the model
  AlignmentStats align_stats;
  PatternDictionary dict;    // training-graph entries, final parameters
  std::size_t epoch = 0;
  std::vector<double> loss_history;
};

/// Full-batch supervised training: per epoch every graph is encoded and
/// reconstructed against the entries of all training graphs (pattern indices
/// are sampled once up front and held fixed), the combined loss gradient is
/// accumulated over all graphs, and one Adam step is applied. The returned
/// checkpoint carries the dictionary re-extracted at the frozen indices with
/// the final parameters, plus the alignment stats the graphs were produced
/// with.
Checkpoint fit(const std::vector<TrainGraph>& graphs, const RunConfig& config,
               const AlignmentStats& align_stats, const Rng& base_rng);

/// 10-shot style adaptation: a pseudo-support entry for the test graph is
/// appended to the dictionary, then Adam continues on the loss restricted to
/// the labeled subset of the test graph. Training-graph entries stay fixed;
/// the test entry tracks the evolving parameters.
Checkpoint finetune(const Checkpoint& base, const TrainGraph& test_graph,
                    const std::vector<std::size_t>& labeled_normals,
                    const std::vector<std::size_t>& labeled_anomalies,
                    std::size_t epochs, const Rng& base_rng);

/// Resumes full training from a checkpoint's parameters on a (possibly
/// extended) labeled graph set for a fixed number of epochs; backs the
/// auxiliary-finetune case study.
Checkpoint continue_fit(const Checkpoint& base, const std::vector<TrainGraph>& graphs,
                        std::size_t epochs, const Rng& base_rng);

/// Binary checkpoint round-trip (magic OWLM); bit-exact.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

namespace detail {

/// Gradients of the total loss for every parameter matrix, shaped like the
/// parameters themselves.
using ParamGrads = EncoderParams;
ParamGrads zero_grads(const EncoderParams& params);

/// One joint forward/backward evaluation used by fit, finetune and the
/// gradient tests. Active graphs are encoded live and contribute one
/// dictionary entry each (at the given frozen indices) appended after the
/// constant entries; the loss is summed over the active graphs.
struct ActiveGraph {
  const TrainGraph* graph = nullptr;
  std::vector<std::size_t> dict_idx;
  std::vector<std::size_t> normals;    // nodes entering the losses
  std::vector<std::size_t> anomalies;
  std::vector<TripletPair> pairs;
};

double loss_and_gradients(const EncoderParams& params,
                          const std::vector<ActiveGraph>& active,
                          const std::vector<DictEntry>& constant_entries,
                          const AttentionConfig& attn, double lambda, double beta,
                          ParamGrads* grads);

/// Backward of one encoder chain: accumulates d(loss)/d(weights[t]) into
/// d_weights given the gradient of the concatenated residual output.
void encoder_backward(const Matrix& input, const NormalizedAdjacency& adj,
                      const std::vector<Matrix>& weights, const EncoderTrace& trace,
                      const Matrix& d_out, std::vector<Matrix>& d_weights);

}  // namespace detail

}  // namespace owleye

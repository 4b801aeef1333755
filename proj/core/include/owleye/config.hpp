#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "owleye/align.hpp"
#include "owleye/graph.hpp"
#include "owleye/reconstruction.hpp"

namespace owleye {

enum class SimilarityChannel { kStructure, kPerChannel };

enum class ExperimentMode { kZeroShot, kDictAdd, kAuxFinetune, kNsupSweep };

/// Flat, typed experiment configuration. Files hold `key = value` lines
/// (# comments allowed, lists comma-separated); unknown keys are rejected.
/// CLI flags override file values.
struct RunConfig {
  std::size_t d = 256;
  std::size_t layers = 3;
  double tau = 1.0;
  double tau_a = 0.001;
  std::size_t n_sup = 2000;
  double k = 0.5;  // fraction of each entry's patterns if < 1, absolute count if >= 1
  double lambda = 0.2;
  double beta = 0.01;
  double lr = 3e-5;
  std::size_t epochs = 100;
  std::size_t pairs_per_graph = 512;  // 0 = every (anomaly, normal) pair
  std::uint64_t seed = 0;
  AdjacencyMode adjacency = AdjacencyMode::kSymNorm;
  SimilarityChannel similarity_channel = SimilarityChannel::kStructure;
  bool signed_sqrt = false;
  bool share_qk = false;
  bool strict_train_median = false;
  Aggregation aggregation = Aggregation::kMedian;
  std::size_t patience = 0;  // epochs without improvement before stopping; 0 = off
  std::size_t trials = 5;
  std::size_t finetune_epochs = 20;
  ExperimentMode mode = ExperimentMode::kZeroShot;
  std::string out_dir = "owleye_out";
  std::string checkpoint;  // load instead of training when non-empty
  std::vector<std::string> train_dirs;
  std::vector<std::string> test_dirs;
  std::vector<std::string> aux_dirs;
  std::vector<std::size_t> nsup_values = {10, 100, 200, 500, 1000, 2000};

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_string(const std::string& text, const std::string& source);

  /// Applies one `key = value` assignment; throws ConfigError for unknown
  /// keys or unparsable values.
  void set(const std::string& key, const std::string& value);

  /// Every key in fixed order as `key=value` lines (checkpoint snapshot).
  std::string to_key_values() const;

  AttentionConfig attention() const {
    AttentionConfig cfg;
    cfg.truncation = k;
    cfg.tau_a = tau_a;
    cfg.drop_outer_sqrt = !signed_sqrt;
    return cfg;
  }
};

}  // namespace owleye

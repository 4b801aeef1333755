#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "owleye/config.hpp"
#include "owleye/training.hpp"

namespace owleye {

/// Loads, aligns and packages labeled graph directories for fit().
struct PreparedCollection {
  std::vector<GraphDataset> graphs;
  std::vector<TrainGraph> train_graphs;
  AlignmentStats stats;
};
PreparedCollection prepare_training_collection(const std::vector<std::string>& dirs,
                                               const RunConfig& config);

/// Trains a model from config.train_dirs (or loads config.checkpoint when
/// set) and returns the checkpoint.
Checkpoint obtain_checkpoint(const RunConfig& config);

/// One evaluated (setting, dataset, trial) cell of an experiment report.
struct ExperimentRow {
  std::string setting;  // empty for plain zero-shot runs
  std::string dataset;
  std::uint64_t trial = 0;
  double auroc = 0.0;
  double auprc = 0.0;
  std::size_t pseudo_anomalies = 0;
};

/// Full protocol: train (or load), score every test graph over the configured
/// trials, and emit metrics.csv plus summary.md into config.out_dir. The case
///-study modes add their sweep axis (aux dictionary size, aux finetuning, or
/// n_sup) and write sweep.csv alongside.
std::vector<ExperimentRow> run_experiment(const RunConfig& config);

}  // namespace owleye

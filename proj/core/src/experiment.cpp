#include "owleye/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "io_util.hpp"
#include "owleye/error.hpp"
#include "owleye/metrics.hpp"
#include "owleye/parallel.hpp"
#include "owleye/scoring.hpp"

namespace owleye {

namespace {

std::uint64_t hash64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<GraphDataset> load_dirs(const std::vector<std::string>& dirs,
                                    bool require_labels, const char* role) {
  if (dirs.empty())
    throw ConfigError(std::string("experiment: no ") + role + " directories configured");
  std::vector<GraphDataset> graphs;
  graphs.reserve(dirs.size());
  std::set<std::string> names;
  for (const std::string& dir : dirs) {
    GraphDataset g = load_graph_dir(dir);
    if (require_labels && !g.labels)
      throw InvalidArgument(std::string(role) + " graph \"" + g.name +
                            "\" has no labels.csv");
    if (!names.insert(g.name).second)
      throw InvalidArgument(std::string("experiment: duplicate graph name \"") + g.name +
                            "\"");
    graphs.push_back(std::move(g));
  }
  return graphs;
}

struct Aggregate {
  double mean_auroc = 0.0, std_auroc = 0.0;
  double mean_auprc = 0.0, std_auprc = 0.0;
  std::size_t count = 0;
};

Aggregate aggregate_rows(const std::vector<const ExperimentRow*>& rows) {
  Aggregate a;
  a.count = rows.size();
  if (rows.empty()) return a;
  for (const auto* r : rows) {
    a.mean_auroc += r->auroc;
    a.mean_auprc += r->auprc;
  }
  a.mean_auroc /= static_cast<double>(rows.size());
  a.mean_auprc /= static_cast<double>(rows.size());
  for (const auto* r : rows) {
    a.std_auroc += (r->auroc - a.mean_auroc) * (r->auroc - a.mean_auroc);
    a.std_auprc += (r->auprc - a.mean_auprc) * (r->auprc - a.mean_auprc);
  }
  if (rows.size() > 1) {
    a.std_auroc = std::sqrt(a.std_auroc / static_cast<double>(rows.size() - 1));
    a.std_auprc = std::sqrt(a.std_auprc / static_cast<double>(rows.size() - 1));
  } else {
    a.std_auroc = a.std_auprc = 0.0;
  }
  return a;
}

std::string cell(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f±%.2f", 100.0 * mean, 100.0 * stddev);
  return buf;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<ExperimentRow>& rows, bool with_setting) {
  io::atomic_write(path, [&](std::ostream& os) {
    if (with_setting) os << "setting,";
    os << "dataset,seed,auroc,auprc,pseudo_anomalies\n";
    for (const ExperimentRow& r : rows) {
      if (with_setting) os << r.setting << ',';
      os << r.dataset << ',' << r.trial << ',' << io::format_double(r.auroc) << ','
         << io::format_double(r.auprc) << ',' << r.pseudo_anomalies << '\n';
    }
  });
}

// Markdown table per metric: one row per setting, one column per dataset plus
// an Average column (mean of per-dataset means, paper-table layout).
void write_summary_md(const std::filesystem::path& path,
                      const std::vector<ExperimentRow>& rows,
                      const std::vector<std::string>& settings,
                      const std::vector<std::string>& datasets,
                      const std::string& axis_label, const RunConfig& config) {
  auto table = [&](std::ostream& os, bool use_auprc) {
    os << "| " << axis_label << " |";
    for (const auto& d : datasets) os << ' ' << d << " |";
    os << " Average |\n|";
    for (std::size_t i = 0; i < datasets.size() + 2; ++i) os << "---|";
    os << '\n';
    for (const auto& setting : settings) {
      os << "| " << (setting.empty() ? "zero-shot" : setting) << " |";
      double mean_sum = 0.0, std_sum = 0.0;
      std::size_t covered = 0;
      for (const auto& d : datasets) {
        std::vector<const ExperimentRow*> cell_rows;
        for (const auto& r : rows)
          if (r.setting == setting && r.dataset == d) cell_rows.push_back(&r);
        const Aggregate a = aggregate_rows(cell_rows);
        if (a.count == 0) {
          os << " - |";
          continue;
        }
        const double m = use_auprc ? a.mean_auprc : a.mean_auroc;
        const double s = use_auprc ? a.std_auprc : a.std_auroc;
        os << ' ' << cell(m, s) << " |";
        mean_sum += m;
        std_sum += s;
        ++covered;
      }
      if (covered > 0)
        os << ' ' << cell(mean_sum / static_cast<double>(covered),
                          std_sum / static_cast<double>(covered)) << " |";
      else
        os << " - |";
      os << '\n';
    }
  };

  io::atomic_write(path, [&](std::ostream& os) {
    os << "# Experiment summary\n\n";
    os << "Trials per dataset: " << config.trials << ". Seed: " << config.seed
       << ". Values are AUROC/AUPRC percentages, mean ± std over trials.\n\n";
    os << "## AUPRC\n\n";
    table(os, true);
    os << "\n## AUROC\n\n";
    table(os, false);
  });
}

}  // namespace

PreparedCollection prepare_training_collection(const std::vector<std::string>& dirs,
                                               const RunConfig& config) {
  PreparedCollection out;
  out.graphs = load_dirs(dirs, true, "training");
  Rng rng(config.seed);
  auto [aligned, stats] =
      align_collection(out.graphs, config.d, config.tau, rng, config.aggregation);
  out.stats = std::move(stats);
  out.train_graphs.resize(out.graphs.size());
  for (std::size_t i = 0; i < out.graphs.size(); ++i) {
    out.train_graphs[i].id = out.graphs[i].name;
    out.train_graphs[i].x = std::move(aligned[i].x);
    out.train_graphs[i].adj = build_normalized_adjacency(out.graphs[i], config.adjacency);
    out.train_graphs[i].labels = *out.graphs[i].labels;
  }
  return out;
}

Checkpoint obtain_checkpoint(const RunConfig& config) {
  if (!config.checkpoint.empty()) return load_checkpoint(config.checkpoint);
  PreparedCollection prepared = prepare_training_collection(config.train_dirs, config);
  return fit(prepared.train_graphs, config, prepared.stats, Rng(config.seed));
}

std::vector<ExperimentRow> run_experiment(const RunConfig& config) {
  namespace fs = std::filesystem;
  const fs::path out_dir = config.out_dir;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  if (config.trials == 0) throw ConfigError("experiment: trials must be at least 1");

  std::vector<GraphDataset> test_graphs;
  if (!config.test_dirs.empty()) test_graphs = load_dirs(config.test_dirs, true, "test");

  // Every (setting label, checkpoint, extra entries, n_sup) combination to
  // evaluate; the mode decides the sweep axis.
  struct Setting {
    std::string label;
    const Checkpoint* ckpt = nullptr;
    std::vector<DictEntry> extra;
    std::size_t n_sup = 0;
  };
  std::vector<Checkpoint> owned_checkpoints;
  std::vector<Setting> settings;
  std::string axis_label = "setting";

  switch (config.mode) {
    case ExperimentMode::kZeroShot: {
      owned_checkpoints.push_back(obtain_checkpoint(config));
      settings.push_back({"", &owned_checkpoints[0], {}, config.n_sup});
      axis_label = "run";
      break;
    }
    case ExperimentMode::kDictAdd: {
      owned_checkpoints.push_back(obtain_checkpoint(config));
      const Checkpoint& ckpt = owned_checkpoints[0];
      auto aux_graphs = load_dirs(config.aux_dirs, false, "auxiliary");
      std::vector<DictEntry> aux_entries;
      for (const GraphDataset& g : aux_graphs) {
        Rng rng = Rng(config.seed).derive(Rng::kDictSample, hash64(g.name));
        aux_entries.push_back(extract_entry_for_graph(ckpt, g, config.n_sup, rng));
      }
      for (std::size_t k = 0; k <= aux_entries.size(); ++k) {
        Setting s;
        s.label = "|T_aux|=" + std::to_string(k);
        s.ckpt = &ckpt;
        s.extra.assign(aux_entries.begin(),
                       aux_entries.begin() + static_cast<std::ptrdiff_t>(k));
        s.n_sup = config.n_sup;
        settings.push_back(std::move(s));
      }
      axis_label = "dictionary";
      break;
    }
    case ExperimentMode::kAuxFinetune: {
      owned_checkpoints.reserve(config.aux_dirs.size() + 1);
      owned_checkpoints.push_back(obtain_checkpoint(config));
      auto aux_graphs = load_dirs(config.aux_dirs, true, "auxiliary");
      PreparedCollection base_collection =
          prepare_training_collection(config.train_dirs, config);
      for (std::size_t k = 0; k <= aux_graphs.size(); ++k) {
        if (k > 0) {
          // Joint continuation on training graphs plus the first k aux graphs.
          std::vector<TrainGraph> joint = base_collection.train_graphs;
          for (std::size_t a = 0; a < k; ++a) {
            const GraphDataset& g = aux_graphs[a];
            TrainGraph tg;
            tg.id = g.name;
            Rng rng = Rng(config.seed).derive(Rng::kProjection, hash64(g.name));
            tg.x = align_new_graph(owned_checkpoints[0].align_stats, g, rng).x;
            tg.adj = build_normalized_adjacency(g, config.adjacency);
            tg.labels = *g.labels;
            joint.push_back(std::move(tg));
          }
          owned_checkpoints.push_back(continue_fit(owned_checkpoints[0], joint,
                                                   config.finetune_epochs,
                                                   Rng(config.seed)));
        }
        Setting s;
        s.label = "|T_aux|=" + std::to_string(k);
        s.ckpt = &owned_checkpoints[k == 0 ? 0 : owned_checkpoints.size() - 1];
        s.n_sup = config.n_sup;
        settings.push_back(std::move(s));
      }
      axis_label = "finetune";
      break;
    }
    case ExperimentMode::kNsupSweep: {
      if (!config.checkpoint.empty())
        throw ConfigError("nsup_sweep retrains per dictionary size; drop the checkpoint key");
      PreparedCollection prepared =
          prepare_training_collection(config.train_dirs, config);
      owned_checkpoints.reserve(config.nsup_values.size());
      for (std::size_t n_sup : config.nsup_values) {
        RunConfig variant = config;
        variant.n_sup = n_sup;
        owned_checkpoints.push_back(
            fit(prepared.train_graphs, variant, prepared.stats, Rng(config.seed)));
        Setting s;
        s.label = "n_sup=" + std::to_string(n_sup);
        s.ckpt = &owned_checkpoints.back();
        s.n_sup = n_sup;
        settings.push_back(std::move(s));
      }
      axis_label = "n_sup";
      break;
    }
  }

  // Score every (setting, test graph, trial) cell; tasks are independent and
  // deterministic, so they may run in parallel into preallocated slots.
  struct Task {
    const Setting* setting;
    const GraphDataset* graph;
    std::uint64_t trial;
  };
  std::vector<Task> tasks;
  for (const Setting& s : settings)
    for (const GraphDataset& g : test_graphs)
      for (std::uint64_t t = 0; t < config.trials; ++t) tasks.push_back({&s, &g, t});

  std::vector<ExperimentRow> rows(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t i) {
    const Task& task = tasks[i];
    ZeroShotOptions opt = ZeroShotOptions::from_config(config);
    opt.n_sup = task.setting->n_sup;
    opt.extra_entries = task.setting->extra;
    const Rng trial_rng =
        Rng(config.seed).derive(Rng::kTrial,
                                splitmix64(task.trial) ^ hash64(task.graph->name));
    ZeroShotResult res = zero_shot_score(*task.setting->ckpt, *task.graph, opt, trial_rng);
    const MetricsReport report = evaluate_scores(res.scores.scores, *task.graph->labels);
    rows[i] = {task.setting->label, task.graph->name, task.trial,
               report.auroc,        report.auprc,     res.pseudo_anomaly_count};
  });

  const bool sweep = config.mode != ExperimentMode::kZeroShot;
  write_metrics_csv(out_dir / "metrics.csv", rows, false);
  if (sweep) write_metrics_csv(out_dir / "sweep.csv", rows, true);

  std::vector<std::string> setting_labels, dataset_names;
  for (const Setting& s : settings) setting_labels.push_back(s.label);
  for (const GraphDataset& g : test_graphs) dataset_names.push_back(g.name);
  write_summary_md(out_dir / "summary.md", rows, setting_labels, dataset_names,
                   axis_label, config);

  if (!config.checkpoint.empty() || config.mode != ExperimentMode::kZeroShot) return rows;
  // Persist the freshly trained model next to the reports.
  save_checkpoint(owned_checkpoints[0], out_dir / "model.owlm");
  return rows;
}

}  // namespace owleye

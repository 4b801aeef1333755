// owleye command-line interface: batch pipeline operations over graph
// directories, checkpoints and pattern dictionaries.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "owleye/align.hpp"
#include "owleye/config.hpp"
#include "owleye/diagnostics.hpp"
#include "owleye/error.hpp"
#include "owleye/experiment.hpp"
#include "owleye/graph.hpp"
#include "owleye/reconstruction.hpp"
#include "owleye/scoring.hpp"
#include "owleye/training.hpp"

namespace {

namespace fs = std::filesystem;
using namespace owleye;

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string());
    os << text;
  }
  fs::rename(tmp, path);
}

std::vector<std::size_t> parse_id_list(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoull(item));
  }
  return out;
}

RunConfig load_config(const std::string& config_path,
                      const std::vector<std::string>& overrides) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got \"" + kv + "\"");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void write_scores_csv(const fs::path& path, const ScoreVector& sv, bool breakdown) {
  std::string text;
  for (std::size_t v = 0; v < sv.scores.size(); ++v) {
    text += std::to_string(v);
    text += ',';
    text += format17(sv.scores[v]);
    if (breakdown) {
      text += ',';
      text += format17(sv.attr_term[v]);
      text += ',';
      text += format17(sv.struct_term[v]);
    }
    text += '\n';
  }
  write_text_atomic(path, text);
}

int run(int argc, char** argv) {
  CLI::App app{"owleye: zero-shot cross-domain graph anomaly detection"};
  app.require_subcommand(1);

  // ---- inject ----
  auto* inject = app.add_subcommand("inject", "Inject labeled anomalies into a graph");
  std::string inject_graph, inject_out;
  std::size_t inject_cliques = 2, inject_clique_size = 5, inject_contextual = 5;
  std::uint64_t inject_seed = 0;
  bool inject_csv = false;
  inject->add_option("--graph", inject_graph, "Input graph directory")->required();
  inject->add_option("--out", inject_out, "Output graph directory")->required();
  inject->add_option("--cliques", inject_cliques, "Number of injected cliques");
  inject->add_option("--clique-size", inject_clique_size, "Nodes per clique");
  inject->add_option("--contextual", inject_contextual, "Contextual (feature-swap) anomalies");
  inject->add_option("--seed", inject_seed, "Random seed");
  inject->add_flag("--csv-features", inject_csv, "Write features.csv instead of features.fmat");

  // ---- align ----
  auto* align_cmd = app.add_subcommand("align", "Align a collection into the shared space");
  std::string align_config, align_out;
  std::vector<std::string> align_overrides;
  align_cmd->add_option("--config", align_config, "Run configuration file")->required();
  align_cmd->add_option("--out", align_out, "Output directory")->required();
  align_cmd->add_option("--set", align_overrides, "Override config key (key=value)");

  // ---- train ----
  auto* train = app.add_subcommand("train", "Train a model on the configured graphs");
  std::string train_config, train_out = "model.owlm";
  std::vector<std::string> train_overrides;
  train->add_option("--config", train_config, "Run configuration file")->required();
  train->add_option("--out", train_out, "Checkpoint output path");
  train->add_option("--set", train_overrides, "Override config key (key=value)");

  // ---- extract-dict ----
  auto* extract = app.add_subcommand("extract-dict",
                                     "Extract a pattern dictionary from one graph");
  std::string extract_ckpt, extract_graph, extract_out;
  std::size_t extract_nsup = 0;
  std::uint64_t extract_seed = 0;
  extract->add_option("--checkpoint", extract_ckpt, "Trained model")->required();
  extract->add_option("--graph", extract_graph, "Graph directory")->required();
  extract->add_option("--out", extract_out, "Dictionary output path")->required();
  extract->add_option("--n-sup", extract_nsup, "Patterns per entry (default: checkpoint)");
  extract->add_option("--seed", extract_seed, "Random seed");

  // ---- dict add ----
  auto* dict = app.add_subcommand("dict", "Pattern dictionary maintenance");
  dict->require_subcommand(1);
  auto* dict_add = dict->add_subcommand("add", "Append one graph's patterns to a dictionary");
  std::string da_dict, da_graph, da_ckpt;
  std::size_t da_nsup = 0;
  std::uint64_t da_seed = 0;
  dict_add->add_option("--dict", da_dict, "Dictionary file to extend")->required();
  dict_add->add_option("--graph", da_graph, "Graph directory")->required();
  dict_add->add_option("--checkpoint", da_ckpt, "Trained model")->required();
  dict_add->add_option("--n-sup", da_nsup, "Patterns to sample (default: checkpoint)");
  dict_add->add_option("--seed", da_seed, "Random seed");

  // ---- score ----
  auto* score = app.add_subcommand("score", "Zero-shot anomaly scores for a graph");
  std::string sc_ckpt, sc_graph, sc_out = "scores.csv", sc_aux_dict, sc_breakdown;
  std::uint64_t sc_seed = 0;
  std::size_t sc_nsup = 0;
  double sc_k = -1.0, sc_tau_a = -1.0;
  bool sc_strict = false;
  score->add_option("--checkpoint", sc_ckpt, "Trained model")->required();
  score->add_option("--graph", sc_graph, "Graph directory")->required();
  score->add_option("--out", sc_out, "Scores CSV (node_id,score)");
  score->add_option("--aux-dict", sc_aux_dict, "Extra dictionary entries to merge");
  score->add_option("--breakdown", sc_breakdown,
                    "Also write node_id,score,attr_term,struct_term");
  score->add_option("--seed", sc_seed, "Random seed");
  score->add_option("--n-sup", sc_nsup, "Pseudo-support size (default: checkpoint)");
  score->add_option("--k", sc_k, "Truncation (fraction < 1 or absolute count)");
  score->add_option("--tau-a", sc_tau_a, "Attention temperature");
  score->add_flag("--strict-train-median", sc_strict,
                  "Normalize with training-only medians");

  // ---- finetune ----
  auto* ft = app.add_subcommand("finetune", "Few-shot finetuning on a test graph");
  std::string ft_ckpt, ft_graph, ft_out, ft_normals, ft_anomalies;
  std::size_t ft_epochs = 0;
  std::uint64_t ft_seed = 0;
  ft->add_option("--checkpoint", ft_ckpt, "Trained model")->required();
  ft->add_option("--graph", ft_graph, "Test graph directory")->required();
  ft->add_option("--normals", ft_normals, "Labeled normal node ids (comma-separated)")
      ->required();
  ft->add_option("--anomalies", ft_anomalies, "Labeled anomalous node ids")->required();
  ft->add_option("--out", ft_out, "Checkpoint output path")->required();
  ft->add_option("--epochs", ft_epochs, "Finetune epochs (default: checkpoint finetune_epochs)");
  ft->add_option("--seed", ft_seed, "Random seed");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "Run the full experiment protocol");
  std::string eval_config;
  std::vector<std::string> eval_overrides;
  eval->add_option("--config", eval_config, "Run configuration file")->required();
  eval->add_option("--set", eval_overrides, "Override config key (key=value)");

  // ---- diag distances ----
  auto* diag = app.add_subcommand("diag", "Diagnostics");
  diag->require_subcommand(1);
  auto* diag_dist = diag->add_subcommand(
      "distances", "Pairwise-distance summaries per label class and stage");
  std::string dd_graph, dd_out, dd_stage = "all", dd_ckpt;
  std::size_t dd_pairs = 200000, dd_d = 0;
  std::uint64_t dd_seed = 0;
  diag_dist->add_option("--graph", dd_graph, "Labeled graph directory")->required();
  diag_dist->add_option("--out", dd_out, "Output directory")->required();
  diag_dist->add_option("--stage", dd_stage, "raw, projected, aligned or all");
  diag_dist->add_option("--checkpoint", dd_ckpt,
                        "Use this model's alignment stats for the aligned stage");
  diag_dist->add_option("--pairs", dd_pairs, "Sampled pairs per stage");
  diag_dist->add_option("--d", dd_d, "Projection dimension (default 256 or checkpoint)");
  diag_dist->add_option("--seed", dd_seed, "Random seed");

  // ---- attn-export ----
  auto* attn = app.add_subcommand("attn-export", "Export cross-attention maps as CSV");
  std::string at_ckpt, at_graph, at_out, at_nodes;
  std::uint64_t at_seed = 0;
  std::size_t at_nsup = 0;
  attn->add_option("--checkpoint", at_ckpt, "Trained model")->required();
  attn->add_option("--graph", at_graph, "Graph directory")->required();
  attn->add_option("--nodes", at_nodes, "Node ids (comma-separated)")->required();
  attn->add_option("--out", at_out, "Output directory")->required();
  attn->add_option("--seed", at_seed, "Random seed");
  attn->add_option("--n-sup", at_nsup, "Pseudo-support size (default: checkpoint)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (inject->parsed()) {
    GraphDataset g = load_graph_dir(inject_graph);
    Rng rng = Rng(inject_seed).derive(Rng::kInjection);
    GraphDataset out = inject_anomalies(g, inject_cliques, inject_clique_size,
                                        inject_contextual, rng);
    save_graph_dir(out, inject_out, !inject_csv);
    std::cout << "wrote " << inject_out << " (" << out.n << " nodes, "
              << out.edges.size() << " edges)\n";
  } else if (align_cmd->parsed()) {
    RunConfig cfg = load_config(align_config, align_overrides);
    std::vector<GraphDataset> graphs;
    for (const std::string& dir : cfg.train_dirs) graphs.push_back(load_graph_dir(dir));
    if (graphs.empty()) throw ConfigError("align: train_dirs is empty");
    auto [aligned, stats] =
        align_collection(graphs, cfg.d, cfg.tau, Rng(cfg.seed), cfg.aggregation);
    fs::create_directories(align_out);
    for (const AlignedGraph& ag : aligned) {
      GraphDataset carrier;
      carrier.name = ag.graph_id;
      carrier.n = ag.x.rows();
      carrier.x_raw = ag.x;
      save_graph_dir(carrier, fs::path(align_out) / ag.graph_id);
    }
    std::string csv = "graph,avg_norm,mean_dist,mean_dist_normed,scale,degenerate\n";
    for (const GraphAlignStats& gs : stats.per_graph) {
      csv += gs.graph_id + ',' + format17(gs.avg_norm) + ',' + format17(gs.mean_dist) +
             ',' + format17(gs.mean_dist_normed) + ',' + format17(gs.scale) + ',' +
             (gs.degenerate ? "true" : "false") + '\n';
    }
    csv += "collection," + format17(stats.dist_median) + ',' +
           format17(stats.dist_median_normed) + ",,,\n";
    write_text_atomic(fs::path(align_out) / "alignment_stats.csv", csv);
    std::cout << "aligned " << aligned.size() << " graph(s) into " << align_out << "\n";
  } else if (train->parsed()) {
    RunConfig cfg = load_config(train_config, train_overrides);
    Checkpoint ckpt = obtain_checkpoint(cfg);
    save_checkpoint(ckpt, train_out);
    std::cout << "trained " << ckpt.epoch << " epoch(s); wrote " << train_out << "\n";
  } else if (extract->parsed()) {
    Checkpoint ckpt = load_checkpoint(extract_ckpt);
    GraphDataset g = load_graph_dir(extract_graph);
    const std::size_t n_sup = extract_nsup ? extract_nsup : ckpt.config.n_sup;
    DictEntry entry = extract_entry_for_graph(ckpt, g, n_sup, Rng(extract_seed));
    PatternDictionary out;
    out.emb_dim = ckpt.params.emb_dim();
    out.entries.push_back(std::move(entry));
    save_dictionary(out, extract_out);
    std::cout << "wrote " << extract_out << " (1 entry, "
              << out.entries[0].pattern_count() << " patterns)\n";
  } else if (dict_add->parsed()) {
    Checkpoint ckpt = load_checkpoint(da_ckpt);
    PatternDictionary existing = load_dictionary(da_dict);
    GraphDataset g = load_graph_dir(da_graph);
    const std::size_t n_sup = da_nsup ? da_nsup : ckpt.config.n_sup;
    DictEntry entry = extract_entry_for_graph(ckpt, g, n_sup, Rng(da_seed));
    existing = merge(std::move(existing), {std::move(entry)});
    save_dictionary(existing, da_dict);
    std::cout << da_dict << " now holds " << existing.entries.size() << " entries\n";
  } else if (score->parsed()) {
    Checkpoint ckpt = load_checkpoint(sc_ckpt);
    GraphDataset g = load_graph_dir(sc_graph);
    ZeroShotOptions opt = ZeroShotOptions::from_config(ckpt.config);
    if (sc_nsup) opt.n_sup = sc_nsup;
    if (sc_k >= 0.0) opt.attn.truncation = sc_k;
    if (sc_tau_a > 0.0) opt.attn.tau_a = sc_tau_a;
    if (sc_strict) opt.strict_train_aggregate = true;
    if (!sc_aux_dict.empty()) {
      PatternDictionary aux = load_dictionary(sc_aux_dict);
      if (aux.emb_dim != ckpt.params.emb_dim())
        throw InvalidArgument("aux dictionary dimension mismatch");
      opt.extra_entries = std::move(aux.entries);
    }
    ZeroShotResult res = zero_shot_score(ckpt, g, opt, Rng(sc_seed));
    write_scores_csv(sc_out, res.scores, false);
    if (!sc_breakdown.empty()) write_scores_csv(sc_breakdown, res.scores, true);
    std::cout << "wrote " << sc_out << " (" << res.scores.scores.size() << " nodes, "
              << res.pseudo_count << " pseudo-supports";
    if (g.labels) std::cout << ", " << res.pseudo_anomaly_count << " of them anomalous";
    std::cout << ")\n";
  } else if (ft->parsed()) {
    Checkpoint ckpt = load_checkpoint(ft_ckpt);
    GraphDataset g = load_graph_dir(ft_graph);
    TrainGraph tg;
    tg.id = g.name;
    Rng rng(ft_seed);
    tg.x = align_new_graph(ckpt.align_stats, g, rng).x;
    tg.adj = build_normalized_adjacency(g, ckpt.config.adjacency);
    tg.labels.assign(g.n, 0);
    const auto normals = parse_id_list(ft_normals);
    const auto anomalies = parse_id_list(ft_anomalies);
    const std::size_t epochs = ft_epochs ? ft_epochs : ckpt.config.finetune_epochs;
    Checkpoint out = finetune(ckpt, tg, normals, anomalies, epochs, rng);
    save_checkpoint(out, ft_out);
    std::cout << "finetuned " << epochs << " epoch(s); wrote " << ft_out << "\n";
  } else if (eval->parsed()) {
    RunConfig cfg = load_config(eval_config, eval_overrides);
    const auto rows = run_experiment(cfg);
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "metrics.csv").string() << " ("
              << rows.size() << " rows) and summary.md\n";
  } else if (diag_dist->parsed()) {
    GraphDataset g = load_graph_dir(dd_graph);
    if (!g.labels) throw InvalidArgument("diag distances: graph has no labels.csv");
    fs::create_directories(dd_out);
    const Rng rng(dd_seed);

    std::optional<Checkpoint> ckpt;
    if (!dd_ckpt.empty()) ckpt = load_checkpoint(dd_ckpt);
    const std::size_t dim = dd_d ? dd_d : (ckpt ? ckpt->config.d : 256);

    auto emit = [&](const std::string& stage, const Matrix& x) {
      DistanceDiagnostic diag_result = distance_diagnostic(g, x, dd_pairs, rng);
      write_distance_diagnostic(diag_result, g, dd_out, stage);
    };
    if (dd_stage == "raw" || dd_stage == "all") emit("raw", g.x_raw);
    if (dd_stage == "projected" || dd_stage == "all")
      emit("projected", project_features(g, dim, rng));
    if (dd_stage == "aligned" || dd_stage == "all") {
      if (ckpt) {
        emit("aligned", align_new_graph(ckpt->align_stats, g, rng).x);
      } else {
        auto [aligned, stats] = align_collection({g}, dim, 1.0, rng);
        emit("aligned", aligned[0].x);
      }
    }
    if (dd_stage != "raw" && dd_stage != "projected" && dd_stage != "aligned" &&
        dd_stage != "all")
      throw InvalidArgument("diag distances: unknown stage \"" + dd_stage + "\"");
    std::cout << "wrote distance diagnostics to " << dd_out << "\n";
  } else if (attn->parsed()) {
    Checkpoint ckpt = load_checkpoint(at_ckpt);
    GraphDataset g = load_graph_dir(at_graph);
    ZeroShotOptions opt = ZeroShotOptions::from_config(ckpt.config);
    if (at_nsup) opt.n_sup = at_nsup;
    opt.keep_attention_maps = true;
    ZeroShotResult res = zero_shot_score(ckpt, g, opt, Rng(at_seed));
    const auto nodes = parse_id_list(at_nodes);
    fs::create_directories(at_out);
    export_attention_maps(res.rec, nodes, at_out);
    std::cout << "wrote " << 2 * nodes.size() << " attention map file(s) to " << at_out
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const InvalidArgument& e) {
    std::cerr << "owleye: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "owleye: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "owleye: " << e.what() << "\n";
    return 2;
  }
}

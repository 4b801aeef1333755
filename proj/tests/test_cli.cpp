#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "owleye/dictionary.hpp"
#include "owleye/graph.hpp"
#include "owleye/synth.hpp"
#include "support/helpers.hpp"

#ifndef OWLEYE_CLI_PATH
#error "OWLEYE_CLI_PATH must be defined by the build"
#endif
#ifndef OWLEYE_SYNTH_PATH
#error "OWLEYE_SYNTH_PATH must be defined by the build"
#endif

using namespace owleye;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OWLEYE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_synth(const std::string& args) {
  const std::string cmd = std::string(OWLEYE_SYNTH_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct CliWorkspace {
  testutil::TempDir dir{"cli"};
  std::string train0, train1, test, aux, config, model;

  CliWorkspace() {
    train0 = (dir.path() / "train0").string();
    train1 = (dir.path() / "train1").string();
    test = (dir.path() / "test").string();
    aux = (dir.path() / "aux").string();
    model = (dir.path() / "model.owlm").string();
    REQUIRE(run_synth("--out " + train0 +
                      " --nodes 50 --raw-dim 10 --seed 1 --cliques 1 --clique-size 4 "
                      "--contextual 2") == 0);
    REQUIRE(run_synth("--out " + train1 +
                      " --nodes 50 --raw-dim 14 --seed 2 --cliques 1 --clique-size 4 "
                      "--contextual 2 --feature-scale 2.5") == 0);
    REQUIRE(run_synth("--out " + test +
                      " --nodes 50 --raw-dim 12 --seed 3 --cliques 1 --clique-size 4 "
                      "--contextual 2") == 0);
    REQUIRE(run_synth("--out " + aux +
                      " --nodes 50 --raw-dim 11 --seed 4 --cliques 1 --clique-size 4 "
                      "--contextual 2") == 0);

    config = (dir.path() / "exp.toml").string();
    std::ofstream os(config);
    os << "d = 8\nlayers = 3\nn_sup = 10\nepochs = 3\nlr = 1e-4\ntau_a = 1.0\n"
       << "k = 0.25\npairs_per_graph = 16\ntrials = 2\nseed = 11\n"
       << "train_dirs = " << train0 << "," << train1 << "\n"
       << "test_dirs = " << test << "\n"
       << "out_dir = " << (dir.path() / "out").string() << "\n";
  }
};

CliWorkspace& ws() {
  static CliWorkspace w;
  return w;
}

}  // namespace

TEST_CASE("cli: help exits 0 on every subcommand, unknown flags exit 1") {
  CHECK(run_cli("--help") == 0);
  for (const char* sub :
       {"inject", "align", "train", "extract-dict", "score", "finetune", "eval",
        "attn-export"})
    CHECK(run_cli(std::string(sub) + " --help") == 0);
  CHECK(run_cli("dict --help") == 0);
  CHECK(run_cli("dict add --help") == 0);
  CHECK(run_cli("diag --help") == 0);
  CHECK(run_cli("diag distances --help") == 0);

  CHECK(run_cli("score --totally-unknown-flag") == 1);
  CHECK(run_cli("no-such-subcommand") == 1);
  CHECK(run_cli("") == 1);
}

TEST_CASE("cli: train then deterministic scoring") {
  CliWorkspace& w = ws();
  REQUIRE(run_cli("train --config " + w.config + " --out " + w.model) == 0);
  REQUIRE(std::filesystem::exists(w.model));

  const std::string s1 = (w.dir.path() / "s1.csv").string();
  const std::string s2 = (w.dir.path() / "s2.csv").string();
  CHECK(run_cli("score --checkpoint " + w.model + " --graph " + w.test +
                " --seed 7 --out " + s1) == 0);
  CHECK(run_cli("score --checkpoint " + w.model + " --graph " + w.test +
                " --seed 7 --out " + s2) == 0);
  CHECK(testutil::read_file(s1) == testutil::read_file(s2));  // byte-identical

  // node_id,score rows for every node.
  std::ifstream is(s1);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    CHECK(line.find(',') != std::string::npos);
    ++rows;
  }
  CHECK(rows == 50);

  // Inputs untouched by scoring.
  CHECK(run_cli("score --checkpoint " + w.model + " --graph " + w.test +
                " --seed 8 --out " + s2) == 0);
  CHECK(testutil::read_file(s1) != testutil::read_file(s2));
}

TEST_CASE("cli: dict add appends one entry and leaves the checkpoint alone") {
  CliWorkspace& w = ws();
  if (!std::filesystem::exists(w.model))
    REQUIRE(run_cli("train --config " + w.config + " --out " + w.model) == 0);

  const std::string dict_path = (w.dir.path() / "aux.owld").string();
  REQUIRE(run_cli("extract-dict --checkpoint " + w.model + " --graph " + w.aux +
                  " --out " + dict_path + " --n-sup 6 --seed 1") == 0);
  PatternDictionary d1 = load_dictionary(dict_path);
  CHECK(d1.entries.size() == 1);
  CHECK(d1.entries[0].pattern_count() == 6);

  const std::string model_before = testutil::read_file(w.model);
  REQUIRE(run_cli("dict add --dict " + dict_path + " --checkpoint " + w.model +
                  " --graph " + w.train0 + " --n-sup 6 --seed 2") == 0);
  PatternDictionary d2 = load_dictionary(dict_path);
  CHECK(d2.entries.size() == 2);
  CHECK(d2.entries[0].graph_id == d1.entries[0].graph_id);
  CHECK(testutil::read_file(w.model) == model_before);

  // Scoring with the aux dictionary shifts scores deterministically.
  const std::string sa = (w.dir.path() / "sa.csv").string();
  const std::string sb = (w.dir.path() / "sb.csv").string();
  CHECK(run_cli("score --checkpoint " + w.model + " --graph " + w.test +
                " --seed 7 --out " + sa + " --aux-dict " + dict_path) == 0);
  CHECK(run_cli("score --checkpoint " + w.model + " --graph " + w.test +
                " --seed 7 --out " + sb + " --aux-dict " + dict_path) == 0);
  CHECK(testutil::read_file(sa) == testutil::read_file(sb));
  CHECK(testutil::read_file(sa) != testutil::read_file((w.dir.path() / "s1.csv")));
}

TEST_CASE("cli: eval produces the metrics files") {
  CliWorkspace& w = ws();
  CHECK(run_cli("eval --config " + w.config) == 0);
  const auto out = w.dir.path() / "out";
  REQUIRE(std::filesystem::exists(out / "metrics.csv"));
  std::ifstream is(out / "metrics.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3);  // header + 2 trials x 1 graph
  CHECK(std::filesystem::exists(out / "summary.md"));
}

TEST_CASE("cli: finetune, diag, attn-export and inject run end to end") {
  CliWorkspace& w = ws();
  if (!std::filesystem::exists(w.model))
    REQUIRE(run_cli("train --config " + w.config + " --out " + w.model) == 0);

  const std::string ft_model = (w.dir.path() / "ft.owlm").string();
  CHECK(run_cli("finetune --checkpoint " + w.model + " --graph " + w.test +
                " --normals 1,2,3,4,6 --anomalies 0,5,7,8,9 --epochs 2 --seed 3 --out " +
                ft_model) == 0);
  CHECK(std::filesystem::exists(ft_model));
  // Missing anomaly list fails validation (exit 1).
  CHECK(run_cli("finetune --checkpoint " + w.model + " --graph " + w.test +
                " --normals 1,2 --anomalies '' --epochs 1 --out " + ft_model) == 1);

  const std::string diag_out = (w.dir.path() / "diag").string();
  CHECK(run_cli("diag distances --graph " + w.test + " --out " + diag_out +
                " --stage all --checkpoint " + w.model + " --pairs 400 --seed 5") == 0);
  for (const char* stage : {"raw", "projected", "aligned"}) {
    CHECK(std::filesystem::exists(std::filesystem::path(diag_out) /
                                  (std::string(stage) + "_summary.csv")));
    CHECK(std::filesystem::exists(std::filesystem::path(diag_out) /
                                  (std::string(stage) + "_scatter.csv")));
  }

  const std::string attn_out = (w.dir.path() / "attn").string();
  CHECK(run_cli("attn-export --checkpoint " + w.model + " --graph " + w.test +
                " --nodes 0,3 --seed 2 --out " + attn_out) == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(attn_out) / "attn_attr_node0.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(attn_out) / "attn_struc_node3.csv"));

  const std::string injected = (w.dir.path() / "injected").string();
  CHECK(run_cli("inject --graph " + w.test + " --out " + injected +
                " --cliques 1 --clique-size 3 --contextual 2 --seed 4") == 0);
  GraphDataset g = load_graph_dir(injected);
  REQUIRE(g.labels.has_value());
  std::size_t anomalies = 0;
  for (auto v : *g.labels) anomalies += v;
  CHECK(anomalies == 5);

  const std::string align_out = (w.dir.path() / "aligned").string();
  CHECK(run_cli("align --config " + w.config + " --out " + align_out) == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(align_out) / "alignment_stats.csv"));

  // Runtime errors (missing files) exit 2.
  CHECK(run_cli("score --checkpoint /nonexistent.owlm --graph " + w.test +
                " --out /tmp/x.csv") == 2);
}

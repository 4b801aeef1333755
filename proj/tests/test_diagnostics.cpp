#include <doctest.h>

#include <cmath>
#include <fstream>

#include "owleye/align.hpp"
#include "owleye/diagnostics.hpp"
#include "owleye/error.hpp"
#include "owleye/synth.hpp"
#include "support/helpers.hpp"

using namespace owleye;

TEST_CASE("distance_diagnostic: all-normal graph populates only NN") {
  Rng rng(1);
  GraphDataset g;
  g.name = "clean";
  g.n = 12;
  g.x_raw = testutil::random_matrix(12, 3, rng);
  g.labels = std::vector<std::uint8_t>(12, 0);

  DistanceDiagnostic diag = distance_diagnostic(g, g.x_raw, 1000, Rng(2));
  CHECK(diag.exact_pairs);
  CHECK(diag.classes[0].count == 12 * 11 / 2);
  CHECK(diag.classes[1].count == 0);
  CHECK(diag.classes[2].count == 0);
  CHECK(diag.scatter.rows() == 12);
  CHECK(diag.scatter.cols() == 2);

  GraphDataset no_labels = g;
  no_labels.labels.reset();
  CHECK_THROWS_AS(distance_diagnostic(no_labels, g.x_raw, 100, Rng(2)), InvalidArgument);
}

TEST_CASE("class medians scale uniformly between projected and aligned stages") {
  SynthSpec spec;
  spec.nodes = 80;
  spec.raw_dim = 10;
  spec.n_cliques = 1;
  spec.clique_size = 4;
  spec.n_contextual = 3;
  GraphDataset g = make_synthetic_graph("stagecheck", spec, Rng(3));

  auto [aligned, stats] = align_collection({g}, 6, 1.0, Rng(4));
  Matrix projected = project_features(g, 6, Rng(4));
  const double factor =
      std::max(stats.per_graph[0].scale, stats.tau) / stats.per_graph[0].avg_norm;

  // Same seed => same sampled pair set per stage.
  DistanceDiagnostic dp = distance_diagnostic(g, projected, 500, Rng(5));
  DistanceDiagnostic da = distance_diagnostic(g, aligned[0].x, 500, Rng(5));
  for (std::size_t cls = 0; cls < 3; ++cls) {
    if (dp.classes[cls].count == 0) continue;
    CHECK(da.classes[cls].median ==
          doctest::Approx(dp.classes[cls].median * factor).epsilon(1e-9));
    CHECK(da.classes[cls].mean ==
          doctest::Approx(dp.classes[cls].mean * factor).epsilon(1e-9));
  }
}

TEST_CASE("contextual injection separates NA from NN at the raw stage") {
  SynthSpec spec;
  spec.nodes = 100;
  spec.raw_dim = 8;
  spec.clusters = 3;
  spec.n_cliques = 0;
  spec.clique_size = 0;
  spec.n_contextual = 8;
  std::size_t hits = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GraphDataset g = make_synthetic_graph("ctx", spec, Rng(seed));
    DistanceDiagnostic diag = distance_diagnostic(g, g.x_raw, 5000, Rng(seed));
    REQUIRE(diag.classes[0].count > 0);
    REQUIRE(diag.classes[1].count > 0);
    if (diag.classes[1].median > diag.classes[0].median) ++hits;
  }
  CHECK(hits >= 4);  // far-feature swaps push NA distances up
}

TEST_CASE("diagnostic CSV layout") {
  SynthSpec spec;
  spec.nodes = 40;
  spec.raw_dim = 6;
  spec.n_cliques = 1;
  spec.clique_size = 3;
  spec.n_contextual = 2;
  GraphDataset g = make_synthetic_graph("csv", spec, Rng(6));
  DistanceDiagnostic diag = distance_diagnostic(g, g.x_raw, 200, Rng(7));

  testutil::TempDir dir("diagcsv");
  write_distance_diagnostic(diag, g, dir.path(), "raw");
  std::ifstream summary(dir.path() / "raw_summary.csv");
  REQUIRE(summary.good());
  std::string header;
  std::getline(summary, header);
  CHECK(header == "class,count,mean,median,exact_pairs");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(summary, line)) ++rows;
  CHECK(rows == 3);  // NN, NA, AA always emitted (blank stats when empty)

  std::ifstream hist(dir.path() / "raw_hist.csv");
  REQUIRE(hist.good());
  std::getline(hist, header);
  CHECK(header == "class,bin,bin_lo,bin_hi,count");

  std::ifstream scatter(dir.path() / "raw_scatter.csv");
  REQUIRE(scatter.good());
  std::getline(scatter, header);
  CHECK(header == "node_id,pc1,pc2,label");
  rows = 0;
  while (std::getline(scatter, line)) ++rows;
  CHECK(rows == 40);
}

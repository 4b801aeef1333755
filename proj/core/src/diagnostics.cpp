#include "owleye/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "io_util.hpp"
#include "owleye/error.hpp"
#include "owleye/numerics.hpp"

namespace owleye {

namespace {

double row_distance(const Matrix& x, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const double diff = x(a, c) - x(b, c);
    s += diff * diff;
  }
  return std::sqrt(s);
}

ClassDistanceStats summarize(std::string name, std::vector<double> values) {
  ClassDistanceStats out;
  out.pair_class = std::move(name);
  out.count = values.size();
  out.histogram.assign(kDiagnosticHistogramBins, 0);
  if (values.empty()) return out;

  double total = 0.0;
  for (double v : values) total += v;
  out.mean = total / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  out.median = m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);

  out.hist_lo = values.front();
  out.hist_hi = values.back();
  const double span = out.hist_hi - out.hist_lo;
  for (double v : values) {
    std::size_t bin = 0;
    if (span > 0.0) {
      bin = static_cast<std::size_t>((v - out.hist_lo) / span *
                                     static_cast<double>(kDiagnosticHistogramBins));
      bin = std::min(bin, kDiagnosticHistogramBins - 1);
    }
    ++out.histogram[bin];
  }
  return out;
}

}  // namespace

DistanceDiagnostic distance_diagnostic(const GraphDataset& g, const Matrix& x_stage,
                                       std::size_t sample_pairs, const Rng& rng) {
  g.validate();
  if (!g.labels) throw InvalidArgument("distance_diagnostic: labels required");
  if (x_stage.rows() != g.n)
    throw InvalidArgument("distance_diagnostic: stage matrix rows != node count");
  if (sample_pairs == 0) throw InvalidArgument("distance_diagnostic: sample_pairs = 0");

  const auto& labels = *g.labels;
  std::vector<double> by_class[3];  // NN, NA, AA

  auto record = [&](std::size_t a, std::size_t b) {
    const std::size_t cls = labels[a] + labels[b];
    by_class[cls].push_back(row_distance(x_stage, a, b));
  };

  DistanceDiagnostic diag;
  const std::size_t total_pairs = g.n * (g.n - 1) / 2;
  if (total_pairs <= sample_pairs) {
    diag.exact_pairs = true;
    for (std::size_t a = 0; a < g.n; ++a)
      for (std::size_t b = a + 1; b < g.n; ++b) record(a, b);
  } else {
    diag.exact_pairs = false;
    Rng pair_rng = rng.derive(Rng::kDiagnostics);
    for (std::size_t t = 0; t < sample_pairs; ++t) {
      std::size_t a = static_cast<std::size_t>(pair_rng.uniform_index(g.n));
      std::size_t b = static_cast<std::size_t>(pair_rng.uniform_index(g.n - 1));
      if (b >= a) ++b;  // uniform over distinct pairs
      record(a, b);
    }
  }
  diag.classes[0] = summarize("NN", std::move(by_class[0]));
  diag.classes[1] = summarize("NA", std::move(by_class[1]));
  diag.classes[2] = summarize("AA", std::move(by_class[2]));

  Rng scatter_rng = rng.derive(Rng::kDiagnostics, 1);
  diag.scatter = pca_fit_transform(x_stage, 2, scatter_rng);
  return diag;
}

void write_distance_diagnostic(const DistanceDiagnostic& diag, const GraphDataset& g,
                               const std::filesystem::path& dir,
                               const std::string& stage) {
  io::atomic_write(dir / (stage + "_summary.csv"), [&](std::ostream& os) {
    os << "class,count,mean,median,exact_pairs\n";
    for (const auto& cs : diag.classes) {
      os << cs.pair_class << ',' << cs.count << ',';
      if (cs.count > 0) os << io::format_double(cs.mean);
      os << ',';
      if (cs.count > 0) os << io::format_double(cs.median);
      os << ',' << (diag.exact_pairs ? "true" : "false") << '\n';
    }
  });

  io::atomic_write(dir / (stage + "_hist.csv"), [&](std::ostream& os) {
    os << "class,bin,bin_lo,bin_hi,count\n";
    for (const auto& cs : diag.classes) {
      if (cs.count == 0) continue;
      const double width = (cs.hist_hi - cs.hist_lo) /
                           static_cast<double>(kDiagnosticHistogramBins);
      for (std::size_t b = 0; b < cs.histogram.size(); ++b) {
        os << cs.pair_class << ',' << b << ','
           << io::format_double(cs.hist_lo + width * static_cast<double>(b)) << ','
           << io::format_double(cs.hist_lo + width * static_cast<double>(b + 1)) << ','
           << cs.histogram[b] << '\n';
      }
    }
  });

  io::atomic_write(dir / (stage + "_scatter.csv"), [&](std::ostream& os) {
    os << "node_id,pc1,pc2,label\n";
    for (std::size_t v = 0; v < diag.scatter.rows(); ++v) {
      os << v << ',' << io::format_double(diag.scatter(v, 0)) << ','
         << io::format_double(diag.scatter(v, 1)) << ','
         << static_cast<int>((*g.labels)[v]) << '\n';
    }
  });
}

}  // namespace owleye

#include "owleye/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "io_util.hpp"
#include "owleye/error.hpp"

namespace owleye {

namespace fs = std::filesystem;

namespace {

void warn(const std::string& msg) { std::cerr << "owleye: warning: " << msg << "\n"; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::uint32_t parse_u32(std::string_view tok, const std::string& file, std::size_t line) {
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw FormatError(file + " line " + std::to_string(line) + ": expected integer, got \"" +
                      std::string(tok) + "\"");
  return value;
}

double parse_f64(std::string_view tok, const std::string& file, std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw FormatError(file + " line " + std::to_string(line) + ": expected number, got \"" +
                      std::string(tok) + "\"");
  return value;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

Matrix load_features_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  const std::string name = path.filename().string();
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    auto toks = split_csv_line(sv);
    std::vector<double> row;
    row.reserve(toks.size());
    for (auto t : toks) row.push_back(parse_f64(t, name, line_no));
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(name + " line " + std::to_string(line_no) +
                        ": row has " + std::to_string(row.size()) + " values, expected " +
                        std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(name + ": no feature rows");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  return m;
}

Matrix load_features_fmat(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  io::Reader rd(is, path.filename().string());
  rd.expect_magic("FMAT");
  const std::uint32_t version = rd.u32();
  if (version != 1) rd.fail("unsupported version " + std::to_string(version));
  const std::uint32_t rows = rd.u32();
  const std::uint32_t cols = rd.u32();
  if (rows == 0 || cols == 0) rd.fail("empty matrix");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rd.f64();
  return m;
}

}  // namespace

void GraphDataset::validate() const {
  if (n == 0) throw InvalidArgument("graph \"" + name + "\": no nodes");
  if (x_raw.rows() != n)
    throw InvalidArgument("graph \"" + name + "\": feature rows (" +
                          std::to_string(x_raw.rows()) + ") != node count (" +
                          std::to_string(n) + ")");
  for (const auto& [u, v] : edges) {
    if (u >= n || v >= n)
      throw InvalidArgument("graph \"" + name + "\": edge endpoint out of range");
    if (u == v) throw InvalidArgument("graph \"" + name + "\": stored self-loop");
    if (u > v) throw InvalidArgument("graph \"" + name + "\": edge not canonical (u < v)");
  }
  if (labels) {
    if (labels->size() != n)
      throw InvalidArgument("graph \"" + name + "\": label count != node count");
    for (auto v : *labels)
      if (v > 1) throw InvalidArgument("graph \"" + name + "\": labels must be 0/1");
  }
}

GraphDataset load_graph_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());

  GraphDataset g;
  g.name = dir.filename().string();

  const fs::path fmat = dir / "features.fmat";
  const fs::path fcsv = dir / "features.csv";
  if (fs::exists(fmat))
    g.x_raw = load_features_fmat(fmat);
  else if (fs::exists(fcsv))
    g.x_raw = load_features_csv(fcsv);
  else
    throw IoError("no features.fmat or features.csv in " + dir.string());
  g.n = g.x_raw.rows();

  const fs::path epath = dir / "edges.csv";
  std::ifstream es(epath);
  if (!es) throw IoError("cannot open " + epath.string());
  std::set<std::pair<std::uint32_t, std::uint32_t>> edge_set;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dropped_loops = 0, dropped_dups = 0;
  while (std::getline(es, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    auto toks = split_csv_line(sv);
    if (toks.size() != 2)
      throw FormatError("edges.csv line " + std::to_string(line_no) +
                        ": expected \"u,v\"");
    std::uint32_t u = parse_u32(toks[0], "edges.csv", line_no);
    std::uint32_t v = parse_u32(toks[1], "edges.csv", line_no);
    if (u >= g.n || v >= g.n)
      throw FormatError("edges.csv line " + std::to_string(line_no) + ": node index " +
                        std::to_string(std::max(u, v)) + " out of range (graph has " +
                        std::to_string(g.n) + " nodes)");
    if (u == v) {
      ++dropped_loops;
      continue;
    }
    if (!edge_set.emplace(std::min(u, v), std::max(u, v)).second) ++dropped_dups;
  }
  if (dropped_loops > 0)
    warn("edges.csv: dropped " + std::to_string(dropped_loops) + " self-loop line(s)");
  if (dropped_dups > 0)
    warn("edges.csv: collapsed " + std::to_string(dropped_dups) +
         " duplicate/reversed edge line(s)");
  g.edges.assign(edge_set.begin(), edge_set.end());

  const fs::path lpath = dir / "labels.csv";
  if (fs::exists(lpath)) {
    std::ifstream ls(lpath);
    if (!ls) throw IoError("cannot open " + lpath.string());
    std::vector<std::uint8_t> labels(g.n, 0);
    line_no = 0;
    while (std::getline(ls, line)) {
      ++line_no;
      std::string_view sv = trim(line);
      if (sv.empty()) continue;
      auto toks = split_csv_line(sv);
      if (toks.size() != 2)
        throw FormatError("labels.csv line " + std::to_string(line_no) +
                          ": expected \"node_id,label\"");
      std::uint32_t node = parse_u32(toks[0], "labels.csv", line_no);
      std::uint32_t label = parse_u32(toks[1], "labels.csv", line_no);
      if (node >= g.n)
        throw FormatError("labels.csv line " + std::to_string(line_no) + ": node index " +
                          std::to_string(node) + " out of range (graph has " +
                          std::to_string(g.n) + " nodes)");
      if (label > 1)
        throw FormatError("labels.csv line " + std::to_string(line_no) +
                          ": label must be 0 or 1");
      labels[node] = static_cast<std::uint8_t>(label);
    }
    g.labels = std::move(labels);
  }

  const fs::path mpath = dir / "meta.json";
  if (fs::exists(mpath)) {
    std::ifstream ms(mpath);
    if (!ms) throw IoError("cannot open " + mpath.string());
    nlohmann::json j;
    try {
      ms >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("meta.json: " + std::string(e.what()));
    }
    if (j.contains("name")) g.name = j.at("name").get<std::string>();
    if (j.contains("domain")) g.domain_tag = j.at("domain").get<std::string>();
  }

  g.validate();
  return g;
}

void save_graph_dir(const GraphDataset& g, const fs::path& dir, bool binary_features) {
  g.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  io::atomic_write(dir / "edges.csv", [&](std::ostream& os) {
    for (const auto& [u, v] : g.edges) os << u << ',' << v << '\n';
  });

  if (binary_features) {
    io::atomic_write(dir / "features.fmat", [&](std::ostream& os) {
      os.write("FMAT", 4);
      io::write_u32(os, 1);
      io::write_u32(os, static_cast<std::uint32_t>(g.x_raw.rows()));
      io::write_u32(os, static_cast<std::uint32_t>(g.x_raw.cols()));
      for (std::size_t i = 0; i < g.x_raw.size(); ++i) io::write_f64(os, g.x_raw.data()[i]);
    });
  } else {
    io::atomic_write(dir / "features.csv", [&](std::ostream& os) {
      for (std::size_t r = 0; r < g.x_raw.rows(); ++r) {
        for (std::size_t c = 0; c < g.x_raw.cols(); ++c) {
          if (c) os << ',';
          os << io::format_double(g.x_raw(r, c));
        }
        os << '\n';
      }
    });
  }

  if (g.labels) {
    io::atomic_write(dir / "labels.csv", [&](std::ostream& os) {
      for (std::size_t i = 0; i < g.n; ++i)
        os << i << ',' << static_cast<int>((*g.labels)[i]) << '\n';
    });
  }

  io::atomic_write(dir / "meta.json", [&](std::ostream& os) {
    nlohmann::json j{{"name", g.name}, {"domain", g.domain_tag}};
    os << j.dump(2) << '\n';
  });
}

NormalizedAdjacency build_normalized_adjacency(const GraphDataset& g, AdjacencyMode mode) {
  g.validate();
  NormalizedAdjacency adj;
  adj.n = g.n;
  adj.values = Matrix(g.n, g.n, 0.0);

  if (mode == AdjacencyMode::kRaw) {
    for (const auto& [u, v] : g.edges) {
      adj.values(u, v) = 1.0;
      adj.values(v, u) = 1.0;
    }
    return adj;
  }

  std::vector<double> degree(g.n, 1.0);  // self-loop contributes 1 everywhere
  for (const auto& [u, v] : g.edges) {
    degree[u] += 1.0;
    degree[v] += 1.0;
  }
  std::vector<double> inv_sqrt(g.n);
  for (std::size_t i = 0; i < g.n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
  for (std::size_t i = 0; i < g.n; ++i) adj.values(i, i) = inv_sqrt[i] * inv_sqrt[i];
  for (const auto& [u, v] : g.edges) {
    const double w = inv_sqrt[u] * inv_sqrt[v];
    adj.values(u, v) = w;
    adj.values(v, u) = w;
  }
  return adj;
}

GraphDataset inject_anomalies(const GraphDataset& g, std::size_t n_cliques,
                              std::size_t clique_size, std::size_t n_contextual,
                              Rng& rng) {
  g.validate();
  const std::size_t n_structural = n_cliques * clique_size;
  if (n_structural + n_contextual > g.n)
    throw InvalidArgument("inject_anomalies: need " +
                          std::to_string(n_structural + n_contextual) +
                          " distinct nodes but graph has " + std::to_string(g.n));

  GraphDataset out = g;
  std::vector<std::uint8_t> labels(g.n, 0);

  const auto chosen = rng.sample_without_replacement(g.n, n_structural + n_contextual);

  std::set<std::pair<std::uint32_t, std::uint32_t>> edge_set(out.edges.begin(),
                                                             out.edges.end());
  for (std::size_t c = 0; c < n_cliques; ++c) {
    const std::size_t base = c * clique_size;
    for (std::size_t i = 0; i < clique_size; ++i) {
      labels[chosen[base + i]] = 1;
      for (std::size_t j = i + 1; j < clique_size; ++j) {
        auto u = static_cast<std::uint32_t>(chosen[base + i]);
        auto v = static_cast<std::uint32_t>(chosen[base + j]);
        edge_set.emplace(std::min(u, v), std::max(u, v));
      }
    }
  }
  out.edges.assign(edge_set.begin(), edge_set.end());

  // Contextual swaps read from the pre-injection feature rows, so every
  // replaced row equals some original row even if targets overlap candidates.
  const Matrix& original = g.x_raw;
  for (std::size_t t = 0; t < n_contextual; ++t) {
    const std::size_t node = chosen[n_structural + t];
    labels[node] = 1;
    const std::size_t want = std::min<std::size_t>(50, g.n - 1);
    auto drawn = rng.sample_without_replacement(g.n, std::min(g.n, want + 1));
    std::vector<std::size_t> candidates;
    for (std::size_t cand : drawn) {
      if (cand == node) continue;
      candidates.push_back(cand);
      if (candidates.size() == want) break;
    }
    double best = -1.0;
    std::size_t far = candidates.front();
    for (std::size_t cand : candidates) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < original.cols(); ++c) {
        const double diff = original(node, c) - original(cand, c);
        d2 += diff * diff;
      }
      if (d2 > best) {
        best = d2;
        far = cand;
      }
    }
    std::copy(original.row(far).begin(), original.row(far).end(),
              out.x_raw.row(node).begin());
  }

  out.labels = std::move(labels);
  out.validate();
  return out;
}

}  // namespace owleye

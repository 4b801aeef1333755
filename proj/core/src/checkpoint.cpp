#include <fstream>
#include <map>

#include "io_util.hpp"
#include "owleye/error.hpp"
#include "owleye/training.hpp"

namespace owleye {

namespace {

void write_align_stats(std::ostream& os, const AlignmentStats& stats) {
  io::write_u32(os, static_cast<std::uint32_t>(stats.per_graph.size()));
  for (const GraphAlignStats& gs : stats.per_graph) {
    io::write_u16(os, static_cast<std::uint16_t>(gs.graph_id.size()));
    os.write(gs.graph_id.data(), static_cast<std::streamsize>(gs.graph_id.size()));
    io::write_f64(os, gs.avg_norm);
    io::write_f64(os, gs.mean_dist);
    io::write_f64(os, gs.mean_dist_normed);
    io::write_f64(os, gs.scale);
    io::write_u8(os, gs.degenerate ? 1 : 0);
    io::write_u8(os, gs.approx_dist ? 1 : 0);
  }
  io::write_f64(os, stats.dist_median);
  io::write_f64(os, stats.dist_median_normed);
  io::write_f64(os, stats.tau);
  io::write_u32(os, static_cast<std::uint32_t>(stats.dim));
  io::write_u8(os, stats.aggregation == Aggregation::kMedian ? 0 : 1);
}

AlignmentStats read_align_stats(io::Reader& rd) {
  AlignmentStats stats;
  const std::uint32_t count = rd.u32();
  stats.per_graph.resize(count);
  for (GraphAlignStats& gs : stats.per_graph) {
    const std::uint16_t len = rd.u16();
    gs.graph_id.resize(len);
    rd.bytes(gs.graph_id.data(), len);
    gs.avg_norm = rd.f64();
    gs.mean_dist = rd.f64();
    gs.mean_dist_normed = rd.f64();
    gs.scale = rd.f64();
    gs.degenerate = rd.u8() != 0;
    gs.approx_dist = rd.u8() != 0;
  }
  stats.dist_median = rd.f64();
  stats.dist_median_normed = rd.f64();
  stats.tau = rd.f64();
  stats.dim = rd.u32();
  stats.aggregation = rd.u8() == 0 ? Aggregation::kMedian : Aggregation::kMean;
  return stats;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  ckpt.params.validate();
  io::atomic_write(path, [&](std::ostream& os) {
    os.write("OWLM", 4);
    io::write_u32(os, 1);
    const std::string config_text = ckpt.config.to_key_values();
    io::write_u32(os, static_cast<std::uint32_t>(config_text.size()));
    os.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
    io::write_u32(os, static_cast<std::uint32_t>(ckpt.epoch));
    io::write_u32(os, static_cast<std::uint32_t>(ckpt.loss_history.size()));
    for (double v : ckpt.loss_history) io::write_f64(os, v);
    write_align_stats(os, ckpt.align_stats);

    const auto named = ckpt.params.named_matrices();
    io::write_u32(os, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, m] : named) {
      io::write_u16(os, static_cast<std::uint16_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      io::write_u32(os, static_cast<std::uint32_t>(m->rows()));
      io::write_u32(os, static_cast<std::uint32_t>(m->cols()));
    }
    for (const auto& [name, m] : named)
      for (std::size_t i = 0; i < m->size(); ++i) io::write_f64(os, m->data()[i]);

    write_dictionary(ckpt.dict, os);
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::string source = path.filename().string();
  io::Reader rd(is, source);
  rd.expect_magic("OWLM");
  const std::uint32_t version = rd.u32();
  if (version != 1) rd.fail("unsupported version " + std::to_string(version));

  Checkpoint ckpt;
  const std::uint32_t config_len = rd.u32();
  std::string config_text(config_len, '\0');
  rd.bytes(config_text.data(), config_len);
  try {
    ckpt.config = RunConfig::from_string(config_text, source + "(config)");
  } catch (const ConfigError& e) {
    throw FormatError(source + ": bad embedded config: " + e.what());
  }
  ckpt.epoch = rd.u32();
  const std::uint32_t loss_count = rd.u32();
  ckpt.loss_history.resize(loss_count);
  for (double& v : ckpt.loss_history) v = rd.f64();
  ckpt.align_stats = read_align_stats(rd);

  // Rebuild the parameter skeleton from the config, then fill matrices by
  // name so dimension or mode drift is caught immediately.
  Rng dummy(0);
  ckpt.params = init_params(
      ckpt.config.layers, ckpt.config.d, dummy,
      ckpt.config.similarity_channel == SimilarityChannel::kPerChannel,
      ckpt.config.share_qk);

  const std::uint32_t matrix_count = rd.u32();
  std::vector<std::pair<std::string, std::pair<std::uint32_t, std::uint32_t>>> directory;
  directory.reserve(matrix_count);
  for (std::uint32_t i = 0; i < matrix_count; ++i) {
    const std::uint16_t len = rd.u16();
    std::string name(len, '\0');
    rd.bytes(name.data(), len);
    const std::uint32_t rows = rd.u32();
    const std::uint32_t cols = rd.u32();
    directory.emplace_back(std::move(name), std::make_pair(rows, cols));
  }
  auto named = ckpt.params.named_matrices();
  std::map<std::string, Matrix*> by_name;
  for (auto& [name, m] : named) by_name[name] = m;
  if (directory.size() != by_name.size())
    rd.fail("matrix directory holds " + std::to_string(directory.size()) +
            " entries, config implies " + std::to_string(by_name.size()));
  for (const auto& [name, shape] : directory) {
    auto it = by_name.find(name);
    if (it == by_name.end()) rd.fail("unexpected matrix \"" + name + "\"");
    if (it->second->rows() != shape.first || it->second->cols() != shape.second)
      rd.fail("matrix \"" + name + "\" has shape " + std::to_string(shape.first) + "x" +
              std::to_string(shape.second) + ", config implies " +
              std::to_string(it->second->rows()) + "x" +
              std::to_string(it->second->cols()));
  }
  for (const auto& [name, shape] : directory) {
    Matrix* m = by_name[name];
    for (std::size_t i = 0; i < m->size(); ++i) m->data()[i] = rd.f64();
  }

  ckpt.dict = read_dictionary(is, source + "(dictionary)");
  if (ckpt.dict.emb_dim != ckpt.params.emb_dim())
    throw FormatError(source + ": dictionary dimension " +
                      std::to_string(ckpt.dict.emb_dim) + " != model dimension " +
                      std::to_string(ckpt.params.emb_dim()));
  return ckpt;
}

}  // namespace owleye

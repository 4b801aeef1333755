#include "owleye/dictionary.hpp"

#include <fstream>
#include <set>

#include "io_util.hpp"
#include "owleye/error.hpp"
#include "owleye/numerics.hpp"

namespace owleye {

void DictEntry::validate() const {
  if (idx.empty()) throw InvalidArgument("DictEntry \"" + graph_id + "\": no patterns");
  std::set<std::size_t> unique(idx.begin(), idx.end());
  if (unique.size() != idx.size())
    throw InvalidArgument("DictEntry \"" + graph_id + "\": duplicate indices");
  if (dict_h.rows() != idx.size() || dict_r.rows() != idx.size())
    throw InvalidArgument("DictEntry \"" + graph_id + "\": pattern row count mismatch");
  if (dict_h.cols() != dict_r.cols())
    throw InvalidArgument("DictEntry \"" + graph_id + "\": channel dimension mismatch");
}

void PatternDictionary::validate() const {
  for (const DictEntry& e : entries) {
    e.validate();
    if (e.dict_h.cols() != emb_dim)
      throw InvalidArgument("PatternDictionary: entry \"" + e.graph_id +
                            "\" has dimension " + std::to_string(e.dict_h.cols()) +
                            ", dictionary expects " + std::to_string(emb_dim));
  }
}

DictEntry extract_patterns(const std::string& graph_id, const Embeddings& emb,
                           const std::vector<std::uint8_t>* labels, std::size_t n_sup,
                           Rng& rng, std::optional<EntrySource> source) {
  if (n_sup == 0) throw InvalidArgument("extract_patterns: n_sup must be positive");
  if (!emb.h.same_shape(emb.r))
    throw InvalidArgument("extract_patterns: embedding channels disagree in shape");
  if (labels && labels->size() != emb.h.rows())
    throw InvalidArgument("extract_patterns: label count != node count");

  std::vector<std::size_t> candidates;
  if (labels) {
    for (std::size_t i = 0; i < labels->size(); ++i)
      if ((*labels)[i] == 0) candidates.push_back(i);
  } else {
    candidates.resize(emb.h.rows());
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
  }
  if (candidates.empty())
    throw InvalidArgument("extract_patterns: graph \"" + graph_id +
                          "\" has no candidate nodes");

  const std::size_t take = std::min(n_sup, candidates.size());
  const auto picks = rng.sample_without_replacement(candidates.size(), take);

  DictEntry entry;
  entry.graph_id = graph_id;
  entry.source = source.value_or(labels ? EntrySource::kTrainNormal
                                        : EntrySource::kTestPseudo);
  entry.idx.reserve(take);
  for (std::size_t p : picks) entry.idx.push_back(candidates[p]);
  entry.dict_h = gather_rows(emb.h, entry.idx);
  entry.dict_r = gather_rows(emb.r, entry.idx);
  entry.validate();
  return entry;
}

std::vector<double> similarity_scores(const Matrix& query, const Matrix& patterns,
                                      const Matrix& w1, SimilarityTrace* trace) {
  if (patterns.rows() == 0) throw InvalidArgument("similarity_scores: empty pattern set");
  if (query.cols() != w1.rows() || w1.cols() != patterns.cols())
    throw InvalidArgument("similarity_scores: inconsistent shapes");

  Matrix b = matmul(query, w1);
  Matrix probs = masked_softmax(matmul_nt(b, patterns), {}, 1.0);
  std::vector<double> scores(query.rows());
  std::vector<std::size_t> argmax(query.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c)
      if (probs(r, c) > probs(r, best)) best = c;
    argmax[r] = best;
    scores[r] = probs(r, best);
  }
  if (trace) {
    trace->b = std::move(b);
    trace->softmax = std::move(probs);
    trace->argmax = std::move(argmax);
  }
  return scores;
}

Matrix similarity(const Matrix& emb_r_query, const DictEntry& entry, const Matrix& w1) {
  entry.validate();
  const auto scores = similarity_scores(emb_r_query, entry.dict_r, w1);
  Matrix out(emb_r_query.rows(), emb_r_query.cols());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = scores[r];
  return out;
}

void write_dictionary(const PatternDictionary& dict, std::ostream& os) {
  dict.validate();
  os.write("OWLD", 4);
  io::write_u32(os, dict.version);
  io::write_u32(os, static_cast<std::uint32_t>(dict.emb_dim));
  io::write_u32(os, static_cast<std::uint32_t>(dict.entries.size()));
  for (const DictEntry& e : dict.entries) {
    io::write_u16(os, static_cast<std::uint16_t>(e.graph_id.size()));
    os.write(e.graph_id.data(), static_cast<std::streamsize>(e.graph_id.size()));
    io::write_u8(os, static_cast<std::uint8_t>(e.source));
    io::write_u32(os, static_cast<std::uint32_t>(e.idx.size()));
    for (std::size_t i : e.idx) io::write_u32(os, static_cast<std::uint32_t>(i));
    for (std::size_t i = 0; i < e.dict_h.size(); ++i) io::write_f64(os, e.dict_h.data()[i]);
    for (std::size_t i = 0; i < e.dict_r.size(); ++i) io::write_f64(os, e.dict_r.data()[i]);
  }
}

PatternDictionary read_dictionary(std::istream& is, const std::string& source_name) {
  io::Reader rd(is, source_name);
  rd.expect_magic("OWLD");
  PatternDictionary dict;
  dict.version = rd.u32();
  if (dict.version != 1) rd.fail("unsupported version " + std::to_string(dict.version));
  dict.emb_dim = rd.u32();
  const std::uint32_t count = rd.u32();
  dict.entries.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    DictEntry entry;
    const std::uint16_t id_len = rd.u16();
    entry.graph_id.resize(id_len);
    rd.bytes(entry.graph_id.data(), id_len);
    const std::uint8_t source = rd.u8();
    if (source > 2) rd.fail("unknown entry source code " + std::to_string(source));
    entry.source = static_cast<EntrySource>(source);
    const std::uint32_t n_sup = rd.u32();
    if (n_sup == 0) rd.fail("entry with zero patterns");
    entry.idx.resize(n_sup);
    for (std::uint32_t i = 0; i < n_sup; ++i) entry.idx[i] = rd.u32();
    entry.dict_h = Matrix(n_sup, dict.emb_dim);
    for (std::size_t i = 0; i < entry.dict_h.size(); ++i) entry.dict_h.data()[i] = rd.f64();
    entry.dict_r = Matrix(n_sup, dict.emb_dim);
    for (std::size_t i = 0; i < entry.dict_r.size(); ++i) entry.dict_r.data()[i] = rd.f64();
    dict.entries.push_back(std::move(entry));
  }
  try {
    dict.validate();
  } catch (const InvalidArgument& err) {
    throw FormatError(source_name + ": " + err.what());
  }
  return dict;
}

void save_dictionary(const PatternDictionary& dict, const std::filesystem::path& path) {
  io::atomic_write(path, [&](std::ostream& os) { write_dictionary(dict, os); });
}

PatternDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_dictionary(is, path.filename().string());
}

PatternDictionary merge(PatternDictionary dict, std::vector<DictEntry> new_entries) {
  for (DictEntry& e : new_entries) {
    e.validate();
    if (e.dict_h.cols() != dict.emb_dim)
      throw InvalidArgument("merge: entry \"" + e.graph_id + "\" has dimension " +
                            std::to_string(e.dict_h.cols()) + ", dictionary expects " +
                            std::to_string(dict.emb_dim));
    dict.entries.push_back(std::move(e));
  }
  return dict;
}

}  // namespace owleye

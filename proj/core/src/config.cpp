#include "owleye/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "io_util.hpp"
#include "owleye/error.hpp"

namespace owleye {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config key \"" + key + "\": expected number, got \"" + v + "\"");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config key \"" + key + "\": expected non-negative integer, got \"" +
                      v + "\"");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key \"" + key + "\": expected true/false, got \"" + v + "\"");
}

std::vector<std::string> to_list(std::string v) {
  v = trim(v);
  if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.size() >= 2 && ((item.front() == '"' && item.back() == '"') ||
                             (item.front() == '\'' && item.back() == '\'')))
      item = item.substr(1, item.size() - 2);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "d") d = to_u64(key, value);
  else if (key == "layers") layers = to_u64(key, value);
  else if (key == "tau") tau = to_double(key, value);
  else if (key == "tau_a") tau_a = to_double(key, value);
  else if (key == "n_sup") n_sup = to_u64(key, value);
  else if (key == "k") k = to_double(key, value);
  else if (key == "lambda") lambda = to_double(key, value);
  else if (key == "beta") beta = to_double(key, value);
  else if (key == "lr") lr = to_double(key, value);
  else if (key == "epochs") epochs = to_u64(key, value);
  else if (key == "pairs_per_graph") pairs_per_graph = to_u64(key, value);
  else if (key == "seed") seed = to_u64(key, value);
  else if (key == "adjacency") {
    if (value == "sym_norm") adjacency = AdjacencyMode::kSymNorm;
    else if (value == "raw") adjacency = AdjacencyMode::kRaw;
    else throw ConfigError("config key \"adjacency\": expected sym_norm or raw");
  } else if (key == "similarity_channel") {
    if (value == "structure") similarity_channel = SimilarityChannel::kStructure;
    else if (value == "per_channel") similarity_channel = SimilarityChannel::kPerChannel;
    else throw ConfigError("config key \"similarity_channel\": expected structure or per_channel");
  } else if (key == "signed_sqrt") signed_sqrt = to_bool(key, value);
  else if (key == "share_qk") share_qk = to_bool(key, value);
  else if (key == "strict_train_median") strict_train_median = to_bool(key, value);
  else if (key == "aggregation") {
    if (value == "median") aggregation = Aggregation::kMedian;
    else if (value == "mean") aggregation = Aggregation::kMean;
    else throw ConfigError("config key \"aggregation\": expected median or mean");
  } else if (key == "patience") patience = to_u64(key, value);
  else if (key == "trials") trials = to_u64(key, value);
  else if (key == "finetune_epochs") finetune_epochs = to_u64(key, value);
  else if (key == "mode") {
    if (value == "zero_shot") mode = ExperimentMode::kZeroShot;
    else if (value == "dict_add") mode = ExperimentMode::kDictAdd;
    else if (value == "aux_finetune") mode = ExperimentMode::kAuxFinetune;
    else if (value == "nsup_sweep") mode = ExperimentMode::kNsupSweep;
    else throw ConfigError("config key \"mode\": expected zero_shot, dict_add, aux_finetune or nsup_sweep");
  } else if (key == "out_dir") out_dir = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "train_dirs") train_dirs = to_list(value);
  else if (key == "test_dirs") test_dirs = to_list(value);
  else if (key == "aux_dirs") aux_dirs = to_list(value);
  else if (key == "nsup_values") {
    nsup_values.clear();
    for (const std::string& item : to_list(value)) nsup_values.push_back(to_u64(key, item));
    if (nsup_values.empty()) throw ConfigError("config key \"nsup_values\": empty list");
  } else {
    throw ConfigError("unknown config key \"" + key + "\"");
  }
}

RunConfig RunConfig::from_string(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + " line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    try {
      cfg.set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return from_string(buf.str(), path.filename().string());
}

std::string RunConfig::to_key_values() const {
  std::ostringstream os;
  os << "d=" << d << '\n';
  os << "layers=" << layers << '\n';
  os << "tau=" << io::format_double(tau) << '\n';
  os << "tau_a=" << io::format_double(tau_a) << '\n';
  os << "n_sup=" << n_sup << '\n';
  os << "k=" << io::format_double(k) << '\n';
  os << "lambda=" << io::format_double(lambda) << '\n';
  os << "beta=" << io::format_double(beta) << '\n';
  os << "lr=" << io::format_double(lr) << '\n';
  os << "epochs=" << epochs << '\n';
  os << "pairs_per_graph=" << pairs_per_graph << '\n';
  os << "seed=" << seed << '\n';
  os << "adjacency=" << (adjacency == AdjacencyMode::kSymNorm ? "sym_norm" : "raw") << '\n';
  os << "similarity_channel="
     << (similarity_channel == SimilarityChannel::kStructure ? "structure" : "per_channel")
     << '\n';
  os << "signed_sqrt=" << (signed_sqrt ? "true" : "false") << '\n';
  os << "share_qk=" << (share_qk ? "true" : "false") << '\n';
  os << "strict_train_median=" << (strict_train_median ? "true" : "false") << '\n';
  os << "aggregation=" << (aggregation == Aggregation::kMedian ? "median" : "mean") << '\n';
  os << "patience=" << patience << '\n';
  os << "trials=" << trials << '\n';
  os << "finetune_epochs=" << finetune_epochs << '\n';
  os << "mode=";
  switch (mode) {
    case ExperimentMode::kZeroShot: os << "zero_shot"; break;
    case ExperimentMode::kDictAdd: os << "dict_add"; break;
    case ExperimentMode::kAuxFinetune: os << "aux_finetune"; break;
    case ExperimentMode::kNsupSweep: os << "nsup_sweep"; break;
  }
  os << '\n';
  os << "out_dir=" << out_dir << '\n';
  os << "checkpoint=" << checkpoint << '\n';
  os << "train_dirs=" << join(train_dirs) << '\n';
  os << "test_dirs=" << join(test_dirs) << '\n';
  os << "aux_dirs=" << join(aux_dirs) << '\n';
  os << "nsup_values=";
  for (std::size_t i = 0; i < nsup_values.size(); ++i)
    os << (i ? "," : "") << nsup_values[i];
  os << '\n';
  return os.str();
}

}  // namespace owleye

#include "inferem/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace inferem {

Config::Config()
    : entries_{
          {"model.dim", "300", "feature width d shared by embeddings, encoders and decoders"},
          {"model.max_len", "256", "longest embeddable sequence"},
          {"model.layers", "2", "transformer layers per encoder"},
          {"model.heads", "2", "attention heads"},
          {"model.decoder_layers", "2", "decoder layers"},
          {"model.tie_encoders", "false", "share one parameter set across the four context encoders"},
          {"model.kmax", "5", "concept neighbors kept per word"},
          {"train.lr", "1e-4", "Adam learning rate"},
          {"train.batch_size", "16", "dialogues per optimizer step"},
          {"train.epochs", "30", "maximum training epochs"},
          {"train.patience", "5", "early-stopping patience in epochs (validation perplexity)"},
          {"train.seed", "1", "seed for initialization and shuffling"},
          {"train.disable_sip", "false", "skip intention fusion (w/o SIP ablation)"},
          {"train.disable_lup", "false", "skip last-utterance prediction (w/o LUP ablation)"},
          {"loss.alpha1_hi", "1.5", "prediction weight while L^p > L^r"},
          {"loss.alpha1_lo", "0.3", "prediction weight while L^p <= L^r"},
          {"loss.alpha2", "1.2", "emotion loss weight"},
          {"loss.alpha3", "0.12", "emotional attention loss weight"},
          {"loss.switch_normalized", "true", "compare per-token means (not sums) in the alpha1 switch"},
          {"decode.max_steps", "30", "maximum greedy decoding steps"},
          {"metrics.distinct_mode", "pooled", "distinct-n over pooled n-grams (pooled) or mean per response (averaged)"},
          {"data.dir", "", "corpus directory (defaults to INFEREM_DATA_DIR)"},
          {"data.vectors", "", "optional pretrained word vectors (word v1 ... vd)"},
      } {}

Config::Entry& Config::find(const std::string& key) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
  if (it == entries_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return *it;
}

const Config::Entry& Config::find(const std::string& key) const {
  return const_cast<Config*>(this)->find(key);
}

namespace {

bool is_int(const std::string& s) {
  char* end = nullptr;
  std::strtol(s.c_str(), &end, 10);
  return !s.empty() && *end == '\0';
}

bool is_double(const std::string& s) {
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return !s.empty() && *end == '\0';
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void Config::validate(const Entry& e) const {
  const std::string& k = e.key;
  const std::string& v = e.value;
  auto fail = [&](const char* what) {
    throw ConfigError("invalid value '" + v + "' for " + k + ": " + what);
  };
  if (k == "model.tie_encoders" || k == "train.disable_sip" || k == "train.disable_lup" ||
      k == "loss.switch_normalized") {
    if (v != "true" && v != "false") fail("expected true or false");
  } else if (k == "metrics.distinct_mode") {
    if (v != "pooled" && v != "averaged") fail("expected pooled or averaged");
  } else if (k == "data.dir" || k == "data.vectors") {
    // free-form paths
  } else if (k.rfind("loss.", 0) == 0 || k == "train.lr") {
    if (!is_double(v) || std::strtod(v.c_str(), nullptr) < 0) fail("expected a non-negative number");
  } else if (k == "model.layers" || k == "model.decoder_layers" || k == "train.epochs" ||
             k == "train.seed") {
    if (!is_int(v) || std::strtol(v.c_str(), nullptr, 10) < 0) fail("expected a non-negative integer");
  } else {
    if (!is_int(v) || std::strtol(v.c_str(), nullptr, 10) < 1) fail("expected a positive integer");
  }
}

void Config::set(const std::string& key, const std::string& value) {
  Entry& e = find(key);
  Entry candidate = e;
  candidate.value = trim(value);
  validate(candidate);
  e.value = candidate.value;
}

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& err) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + err.what());
    }
  }
}

void Config::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& e : entries_) out << e.key << " = " << e.value << '\n';
}

const std::string& Config::get(const std::string& key) const { return find(key).value; }
long Config::get_int(const std::string& key) const { return std::strtol(get(key).c_str(), nullptr, 10); }
double Config::get_double(const std::string& key) const { return std::strtod(get(key).c_str(), nullptr); }
bool Config::get_bool(const std::string& key) const { return get(key) == "true"; }

std::string Config::describe() const {
  std::ostringstream ss;
  for (const auto& e : entries_) {
    ss << "  " << e.key << " (default: " << (e.value.empty() ? "\"\"" : e.value) << ")\n      "
       << e.help << '\n';
  }
  return ss.str();
}

}  // namespace inferem

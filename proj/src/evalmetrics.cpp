#include "inferem/evalmetrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "inferem/corpus.hpp"

namespace inferem {

DistinctMode parse_distinct_mode(const std::string& name) {
  if (name == "pooled") return DistinctMode::pooled;
  if (name == "averaged") return DistinctMode::averaged;
  throw MetricError("distinct mode must be pooled or averaged, got '" + name + "'");
}

double emotion_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw MetricError("emotion_accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                      std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw MetricError("emotion_accuracy: no examples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double perplexity(std::span<const double> per_token_nlls) {
  if (per_token_nlls.empty()) throw MetricError("perplexity: no tokens");
  double sum = 0.0;
  for (double v : per_token_nlls) sum += v;
  return std::exp(sum / static_cast<double>(per_token_nlls.size()));
}

namespace {

template <typename Token, typename Keep>
double distinct_impl(const std::vector<std::vector<Token>>& responses, int n, DistinctMode mode, Keep keep) {
  if (n != 1 && n != 2) throw MetricError("distinct_n: n must be 1 or 2");
  std::set<std::vector<Token>> pooled;
  std::size_t pooled_total = 0;
  double ratio_sum = 0.0;
  std::size_t counted = 0;
  for (const auto& raw : responses) {
    std::vector<Token> toks;
    for (const auto& t : raw) {
      if (keep(t)) toks.push_back(t);
    }
    if (toks.size() < static_cast<std::size_t>(n)) continue;
    std::set<std::vector<Token>> local;
    const std::size_t grams = toks.size() - static_cast<std::size_t>(n) + 1;
    for (std::size_t i = 0; i < grams; ++i) {
      std::vector<Token> g(toks.begin() + static_cast<std::ptrdiff_t>(i),
                           toks.begin() + static_cast<std::ptrdiff_t>(i) + n);
      local.insert(g);
      pooled.insert(std::move(g));
    }
    pooled_total += grams;
    ratio_sum += static_cast<double>(local.size()) / static_cast<double>(grams);
    ++counted;
  }
  if (counted == 0) throw MetricError("distinct_n: no " + std::to_string(n) + "-grams");
  if (mode == DistinctMode::pooled) {
    return 100.0 * static_cast<double>(pooled.size()) / static_cast<double>(pooled_total);
  }
  return 100.0 * ratio_sum / static_cast<double>(counted);
}

}  // namespace

double distinct_n(const std::vector<std::vector<int>>& responses, int n, DistinctMode mode) {
  return distinct_impl(responses, n, mode, [](int t) { return t != kPad && t != kEos; });
}

double distinct_n(const std::vector<std::vector<std::string>>& responses, int n, DistinctMode mode) {
  return distinct_impl(responses, n, mode,
                       [](const std::string& t) { return t != "<pad>" && t != "<eos>"; });
}

void EvalReport::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(emotion_accuracy) || emotion_accuracy < 0.0 || emotion_accuracy > 1.0) {
    throw MetricError("emotion accuracy out of [0,1]");
  }
  if (!finite(perplexity) || perplexity <= 0.0) throw MetricError("perplexity must be positive and finite");
  for (double d : {distinct1, distinct2}) {
    if (!finite(d) || d < 0.0 || d > 100.0) throw MetricError("distinct value out of [0,100]");
  }
}

bool operator==(const EvalReport& a, const EvalReport& b) {
  return a.emotion_accuracy == b.emotion_accuracy && a.perplexity == b.perplexity &&
         a.distinct1 == b.distinct1 && a.distinct2 == b.distinct2 && a.dialogues == b.dialogues;
}

void write_report(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  char buf[64];
  auto line = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << " = " << buf << '\n';
  };
  line("emotion_accuracy", r.emotion_accuracy);
  line("perplexity", r.perplexity);
  line("distinct1", r.distinct1);
  line("distinct2", r.distinct2);
  out << "dialogues = " << r.dialogues << '\n';
  if (!out) throw std::runtime_error("failed writing report " + path.string());
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read report " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw MetricError("report is missing " + key);
    return it->second;
  };
  EvalReport r;
  r.emotion_accuracy = std::stod(get("emotion_accuracy"));
  r.perplexity = std::stod(get("perplexity"));
  r.distinct1 = std::stod(get("distinct1"));
  r.distinct2 = std::stod(get("distinct2"));
  r.dialogues = std::stoull(get("dialogues"));
  return r;
}

void print_report_table(std::ostream& out, const EvalReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %-12s %-12s %-12s\n", "Accuracy(%)", "Perplexity", "Distinct-1",
                "Distinct-2");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-12.2f %-12.2f %-12.2f %-12.2f\n", 100.0 * r.emotion_accuracy,
                r.perplexity, r.distinct1, r.distinct2);
  out << buf;
}

}  // namespace inferem

#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "inferem/model.hpp"
#include "inferem/pipeline.hpp"
#include "inferem/tensor.hpp"

namespace testing {

using inferem::Tensor;

inline Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("inferem_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// --- Scalar-loop oracles: written without the autograd library. ------------

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

inline Mat mat_mul(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline Mat add_bias(Mat m, const Tensor& bias) {
  for (auto& row : m)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  return m;
}

inline std::vector<double> softmax_vec(std::vector<double> v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double z = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : v) x /= z;
  return v;
}

inline Mat layer_norm_rows(const Mat& m, const Tensor& gain, const Tensor& bias, double eps = 1e-5) {
  Mat out = m;
  for (auto& row : out) {
    double mean = 0.0;
    for (double x : row) mean += x;
    mean /= static_cast<double>(row.size());
    double var = 0.0;
    for (double x : row) var += (x - mean) * (x - mean);
    var /= static_cast<double>(row.size());
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean) * inv * gain[j] + bias[j];
  }
  return out;
}

inline double max_diff(const Mat& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) worst = std::max(worst, std::abs(a[r][c] - b(r, c)));
  return worst;
}

/// Overwrites every parameter with uniform(lo, hi) values so that zero biases
/// and unit gains do not hide wiring mistakes from an oracle comparison.
inline void randomize(inferem::ag::ParameterStore& store, std::mt19937_64& rng, double lo = -0.5,
                      double hi = 0.5) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& p : store)
    for (auto& v : p->value.values()) v = u(rng);
}

// --- Model fixtures ----------------------------------------------------------

/// A hand-built dialogue world with a small vocabulary and knowledge base.
struct World {
  inferem::Vocabulary vocab;
  inferem::KnowledgeBase kb{3};
  std::vector<std::string> emotions{"joy", "sad", "angry"};
  std::vector<inferem::Dialogue> dialogues;
  std::vector<inferem::DialogueFeatures> features;
};

inline std::vector<int> ids(const inferem::Vocabulary& v, std::initializer_list<const char*> words) {
  std::vector<int> out;
  for (const char* w : words) out.push_back(v.id(w));
  return out;
}

inline World make_world() {
  using inferem::Role;
  World w;
  for (const char* t : {"my", "dog", "cat", "was", "so", "joyful", "gloomy", "furious", "oh", "the",
                        "sounds", "nice", "bad", "!", ".", "i", "feel"}) {
    w.vocab.add(t);
  }
  w.kb.set_intensity("joyful", 0.9);
  w.kb.set_intensity("gloomy", 0.8);
  w.kb.set_intensity("furious", 1.0);
  w.kb.set_intensity("nice", 0.4);
  w.kb.add_concept("joyful", "nice", 0.9);
  w.kb.add_concept("gloomy", "bad", 0.8);
  w.kb.add_concept("furious", "bad", 0.6);
  w.kb.add_concept("dog", "cat", 0.3);
  auto& v = w.vocab;
  inferem::Dialogue d1;
  d1.id = "d1";
  d1.utterances = {{Role::speaker, ids(v, {"i", "feel", "joyful"})},
                   {Role::listener, ids(v, {"oh", "nice", "!"})},
                   {Role::speaker, ids(v, {"my", "dog", "was", "so", "joyful", "!"})}};
  d1.gold_response = ids(v, {"the", "dog", "sounds", "nice", "."});
  d1.emotion_label = 0;
  inferem::Dialogue d2;
  d2.id = "d2";
  d2.utterances = {{Role::speaker, ids(v, {"my", "cat", "was", "gloomy", "."})}};
  d2.gold_response = ids(v, {"oh", "the", "cat", "sounds", "bad", "."});
  d2.emotion_label = 1;
  inferem::Dialogue d3;
  d3.id = "d3";
  d3.utterances = {{Role::speaker, ids(v, {"i", "feel", "furious"})},
                   {Role::listener, ids(v, {"oh", "!"})}};
  d3.gold_response = ids(v, {"the", "cat", "sounds", "bad", "."});
  d3.emotion_label = 2;
  w.dialogues = {d1, d2, d3};
  w.features = inferem::prepare_features(w.dialogues, w.kb, w.vocab, 32);
  return w;
}

inline inferem::ModelConfig small_config(const World& w, std::uint64_t seed = 1, std::size_t dim = 8) {
  inferem::ModelConfig c;
  c.vocab_size = w.vocab.size();
  c.num_emotions = w.emotions.size();
  c.dim = dim;
  c.max_len = 32;
  c.layers = 1;
  c.heads = 2;
  c.decoder_layers = 1;
  c.seed = seed;
  return c;
}

inline std::vector<const inferem::DialogueFeatures*> batch_of(const std::vector<inferem::DialogueFeatures>& f) {
  std::vector<const inferem::DialogueFeatures*> out;
  for (const auto& x : f) out.push_back(&x);
  return out;
}

}  // namespace testing

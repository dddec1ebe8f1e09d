#include "inferem/gradient_suite.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>

#include "inferem/gradcheck.hpp"
#include "inferem/model.hpp"
#include "inferem/pipeline.hpp"

namespace inferem {

bool GradSuiteReport::all_passed() const {
  for (const auto& c : cases) {
    if (!c.passed) return false;
  }
  return !cases.empty();
}

void print_gradient_report(std::ostream& out, const GradSuiteReport& report) {
  char buf[200];
  for (const auto& c : report.cases) {
    std::snprintf(buf, sizeof buf, "%s  %-9s  %-28s  max_rel_error=%.3e  (%zu coords)\n",
                  c.passed ? "PASS" : "FAIL", c.composite ? "composite" : "primitive", c.name.c_str(),
                  c.max_rel_error, c.coordinates);
    out << buf;
  }
}

namespace {

using ag::Tape;
using ag::Var;

Tensor rand_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Keeps entries at least `gap` away from zero so a kink is never straddled.
Tensor away_from_zero(Tensor t, double gap) {
  for (auto& v : t.values()) {
    if (std::abs(v) < gap) v = v < 0 ? v - gap : v + gap;
  }
  return t;
}

// Scalar readout with fixed random weights, so every output entry matters.
Var project(Tape& tape, Var v, const Tensor& w) { return ag::sum(ag::mul(v, tape.constant(w))); }

struct Instance {
  std::vector<Tensor> point;
  ScalarFn fn;
};
using Builder = std::function<Instance(std::mt19937_64&)>;

GradCaseResult run_primitive(const std::string& name, const Builder& build, const GradSuiteOptions& opt) {
  GradCaseResult res{name, false, 0.0, 0, false};
  for (std::size_t seed = 1; seed <= opt.seeds; ++seed) {
    std::mt19937_64 rng(seed * 7919 + name.size());
    Instance inst = build(rng);
    const GradCheckResult r = gradient_check(inst.fn, inst.point);
    res.max_rel_error = std::max(res.max_rel_error, r.max_rel_error);
    res.coordinates += r.coordinates;
  }
  res.passed = res.max_rel_error < opt.tolerance;
  return res;
}

// Deliberately wrong derivative (2.5x instead of 2x).
Var sabotaged_square(Var a) {
  Tape* tape = a.tape;
  Tensor out = a.value();
  for (auto& v : out.values()) v = v * v;
  return tape->push(std::move(out), {a}, [tape, a](const Tensor&, const Tensor& g) {
    if (!tape->needs_grad(a.id)) return;
    Tensor& slot = tape->grad_slot(a.id);
    const Tensor& x = tape->value(a.id);
    for (std::size_t i = 0; i < x.size(); ++i) slot[i] += 2.5 * x[i] * g[i];
  });
}

std::vector<std::pair<std::string, Builder>> primitive_cases(bool sabotage) {
  std::vector<std::pair<std::string, Builder>> cases;
  auto unary = [](std::size_t r, std::size_t c, std::function<Var(Var)> op, std::size_t out_r,
                  std::size_t out_c, double lo = -1.0, double hi = 1.0, double gap = 0.0) -> Builder {
    return [=](std::mt19937_64& rng) {
      Tensor x = rand_tensor(r, c, rng, lo, hi);
      if (gap > 0) x = away_from_zero(std::move(x), gap);
      Tensor w = rand_tensor(out_r, out_c, rng);
      return Instance{{x}, [=](Tape& t, std::span<const Var> in) { return project(t, op(in[0]), w); }};
    };
  };
  auto binary = [](std::size_t ar, std::size_t ac, std::size_t br, std::size_t bc,
                   std::function<Var(Var, Var)> op, std::size_t out_r, std::size_t out_c) -> Builder {
    return [=](std::mt19937_64& rng) {
      Tensor a = rand_tensor(ar, ac, rng);
      Tensor b = rand_tensor(br, bc, rng);
      Tensor w = rand_tensor(out_r, out_c, rng);
      return Instance{{a, b},
                      [=](Tape& t, std::span<const Var> in) { return project(t, op(in[0], in[1]), w); }};
    };
  };

  cases.emplace_back("matmul", binary(3, 4, 4, 2, ag::matmul, 3, 2));
  cases.emplace_back("add", binary(3, 4, 3, 4, ag::add, 3, 4));
  cases.emplace_back("sub", binary(3, 4, 3, 4, ag::sub, 3, 4));
  cases.emplace_back("mul", binary(3, 4, 3, 4, ag::mul, 3, 4));
  cases.emplace_back("scale", unary(3, 4, [](Var a) { return ag::scale(a, -1.7); }, 3, 4));
  cases.emplace_back("add_row", binary(3, 4, 1, 4, ag::add_row, 3, 4));
  cases.emplace_back("concat_rows",
                     binary(2, 3, 3, 3, [](Var a, Var b) { return ag::concat({a, b}, 0); }, 5, 3));
  cases.emplace_back("concat_cols",
                     binary(3, 2, 3, 4, [](Var a, Var b) { return ag::concat({a, b}, 1); }, 3, 6));
  cases.emplace_back("slice_rows", unary(4, 3, [](Var a) { return ag::slice(a, 0, 1, 2); }, 2, 3));
  cases.emplace_back("slice_cols", unary(3, 5, [](Var a) { return ag::slice(a, 1, 1, 3); }, 3, 3));
  cases.emplace_back("softmax_rows", unary(3, 5, [](Var a) { return ag::softmax(a, 1); }, 3, 5, -2, 2));
  cases.emplace_back("softmax_cols", unary(4, 3, [](Var a) { return ag::softmax(a, 0); }, 4, 3, -2, 2));
  cases.emplace_back("layer_norm", [](std::mt19937_64& rng) {
    Tensor x = rand_tensor(3, 5, rng, -2, 2);
    Tensor g = rand_tensor(1, 5, rng, 0.5, 1.5);
    Tensor b = rand_tensor(1, 5, rng);
    Tensor w = rand_tensor(3, 5, rng);
    return Instance{{x, g, b}, [=](Tape& t, std::span<const Var> in) {
                      return project(t, ag::layer_norm(in[0], in[1], in[2]), w);
                    }};
  });
  cases.emplace_back("relu", unary(3, 4, ag::relu, 3, 4, -1, 1, 0.05));
  cases.emplace_back("embedding_lookup", [](std::mt19937_64& rng) {
    Tensor table = rand_tensor(6, 3, rng);
    Tensor w = rand_tensor(4, 3, rng);
    return Instance{{table}, [=](Tape& t, std::span<const Var> in) {
                      const std::vector<int> ids{0, 2, 2, 5};
                      return project(t, ag::embedding_lookup(in[0], ids), w);
                    }};
  });
  cases.emplace_back("masked_fill", [](std::mt19937_64& rng) {
    Tensor x = rand_tensor(3, 4, rng, -2, 2);
    Tensor mask(3, 4);
    std::bernoulli_distribution coin(0.4);
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 1; c < 4; ++c) mask(r, c) = coin(rng) ? 1.0 : 0.0;
    }
    Tensor w = rand_tensor(3, 4, rng);
    return Instance{{x}, [=](Tape& t, std::span<const Var> in) {
                      const double ninf = -std::numeric_limits<double>::infinity();
                      return project(t, ag::softmax(ag::masked_fill(in[0], mask, ninf), 1), w);
                    }};
  });
  cases.emplace_back("sum", unary(3, 4, [](Var a) { return ag::square(ag::sum(a)); }, 1, 1));
  cases.emplace_back("mean", unary(3, 4, [](Var a) { return ag::square(ag::mean(a)); }, 1, 1));
  cases.emplace_back("square", unary(3, 4, ag::square, 3, 4));
  cases.emplace_back("log", unary(3, 4, ag::log, 3, 4, 0.5, 2.0));
  cases.emplace_back("transpose", unary(3, 4, ag::transpose, 4, 3));
  cases.emplace_back("pick", unary(3, 5, [](Var a) {
                       const std::vector<int> cols{4, 0, 2};
                       return ag::pick(a, cols);
                     }, 3, 1));
  if (sabotage) cases.emplace_back("square (sabotaged)", unary(3, 4, sabotaged_square, 3, 4));
  return cases;
}

// ---------------------------------------------------------------------------
// Composites

void merge(GradCaseResult& res, const GradCheckResult& r) {
  res.max_rel_error = std::max(res.max_rel_error, r.max_rel_error);
  res.coordinates += r.coordinates;
}

std::vector<ag::Parameter*> params_with_prefix(ag::ParameterStore& store,
                                               std::initializer_list<const char*> prefixes) {
  std::vector<ag::Parameter*> out;
  for (auto& p : store) {
    for (const char* pre : prefixes) {
      if (p->name.rfind(pre, 0) == 0) {
        out.push_back(p.get());
        break;
      }
    }
  }
  return out;
}

std::vector<ag::Parameter*> all_params(ag::ParameterStore& store) {
  std::vector<ag::Parameter*> out;
  for (auto& p : store) out.push_back(p.get());
  return out;
}

GradCaseResult check_maifnet(const GradSuiteOptions& opt) {
  GradCaseResult res{"maifnet", true, 0.0, 0, false};
  for (std::size_t seed = 1; seed <= opt.seeds; ++seed) {
    std::mt19937_64 rng(seed);
    ag::ParameterStore store;
    MaifNet net(store, "maifnet", 4, 2, rng);
    const Tensor sq = rand_tensor(3, 4, rng), skv = rand_tensor(5, 4, rng), w = rand_tensor(3, 4, rng);
    merge(res, gradient_check([&](Tape& t, std::span<const Var> in) { return project(t, net(in[0], in[1]), w); },
                              {sq, skv}));
    const auto params = all_params(store);
    merge(res, gradient_check_params(
                   [&](Tape& t) { return project(t, net(t.constant(sq), t.constant(skv)), w); }, params));
  }
  res.passed = res.max_rel_error < opt.tolerance;
  return res;
}

GradCaseResult check_ecenc(const GradSuiteOptions& opt) {
  GradCaseResult res{"ecenc", true, 0.0, 0, false};
  for (std::size_t seed = 1; seed <= opt.seeds; ++seed) {
    std::mt19937_64 rng(seed);
    ag::ParameterStore store;
    EmbeddingTables tables(store, 10, 4, 16, rng);
    EcEncoder enc(store, "ecenc", tables, 2, 2, rng);
    const std::vector<int> tokens{4, 5, 6, 7, 8};
    const std::vector<Role> roles{Role::speaker, Role::speaker, Role::listener, Role::listener, Role::speaker};
    SequenceKnowledge kn;
    kn.concepts.resize(tokens.size());
    kn.concepts[0] = {{6, 9}, {0.9, 0.4}};
    kn.concepts[2] = {{4}, {0.7}};
    kn.concepts[4] = {{5, 6, 9}, {1.0, 0.3, 0.2}};
    kn.eta = {0.1, 0.9, 0.0, 0.5, 0.3};
    const Tensor w = rand_tensor(tokens.size(), 4, rng);
    const auto params = all_params(store);
    merge(res, gradient_check_params(
                   [&](Tape& t) {
                     EncodedSequence s = enc(enrich(t, tables, tokens, roles, kn));
                     return ag::add(project(t, s.features, w),
                                    ag::sum(emotion_signal(s.features, s.eta)));
                   },
                   params));
  }
  res.passed = res.max_rel_error < opt.tolerance;
  return res;
}

GradCaseResult check_decoder(const GradSuiteOptions& opt) {
  GradCaseResult res{"decoder", true, 0.0, 0, false};
  for (std::size_t seed = 1; seed <= opt.seeds; ++seed) {
    std::mt19937_64 rng(seed);
    ag::ParameterStore store;
    EmbeddingTables tables(store, 9, 4, 16, rng);
    EmotionDecoder dec(store, "dec", tables, 9, 2, 2, rng);
    const std::vector<int> prefix{kBos, 4, 5, 6};
    const Tensor e = rand_tensor(1, 4, rng), memory = rand_tensor(5, 4, rng);
    const Tensor w = rand_tensor(prefix.size(), 9, rng), wa = rand_tensor(1, 5, rng);
    auto readout = [&](Tape& t, Var ev, Var mv) {
      DecoderOutput out = dec(ev, mv, prefix);
      return ag::add(project(t, ag::log(out.distributions), w),
                     project(t, average_cross_attention(out.attention), wa));
    };
    merge(res, gradient_check([&](Tape& t, std::span<const Var> in) { return readout(t, in[0], in[1]); },
                              {e, memory}));
    const auto params = all_params(store);
    merge(res, gradient_check_params(
                   [&](Tape& t) { return readout(t, t.constant(e), t.constant(memory)); }, params));
  }
  res.passed = res.max_rel_error < opt.tolerance;
  return res;
}

// Small end-to-end fixture: one n = 3 dialogue with concepts on a d = 4 model.
struct TinyWorld {
  DialogueFeatures features;
  std::unique_ptr<InferEmModel> model;
  std::vector<int> virtual_tokens;
};

TinyWorld make_tiny_world(std::uint64_t seed) {
  const std::vector<std::string> emotions{"joy", "sad"};
  Vocabulary vocab;
  for (const char* w : {"my", "dog", "was", "so", "joyful", "sadness", "oh", "the", "sounds", "nice", "!",
                        "."}) {
    vocab.add(w);
  }
  KnowledgeBase kb(3);
  kb.set_intensity("joyful", 0.9);
  kb.set_intensity("sadness", 0.8);
  kb.set_intensity("nice", 0.4);
  kb.add_concept("joyful", "nice", 0.9);
  kb.add_concept("joyful", "sadness", 0.2);
  kb.add_concept("dog", "nice", 0.5);
  auto enc = [&](std::initializer_list<const char*> words) {
    std::vector<int> ids;
    for (const char* w : words) ids.push_back(vocab.id(w));
    return ids;
  };
  Dialogue d;
  d.id = "tiny";
  d.utterances = {{Role::speaker, enc({"my", "dog", "was", "joyful"})},
                  {Role::listener, enc({"oh", "nice", "!"})},
                  {Role::speaker, enc({"so", "joyful", "!"})}};
  d.gold_response = enc({"the", "dog", "sounds", "nice", "."});
  d.emotion_label = 0;
  TinyWorld w;
  w.features = prepare_features(d, kb, vocab, 32);
  ModelConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.num_emotions = emotions.size();
  cfg.dim = 4;
  cfg.max_len = 32;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.decoder_layers = 1;
  cfg.seed = seed;
  w.model = std::make_unique<InferEmModel>(cfg);
  std::mt19937_64 rng(seed + 101);
  std::uniform_int_distribution<int> tok(4, static_cast<int>(vocab.size()) - 1);
  w.virtual_tokens = {tok(rng), tok(rng), tok(rng)};
  return w;
}

const std::initializer_list<const char*> kPredictionPrefixes{"embedding.", "ecenc1.", "ecenc2.",
                                                              "maifnet.prediction.", "decoder.prediction."};
const std::initializer_list<const char*> kResponsePrefixes{"embedding.", "ecenc3.", "ecenc4.",
                                                            "plain_encoder.", "maifnet.response.",
                                                            "decoder.response.", "classifier."};

using LossFn = std::function<Var(Tape&, const TinyWorld&)>;

GradCaseResult check_model_loss(const std::string& name, const LossFn& fn, bool prediction_side,
                                const GradSuiteOptions& opt) {
  GradCaseResult res{name, true, 0.0, 0, false};
  for (std::size_t seed = 1; seed <= opt.seeds; ++seed) {
    TinyWorld w = make_tiny_world(seed);
    const auto params = prediction_side ? params_with_prefix(w.model->store, kPredictionPrefixes)
                                        : params_with_prefix(w.model->store, kResponsePrefixes);
    merge(res, gradient_check_params([&](Tape& t) { return fn(t, w); }, params));
  }
  res.passed = res.max_rel_error < opt.tolerance;
  return res;
}

Var prediction_loss(Tape& t, const TinyWorld& w) {
  PredictionForward pf = forward_predict(t, *w.model, w.features);
  return sequence_nll(pf.decoded.distributions, w.features.last_gold);
}

ResponseForward respond(Tape& t, const TinyWorld& w) {
  return forward_respond(t, *w.model, w.features, w.virtual_tokens, Ablation{});
}

Var response_loss(Tape& t, const TinyWorld& w) {
  return sequence_nll(respond(t, w).decoded.distributions, w.features.response_gold);
}

Var emotion_term(Tape& t, const TinyWorld& w) {
  return emotion_loss(respond(t, w).e_signal, t.param(*w.model->classifier), w.features.emotion_label).loss;
}

Var attention_term(Tape& t, const TinyWorld& w) {
  return attention_loss(w.features.context.knowledge.eta, average_cross_attention(respond(t, w).decoded.attention));
}

GradCaseResult check_combined(const std::string& name, double switch_p, double switch_r,
                              double expected_alpha1, const GradSuiteOptions& opt) {
  GradCaseResult res{name, true, 0.0, 0, false};
  const LossWeights weights;
  bool branch_ok = true;
  for (std::size_t seed = 1; seed <= opt.seeds; ++seed) {
    TinyWorld w = make_tiny_world(seed);
    const auto params = all_params(w.model->store);
    auto fn = [&](Tape& t) {
      const Var p = prediction_loss(t, w);
      ResponseForward rf = respond(t, w);
      const Var r = sequence_nll(rf.decoded.distributions, w.features.response_gold);
      const Var e = emotion_loss(rf.e_signal, t.param(*w.model->classifier), w.features.emotion_label).loss;
      const Var a = attention_loss(w.features.context.knowledge.eta, average_cross_attention(rf.decoded.attention));
      const LossReport rep = combine(p.value().item(), r.value().item(), e.value().item(), a.value().item(),
                                     weights, switch_p, switch_r);
      branch_ok = branch_ok && rep.alpha1_used && *rep.alpha1_used == expected_alpha1;
      return combine_on_tape(p, r, e, a, weights, rep);
    };
    merge(res, gradient_check_params(fn, params));
  }
  res.passed = branch_ok && res.max_rel_error < opt.tolerance;
  return res;
}

}  // namespace

GradSuiteReport run_gradient_suite(const GradSuiteOptions& options) {
  GradSuiteReport report;
  for (const auto& [name, build] : primitive_cases(options.sabotage)) {
    report.cases.push_back(run_primitive(name, build, options));
  }
  report.cases.push_back(check_maifnet(options));
  report.cases.push_back(check_ecenc(options));
  report.cases.push_back(check_decoder(options));
  report.cases.push_back(check_model_loss("prediction loss L^p", prediction_loss, true, options));
  report.cases.push_back(check_model_loss("response loss L^r", response_loss, false, options));
  report.cases.push_back(check_model_loss("emotion loss L^e", emotion_term, false, options));
  report.cases.push_back(check_model_loss("attention loss L^a", attention_term, false, options));
  report.cases.push_back(check_combined("combined L (alpha1 high)", 2.0, 1.0, LossWeights{}.alpha1_hi, options));
  report.cases.push_back(check_combined("combined L (alpha1 low)", 0.5, 1.0, LossWeights{}.alpha1_lo, options));
  return report;
}

}  // namespace inferem

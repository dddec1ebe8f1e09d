#include "inferem/pipeline.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "inferem/checkpoint.hpp"
#include "inferem/gradcheck.hpp"

namespace inferem {

// ---------------------------------------------------------------------------
// Features

namespace {

SpanFeatures make_span(const std::vector<const Utterance*>& utterances, const KnowledgeBase& kb,
                       const Vocabulary& vocab, std::size_t max_len) {
  SpanFeatures s;
  for (const Utterance* u : utterances) {
    s.tokens.insert(s.tokens.end(), u->tokens.begin(), u->tokens.end());
    s.roles.insert(s.roles.end(), u->tokens.size(), u->role);
  }
  if (s.tokens.size() > max_len) {
    const auto drop = static_cast<std::ptrdiff_t>(s.tokens.size() - max_len);
    s.tokens.erase(s.tokens.begin(), s.tokens.begin() + drop);
    s.roles.erase(s.roles.begin(), s.roles.begin() + drop);
  }
  s.knowledge = gather_knowledge(s.tokens, kb, vocab);
  return s;
}

void teacher_forcing(const std::vector<int>& tokens, std::size_t max_len, std::vector<int>& input,
                     std::vector<int>& gold) {
  const std::size_t n = std::min(tokens.size(), max_len - 1);
  input.assign(1, kBos);
  input.insert(input.end(), tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n));
  gold.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n));
  gold.push_back(kEos);
}

}  // namespace

DialogueFeatures prepare_features(const Dialogue& d, const KnowledgeBase& kb, const Vocabulary& vocab,
                                  std::size_t max_len) {
  if (d.utterances.empty()) throw CorpusError("dialogue " + d.id + " has no context utterances");
  if (d.gold_response.empty()) throw CorpusError("dialogue " + d.id + " has an empty response");
  DialogueFeatures f;
  std::vector<const Utterance*> all;
  for (const auto& u : d.utterances) all.push_back(&u);
  f.context = make_span(all, kb, vocab, max_len);
  f.last = make_span({all.back()}, kb, vocab, max_len);
  if (all.size() >= 2) {
    std::vector<const Utterance*> prior(all.begin(), all.end() - 1);
    f.prior = make_span(prior, kb, vocab, max_len);
    f.penultimate = make_span({prior.back()}, kb, vocab, max_len);
  }
  teacher_forcing(d.gold_response, max_len, f.response_input, f.response_gold);
  teacher_forcing(d.utterances.back().tokens, max_len, f.last_input, f.last_gold);
  f.emotion_label = d.emotion_label;
  return f;
}

std::vector<DialogueFeatures> prepare_features(const std::vector<Dialogue>& dialogues,
                                               const KnowledgeBase& kb, const Vocabulary& vocab,
                                               std::size_t max_len) {
  std::vector<DialogueFeatures> out;
  out.reserve(dialogues.size());
  for (const auto& d : dialogues) out.push_back(prepare_features(d, kb, vocab, max_len));
  return out;
}

// ---------------------------------------------------------------------------
// Forward passes

namespace {

EncodedSequence encode_span(ag::Tape& tape, const InferEmModel& model, std::size_t which,
                            const SpanFeatures& span) {
  EnrichedSequence e = enrich(tape, model.embeddings, span.tokens, span.roles, span.knowledge);
  return model.context_encoders[which](e);
}

struct PredictionMemory {
  ag::Var prior_features;
  ag::Var fused;
  ag::Var e_signal;
};

PredictionMemory prediction_memory(ag::Tape& tape, const InferEmModel& model, const DialogueFeatures& f) {
  if (!f.has_prediction_branch()) {
    throw std::invalid_argument("prediction branch needs at least two context utterances");
  }
  EncodedSequence prior = encode_span(tape, model, 0, f.prior);
  EncodedSequence penultimate = encode_span(tape, model, 1, f.penultimate);
  PredictionMemory m;
  m.prior_features = prior.features;
  m.fused = model.prediction_fusion(prior.features, penultimate.features);
  m.e_signal = emotion_signal(prior.features, prior.eta);
  return m;
}

}  // namespace

PredictionForward forward_predict(ag::Tape& tape, const InferEmModel& model, const DialogueFeatures& f) {
  PredictionMemory m = prediction_memory(tape, model, f);
  PredictionForward out;
  out.prior_features = m.prior_features;
  out.fused = m.fused;
  out.e_signal = m.e_signal;
  out.decoded = model.prediction_decoder(m.e_signal, m.fused, f.last_input);
  return out;
}

ResponseForward forward_respond(ag::Tape& tape, const InferEmModel& model, const DialogueFeatures& f,
                                std::span<const int> virtual_tokens, const Ablation& ablation) {
  if (f.context.empty()) throw std::invalid_argument("forward_respond: empty dialogue");
  EncodedSequence context = encode_span(tape, model, 2, f.context);
  ResponseForward out;
  out.context_features = context.features;
  if (ablation.disable_sip) {
    out.fused = context.features;
  } else {
    EncodedSequence last = encode_span(tape, model, 3, f.last);
    std::optional<ag::Var> virtual_features;
    if (!ablation.disable_lup && !virtual_tokens.empty()) {
      const std::size_t n = std::min(virtual_tokens.size(), model.config.max_len);
      const std::span<const int> toks = virtual_tokens.first(n);
      const std::vector<Role> roles(n, Role::speaker);
      virtual_features = model.virtual_encoder(model.embeddings.embed_sequence(tape, toks, roles)).features;
    }
    out.intention = concat_intentions(last.features, virtual_features);
    out.fused = model.response_fusion(context.features, out.intention);
  }
  out.e_signal = emotion_signal(context.features, context.eta);
  out.decoded = model.response_decoder(out.e_signal, out.fused, f.response_input);
  return out;
}

std::vector<int> predict_virtual_utterance(const InferEmModel& model, const DialogueFeatures& f,
                                           std::size_t max_steps) {
  ag::Tape tape(false);
  PredictionMemory m = prediction_memory(tape, model, f);
  return greedy_decode(model.prediction_decoder, m.e_signal.value(), m.fused.value(), max_steps);
}

DialogueLosses dialogue_losses(ag::Tape& tape, const InferEmModel& model, const DialogueFeatures& f,
                               const Ablation& ablation, std::size_t max_steps) {
  DialogueLosses out;
  if (!ablation.disable_lup && f.has_prediction_branch()) {
    PredictionForward pf = forward_predict(tape, model, f);
    out.prediction = sequence_nll(pf.decoded.distributions, f.last_gold);
    out.prediction_tokens = f.last_gold.size();
    if (!ablation.disable_sip) {
      // Argmax tokens: nothing flows back into the prediction branch from here.
      out.virtual_tokens = greedy_decode(model.prediction_decoder, pf.e_signal.value(),
                                         pf.fused.value(), max_steps);
    }
  }
  ResponseForward rf = forward_respond(tape, model, f, out.virtual_tokens, ablation);
  out.response = sequence_nll(rf.decoded.distributions, f.response_gold);
  out.response_tokens = f.response_gold.size();
  EmotionLoss el = emotion_loss(rf.e_signal, tape.param(*model.classifier), f.emotion_label);
  out.emotion = el.loss;
  out.predicted_emotion = el.predicted;
  out.attention = attention_loss(f.context.knowledge.eta, average_cross_attention(rf.decoded.attention));
  return out;
}

// ---------------------------------------------------------------------------
// Training

TrainOptions TrainOptions::from(const Config& cfg) {
  TrainOptions o;
  o.weights.alpha1_hi = cfg.get_double("loss.alpha1_hi");
  o.weights.alpha1_lo = cfg.get_double("loss.alpha1_lo");
  o.weights.alpha2 = cfg.get_double("loss.alpha2");
  o.weights.alpha3 = cfg.get_double("loss.alpha3");
  o.weights.validate();
  o.learning_rate = cfg.get_double("train.lr");
  o.batch_size = static_cast<std::size_t>(cfg.get_int("train.batch_size"));
  o.epochs = static_cast<std::size_t>(cfg.get_int("train.epochs"));
  o.patience = static_cast<std::size_t>(cfg.get_int("train.patience"));
  o.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed"));
  o.ablation.disable_sip = cfg.get_bool("train.disable_sip");
  o.ablation.disable_lup = cfg.get_bool("train.disable_lup");
  o.switch_normalized = cfg.get_bool("loss.switch_normalized");
  o.max_steps = static_cast<std::size_t>(cfg.get_int("decode.max_steps"));
  return o;
}

void Adam::step(ag::ParameterStore& store) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& p : store) {
    Tensor& w = p->value;
    const Tensor& g = p->grad;
    Tensor& m = p->adam_m;
    Tensor& v = p->adam_v;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

namespace {

struct BatchTerms {
  LossReport report;
  ag::Var total;
};

ag::Var mean_of(std::span<const ag::Var> vars) {
  ag::Var acc = vars[0];
  for (std::size_t i = 1; i < vars.size(); ++i) acc = ag::add(acc, vars[i]);
  return ag::scale(acc, 1.0 / static_cast<double>(vars.size()));
}

BatchTerms batch_terms(ag::Tape& tape, const InferEmModel& model,
                       std::span<const DialogueFeatures* const> batch, const TrainOptions& options) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<ag::Var> lp, lr, le, la;
  std::size_t p_tokens = 0, r_tokens = 0;
  for (const DialogueFeatures* f : batch) {
    DialogueLosses d = dialogue_losses(tape, model, *f, options.ablation, options.max_steps);
    if (d.prediction) {
      lp.push_back(*d.prediction);
      p_tokens += d.prediction_tokens;
    }
    lr.push_back(d.response);
    le.push_back(d.emotion);
    la.push_back(d.attention);
    r_tokens += d.response_tokens;
  }
  std::optional<ag::Var> prediction;
  if (!lp.empty()) prediction = mean_of(lp);
  const ag::Var response = mean_of(lr);
  const ag::Var emotion = mean_of(le);
  const ag::Var attention = mean_of(la);

  std::optional<double> p_value;
  double p_switch = 0.0, r_switch = response.value().item();
  if (prediction) {
    p_value = prediction->value().item();
    p_switch = *p_value;
    if (options.switch_normalized) {
      p_switch = *p_value * static_cast<double>(lp.size()) / static_cast<double>(p_tokens);
      r_switch = r_switch * static_cast<double>(lr.size()) / static_cast<double>(r_tokens);
    }
  }
  BatchTerms out;
  out.report = combine(p_value, response.value().item(), emotion.value().item(),
                       attention.value().item(), options.weights, p_switch, r_switch);
  out.total = combine_on_tape(prediction, response, emotion, attention, options.weights, out.report);
  if (!std::isfinite(out.total.value().item())) {
    throw NumericalError("non-finite training loss (L^r=" + std::to_string(out.report.response) +
                         ", L^e=" + std::to_string(out.report.emotion) + ")");
  }
  return out;
}

}  // namespace

LossReport compute_batch_gradients(InferEmModel& model, std::span<const DialogueFeatures* const> batch,
                                   const TrainOptions& options) {
  model.store.zero_grad();
  ag::Tape tape;
  BatchTerms terms = batch_terms(tape, model, batch, options);
  tape.backward(terms.total);
  for (const auto& p : model.store) {
    for (double g : p->grad.values()) {
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in " + p->name);
    }
  }
  return terms.report;
}

LossReport evaluate_batch_loss(const InferEmModel& model, std::span<const DialogueFeatures* const> batch,
                               const TrainOptions& options) {
  ag::Tape tape(false);
  return batch_terms(tape, model, batch, options).report;
}

LossReport train_step(InferEmModel& model, Adam& optimizer,
                      std::span<const DialogueFeatures* const> batch, const TrainOptions& options) {
  LossReport r = compute_batch_gradients(model, batch, options);
  optimizer.step(model.store);
  return r;
}

void write_log_header(std::ostream& out) { out << "epoch,step,L,L_p,L_r,L_e,L_a,alpha1_used\n"; }

void write_log_record(std::ostream& out, const StepRecord& rec) {
  const auto& r = rec.report;
  const auto precision = out.precision(12);
  out << rec.epoch << ',' << rec.step << ',' << r.total << ',' << r.prediction << ',' << r.response
      << ',' << r.emotion << ',' << r.attention << ',';
  if (r.alpha1_used) out << *r.alpha1_used;
  out << '\n';
  out.precision(precision);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed * 1000003ULL + epoch);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void save_training_checkpoint(const std::filesystem::path& path, const InferEmModel& model,
                              const Adam* optimizer, std::size_t epochs_done) {
  std::vector<NamedTensor> records = parameter_records(model.store);
  if (optimizer) {
    for (const auto& p : model.store) {
      records.push_back({"adam.m/" + p->name, p->adam_m});
      records.push_back({"adam.v/" + p->name, p->adam_v});
    }
    records.push_back({"adam.step", Tensor::scalar(static_cast<double>(optimizer->steps()))});
    records.push_back({"train.epochs", Tensor::scalar(static_cast<double>(epochs_done))});
  }
  write_checkpoint(path, records);
}

std::size_t load_training_checkpoint(const std::filesystem::path& path, InferEmModel& model,
                                     Adam* optimizer) {
  const auto records = read_checkpoint(path);
  assign_parameters(model.store, records, true);
  if (!optimizer) return 0;
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& r : records) by_name[r.name] = &r.value;
  auto step = by_name.find("adam.step");
  if (step == by_name.end()) return 0;
  optimizer->set_steps(static_cast<std::uint64_t>(step->second->item()));
  for (auto& p : model.store) {
    auto m = by_name.find("adam.m/" + p->name);
    auto v = by_name.find("adam.v/" + p->name);
    if (m == by_name.end() || v == by_name.end()) {
      throw CheckpointError("optimizer state missing for " + p->name);
    }
    p->adam_m = *m->second;
    p->adam_v = *v->second;
  }
  auto epochs = by_name.find("train.epochs");
  return epochs == by_name.end() ? 0 : static_cast<std::size_t>(epochs->second->item());
}

}  // namespace inferem

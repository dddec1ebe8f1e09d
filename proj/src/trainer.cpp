#include "inferem/trainer.hpp"

#include <cmath>
#include <limits>

#include "inferem/gradcheck.hpp"

namespace inferem {

namespace {

std::span<const int> virtual_span(const std::optional<std::vector<int>>& v) {
  return v ? std::span<const int>(*v) : std::span<const int>();
}

std::optional<std::vector<int>> virtual_for(const InferEmModel& model, const DialogueFeatures& f,
                                            const Ablation& ablation, std::size_t max_steps) {
  if (ablation.disable_lup || !f.has_prediction_branch()) return std::nullopt;
  return predict_virtual_utterance(model, f, max_steps);
}

}  // namespace

Generation generate(const InferEmModel& model, const DialogueFeatures& f, const Ablation& ablation,
                    std::size_t max_steps) {
  Generation g;
  g.virtual_tokens = virtual_for(model, f, ablation, max_steps);
  ag::Tape tape(false);
  ResponseForward rf = forward_respond(tape, model, f, virtual_span(g.virtual_tokens), ablation);
  const Tensor logits = ag::matmul(rf.e_signal, ag::transpose(tape.param(*model.classifier))).value();
  g.predicted_emotion = static_cast<int>(argmax(logits.values()));
  g.response = greedy_decode(model.response_decoder, rf.e_signal.value(), rf.fused.value(), max_steps);
  return g;
}

DialogueEval evaluate_dialogue(const InferEmModel& model, const DialogueFeatures& f,
                               const EvalOptions& options) {
  DialogueEval out;
  const auto virt = options.ablation.disable_sip ? std::nullopt
                                                 : virtual_for(model, f, options.ablation, options.max_steps);
  ag::Tape tape(false);
  ResponseForward rf = forward_respond(tape, model, f, virtual_span(virt), options.ablation);
  const Tensor logits = ag::matmul(rf.e_signal, ag::transpose(tape.param(*model.classifier))).value();
  out.predicted_emotion = static_cast<int>(argmax(logits.values()));
  const Tensor& dist = rf.decoded.distributions.value();
  for (std::size_t i = 0; i + 1 < f.response_gold.size(); ++i) {
    out.response_nlls.push_back(-std::log(dist(i, static_cast<std::size_t>(f.response_gold[i]))));
  }
  if (options.with_distinct) {
    out.response =
        greedy_decode(model.response_decoder, rf.e_signal.value(), rf.fused.value(), options.max_steps);
  }
  return out;
}

EvalReport evaluate(const InferEmModel& model, std::span<const DialogueFeatures> data,
                    const EvalOptions& options) {
  if (data.empty()) throw MetricError("evaluate: empty dataset");
  std::vector<int> predictions, labels;
  std::vector<double> nlls;
  std::vector<std::vector<int>> responses;
  for (const auto& f : data) {
    DialogueEval d = evaluate_dialogue(model, f, options);
    predictions.push_back(d.predicted_emotion);
    labels.push_back(f.emotion_label);
    nlls.insert(nlls.end(), d.response_nlls.begin(), d.response_nlls.end());
    if (options.with_distinct) responses.push_back(std::move(d.response));
  }
  EvalReport r;
  r.dialogues = data.size();
  r.emotion_accuracy = emotion_accuracy(predictions, labels);
  r.perplexity = perplexity(nlls);
  if (options.with_distinct) {
    for (int n : {1, 2}) {
      double v = 0.0;
      try {
        v = distinct_n(responses, n, options.distinct_mode);
      } catch (const MetricError&) {
        v = 0.0;  // every greedy response shorter than n
      }
      (n == 1 ? r.distinct1 : r.distinct2) = v;
    }
  }
  return r;
}

TrainResult train(InferEmModel& model, Adam& optimizer, const std::vector<DialogueFeatures>& train_set,
                  const std::vector<DialogueFeatures>& valid_set, const TrainOptions& options,
                  const TrainHooks& hooks, std::size_t start_epoch) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (options.batch_size == 0) throw std::invalid_argument("train: batch size must be at least 1");
  EvalOptions eval_opts;
  eval_opts.ablation = options.ablation;
  eval_opts.max_steps = options.max_steps;
  eval_opts.with_distinct = false;

  TrainResult result;
  result.best_valid_perplexity = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best;
  std::size_t stale = 0;

  for (std::size_t epoch = start_epoch + 1; epoch <= options.epochs; ++epoch) {
    const auto order = epoch_order(train_set.size(), options.seed, epoch);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      std::vector<const DialogueFeatures*> batch;
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_set[order[i]]);
      LossReport rep = train_step(model, optimizer, batch, options);
      loss_sum += rep.total;
      ++steps;
      if (hooks.log) write_log_record(*hooks.log, {epoch, steps, rep});
    }
    if (hooks.log) hooks.log->flush();

    EpochSummary s;
    s.epoch = epoch;
    s.train_loss = loss_sum / static_cast<double>(steps);
    if (!valid_set.empty()) {
      const EvalReport v = evaluate(model, valid_set, eval_opts);
      s.valid_perplexity = v.perplexity;
      s.valid_accuracy = v.emotion_accuracy;
    } else {
      s.valid_perplexity = std::exp(s.train_loss);
    }
    if (!std::isfinite(s.train_loss)) throw NumericalError("non-finite epoch loss");
    s.improved = s.valid_perplexity < result.best_valid_perplexity;
    if (s.improved) {
      result.best_valid_perplexity = s.valid_perplexity;
      result.best_epoch = epoch;
      stale = 0;
      best.clear();
      for (const auto& p : model.store) best.push_back(p->value);
      if (hooks.on_best) hooks.on_best(model, optimizer, epoch);
    } else {
      ++stale;
    }
    result.epochs.push_back(s);
    if (hooks.on_epoch_end) hooks.on_epoch_end(model, optimizer, epoch);
    const bool keep_going = hooks.on_epoch ? hooks.on_epoch(s) : true;
    if (!keep_going) break;
    if (stale >= options.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (!best.empty()) {
    std::size_t i = 0;
    for (auto& p : model.store) p->value = best[i++];
  }
  return result;
}

}  // namespace inferem

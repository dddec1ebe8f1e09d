#include "inferem/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "inferem/decoder.hpp"
#include "inferem/gradcheck.hpp"

namespace inferem {

void LossWeights::validate() const {
  if (alpha1_hi < 0 || alpha1_lo < 0 || alpha2 < 0 || alpha3 < 0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  if (alpha1_hi < alpha1_lo) {
    throw std::invalid_argument("loss.alpha1_hi must be >= loss.alpha1_lo");
  }
}

ag::Var sequence_nll(ag::Var distributions, std::span<const int> gold) {
  if (gold.empty()) throw ShapeError("sequence_nll: empty gold sequence");
  if (gold.size() != distributions.rows()) {
    throw ShapeError("sequence_nll: " + std::to_string(gold.size()) + " gold tokens for " +
                     shape_string(distributions.value()));
  }
  return ag::scale(ag::sum(ag::log(ag::pick(distributions, gold))), -1.0);
}

EmotionLoss emotion_loss(ag::Var e_signal, ag::Var classifier, int label) {
  const std::size_t q = classifier.rows();
  if (label < 0 || static_cast<std::size_t>(label) >= q) {
    throw std::out_of_range("emotion label " + std::to_string(label) + " outside [0, " +
                            std::to_string(q) + ")");
  }
  EmotionLoss out;
  ag::Var logits = ag::matmul(e_signal, ag::transpose(classifier));
  out.probabilities = ag::softmax(logits, 1);
  const int idx[1] = {label};
  out.loss = ag::scale(ag::log(ag::pick(out.probabilities, idx)), -1.0);
  out.predicted = argmax(logits.value().values());
  return out;
}

ag::Var attention_loss(std::span<const double> eta, ag::Var averaged_attention) {
  if (eta.empty() || averaged_attention.rows() != 1 || averaged_attention.cols() != eta.size()) {
    throw ShapeError("attention_loss: " + std::to_string(eta.size()) + " intensities vs attention " +
                     shape_string(averaged_attention.value()));
  }
  ag::Tape& tape = *averaged_attention.tape;
  ag::Var target = tape.constant(Tensor::row({eta.begin(), eta.end()}));
  return ag::mean(ag::square(ag::sub(target, averaged_attention)));
}

double select_alpha1(double prediction, double response, const LossWeights& weights) {
  return prediction > response ? weights.alpha1_hi : weights.alpha1_lo;
}

LossReport combine(double prediction, double response, double emotion, double attention,
                   const LossWeights& weights) {
  return combine(prediction, response, emotion, attention, weights, prediction, response);
}

LossReport combine(std::optional<double> prediction, double response, double emotion,
                   double attention, const LossWeights& weights, double switch_prediction,
                   double switch_response) {
  auto finite = [](double v) { return std::isfinite(v); };
  if ((prediction && !finite(*prediction)) || !finite(response) || !finite(emotion) ||
      !finite(attention)) {
    throw NumericalError("combine: non-finite loss component");
  }
  LossReport r;
  r.response = response;
  r.emotion = emotion;
  r.attention = attention;
  r.total = response + weights.alpha2 * emotion + weights.alpha3 * attention;
  if (prediction) {
    if (!finite(switch_prediction) || !finite(switch_response)) {
      throw NumericalError("combine: non-finite switch input");
    }
    r.prediction = *prediction;
    r.alpha1_used = select_alpha1(switch_prediction, switch_response, weights);
    r.total = response + *r.alpha1_used * *prediction + weights.alpha2 * emotion +
              weights.alpha3 * attention;
  }
  return r;
}

ag::Var combine_on_tape(std::optional<ag::Var> prediction, ag::Var response, ag::Var emotion,
                        ag::Var attention, const LossWeights& weights, const LossReport& report) {
  ag::Var total = response;
  if (prediction) {
    if (!report.alpha1_used) throw std::logic_error("combine_on_tape: report lacks alpha1");
    total = ag::add(total, ag::scale(*prediction, *report.alpha1_used));
  }
  total = ag::add(total, ag::scale(emotion, weights.alpha2));
  total = ag::add(total, ag::scale(attention, weights.alpha3));
  return total;
}

}  // namespace inferem

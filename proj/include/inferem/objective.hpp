#pragma once

#include <optional>
#include <span>

#include "inferem/autograd.hpp"

namespace inferem {

/// Multi-task trade-off weights. alpha1 switches between alpha1_hi and
/// alpha1_lo depending on whether the prediction loss exceeds the response loss.
struct LossWeights {
  double alpha1_hi = 1.5;
  double alpha1_lo = 0.3;
  double alpha2 = 1.2;
  double alpha3 = 0.12;

  /// Throws std::invalid_argument unless all weights are >= 0 and hi >= lo.
  void validate() const;
};

struct LossReport {
  double prediction = 0.0;  ///< L^p (0 when the prediction branch is off)
  double response = 0.0;    ///< L^r
  double emotion = 0.0;     ///< L^e
  double attention = 0.0;   ///< L^a
  std::optional<double> alpha1_used;  ///< empty when the prediction branch is off
  double total = 0.0;
};

/// −Σ_j log P_j(gold[j]) with teacher-forced rows. Summed over tokens.
ag::Var sequence_nll(ag::Var distributions, std::span<const int> gold);

struct EmotionLoss {
  ag::Var loss;
  ag::Var probabilities;  ///< 1×q
  int predicted = 0;
};

/// logits = W_e · eᵀ (W_e is q×d), L^e = −log softmax(logits)[label].
EmotionLoss emotion_loss(ag::Var e_signal, ag::Var classifier, int label);

/// Mean of (eta_i − a_i)² over the dialogue-history positions.
ag::Var attention_loss(std::span<const double> eta, ag::Var averaged_attention);

/// alpha1_hi when prediction > response, else alpha1_lo.
double select_alpha1(double prediction, double response, const LossWeights& weights);

/// L = L^r + alpha1·L^p + alpha2·L^e + alpha3·L^a, switching on the raw values.
LossReport combine(double prediction, double response, double emotion, double attention,
                   const LossWeights& weights);

/// As above, but the switch compares `switch_prediction` against `switch_response`
/// (e.g. per-token means). Pass std::nullopt for `prediction` when the branch is off.
LossReport combine(std::optional<double> prediction, double response, double emotion,
                   double attention, const LossWeights& weights, double switch_prediction,
                   double switch_response);

/// Builds the weighted sum on the tape; alpha1 comes from `report` and carries no gradient.
ag::Var combine_on_tape(std::optional<ag::Var> prediction, ag::Var response, ag::Var emotion,
                        ag::Var attention, const LossWeights& weights, const LossReport& report);

}  // namespace inferem

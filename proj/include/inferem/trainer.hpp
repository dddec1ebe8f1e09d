#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "inferem/evalmetrics.hpp"
#include "inferem/pipeline.hpp"

namespace inferem {

/// Inference-time output for one dialogue.
struct Generation {
  std::optional<std::vector<int>> virtual_tokens;  ///< absent when the branch is skipped
  std::vector<int> response;
  int predicted_emotion = 0;
};

/// Greedy virtual utterance (n >= 2, LUP on), then greedy response.
Generation generate(const InferEmModel& model, const DialogueFeatures& f, const Ablation& ablation,
                    std::size_t max_steps);

struct EvalOptions {
  Ablation ablation;
  std::size_t max_steps = 30;
  DistinctMode distinct_mode = DistinctMode::pooled;
  /// Distinct-n needs a greedy response per dialogue; off for validation.
  bool with_distinct = true;
};

/// Per-dialogue evaluation quantities.
struct DialogueEval {
  int predicted_emotion = 0;
  std::vector<double> response_nlls;  ///< teacher-forced, EOS position excluded
  std::vector<int> response;          ///< greedy output, empty unless requested
};

DialogueEval evaluate_dialogue(const InferEmModel& model, const DialogueFeatures& f,
                               const EvalOptions& options);

/// Accuracy of e_C classification, teacher-forced perplexity of the gold
/// response, Distinct-1/2 of greedy responses (0 when nothing was generated).
EvalReport evaluate(const InferEmModel& model, std::span<const DialogueFeatures> data,
                    const EvalOptions& options);

struct EpochSummary {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double valid_perplexity = 0.0;
  double valid_accuracy = 0.0;
  bool improved = false;
};

struct TrainHooks {
  std::ostream* log = nullptr;  ///< per-step CSV records; the caller writes the header
  /// Called after each epoch; returning false stops training.
  std::function<bool(const EpochSummary&)> on_epoch;
  /// Called when validation perplexity improves, before on_epoch.
  std::function<void(const InferEmModel&, const Adam&, std::size_t epoch)> on_best;
  /// Called after every epoch with the live optimizer.
  std::function<void(const InferEmModel&, const Adam&, std::size_t epoch)> on_epoch_end;
};

struct TrainResult {
  std::vector<EpochSummary> epochs;
  std::size_t best_epoch = 0;
  double best_valid_perplexity = 0.0;
  bool stopped_early = false;
};

/// Epoch loop with early stopping on validation perplexity. Epochs
/// start_epoch+1 .. options.epochs are run. The best parameters are restored
/// at the end. Throws NumericalError on a non-finite loss or gradient.
TrainResult train(InferEmModel& model, Adam& optimizer, const std::vector<DialogueFeatures>& train_set,
                  const std::vector<DialogueFeatures>& valid_set, const TrainOptions& options,
                  const TrainHooks& hooks = {}, std::size_t start_epoch = 0);

}  // namespace inferem

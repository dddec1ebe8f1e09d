#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "inferem/corpus.hpp"
#include "inferem/model.hpp"
#include "inferem/objective.hpp"

namespace inferem {

/// Token spans of one dialogue with their knowledge, prepared once.
struct SpanFeatures {
  std::vector<int> tokens;
  std::vector<Role> roles;
  SequenceKnowledge knowledge;

  bool empty() const { return tokens.empty(); }
};

struct DialogueFeatures {
  SpanFeatures context;      ///< C: every context utterance
  SpanFeatures prior;        ///< C': all but the last utterance (empty when n = 1)
  SpanFeatures penultimate;  ///< U_{n-1} (empty when n = 1)
  SpanFeatures last;         ///< U_n
  std::vector<int> response_gold;   ///< gold response tokens followed by EOS
  std::vector<int> response_input;  ///< BOS followed by gold response tokens
  std::vector<int> last_gold;       ///< U_n followed by EOS
  std::vector<int> last_input;      ///< BOS followed by U_n
  int emotion_label = 0;

  bool has_prediction_branch() const { return !prior.empty(); }
};

/// Builds features; the context keeps its most recent max_len tokens.
DialogueFeatures prepare_features(const Dialogue& dialogue, const KnowledgeBase& kb,
                                  const Vocabulary& vocab, std::size_t max_len);
std::vector<DialogueFeatures> prepare_features(const std::vector<Dialogue>& dialogues,
                                               const KnowledgeBase& kb, const Vocabulary& vocab,
                                               std::size_t max_len);

struct Ablation {
  bool disable_sip = false;  ///< fusion skipped: F_C = S_C
  bool disable_lup = false;  ///< prediction branch off: no virtual utterance, no L^p
};

struct PredictionForward {
  ag::Var prior_features;  ///< S_{C'}
  ag::Var fused;           ///< F_{C'}
  ag::Var e_signal;        ///< e_{C'}
  DecoderOutput decoded;   ///< P_n, teacher-forced on U_n
};

/// Prediction branch. Requires n >= 2.
PredictionForward forward_predict(ag::Tape& tape, const InferEmModel& model,
                                  const DialogueFeatures& f);

struct ResponseForward {
  ag::Var context_features;  ///< S_C
  ag::Var intention;         ///< S_{U_n^{pr}} (real rows first)
  ag::Var fused;             ///< F_C (S_C when fusion is disabled)
  ag::Var e_signal;          ///< e_C
  DecoderOutput decoded;     ///< P_R, teacher-forced on the gold response
};

/// Response branch; `virtual_tokens` empty means no virtual utterance.
ResponseForward forward_respond(ag::Tape& tape, const InferEmModel& model, const DialogueFeatures& f,
                                std::span<const int> virtual_tokens, const Ablation& ablation);

/// Greedy virtual last utterance from the prediction branch (no gradient).
std::vector<int> predict_virtual_utterance(const InferEmModel& model, const DialogueFeatures& f,
                                           std::size_t max_steps);

/// Per-dialogue loss terms on a tape.
struct DialogueLosses {
  std::optional<ag::Var> prediction;  ///< L^p, absent without the branch
  ag::Var response;                   ///< L^r
  ag::Var emotion;                    ///< L^e
  ag::Var attention;                  ///< L^a
  int predicted_emotion = 0;
  std::size_t prediction_tokens = 0;
  std::size_t response_tokens = 0;
  std::vector<int> virtual_tokens;
};

DialogueLosses dialogue_losses(ag::Tape& tape, const InferEmModel& model, const DialogueFeatures& f,
                               const Ablation& ablation, std::size_t max_steps);

struct TrainOptions {
  LossWeights weights;
  double learning_rate = 1e-4;
  std::size_t batch_size = 16;
  std::size_t epochs = 30;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  Ablation ablation;
  bool switch_normalized = true;
  std::size_t max_steps = 30;

  static TrainOptions from(const Config& cfg);
};

/// Bias-corrected Adam over every parameter in a store.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ag::ParameterStore& store);
  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
};

/// Batch-level forward and backward on a fresh tape. Parameter gradients are
/// zeroed first and hold the batch gradient afterwards. Throws NumericalError on NaN.
LossReport compute_batch_gradients(InferEmModel& model, std::span<const DialogueFeatures* const> batch,
                                   const TrainOptions& options);

/// Loss values of a batch without touching gradients.
LossReport evaluate_batch_loss(const InferEmModel& model, std::span<const DialogueFeatures* const> batch,
                               const TrainOptions& options);

/// compute_batch_gradients followed by one Adam update.
LossReport train_step(InferEmModel& model, Adam& optimizer,
                      std::span<const DialogueFeatures* const> batch, const TrainOptions& options);

/// One training-log record.
struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossReport report;
};

void write_log_header(std::ostream& out);
void write_log_record(std::ostream& out, const StepRecord& rec);

/// Batch order of an epoch; depends only on (seed, epoch, n).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

/// Model parameters plus optimizer state ("adam.m/<name>", "adam.v/<name>",
/// "adam.step") and the number of completed epochs ("train.epochs").
void save_training_checkpoint(const std::filesystem::path& path, const InferEmModel& model,
                              const Adam* optimizer, std::size_t epochs_done = 0);
/// Loads parameters (strict) and, when `optimizer` is given and present, its
/// state. Returns the completed-epoch count (0 when absent).
std::size_t load_training_checkpoint(const std::filesystem::path& path, InferEmModel& model,
                                     Adam* optimizer);

}  // namespace inferem

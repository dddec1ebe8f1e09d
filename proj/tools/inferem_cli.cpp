// inferem: data preparation, training, evaluation, generation and gradient checks.
//
// Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "inferem/checkpoint.hpp"
#include "inferem/config.hpp"
#include "inferem/gradcheck.hpp"
#include "inferem/gradient_suite.hpp"
#include "inferem/model.hpp"
#include "inferem/trainer.hpp"
#include "inferem/workspace.hpp"

namespace fs = std::filesystem;
using namespace inferem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path resolve_data_dir(const std::string& flag, const Config& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.get("data.dir").empty()) return cfg.get("data.dir");
  if (auto env = default_data_dir()) return *env;
  throw UsageError("no data directory: pass --data, set data.dir, or set INFEREM_DATA_DIR");
}

void apply_overrides(Config& cfg, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
}

std::string join(const Vocabulary& vocab, const std::vector<int>& ids) {
  std::string out;
  for (const auto& t : vocab.decode(ids)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// Files a trained run directory holds next to its checkpoint.
struct RunDir {
  fs::path dir;
  Config config;
  Vocabulary vocab;
  std::vector<std::string> emotions;
};

RunDir open_run(const fs::path& checkpoint) {
  if (!fs::exists(checkpoint)) throw UsageError("checkpoint not found: " + checkpoint.string());
  RunDir run;
  run.dir = checkpoint.parent_path();
  if (run.dir.empty()) run.dir = ".";
  run.config.merge_file(run.dir / "config.txt");
  run.vocab = Vocabulary::load(run.dir / "vocab.txt");
  run.emotions = load_emotions(run.dir / "emotions.txt");
  return run;
}

std::unique_ptr<InferEmModel> load_model(const RunDir& run, const fs::path& checkpoint) {
  auto model = std::make_unique<InferEmModel>(
      ModelConfig::from(run.config, run.vocab.size(), run.emotions.size()));
  load_training_checkpoint(checkpoint, *model, nullptr);
  return model;
}

// ---------------------------------------------------------------------------

int cmd_synth(const fs::path& out, int emotions, int dialogues, std::uint64_t seed, int vocab) {
  SyntheticConfig cfg;
  cfg.num_emotions = emotions;
  cfg.dialogues = dialogues;
  cfg.seed = seed;
  cfg.vocab_size = vocab;
  if (emotions < 2) throw UsageError("--emotions must be at least 2 (got " + std::to_string(emotions) + ")");
  const SyntheticCorpus corpus = generate_synthetic_corpus(cfg);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw UsageError("cannot create output directory " + out.string());
  write_corpus_dir(out, corpus.data, corpus.kb);
  std::cout << "wrote " << corpus.data.train.size() << "/" << corpus.data.valid.size() << "/"
            << corpus.data.test.size() << " train/valid/test dialogues to " << out.string() << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data;
  std::string config_file;
  std::string out;
  std::string resume;
  bool no_sip = false;
  bool no_lup = false;
  std::vector<std::string> overrides;
};

int cmd_train(const TrainArgs& args) {
  Config cfg;
  if (!args.config_file.empty()) cfg.merge_file(args.config_file);
  apply_overrides(cfg, args.overrides);
  if (args.no_sip) cfg.set("train.disable_sip", "true");
  if (args.no_lup) cfg.set("train.disable_lup", "true");
  const fs::path data_dir = resolve_data_dir(args.data, cfg);
  cfg.set("data.dir", fs::absolute(data_dir).string());

  const Workspace ws = load_workspace(data_dir, static_cast<std::size_t>(cfg.get_int("model.kmax")));
  const fs::path out(args.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw UsageError("cannot create output directory " + out.string());
  cfg.save(out / "config.txt");
  ws.vocab.save(out / "vocab.txt");
  save_emotions(out / "emotions.txt", ws.emotions);

  InferEmModel model(ModelConfig::from(cfg, ws.vocab.size(), ws.emotions.size()));
  if (!cfg.get("data.vectors").empty()) {
    const auto hits = load_pretrained_vectors(cfg.get("data.vectors"), ws.vocab, *model.embeddings.word);
    std::cout << "pretrained vectors: " << hits << " of " << ws.vocab.size() << " words\n";
  }
  const TrainOptions options = TrainOptions::from(cfg);
  Adam adam(options.learning_rate);
  std::size_t start_epoch = 0;
  if (!args.resume.empty()) {
    start_epoch = load_training_checkpoint(args.resume, model, &adam);
    std::cout << "resumed after epoch " << start_epoch << " (step " << adam.steps() << ")\n";
  }

  const std::size_t max_len = model.config.max_len;
  const auto train_f = prepare_features(ws.train, ws.kb, ws.vocab, max_len);
  const auto valid_f = prepare_features(ws.valid, ws.kb, ws.vocab, max_len);

  const fs::path log_path = out / "train_log.csv";
  const bool append = start_epoch > 0 && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!append) write_log_header(log);

  std::cout << "effective config:\n";
  for (const auto& e : cfg.entries()) std::cout << "  " << e.key << " = " << e.value << "\n";
  std::cout << "train " << train_f.size() << " / valid " << valid_f.size() << " dialogues, |V| = "
            << ws.vocab.size() << ", q = " << ws.emotions.size() << ", parameters = "
            << model.store.num_values() << "\n";

  TrainHooks hooks;
  hooks.log = &log;
  hooks.on_best = [&](const InferEmModel& m, const Adam& a, std::size_t epoch) {
    save_training_checkpoint(out / "checkpoint.bin", m, &a, epoch);
  };
  hooks.on_epoch_end = [&](const InferEmModel& m, const Adam& a, std::size_t epoch) {
    save_training_checkpoint(out / "last.bin", m, &a, epoch);
  };
  hooks.on_epoch = [](const EpochSummary& s) {
    std::printf("epoch %zu  loss %.4f  valid ppl %.3f  valid acc %.3f%s\n", s.epoch, s.train_loss,
                s.valid_perplexity, s.valid_accuracy, s.improved ? "  *" : "");
    std::fflush(stdout);
    return true;
  };
  const TrainResult result = train(model, adam, train_f, valid_f, options, hooks, start_epoch);
  if (result.epochs.empty() && !fs::exists(out / "checkpoint.bin")) {
    // Nothing trained (train.epochs = 0): keep the initial model for baselines.
    save_training_checkpoint(out / "checkpoint.bin", model, &adam, start_epoch);
  }
  std::cout << "best epoch " << result.best_epoch << " (valid ppl " << result.best_valid_perplexity << ")"
            << (result.stopped_early ? ", stopped early" : "") << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& data, const fs::path& checkpoint, const std::string& split,
             const std::string& report_path) {
  const RunDir run = open_run(checkpoint);
  const fs::path data_dir = resolve_data_dir(data, run.config);
  const Workspace ws = load_workspace(data_dir, static_cast<std::size_t>(run.config.get_int("model.kmax")),
                                      run.vocab, run.emotions);
  const std::vector<Dialogue>* dialogues = &ws.test;
  if (split == "valid") dialogues = &ws.valid;
  else if (split == "train") dialogues = &ws.train;
  else if (split != "test") throw UsageError("--split must be train, valid or test");

  const auto model = load_model(run, checkpoint);
  const auto features = prepare_features(*dialogues, ws.kb, ws.vocab, model->config.max_len);
  EvalOptions opts;
  const TrainOptions train_opts = TrainOptions::from(run.config);
  opts.ablation = train_opts.ablation;
  opts.max_steps = train_opts.max_steps;
  opts.distinct_mode = parse_distinct_mode(run.config.get("metrics.distinct_mode"));
  const EvalReport report = evaluate(*model, features, opts);
  report.validate();
  print_report_table(std::cout, report);
  const fs::path out = report_path.empty() ? run.dir / "eval_report.txt" : fs::path(report_path);
  write_report(out, report);
  std::cout << "report written to " << out.string() << "\n";
  return kExitOk;
}

int cmd_generate(const fs::path& checkpoint, const std::string& context, const std::string& data) {
  const RunDir run = open_run(checkpoint);
  KnowledgeBase kb(static_cast<std::size_t>(run.config.get_int("model.kmax")));
  std::string data_dir = data.empty() ? run.config.get("data.dir") : data;
  if (!data_dir.empty() && fs::is_directory(data_dir)) kb = load_knowledge(data_dir, kb.k_max());

  Dialogue d;
  d.id = "cli";
  std::size_t pos = 0;
  while (true) {
    const auto bar = context.find("||", pos);
    const std::string part = context.substr(pos, bar == std::string::npos ? std::string::npos : bar - pos);
    const auto toks = tokenize(part);
    if (!toks.empty()) {
      const Role role = d.utterances.size() % 2 == 0 ? Role::speaker : Role::listener;
      d.utterances.push_back({role, run.vocab.encode(toks)});
    }
    if (bar == std::string::npos) break;
    pos = bar + 2;
  }
  if (d.utterances.empty()) throw UsageError("--context has no utterances");
  d.gold_response = {kUnk};  // placeholder: generation never reads the gold response

  const auto model = load_model(run, checkpoint);
  const DialogueFeatures f = prepare_features(d, kb, run.vocab, model->config.max_len);
  const TrainOptions opts = TrainOptions::from(run.config);
  const Generation g = generate(*model, f, opts.ablation, opts.max_steps);
  std::cout << "emotion: " << run.emotions.at(static_cast<std::size_t>(g.predicted_emotion)) << "\n";
  if (g.virtual_tokens) {
    std::cout << "virtual: " << join(run.vocab, *g.virtual_tokens) << "\n";
  } else if (!f.has_prediction_branch()) {
    std::cout << "virtual: prediction branch skipped (single-utterance context)\n";
  } else {
    std::cout << "virtual: prediction branch skipped (disabled in this run)\n";
  }
  std::cout << "response: " << join(run.vocab, g.response) << "\n";
  return kExitOk;
}

int cmd_gradcheck(bool sabotage, std::size_t seeds) {
  GradSuiteOptions opts;
  opts.sabotage = sabotage;
  opts.seeds = seeds;
  const GradSuiteReport report = run_gradient_suite(opts);
  print_gradient_report(std::cout, report);
  const bool ok = report.all_passed();
  std::cout << (ok ? "all gradient checks passed\n" : "gradient check FAILED\n");
  return ok ? kExitOk : kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"InferEM empathetic response generation"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic corpus with lexicons");
  std::string synth_out;
  int synth_emotions = 8, synth_dialogues = 2000, synth_vocab = 200;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--emotions", synth_emotions, "Number of emotion classes (>= 2)");
  synth->add_option("--dialogues", synth_dialogues, "Number of dialogues");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--vocab", synth_vocab, "Approximate vocabulary size");

  Config defaults;
  auto* train_cmd = app.add_subcommand("train", "Train a model\n\nConfiguration keys:\n" + defaults.describe());
  TrainArgs targs;
  train_cmd->add_option("--data", targs.data, "Corpus directory (default: data.dir or INFEREM_DATA_DIR)");
  train_cmd->add_option("--config", targs.config_file, "Config file of `section.key = value` lines");
  train_cmd->add_option("--out", targs.out, "Run directory")->required();
  train_cmd->add_flag("--no-sip", targs.no_sip, "Disable intention fusion (F_C = S_C)");
  train_cmd->add_flag("--no-lup", targs.no_lup, "Disable the last-utterance prediction branch");
  train_cmd->add_option("--resume", targs.resume, "Continue from a training checkpoint");
  train_cmd->add_option("--set", targs.overrides, "Override a config key (key=value), repeatable");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_data, eval_ckpt, eval_split = "test", eval_report;
  eval_cmd->add_option("--data", eval_data, "Corpus directory (default: the run's data.dir)");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint inside a run directory")->required();
  eval_cmd->add_option("--split", eval_split, "train, valid or test");
  eval_cmd->add_option("--report", eval_report, "Report path (default: <run>/eval_report.txt)");

  auto* gen_cmd = app.add_subcommand("generate", "Generate a virtual last utterance and a response");
  std::string gen_ckpt, gen_context, gen_data;
  gen_cmd->add_option("--checkpoint", gen_ckpt, "Checkpoint inside a run directory")->required();
  gen_cmd->add_option("--context", gen_context, "Utterances separated by ||")->required();
  gen_cmd->add_option("--data", gen_data, "Directory with intensity.tsv / concepts.tsv");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference checks of primitives and composites");
  bool sabotage = false;
  std::size_t grad_seeds = 10;
  grad_cmd->add_flag("--sabotage", sabotage, "Include a primitive with a deliberately wrong gradient");
  grad_cmd->add_option("--seeds", grad_seeds, "Seeds per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*synth) return cmd_synth(synth_out, synth_emotions, synth_dialogues, synth_seed, synth_vocab);
    if (*train_cmd) return cmd_train(targs);
    if (*eval_cmd) return cmd_eval(eval_data, eval_ckpt, eval_split, eval_report);
    if (*gen_cmd) return cmd_generate(gen_ckpt, gen_context, gen_data);
    if (*grad_cmd) return cmd_gradcheck(sabotage, grad_seeds);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace inferem {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Role : int { speaker = 0, listener = 1 };

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;

/// Lowercases and splits on whitespace; every ASCII punctuation character
/// becomes its own token. "don't" -> ["don", "'", "t"].
std::vector<std::string> tokenize(std::string_view text);

/// Token <-> id bijection with PAD/BOS/EOS/UNK fixed at ids 0..3.
class Vocabulary {
 public:
  Vocabulary();

  int add(const std::string& token);
  /// Id of `token`, or UNK.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  static bool is_reserved(int id) { return id >= 0 && id <= kUnk; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct ConceptLink {
  std::string concept_word;
  double score = 0.0;
};

/// Per-word emotion concepts and intensities. Out-of-lexicon intensity is 0.
class KnowledgeBase {
 public:
  explicit KnowledgeBase(std::size_t k_max = 5) : k_max_(k_max) {}

  void set_intensity(const std::string& word, double eta);
  void add_concept(const std::string& word, const std::string& concept_word, double score);

  double intensity(const std::string& word) const;
  /// At most k_max links, descending score, ties broken lexicographically.
  std::vector<ConceptLink> lookup_concepts(const std::string& word) const;

  std::size_t k_max() const { return k_max_; }
  void set_k_max(std::size_t k) { k_max_ = k; }
  bool empty() const { return intensity_.empty() && concepts_.empty(); }
  const std::map<std::string, double>& intensities() const { return intensity_; }
  const std::map<std::string, std::vector<ConceptLink>>& concepts() const { return concepts_; }

  /// `word<TAB>float` lines; values must lie in [0,1].
  void load_intensity(const std::filesystem::path& path);
  /// `word<TAB>concept<TAB>float` lines; scores must lie in (0,1].
  void load_concepts(const std::filesystem::path& path);
  void save_intensity(const std::filesystem::path& path) const;
  void save_concepts(const std::filesystem::path& path) const;

 private:
  std::size_t k_max_;
  std::map<std::string, double> intensity_;
  std::map<std::string, std::vector<ConceptLink>> concepts_;
};

struct RawUtterance {
  Role role = Role::speaker;
  std::vector<std::string> tokens;
};

/// Text-level dialogue: context utterances, gold response, emotion name.
struct RawDialogue {
  std::string id;
  std::vector<RawUtterance> utterances;
  std::vector<std::string> response;
  std::string emotion;

  bool has_prediction_branch() const { return utterances.size() >= 2; }
};

struct Dataset {
  std::vector<RawDialogue> train;
  std::vector<RawDialogue> valid;
  std::vector<RawDialogue> test;
  /// Number of conversations dropped because they had no context turn.
  std::size_t dropped = 0;
};

struct Utterance {
  Role role = Role::speaker;
  std::vector<int> tokens;
};

/// Id-level dialogue used by the model.
struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;
  std::vector<int> gold_response;
  int emotion_label = 0;

  std::size_t n() const { return utterances.size(); }
  bool has_prediction_branch() const { return utterances.size() >= 2; }
};

/// Reads one EMPATHETICDIALOGUES-style CSV file. Header names select the
/// columns; `context` is accepted as an alias of `context_emotion`.
std::vector<RawDialogue> load_dialogue_csv(const std::filesystem::path& path,
                                           std::size_t* dropped = nullptr);

/// Loads train.csv / valid.csv / test.csv from `dir`.
Dataset load_empathetic_dialogues(const std::filesystem::path& dir);

void write_dialogue_csv(const std::filesystem::path& path, const std::vector<RawDialogue>& dialogues);

/// Loads intensity.tsv and concepts.tsv from `dir` when present.
KnowledgeBase load_knowledge(const std::filesystem::path& dir, std::size_t k_max = 5);

/// Directory named by INFEREM_DATA_DIR, if set.
std::optional<std::filesystem::path> default_data_dir();

struct SyntheticConfig {
  int num_emotions = 8;
  int vocab_size = 200;
  int dialogues = 2000;
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  Dataset data;
  KnowledgeBase kb;
};

/// Templated dialogues whose emotion words identify the label and whose gold
/// response repeats the topic word of the last utterance. Pure function of config.
SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg);

/// Writes the three CSV splits plus intensity.tsv / concepts.tsv.
void write_corpus_dir(const std::filesystem::path& dir, const Dataset& data, const KnowledgeBase& kb);

/// Sorted distinct emotion names of a split.
std::vector<std::string> emotion_labels(const std::vector<RawDialogue>& dialogues);

/// Vocabulary over training text plus concept words linked from it.
Vocabulary build_vocabulary(const std::vector<RawDialogue>& train, const KnowledgeBase& kb);

/// Maps text to ids. Throws CorpusError for an emotion missing from `emotions`.
Dialogue encode_dialogue(const RawDialogue& raw, const Vocabulary& vocab,
                         const std::vector<std::string>& emotions);
std::vector<Dialogue> encode_dialogues(const std::vector<RawDialogue>& raw, const Vocabulary& vocab,
                                       const std::vector<std::string>& emotions);

}  // namespace inferem

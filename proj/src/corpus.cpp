#include "inferem/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace inferem {

// ---------------------------------------------------------------------------
// Tokenizer

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(t);
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_[token] = id;
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write vocabulary: " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read vocabulary: " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (n++ < 4) continue;
    v.add(line);
  }
  return v;
}

// ---------------------------------------------------------------------------
// KnowledgeBase

void KnowledgeBase::set_intensity(const std::string& word, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw CorpusError("intensity for '" + word + "' outside [0,1]: " + std::to_string(eta));
  }
  intensity_[word] = eta;
}

void KnowledgeBase::add_concept(const std::string& word, const std::string& concept_word,
                                double score) {
  if (!(score > 0.0 && score <= 1.0)) {
    throw CorpusError("relatedness for '" + word + "'->'" + concept_word +
                      "' outside (0,1]: " + std::to_string(score));
  }
  concepts_[word].push_back({concept_word, score});
}

double KnowledgeBase::intensity(const std::string& word) const {
  auto it = intensity_.find(word);
  return it == intensity_.end() ? 0.0 : it->second;
}

std::vector<ConceptLink> KnowledgeBase::lookup_concepts(const std::string& word) const {
  auto it = concepts_.find(word);
  if (it == concepts_.end()) return {};
  std::vector<ConceptLink> links = it->second;
  std::sort(links.begin(), links.end(), [](const ConceptLink& a, const ConceptLink& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.concept_word < b.concept_word;
  });
  if (links.size() > k_max_) links.resize(k_max_);
  return links;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, '\t')) parts.push_back(cur);
  return parts;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw CorpusError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
  return v;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

void KnowledgeBase::load_intensity(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read intensity lexicon: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto parts = split_tabs(line);
    if (parts.size() != 2) {
      throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": expected word<TAB>float");
    }
    set_intensity(parts[0], parse_double(parts[1], path, lineno));
  }
}

void KnowledgeBase::load_concepts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read concept lexicon: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto parts = split_tabs(line);
    if (parts.size() != 3) {
      throw CorpusError(path.string() + ":" + std::to_string(lineno) +
                        ": expected word<TAB>concept<TAB>float");
    }
    add_concept(parts[0], parts[1], parse_double(parts[2], path, lineno));
  }
}

void KnowledgeBase::save_intensity(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  out.precision(17);
  for (const auto& [w, v] : intensity_) out << w << '\t' << v << '\n';
}

void KnowledgeBase::save_concepts(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  out.precision(17);
  for (const auto& [w, links] : concepts_)
    for (const auto& l : links) out << w << '\t' << l.concept_word << '\t' << l.score << '\n';
}

// ---------------------------------------------------------------------------
// Dialogue CSV

namespace {

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

struct CsvRow {
  std::string conv_id;
  long index = 0;
  std::string emotion;
  std::string utterance;
};

}  // namespace

std::vector<RawDialogue> load_dialogue_csv(const std::filesystem::path& path, std::size_t* dropped) {
  std::ifstream in(path);
  if (!in) throw CorpusError("missing dialogue file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CorpusError(path.string() + ": empty file");
  const auto header = parse_csv_line(strip_cr(line));
  auto column = [&](std::initializer_list<const char*> names) -> std::size_t {
    for (const char* n : names) {
      auto it = std::find(header.begin(), header.end(), n);
      if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
    }
    throw CorpusError(path.string() + ":1: header lacks column '" + *names.begin() + "'");
  };
  const std::size_t c_conv = column({"conv_id"});
  const std::size_t c_idx = column({"utterance_idx"});
  const std::size_t c_emo = column({"context_emotion", "context"});
  const std::size_t c_utt = column({"utterance"});
  column({"speaker_idx"});
  const std::size_t needed = std::max({c_conv, c_idx, c_emo, c_utt}) + 1;

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<CsvRow>> convs;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = parse_csv_line(line);
    if (fields.size() < needed) {
      throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": malformed row, expected " +
                        std::to_string(header.size()) + " columns, got " +
                        std::to_string(fields.size()));
    }
    CsvRow row;
    row.conv_id = fields[c_conv];
    char* end = nullptr;
    row.index = std::strtol(fields[c_idx].c_str(), &end, 10);
    if (fields[c_idx].empty() || *end != '\0') {
      throw CorpusError(path.string() + ":" + std::to_string(lineno) +
                        ": malformed row, utterance_idx '" + fields[c_idx] + "' is not an integer");
    }
    row.emotion = fields[c_emo];
    row.utterance = replace_all(fields[c_utt], "_comma_", ",");
    if (!convs.count(row.conv_id)) order.push_back(row.conv_id);
    convs[row.conv_id].push_back(std::move(row));
  }

  std::vector<RawDialogue> out;
  std::size_t skipped = 0;
  for (const auto& id : order) {
    auto rows = convs[id];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const CsvRow& a, const CsvRow& b) { return a.index < b.index; });
    if (rows.size() < 2) {
      ++skipped;
      continue;
    }
    RawDialogue d;
    d.id = id;
    d.emotion = rows.front().emotion;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      RawUtterance u;
      u.role = i % 2 == 0 ? Role::speaker : Role::listener;
      u.tokens = tokenize(rows[i].utterance);
      if (u.tokens.empty()) {
        throw CorpusError(path.string() + ": conversation " + id + " has an empty utterance");
      }
      d.utterances.push_back(std::move(u));
    }
    d.response = tokenize(rows.back().utterance);
    if (d.response.empty()) {
      throw CorpusError(path.string() + ": conversation " + id + " has an empty response");
    }
    out.push_back(std::move(d));
  }
  if (dropped) *dropped += skipped;
  return out;
}

Dataset load_empathetic_dialogues(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw CorpusError("data directory not found: " + dir.string());
  Dataset ds;
  ds.train = load_dialogue_csv(dir / "train.csv", &ds.dropped);
  ds.valid = load_dialogue_csv(dir / "valid.csv", &ds.dropped);
  ds.test = load_dialogue_csv(dir / "test.csv", &ds.dropped);
  return ds;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return replace_all(s, ",", "_comma_");
}

}  // namespace

void write_dialogue_csv(const std::filesystem::path& path, const std::vector<RawDialogue>& dialogues) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  out << "conv_id,utterance_idx,context_emotion,utterance,speaker_idx\n";
  for (const auto& d : dialogues) {
    std::size_t idx = 1;
    auto row = [&](const std::vector<std::string>& tokens) {
      const int speaker = idx % 2 == 1 ? 0 : 1;
      out << d.id << ',' << idx << ',' << d.emotion << ',' << join_tokens(tokens) << ','
          << speaker << '\n';
      ++idx;
    };
    for (const auto& u : d.utterances) row(u.tokens);
    row(d.response);
  }
}

KnowledgeBase load_knowledge(const std::filesystem::path& dir, std::size_t k_max) {
  KnowledgeBase kb(k_max);
  if (std::filesystem::exists(dir / "intensity.tsv")) kb.load_intensity(dir / "intensity.tsv");
  if (std::filesystem::exists(dir / "concepts.tsv")) kb.load_concepts(dir / "concepts.tsv");
  return kb;
}

std::optional<std::filesystem::path> default_data_dir() {
  if (const char* env = std::getenv("INFEREM_DATA_DIR"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

void write_corpus_dir(const std::filesystem::path& dir, const Dataset& data, const KnowledgeBase& kb) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw CorpusError("cannot create directory " + dir.string());
  }
  write_dialogue_csv(dir / "train.csv", data.train);
  write_dialogue_csv(dir / "valid.csv", data.valid);
  write_dialogue_csv(dir / "test.csv", data.test);
  kb.save_intensity(dir / "intensity.tsv");
  kb.save_concepts(dir / "concepts.tsv");
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

const char* const kEmotionNames[] = {
    "afraid",    "angry",     "annoyed",    "anticipating", "anxious",      "apprehensive",
    "ashamed",   "caring",    "confident",  "content",      "devastated",   "disappointed",
    "disgusted", "embarrassed", "excited",  "faithful",     "furious",      "grateful",
    "guilty",    "hopeful",   "impressed",  "jealous",      "joyful",       "lonely",
    "nostalgic", "prepared",  "proud",      "sad",          "sentimental",  "surprised",
    "terrified", "trusting"};

const char* const kTopics[] = {
    "dog",   "car",    "job",     "exam",     "house",   "party",     "trip",    "game",
    "movie", "friend", "sister",  "brother",  "mom",     "dad",       "boss",    "phone",
    "garden", "concert", "wedding", "interview", "project", "bike",   "cat",     "book",
    "school", "class", "beach",   "vacation", "dinner",  "gift",      "team",    "neighbor",
    "kitchen", "flight", "laptop", "promotion", "puppy", "apartment", "recital", "race"};

const char* const kFunctionWords[] = {
    "i",   "feel", "so",   "about", "my",   "the",  "you",  "it",    "was",  "is",
    "oh",  "why",  "what", "happened", "with", "sounds", "too", "that", "really", "hear",
    "to",  "am",   ".",    ",",     "!",    "?"};

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg) {
  if (cfg.num_emotions < 2) {
    throw CorpusError("synthetic corpus needs at least 2 emotions (num_emotions >= 2), got " +
                      std::to_string(cfg.num_emotions));
  }
  if (cfg.dialogues < 1) throw CorpusError("synthetic corpus needs dialogues >= 1");
  const int q = cfg.num_emotions;
  const int fixed = static_cast<int>(std::size(kFunctionWords)) + 4 * q + 4;
  const int topic_count = cfg.vocab_size - fixed;
  if (topic_count < 4) {
    throw CorpusError("vocab_size " + std::to_string(cfg.vocab_size) + " too small for " +
                      std::to_string(q) + " emotions (need at least " + std::to_string(fixed + 4) + ")");
  }

  std::mt19937_64 rng(cfg.seed);
  auto pick = [&](std::size_t n) {
    return static_cast<std::size_t>(std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng));
  };
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

  std::vector<std::string> names;
  for (int e = 0; e < q; ++e) {
    names.push_back(e < static_cast<int>(std::size(kEmotionNames)) ? kEmotionNames[e]
                                                                   : "emotion" + std::to_string(e));
  }
  // Three cue words and one reply word per emotion.
  std::vector<std::vector<std::string>> cues(q);
  std::vector<std::string> replies(q);
  for (int e = 0; e < q; ++e) {
    cues[e] = {names[e], names[e] + "ish", names[e] + "ness"};
    replies[e] = names[e] + "ly";
  }
  std::vector<std::string> topics;
  for (int i = 0; i < topic_count; ++i) {
    topics.push_back(i < static_cast<int>(std::size(kTopics)) ? kTopics[i]
                                                              : "thing" + std::to_string(i));
  }

  SyntheticCorpus out;
  KnowledgeBase& kb = out.kb;
  for (int e = 0; e < q; ++e) {
    for (std::size_t c = 0; c < cues[e].size(); ++c) {
      kb.set_intensity(cues[e][c], 0.8 + 0.2 * std::uniform_real_distribution<double>(0.0, 1.0)(rng));
      kb.add_concept(cues[e][c], cues[e][(c + 1) % 3], 0.9);
      kb.add_concept(cues[e][c], cues[e][(c + 2) % 3], 0.7);
      kb.add_concept(cues[e][c], replies[e], 0.5);
    }
    kb.set_intensity(replies[e], 0.6);
  }

  // Balanced labels, shuffled.
  std::vector<int> labels(static_cast<std::size_t>(cfg.dialogues));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(q));
  std::shuffle(labels.begin(), labels.end(), rng);

  auto words = [](std::initializer_list<std::string> ws) { return std::vector<std::string>(ws); };
  std::vector<RawDialogue> all;
  for (int k = 0; k < cfg.dialogues; ++k) {
    const int e = labels[static_cast<std::size_t>(k)];
    RawDialogue d;
    d.id = "syn:" + std::to_string(k);
    d.emotion = names[e];
    const std::string& t1 = topics[pick(topics.size())];
    const std::string& last_topic = coin(0.5) ? t1 : topics[pick(topics.size())];
    const std::string& cue_a = cues[e][pick(3)];
    const std::string& cue_b = cues[e][pick(3)];
    const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const int n = r < 0.1 ? 1 : (r < 0.8 ? 3 : 5);
    if (n >= 5) {
      const std::string& t0 = topics[pick(topics.size())];
      d.utterances.push_back({Role::speaker, words({"i", "am", "so", cues[e][pick(3)], "about", "the", t0, "."})});
      d.utterances.push_back({Role::listener, words({"why", "is", "that", "?"})});
    }
    if (n >= 3) {
      d.utterances.push_back({Role::speaker, words({"i", "feel", cue_a, "about", "my", t1, "."})});
      d.utterances.push_back({Role::listener, words({"what", "happened", "with", "the", t1, "?"})});
    }
    d.utterances.push_back({Role::speaker, words({"my", last_topic, "was", "so", cue_b, "!"})});
    d.response = words({"oh", ",", "the", last_topic, "sounds", replies[e], "."});
    all.push_back(std::move(d));
  }

  const std::size_t n_train = all.size() * 8 / 10;
  const std::size_t n_valid = all.size() / 10;
  auto& ds = out.data;
  ds.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.valid.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
                  all.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  ds.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), all.end());
  return out;
}

// ---------------------------------------------------------------------------
// Encoding

std::vector<std::string> emotion_labels(const std::vector<RawDialogue>& dialogues) {
  std::set<std::string> s;
  for (const auto& d : dialogues) s.insert(d.emotion);
  return {s.begin(), s.end()};
}

Vocabulary build_vocabulary(const std::vector<RawDialogue>& train, const KnowledgeBase& kb) {
  Vocabulary v;
  for (const auto& d : train) {
    for (const auto& u : d.utterances)
      for (const auto& t : u.tokens) v.add(t);
    for (const auto& t : d.response) v.add(t);
  }
  const std::size_t base = v.size();
  for (std::size_t i = 4; i < base; ++i)
    for (const auto& link : kb.lookup_concepts(v.token(static_cast<int>(i)))) v.add(link.concept_word);
  return v;
}

Dialogue encode_dialogue(const RawDialogue& raw, const Vocabulary& vocab,
                         const std::vector<std::string>& emotions) {
  Dialogue d;
  d.id = raw.id;
  auto it = std::find(emotions.begin(), emotions.end(), raw.emotion);
  if (it == emotions.end()) throw CorpusError("dialogue " + raw.id + ": unknown emotion '" + raw.emotion + "'");
  d.emotion_label = static_cast<int>(it - emotions.begin());
  for (const auto& u : raw.utterances) d.utterances.push_back({u.role, vocab.encode(u.tokens)});
  d.gold_response = vocab.encode(raw.response);
  return d;
}

std::vector<Dialogue> encode_dialogues(const std::vector<RawDialogue>& raw, const Vocabulary& vocab,
                                       const std::vector<std::string>& emotions) {
  std::vector<Dialogue> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(encode_dialogue(r, vocab, emotions));
  return out;
}

}  // namespace inferem

#include "inferem/embedding.hpp"

#include <fstream>
#include <sstream>

namespace inferem {

EmbeddingTables::EmbeddingTables(ag::ParameterStore& store, std::size_t vocab_size, std::size_t dim_,
                                 std::size_t max_len_, std::mt19937_64& rng)
    : word(&store.create("embedding.word", ag::uniform(vocab_size, dim_, 0.1, rng))),
      position(&store.create("embedding.position", ag::uniform(max_len_, dim_, 0.1, rng))),
      state(&store.create("embedding.state", ag::uniform(2, dim_, 0.1, rng))),
      dim(dim_),
      max_len(max_len_) {}

namespace {

std::vector<int> positions(std::size_t n, std::size_t max_len) {
  if (n > max_len) {
    throw ShapeError("sequence of length " + std::to_string(n) + " exceeds model.max_len " +
                     std::to_string(max_len));
  }
  if (n == 0) throw ShapeError("cannot embed an empty sequence");
  std::vector<int> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = static_cast<int>(i);
  return pos;
}

}  // namespace

ag::Var EmbeddingTables::embed_sequence(ag::Tape& tape, std::span<const int> tokens,
                                        std::span<const Role> roles) const {
  if (roles.size() != tokens.size()) {
    throw ShapeError("embed_sequence: " + std::to_string(tokens.size()) + " tokens but " +
                     std::to_string(roles.size()) + " roles");
  }
  const auto pos = positions(tokens.size(), max_len);
  std::vector<int> states(roles.size());
  for (std::size_t i = 0; i < roles.size(); ++i) states[i] = static_cast<int>(roles[i]);
  ag::Var w = ag::embedding_lookup(tape.param(*word), tokens);
  ag::Var p = ag::embedding_lookup(tape.param(*position), pos);
  ag::Var s = ag::embedding_lookup(tape.param(*state), states);
  return ag::add(ag::add(w, p), s);
}

ag::Var EmbeddingTables::embed_target(ag::Tape& tape, std::span<const int> tokens) const {
  const auto pos = positions(tokens.size(), max_len);
  return ag::add(ag::embedding_lookup(tape.param(*word), tokens),
                 ag::embedding_lookup(tape.param(*position), pos));
}

SequenceKnowledge gather_knowledge(std::span<const int> tokens, const KnowledgeBase& kb,
                                   const Vocabulary& vocab) {
  SequenceKnowledge k;
  k.concepts.resize(tokens.size());
  k.eta.resize(tokens.size(), 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (Vocabulary::is_reserved(tokens[i])) continue;
    const std::string& w = vocab.token(tokens[i]);
    k.eta[i] = kb.intensity(w);
    for (const auto& link : kb.lookup_concepts(w)) {
      const int id = vocab.id(link.concept_word);
      if (id == kUnk) continue;
      k.concepts[i].ids.push_back(id);
      k.concepts[i].scores.push_back(link.score);
    }
  }
  return k;
}

EnrichedSequence enrich(ag::Tape& tape, const EmbeddingTables& tables, std::span<const int> tokens,
                        std::span<const Role> roles, const SequenceKnowledge& knowledge) {
  if (knowledge.eta.size() != tokens.size()) {
    throw ShapeError("enrich: knowledge covers " + std::to_string(knowledge.eta.size()) +
                     " positions, sequence has " + std::to_string(tokens.size()));
  }
  return {tables.embed_sequence(tape, tokens, roles), knowledge.concepts, knowledge.eta};
}

EnrichedSequence enrich(ag::Tape& tape, const EmbeddingTables& tables, std::span<const int> tokens,
                        std::span<const Role> roles, const KnowledgeBase& kb, const Vocabulary& vocab) {
  return enrich(tape, tables, tokens, roles, gather_knowledge(tokens, kb, vocab));
}

std::size_t load_pretrained_vectors(const std::filesystem::path& path, const Vocabulary& vocab,
                                    ag::Parameter& word_table) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read pretrained vectors: " + path.string());
  const std::size_t dim = word_table.value.cols();
  std::vector<bool> seen(vocab.size(), false);
  std::size_t hits = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (values.size() != dim) {
      throw ShapeError(path.string() + ":" + std::to_string(lineno) + ": vector has " +
                       std::to_string(values.size()) + " values, model.dim is " + std::to_string(dim));
    }
    if (!vocab.contains(word)) continue;
    const auto id = static_cast<std::size_t>(vocab.id(word));
    for (std::size_t c = 0; c < dim; ++c) word_table.value(id, c) = values[c];
    if (!seen[id]) {
      seen[id] = true;
      ++hits;
    }
  }
  return hits;
}

}  // namespace inferem

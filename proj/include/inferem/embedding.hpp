#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "inferem/autograd.hpp"
#include "inferem/corpus.hpp"

namespace inferem {

/// Word (|V|×d), learned positional (max_len×d) and state (2×d) tables.
struct EmbeddingTables {
  ag::Parameter* word = nullptr;
  ag::Parameter* position = nullptr;
  ag::Parameter* state = nullptr;
  std::size_t dim = 0;
  std::size_t max_len = 0;

  EmbeddingTables() = default;
  EmbeddingTables(ag::ParameterStore& store, std::size_t vocab_size, std::size_t dim,
                  std::size_t max_len, std::mt19937_64& rng);

  /// E_w + E_p + E_s, one row per token. Throws ShapeError past max_len.
  ag::Var embed_sequence(ag::Tape& tape, std::span<const int> tokens, std::span<const Role> roles) const;
  /// E_w + E_p, used for decoder inputs.
  ag::Var embed_target(ag::Tape& tape, std::span<const int> tokens) const;
};

/// Concept neighbors of one position: word ids and relatedness scores.
struct PositionConcepts {
  std::vector<int> ids;
  std::vector<double> scores;
};

/// Tape-independent knowledge for a token sequence.
struct SequenceKnowledge {
  std::vector<PositionConcepts> concepts;
  std::vector<double> eta;
};

SequenceKnowledge gather_knowledge(std::span<const int> tokens, const KnowledgeBase& kb,
                                   const Vocabulary& vocab);

struct EnrichedSequence {
  ag::Var base;
  std::vector<PositionConcepts> concepts;
  std::vector<double> eta;

  std::size_t length() const { return eta.size(); }
};

EnrichedSequence enrich(ag::Tape& tape, const EmbeddingTables& tables, std::span<const int> tokens,
                        std::span<const Role> roles, const SequenceKnowledge& knowledge);
EnrichedSequence enrich(ag::Tape& tape, const EmbeddingTables& tables, std::span<const int> tokens,
                        std::span<const Role> roles, const KnowledgeBase& kb, const Vocabulary& vocab);

/// Overwrites word-table rows from a `word v1 ... vd` text file. Returns the
/// number of vocabulary rows replaced.
std::size_t load_pretrained_vectors(const std::filesystem::path& path, const Vocabulary& vocab,
                                    ag::Parameter& word_table);

}  // namespace inferem

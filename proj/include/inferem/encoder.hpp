#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "inferem/embedding.hpp"
#include "inferem/layers.hpp"

namespace inferem {

/// Encoded features (q×d) with the intensities of the positions they encode.
struct EncodedSequence {
  ag::Var features;
  std::vector<double> eta;
};

/// Stack of pre-norm transformer encoder layers. Zero layers is the identity.
struct TransformerStack {
  std::vector<EncoderLayer> layers;

  TransformerStack() = default;
  TransformerStack(ag::ParameterStore& store, const std::string& name, std::size_t dim,
                   std::size_t heads, std::size_t depth, std::mt19937_64& rng);
  /// `attention` collects every layer's per-head self-attention weights.
  ag::Var operator()(ag::Var x, std::vector<ag::Var>* attention = nullptr) const;
};

/// One graph-attention step over {self} ∪ concept neighbors for each position.
/// Neighbor scores are scaled dot products multiplied by KB relatedness; the
/// self score is the scaled dot product of the position with itself.
ag::Var graph_attention(ag::Var base, std::span<const PositionConcepts> concepts, ag::Var word_table);

/// Emotion context encoder: graph attention, then a transformer stack.
struct EcEncoder {
  const EmbeddingTables* tables = nullptr;
  TransformerStack stack;

  EcEncoder() = default;
  EcEncoder(ag::ParameterStore& store, const std::string& name, const EmbeddingTables& tables,
            std::size_t heads, std::size_t depth, std::mt19937_64& rng);

  EncodedSequence operator()(const EnrichedSequence& input,
                             std::vector<ag::Var>* attention = nullptr) const;
};

/// Transformer encoder without concepts (used for the virtual utterance).
struct PlainEncoder {
  TransformerStack stack;

  PlainEncoder() = default;
  PlainEncoder(ag::ParameterStore& store, const std::string& name, std::size_t dim,
               std::size_t heads, std::size_t depth, std::mt19937_64& rng);

  EncodedSequence operator()(ag::Var embedded, std::vector<double> eta = {}) const;
};

/// softmax(eta)ᵀ · S as a 1×d row.
ag::Var emotion_signal(ag::Var features, std::span<const double> eta);

}  // namespace inferem

#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "inferem/embedding.hpp"
#include "inferem/layers.hpp"

namespace inferem {

/// Pre-norm decoder layer: causal self-attention, cross-attention to memory, feed-forward.
struct DecoderLayer {
  LayerNorm self_norm;
  MultiHeadAttention self_attn;
  LayerNorm cross_norm;
  MultiHeadAttention cross_attn;
  LayerNorm ff_norm;
  FeedForward ff;

  DecoderLayer() = default;
  DecoderLayer(ag::ParameterStore& store, const std::string& name, std::size_t dim,
               std::size_t heads, std::mt19937_64& rng);

  ag::Var operator()(ag::Var x, ag::Var memory, const Tensor& mask,
                     std::vector<ag::Var>* cross_weights) const;
};

/// Cross-attention weights of the final decoder layer: one t×q matrix per head.
struct AttentionRecord {
  std::vector<ag::Var> heads;

  std::size_t num_heads() const { return heads.size(); }
};

struct DecoderOutput {
  ag::Var logits;         ///< t×|V|
  ag::Var distributions;  ///< row-wise softmax of logits
  AttentionRecord attention;
};

/// Emotion-conditioned transformer decoder. The emotion signal is projected
/// d→d and added to every target-position embedding.
struct EmotionDecoder {
  const EmbeddingTables* tables = nullptr;
  Linear emotion_proj;
  std::vector<DecoderLayer> layers;
  LayerNorm final_norm;
  Linear vocab_proj;

  EmotionDecoder() = default;
  EmotionDecoder(ag::ParameterStore& store, const std::string& name, const EmbeddingTables& tables,
                 std::size_t vocab_size, std::size_t heads, std::size_t depth, std::mt19937_64& rng);

  /// Row j is the distribution of the token after prefix[0..j]. The prefix
  /// must start with BOS; memory must be non-empty.
  DecoderOutput operator()(ag::Var e_signal, ag::Var memory, std::span<const int> prefix) const;
};

/// Index of the largest entry; ties resolve to the lowest index.
int argmax(std::span<const double> values);

/// Greedy decoding from BOS: appends the argmax token until EOS or max_steps
/// tokens. The returned sequence excludes BOS and EOS.
std::vector<int> greedy_decode(const EmotionDecoder& decoder, const Tensor& e_signal,
                               const Tensor& memory, std::size_t max_steps = 30);

/// a_i: cross-attention weight on memory position i, averaged over heads and
/// then over target steps. Returns a 1×q row.
ag::Var average_cross_attention(const AttentionRecord& record);

}  // namespace inferem

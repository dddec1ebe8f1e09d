#pragma once

#include <random>
#include <string>
#include <vector>

#include "inferem/autograd.hpp"

namespace inferem {

/// y = x W + b, W in×out.
struct Linear {
  ag::Parameter* weight = nullptr;
  ag::Parameter* bias = nullptr;

  Linear() = default;
  Linear(ag::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
         std::mt19937_64& rng);
  ag::Var operator()(ag::Var x) const;
};

/// Row-wise layer normalization with learnable gain (init 1) and bias (init 0).
struct LayerNorm {
  ag::Parameter* gain = nullptr;
  ag::Parameter* bias = nullptr;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(ag::ParameterStore& store, const std::string& name, std::size_t dim);
  ag::Var operator()(ag::Var x) const;
};

/// Two fully connected layers with ReLU between them.
struct FeedForward {
  Linear inner;
  Linear outer;

  FeedForward() = default;
  FeedForward(ag::ParameterStore& store, const std::string& name, std::size_t dim,
              std::size_t hidden, std::mt19937_64& rng);
  ag::Var operator()(ag::Var x) const;
};

struct AttentionOutput {
  ag::Var output;
  /// One a×b weight matrix per head; rows sum to 1.
  std::vector<ag::Var> weights;
};

/// Scaled dot-product attention over `heads` column blocks of width dim/heads.
struct MultiHeadAttention {
  Linear query, key, value, output;
  std::size_t heads = 1;
  std::size_t dim = 0;

  MultiHeadAttention() = default;
  MultiHeadAttention(ag::ParameterStore& store, const std::string& name, std::size_t dim,
                     std::size_t heads, std::mt19937_64& rng);

  /// `mask` (a×b) marks with non-zero entries the key positions a query may not see.
  AttentionOutput operator()(ag::Var queries, ag::Var keys_values, const Tensor* mask = nullptr) const;
};

/// a×a mask with ones strictly above the diagonal.
Tensor causal_mask(std::size_t length);

/// Pre-norm transformer encoder layer: x + SelfAtt(LN(x)), then x + FF(LN(x)).
struct EncoderLayer {
  LayerNorm attn_norm;
  MultiHeadAttention self_attn;
  LayerNorm ff_norm;
  FeedForward ff;

  EncoderLayer() = default;
  EncoderLayer(ag::ParameterStore& store, const std::string& name, std::size_t dim,
               std::size_t heads, std::mt19937_64& rng);
  ag::Var operator()(ag::Var x, std::vector<ag::Var>* attention = nullptr) const;
};

}  // namespace inferem

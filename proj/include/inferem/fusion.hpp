#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "inferem/layers.hpp"

namespace inferem {

/// Intention fusion block: one cross-attention sublayer and one feed-forward
/// sublayer (inner width 4d), each followed by residual add and layer norm.
///   S1 = NM(Sq + Att(Sq, Skv, Skv)),  F = NM(S1 + FF(S1))
struct MaifNet {
  MultiHeadAttention attention;
  LayerNorm attn_norm;
  FeedForward ff;
  LayerNorm ff_norm;

  MaifNet() = default;
  MaifNet(ag::ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads,
          std::mt19937_64& rng);

  /// Output has the query's shape. `weights` receives the per-head attention.
  ag::Var operator()(ag::Var queries, ag::Var keys_values,
                     std::vector<ag::Var>* weights = nullptr) const;
};

/// Sequence-axis concatenation, real rows first. Without a virtual part the
/// real features pass through unchanged.
ag::Var concat_intentions(ag::Var real, std::optional<ag::Var> virtual_part);

}  // namespace inferem

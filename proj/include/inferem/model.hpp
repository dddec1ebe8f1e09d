#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>

#include "inferem/config.hpp"
#include "inferem/decoder.hpp"
#include "inferem/encoder.hpp"
#include "inferem/fusion.hpp"

namespace inferem {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t num_emotions = 0;
  std::size_t dim = 300;
  std::size_t max_len = 256;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t decoder_layers = 2;
  std::size_t kmax = 5;
  bool tie_encoders = false;
  std::uint64_t seed = 1;

  static ModelConfig from(const Config& cfg, std::size_t vocab_size, std::size_t num_emotions);
};

/// Every trainable part of the model. Modules refer into `store`, so the
/// object is neither copyable nor movable.
struct InferEmModel {
  explicit InferEmModel(const ModelConfig& cfg);
  InferEmModel(const InferEmModel&) = delete;
  InferEmModel& operator=(const InferEmModel&) = delete;

  ModelConfig config;
  ag::ParameterStore store;
  EmbeddingTables embeddings;
  /// [0] prior context C', [1] penultimate utterance, [2] full context C, [3] last utterance.
  std::array<EcEncoder, 4> context_encoders;
  PlainEncoder virtual_encoder;
  MaifNet prediction_fusion;
  MaifNet response_fusion;
  EmotionDecoder prediction_decoder;
  EmotionDecoder response_decoder;
  ag::Parameter* classifier = nullptr;  ///< W_e, q×d

  /// Parameter-name prefix of each decoder, for reachability scans.
  static constexpr const char* kPredictionDecoderPrefix = "decoder.prediction.";
  static constexpr const char* kResponseDecoderPrefix = "decoder.response.";
};

}  // namespace inferem

#include "inferem/model.hpp"

namespace inferem {

ModelConfig ModelConfig::from(const Config& cfg, std::size_t vocab_size, std::size_t num_emotions) {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.num_emotions = num_emotions;
  m.dim = static_cast<std::size_t>(cfg.get_int("model.dim"));
  m.max_len = static_cast<std::size_t>(cfg.get_int("model.max_len"));
  m.layers = static_cast<std::size_t>(cfg.get_int("model.layers"));
  m.heads = static_cast<std::size_t>(cfg.get_int("model.heads"));
  m.decoder_layers = static_cast<std::size_t>(cfg.get_int("model.decoder_layers"));
  m.kmax = static_cast<std::size_t>(cfg.get_int("model.kmax"));
  m.tie_encoders = cfg.get_bool("model.tie_encoders");
  m.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed"));
  return m;
}

namespace {

std::mt19937_64 make_rng(const ModelConfig& cfg) {
  if (cfg.vocab_size <= kUnk) throw std::invalid_argument("model needs a vocabulary beyond the reserved ids");
  if (cfg.num_emotions < 2) throw std::invalid_argument("model needs at least 2 emotion classes");
  if (cfg.decoder_layers < 1) throw std::invalid_argument("model.decoder_layers must be >= 1");
  return std::mt19937_64(cfg.seed);
}

}  // namespace

InferEmModel::InferEmModel(const ModelConfig& cfg) : config(cfg) {
  std::mt19937_64 rng = make_rng(cfg);
  embeddings = EmbeddingTables(store, cfg.vocab_size, cfg.dim, cfg.max_len, rng);
  if (cfg.tie_encoders) {
    EcEncoder shared(store, "ecenc", embeddings, cfg.heads, cfg.layers, rng);
    context_encoders.fill(shared);
  } else {
    for (std::size_t i = 0; i < 4; ++i)
      context_encoders[i] = EcEncoder(store, "ecenc" + std::to_string(i + 1), embeddings, cfg.heads,
                                      cfg.layers, rng);
  }
  virtual_encoder = PlainEncoder(store, "plain_encoder", cfg.dim, cfg.heads, cfg.layers, rng);
  prediction_fusion = MaifNet(store, "maifnet.prediction", cfg.dim, cfg.heads, rng);
  response_fusion = MaifNet(store, "maifnet.response", cfg.dim, cfg.heads, rng);
  prediction_decoder = EmotionDecoder(store, "decoder.prediction", embeddings, cfg.vocab_size,
                                      cfg.heads, cfg.decoder_layers, rng);
  response_decoder = EmotionDecoder(store, "decoder.response", embeddings, cfg.vocab_size,
                                    cfg.heads, cfg.decoder_layers, rng);
  classifier = &store.create("classifier.weight", ag::glorot(cfg.num_emotions, cfg.dim, rng));
}

}  // namespace inferem

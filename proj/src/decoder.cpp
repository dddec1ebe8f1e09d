#include "inferem/decoder.hpp"

namespace inferem {

DecoderLayer::DecoderLayer(ag::ParameterStore& store, const std::string& name, std::size_t dim,
                           std::size_t heads, std::mt19937_64& rng)
    : self_norm(store, name + ".self_norm", dim),
      self_attn(store, name + ".self_attn", dim, heads, rng),
      cross_norm(store, name + ".cross_norm", dim),
      cross_attn(store, name + ".cross_attn", dim, heads, rng),
      ff_norm(store, name + ".ff_norm", dim),
      ff(store, name + ".ff", dim, 4 * dim, rng) {}

ag::Var DecoderLayer::operator()(ag::Var x, ag::Var memory, const Tensor& mask,
                                 std::vector<ag::Var>* cross_weights) const {
  const ag::Var h = self_norm(x);
  x = ag::add(x, self_attn(h, h, &mask).output);
  AttentionOutput cross = cross_attn(cross_norm(x), memory);
  if (cross_weights) *cross_weights = cross.weights;
  x = ag::add(x, cross.output);
  return ag::add(x, ff(ff_norm(x)));
}

EmotionDecoder::EmotionDecoder(ag::ParameterStore& store, const std::string& name,
                               const EmbeddingTables& tables_, std::size_t vocab_size,
                               std::size_t heads, std::size_t depth, std::mt19937_64& rng)
    : tables(&tables_),
      emotion_proj(store, name + ".emotion_proj", tables_.dim, tables_.dim, rng),
      final_norm(store, name + ".final_norm", tables_.dim),
      vocab_proj(store, name + ".vocab_proj", tables_.dim, vocab_size, rng) {
  for (std::size_t i = 0; i < depth; ++i)
    layers.emplace_back(store, name + ".layer" + std::to_string(i), tables_.dim, heads, rng);
}

DecoderOutput EmotionDecoder::operator()(ag::Var e_signal, ag::Var memory,
                                         std::span<const int> prefix) const {
  if (prefix.empty() || prefix[0] != kBos) throw ShapeError("decoder: prefix must start with BOS");
  if (memory.rows() == 0) throw ShapeError("decoder: empty memory");
  if (e_signal.rows() != 1 || e_signal.cols() != tables->dim) {
    throw ShapeError("decoder: emotion signal must be 1x" + std::to_string(tables->dim) + ", got " +
                     shape_string(e_signal.value()));
  }
  ag::Tape& tape = *memory.tape;
  ag::Var x = ag::add_row(tables->embed_target(tape, prefix), emotion_proj(e_signal));
  const Tensor mask = causal_mask(prefix.size());
  DecoderOutput out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool last = i + 1 == layers.size();
    x = layers[i](x, memory, mask, last ? &out.attention.heads : nullptr);
  }
  out.logits = vocab_proj(final_norm(x));
  out.distributions = ag::softmax(out.logits, 1);
  return out;
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax of empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return static_cast<int>(best);
}

std::vector<int> greedy_decode(const EmotionDecoder& decoder, const Tensor& e_signal,
                               const Tensor& memory, std::size_t max_steps) {
  std::vector<int> prefix{kBos};
  while (prefix.size() <= max_steps) {
    ag::Tape tape(false);
    DecoderOutput out = decoder(tape.constant(e_signal), tape.constant(memory), prefix);
    const Tensor& logits = out.logits.value();
    const int next = argmax(logits.row_span(logits.rows() - 1));
    if (next == kEos) break;
    prefix.push_back(next);
  }
  return {prefix.begin() + 1, prefix.end()};
}

ag::Var average_cross_attention(const AttentionRecord& record) {
  if (record.heads.empty()) throw ShapeError("average_cross_attention: empty record");
  ag::Tape& tape = *record.heads[0].tape;
  const std::size_t steps = record.heads[0].rows();
  ag::Var total = record.heads[0];
  for (std::size_t h = 1; h < record.heads.size(); ++h) total = ag::add(total, record.heads[h]);
  const double w = 1.0 / (static_cast<double>(steps) * static_cast<double>(record.heads.size()));
  return ag::matmul(tape.constant(Tensor(1, steps, w)), total);
}

}  // namespace inferem

#include "inferem/encoder.hpp"

#include <cmath>

namespace inferem {

TransformerStack::TransformerStack(ag::ParameterStore& store, const std::string& name,
                                   std::size_t dim, std::size_t heads, std::size_t depth,
                                   std::mt19937_64& rng) {
  for (std::size_t i = 0; i < depth; ++i)
    layers.emplace_back(store, name + ".layer" + std::to_string(i), dim, heads, rng);
}

ag::Var TransformerStack::operator()(ag::Var x, std::vector<ag::Var>* attention) const {
  for (const auto& layer : layers) x = layer(x, attention);
  return x;
}

ag::Var graph_attention(ag::Var base, std::span<const PositionConcepts> concepts, ag::Var word_table) {
  const std::size_t q = base.rows();
  if (q == 0) throw ShapeError("graph_attention: empty sequence");
  if (concepts.size() != q) {
    throw ShapeError("graph_attention: " + std::to_string(concepts.size()) +
                     " concept lists for " + std::to_string(q) + " positions");
  }
  ag::Tape& tape = *base.tape;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(base.cols()));
  std::vector<ag::Var> rows;
  std::size_t run_start = 0;
  auto flush_run = [&](std::size_t end) {
    if (end > run_start) rows.push_back(ag::slice(base, 0, run_start, end - run_start));
  };
  for (std::size_t i = 0; i < q; ++i) {
    const auto& pc = concepts[i];
    if (pc.ids.empty()) continue;
    flush_run(i);
    run_start = i + 1;
    ag::Var self = ag::slice(base, 0, i, 1);
    ag::Var neighbors = ag::concat({self, ag::embedding_lookup(word_table, pc.ids)}, 0);
    Tensor relatedness(1, pc.ids.size() + 1, 1.0);
    for (std::size_t k = 0; k < pc.scores.size(); ++k) relatedness[k + 1] = pc.scores[k];
    ag::Var scores = ag::scale(ag::matmul(self, ag::transpose(neighbors)), inv_sqrt);
    scores = ag::mul(scores, tape.constant(std::move(relatedness)));
    rows.push_back(ag::matmul(ag::softmax(scores, 1), neighbors));
  }
  if (rows.empty()) return base;
  flush_run(q);
  return rows.size() == 1 ? rows[0] : ag::concat(rows, 0);
}

EcEncoder::EcEncoder(ag::ParameterStore& store, const std::string& name,
                     const EmbeddingTables& tables_, std::size_t heads, std::size_t depth,
                     std::mt19937_64& rng)
    : tables(&tables_), stack(store, name, tables_.dim, heads, depth, rng) {}

EncodedSequence EcEncoder::operator()(const EnrichedSequence& input,
                                      std::vector<ag::Var>* attention) const {
  if (input.length() == 0) throw ShapeError("emotion context encoder: empty input");
  ag::Tape& tape = *input.base.tape;
  ag::Var aggregated = graph_attention(input.base, input.concepts, tape.param(*tables->word));
  return {stack(aggregated, attention), input.eta};
}

PlainEncoder::PlainEncoder(ag::ParameterStore& store, const std::string& name, std::size_t dim,
                           std::size_t heads, std::size_t depth, std::mt19937_64& rng)
    : stack(store, name, dim, heads, depth, rng) {}

EncodedSequence PlainEncoder::operator()(ag::Var embedded, std::vector<double> eta) const {
  if (embedded.rows() == 0) throw ShapeError("plain encoder: empty input");
  if (eta.empty()) eta.assign(embedded.rows(), 0.0);
  return {stack(embedded), std::move(eta)};
}

ag::Var emotion_signal(ag::Var features, std::span<const double> eta) {
  if (eta.size() != features.rows() || eta.empty()) {
    throw ShapeError("emotion_signal: " + std::to_string(eta.size()) + " intensities for features " +
                     shape_string(features.value()));
  }
  ag::Tape& tape = *features.tape;
  ag::Var weights = ag::softmax(tape.constant(Tensor::row({eta.begin(), eta.end()})), 1);
  return ag::matmul(weights, features);
}

}  // namespace inferem

#include "inferem/layers.hpp"

#include <cmath>
#include <limits>

namespace inferem {

Linear::Linear(ag::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng)
    : weight(&store.create(name + ".weight", ag::glorot(in, out, rng))),
      bias(&store.create(name + ".bias", Tensor(1, out))) {}

ag::Var Linear::operator()(ag::Var x) const {
  ag::Tape& t = *x.tape;
  return ag::add_row(ag::matmul(x, t.param(*weight)), t.param(*bias));
}

LayerNorm::LayerNorm(ag::ParameterStore& store, const std::string& name, std::size_t dim)
    : gain(&store.create(name + ".gain", Tensor(1, dim, 1.0))),
      bias(&store.create(name + ".bias", Tensor(1, dim))) {}

ag::Var LayerNorm::operator()(ag::Var x) const {
  ag::Tape& t = *x.tape;
  return ag::layer_norm(x, t.param(*gain), t.param(*bias), eps);
}

FeedForward::FeedForward(ag::ParameterStore& store, const std::string& name, std::size_t dim,
                         std::size_t hidden, std::mt19937_64& rng)
    : inner(store, name + ".inner", dim, hidden, rng), outer(store, name + ".outer", hidden, dim, rng) {}

ag::Var FeedForward::operator()(ag::Var x) const { return outer(ag::relu(inner(x))); }

MultiHeadAttention::MultiHeadAttention(ag::ParameterStore& store, const std::string& name,
                                       std::size_t dim_, std::size_t heads_, std::mt19937_64& rng)
    : query(store, name + ".query", dim_, dim_, rng),
      key(store, name + ".key", dim_, dim_, rng),
      value(store, name + ".value", dim_, dim_, rng),
      output(store, name + ".output", dim_, dim_, rng),
      heads(heads_),
      dim(dim_) {
  if (heads == 0 || dim % heads != 0) {
    throw std::invalid_argument(name + ": dim " + std::to_string(dim) +
                                " not divisible by heads " + std::to_string(heads));
  }
}

AttentionOutput MultiHeadAttention::operator()(ag::Var queries, ag::Var keys_values,
                                               const Tensor* mask) const {
  if (keys_values.rows() == 0) throw ShapeError("attention: empty key/value sequence");
  if (queries.cols() != dim || keys_values.cols() != dim) {
    throw ShapeError("attention: expected feature width " + std::to_string(dim) + ", got " +
                     shape_string(queries.value()) + " and " + shape_string(keys_values.value()));
  }
  const ag::Var q = query(queries);
  const ag::Var k = key(keys_values);
  const ag::Var v = value(keys_values);
  const std::size_t dk = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  AttentionOutput out;
  std::vector<ag::Var> per_head;
  for (std::size_t h = 0; h < heads; ++h) {
    ag::Var qh = heads == 1 ? q : ag::slice(q, 1, h * dk, dk);
    ag::Var kh = heads == 1 ? k : ag::slice(k, 1, h * dk, dk);
    ag::Var vh = heads == 1 ? v : ag::slice(v, 1, h * dk, dk);
    ag::Var scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt);
    if (mask) scores = ag::masked_fill(scores, *mask, -std::numeric_limits<double>::infinity());
    ag::Var w = ag::softmax(scores, 1);
    out.weights.push_back(w);
    per_head.push_back(ag::matmul(w, vh));
  }
  ag::Var joined = heads == 1 ? per_head[0] : ag::concat(per_head, 1);
  out.output = output(joined);
  return out;
}

Tensor causal_mask(std::size_t length) {
  Tensor m(length, length);
  for (std::size_t r = 0; r < length; ++r)
    for (std::size_t c = r + 1; c < length; ++c) m(r, c) = 1.0;
  return m;
}

EncoderLayer::EncoderLayer(ag::ParameterStore& store, const std::string& name, std::size_t dim,
                           std::size_t heads, std::mt19937_64& rng)
    : attn_norm(store, name + ".attn_norm", dim),
      self_attn(store, name + ".self_attn", dim, heads, rng),
      ff_norm(store, name + ".ff_norm", dim),
      ff(store, name + ".ff", dim, 4 * dim, rng) {}

ag::Var EncoderLayer::operator()(ag::Var x, std::vector<ag::Var>* attention) const {
  const ag::Var normed = attn_norm(x);
  AttentionOutput att = self_attn(normed, normed);
  if (attention) attention->insert(attention->end(), att.weights.begin(), att.weights.end());
  x = ag::add(x, att.output);
  return ag::add(x, ff(ff_norm(x)));
}

}  // namespace inferem

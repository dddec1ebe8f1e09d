#include "inferem/fusion.hpp"

namespace inferem {

MaifNet::MaifNet(ag::ParameterStore& store, const std::string& name, std::size_t dim,
                 std::size_t heads, std::mt19937_64& rng)
    : attention(store, name + ".attn", dim, heads, rng),
      attn_norm(store, name + ".attn_norm", dim),
      ff(store, name + ".ff", dim, 4 * dim, rng),
      ff_norm(store, name + ".ff_norm", dim) {}

ag::Var MaifNet::operator()(ag::Var queries, ag::Var keys_values, std::vector<ag::Var>* weights) const {
  if (queries.rows() == 0) throw ShapeError("MAIFNet: empty query sequence");
  if (keys_values.rows() == 0) throw ShapeError("MAIFNet: empty key/value sequence");
  AttentionOutput att = attention(queries, keys_values);
  if (weights) *weights = att.weights;
  ag::Var s1 = attn_norm(ag::add(queries, att.output));
  return ff_norm(ag::add(s1, ff(s1)));
}

ag::Var concat_intentions(ag::Var real, std::optional<ag::Var> virtual_part) {
  if (!virtual_part) return real;
  if (virtual_part->cols() != real.cols()) {
    throw ShapeError("concat_intentions: feature widths differ, " + shape_string(real.value()) +
                     " vs " + shape_string(virtual_part->value()));
  }
  return ag::concat({real, *virtual_part}, 0);
}

}  // namespace inferem

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "inferem/tensor.hpp"

namespace inferem::ag {

/// A trainable tensor with a stable name and Adam moment slots.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;

  Parameter(std::string n, Tensor v);
  void zero_grad() { grad.fill(0.0); }
};

/// Owns parameters; names are unique. Addresses stay stable for the store's lifetime.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& create(const std::string& name, Tensor init);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::size_t size() const { return params_.size(); }
  std::size_t num_values() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

Tensor uniform(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng);
/// Glorot-uniform init for a fan_in×fan_out weight.
Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode computation record. One tape per thread; a tape with
/// recording disabled evaluates forward values only.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor t);
  /// Leaf for a parameter; repeated calls return the same node.
  Var param(Parameter& p);
  /// Differentiable leaf that is not a parameter (used by gradient checks).
  Var input(Tensor t);

  const Tensor& value(std::size_t id) const;
  const Tensor& grad(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient accumulator of node `id`, allocated on first use.
  Tensor& grad_slot(std::size_t id);

  /// Receives the node's forward value and its accumulated gradient.
  using Backward = std::function<void(const Tensor& out, const Tensor& grad)>;

  /// Appends an op result. `backward` is kept only if some input needs a gradient.
  Var push(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var push(Tensor value, std::span<const Var> inputs, Backward backward);

  /// Seeds d(root)/d(root)=1, propagates, and adds leaf gradients into Parameter::grad.
  /// Repeatable: each call clears node gradients first.
  void backward(Var root);

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    Tensor grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  Var add_node(Node n);

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

// Primitives. All operate on 2-D tensors with explicit shapes; the only
// broadcast is add_row (bias add of a 1×c row onto every row).

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_row(Var a, Var row);
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
Var slice(Var a, int axis, std::size_t begin, std::size_t length);
Var softmax(Var a, int axis);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var relu(Var a);
Var embedding_lookup(Var table, std::span<const int> ids);
/// Entries where mask is non-zero are replaced by `fill`; their gradient is zero.
Var masked_fill(Var a, const Tensor& mask, double fill);
Var sum(Var a);
Var mean(Var a);
Var square(Var a);
Var log(Var a);
Var transpose(Var a);
/// r×1 column with entry i = a(i, cols[i]).
Var pick(Var a, std::span<const int> cols);

}  // namespace inferem::ag

#include "inferem/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace inferem::ag {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

MapC as_matrix(const Tensor& t) { return MapC(t.data(), t.rows(), t.cols()); }
Map as_matrix(Tensor& t) { return Map(t.data(), t.rows(), t.cols()); }

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

void check_axis(const char* op, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError(std::string(op) + ": axis must be 0 or 1");
}

}  // namespace

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)),
      value(std::move(v)),
      grad(value.rows(), value.cols()),
      adam_m(value.rows(), value.cols()),
      adam_v(value.rows(), value.cols()) {}

Parameter& ParameterStore::create(const std::string& name, Tensor init) {
  if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
  by_name_[name] = params_.back().get();
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw std::out_of_range("no parameter named " + name);
  return *p;
}

std::size_t ParameterStore::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

Tensor uniform(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  return uniform(fan_in, fan_out, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }

Var Tape::add_node(Node n) {
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  return add_node(std::move(n));
}

Var Tape::input(Tensor t) {
  Node n;
  n.value = std::move(t);
  n.needs_grad = record_;
  return add_node(std::move(n));
}

Var Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.ref = &p.value;
  n.param = &p;
  n.needs_grad = record_;
  Var v = add_node(std::move(n));
  param_nodes_[&p] = v.id;
  return v;
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.value;
}

const Tensor& Tape::grad(std::size_t id) const { return nodes_[id].grad; }

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Tensor& v = value(id);
    n.grad = Tensor(v.rows(), v.cols());
  }
  return n.grad;
}

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
              std::move(backward));
}

Var Tape::push(Tensor value, std::span<const Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& v : inputs) {
      if (v.tape != this) throw std::logic_error("operands recorded on different tapes");
      if (nodes_[v.id].needs_grad) n.needs_grad = true;
    }
  }
  if (n.needs_grad) n.backward = std::move(backward);
  return add_node(std::move(n));
}

void Tape::backward(Var root) {
  if (root.tape != this) throw std::logic_error("backward: root belongs to another tape");
  const Tensor& rv = value(root.id);
  if (rv.size() != 1) {
    throw ShapeError("backward: root must be scalar, got " + shape_string(rv));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad_slot(root.id)[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(value(i), n.grad);
  }
  for (auto& n : nodes_) {
    if (n.param && !n.grad.empty()) n.param->grad.accumulate(n.grad);
  }
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

// Gradient slot for an input, or nullptr when it does not need one.
Tensor* slot(Var v) { return v.tape->needs_grad(v.id) ? &v.tape->grad_slot(v.id) : nullptr; }

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) shape_fail("matmul", A, B);
  Tensor out(A.rows(), B.cols());
  as_matrix(out).noalias() = as_matrix(A) * as_matrix(B);
  return a.tape->push(std::move(out), {a, b}, [a, b](const Tensor&, const Tensor& g) {
    if (Tensor* ga = slot(a)) as_matrix(*ga).noalias() += as_matrix(g) * as_matrix(b.value()).transpose();
    if (Tensor* gb = slot(b)) as_matrix(*gb).noalias() += as_matrix(a.value()).transpose() * as_matrix(g);
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_fail("add", A, B);
  Tensor out = A;
  out.accumulate(B);
  return a.tape->push(std::move(out), {a, b}, [a, b](const Tensor&, const Tensor& g) {
    if (Tensor* ga = slot(a)) ga->accumulate(g);
    if (Tensor* gb = slot(b)) gb->accumulate(g);
  });
}

Var sub(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_fail("sub", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  return a.tape->push(std::move(out), {a, b}, [a, b](const Tensor&, const Tensor& g) {
    if (Tensor* ga = slot(a)) ga->accumulate(g);
    if (Tensor* gb = slot(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_fail("mul", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return a.tape->push(std::move(out), {a, b}, [a, b](const Tensor&, const Tensor& g) {
    if (Tensor* ga = slot(a)) {
      const Tensor& B = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * B[i];
    }
    if (Tensor* gb = slot(b)) {
      const Tensor& A = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * A[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  return a.tape->push(std::move(out), {a}, [a, s](const Tensor&, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var add_row(Var a, Var row) {
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) shape_fail("add_row", A, R);
  Tensor out = A;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += R[c];
  return a.tape->push(std::move(out), {a, row}, [a, row](const Tensor&, const Tensor& g) {
    if (Tensor* ga = slot(a)) ga->accumulate(g);
    if (Tensor* gr = slot(row)) {
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) (*gr)[c] += g(r, c);
    }
  });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, int axis) {
  check_axis("concat", axis);
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Tensor& first = parts[0].value();
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    if (axis == 0) {
      if (t.cols() != first.cols()) shape_fail("concat(axis=0)", first, t);
      rows += t.rows();
    } else {
      if (t.rows() != first.rows()) shape_fail("concat(axis=1)", first, t);
      cols += t.cols();
    }
  }
  if (axis == 0) cols = first.cols();
  else rows = first.rows();
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t c = 0; c < t.cols(); ++c) {
        if (axis == 0) out(offset + r, c) = t(r, c);
        else out(r, offset + c) = t(r, c);
      }
    offset += axis == 0 ? t.rows() : t.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  Tape* tape = parts[0].tape;
  return tape->push(std::move(out), parts, [inputs, axis](const Tensor&, const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : inputs) {
      const Tensor& t = p.value();
      if (Tensor* gp = slot(p)) {
        for (std::size_t r = 0; r < t.rows(); ++r)
          for (std::size_t c = 0; c < t.cols(); ++c)
            (*gp)(r, c) += axis == 0 ? g(off + r, c) : g(r, off + c);
      }
      off += axis == 0 ? t.rows() : t.cols();
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t length) {
  check_axis("slice", axis);
  const Tensor& A = a.value();
  const std::size_t extent = axis == 0 ? A.rows() : A.cols();
  if (begin + length > extent || length == 0) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + length) + ") invalid for axis " +
                     std::to_string(axis) + " of " + shape_string(A));
  }
  const std::size_t rows = axis == 0 ? length : A.rows();
  const std::size_t cols = axis == 1 ? length : A.cols();
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out(r, c) = axis == 0 ? A(begin + r, c) : A(r, begin + c);
  return a.tape->push(std::move(out), {a}, [a, axis, begin](const Tensor&, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) {
        if (axis == 0) ga(begin + r, c) += g(r, c);
        else ga(r, begin + c) += g(r, c);
      }
  });
}

Var softmax(Var a, int axis) {
  check_axis("softmax", axis);
  const Tensor& A = a.value();
  Tensor out(A.rows(), A.cols());
  const std::size_t lanes = axis == 1 ? A.rows() : A.cols();
  const std::size_t len = axis == 1 ? A.cols() : A.rows();
  auto at = [axis](auto& t, std::size_t lane, std::size_t k) -> decltype(auto) {
    return axis == 1 ? t(lane, k) : t(k, lane);
  };
  for (std::size_t l = 0; l < lanes; ++l) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) m = std::max(m, at(A, l, k));
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double e = std::exp(at(A, l, k) - m);
      at(out, l, k) = e;
      z += e;
    }
    for (std::size_t k = 0; k < len; ++k) at(out, l, k) /= z;
  }
  return a.tape->push(std::move(out), {a}, [a, axis, lanes, len, at](const Tensor& y, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    for (std::size_t l = 0; l < lanes; ++l) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += at(g, l, k) * at(y, l, k);
      for (std::size_t k = 0; k < len; ++k) at(ga, l, k) += at(y, l, k) * (at(g, l, k) - dot);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = x.value();
  const Tensor& G = gain.value();
  const Tensor& B = bias.value();
  if (G.rows() != 1 || G.cols() != X.cols()) shape_fail("layer_norm(gain)", X, G);
  if (B.rows() != 1 || B.cols() != X.cols()) shape_fail("layer_norm(bias)", X, B);
  const std::size_t n = X.cols();
  Tensor xhat(X.rows(), n);
  std::vector<double> inv_std(X.rows());
  Tensor out(X.rows(), n);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += X(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (X(r, c) - mu) * (X(r, c) - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (X(r, c) - mu) * inv_std[r];
      out(r, c) = xhat(r, c) * G[c] + B[c];
    }
  }
  return x.tape->push(std::move(out), {x, gain, bias},
                      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                          const Tensor&, const Tensor& g) {
    const Tensor& G = gain.value();
    const std::size_t n = g.cols();
    if (Tensor* gg = slot(gain))
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) (*gg)[c] += g(r, c) * xhat(r, c);
    if (Tensor* gb = slot(bias))
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) (*gb)[c] += g(r, c);
    if (Tensor* gx = slot(x)) {
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          const double d = g(r, c) * G[c];
          mean_d += d;
          mean_dx += d * xhat(r, c);
        }
        mean_d /= static_cast<double>(n);
        mean_dx /= static_cast<double>(n);
        for (std::size_t c = 0; c < n; ++c) {
          const double d = g(r, c) * G[c];
          (*gx)(r, c) += inv_std[r] * (d - mean_d - xhat(r, c) * mean_dx);
        }
      }
    }
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return a.tape->push(std::move(out), {a}, [a](const Tensor& y, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (y[i] > 0.0) ga[i] += g[i];
  });
}

Var embedding_lookup(Var table, std::span<const int> ids) {
  const Tensor& T = table.value();
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  Tensor out(ids.size(), T.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= T.rows()) {
      throw ShapeError("embedding_lookup: id " + std::to_string(ids[i]) +
                       " out of range for table " + shape_string(T));
    }
    const auto row = T.row_span(static_cast<std::size_t>(ids[i]));
    std::copy(row.begin(), row.end(), out.data() + i * T.cols());
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return table.tape->push(std::move(out), {table}, [table, idx](const Tensor&, const Tensor& g) {
    Tensor& gt = table.tape->grad_slot(table.id);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < g.cols(); ++c) gt(static_cast<std::size_t>(idx[i]), c) += g(i, c);
  });
}

Var masked_fill(Var a, const Tensor& mask, double fill) {
  const Tensor& A = a.value();
  if (!A.same_shape(mask)) shape_fail("masked_fill", A, mask);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i] != 0.0) out[i] = fill;
  return a.tape->push(std::move(out), {a}, [a, mask](const Tensor&, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (mask[i] == 0.0) ga[i] += g[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->push(Tensor::scalar(s), {a}, [a](const Tensor&, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    for (auto& v : ga.values()) v += g[0];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->push(Tensor::scalar(s / n), {a}, [a, n](const Tensor&, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    for (auto& v : ga.values()) v += g[0] / n;
  });
}

Var square(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = v * v;
  return a.tape->push(std::move(out), {a}, [a](const Tensor&, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    const Tensor& A = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * A[i] * g[i];
  });
}

Var log(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = std::log(v);
  return a.tape->push(std::move(out), {a}, [a](const Tensor&, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    const Tensor& A = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / A[i];
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  Tensor out(A.cols(), A.rows());
  as_matrix(out) = as_matrix(A).transpose();
  return a.tape->push(std::move(out), {a}, [a](const Tensor&, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    as_matrix(ga) += as_matrix(g).transpose();
  });
}

Var pick(Var a, std::span<const int> cols) {
  const Tensor& A = a.value();
  if (cols.size() != A.rows()) {
    throw ShapeError("pick: " + std::to_string(cols.size()) + " indices for " + shape_string(A));
  }
  Tensor out(A.rows(), 1);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    if (cols[r] < 0 || static_cast<std::size_t>(cols[r]) >= A.cols()) {
      throw ShapeError("pick: column " + std::to_string(cols[r]) + " out of range for " +
                       shape_string(A));
    }
    out[r] = A(r, static_cast<std::size_t>(cols[r]));
  }
  std::vector<int> idx(cols.begin(), cols.end());
  return a.tape->push(std::move(out), {a}, [a, idx](const Tensor&, const Tensor& g) {
    Tensor& ga = a.tape->grad_slot(a.id);
    for (std::size_t r = 0; r < idx.size(); ++r) ga(r, static_cast<std::size_t>(idx[r])) += g[r];
  });
}

}  // namespace inferem::ag

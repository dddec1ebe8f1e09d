#include "inferem/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace inferem {

namespace {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("gradient check: non-finite ") + what);
}

// Walks every coordinate of `slots`, evaluating `eval` at ±step.
GradCheckResult compare(std::span<Tensor* const> slots, const std::vector<Tensor>& analytic,
                        const std::function<double()>& eval, double step) {
  GradCheckResult res;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    Tensor& t = *slots[k];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      auto at = [&](double offset) {
        t[i] = saved + offset;
        const double v = eval();
        t[i] = saved;
        check_finite(v, "loss");
        return v;
      };
      auto central = [&](double h) { return (at(h) - at(-h)) / (2.0 * h); };
      auto five_point = [&](double h) {
        return (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
      };
      const double a = analytic[k][i];
      check_finite(a, "gradient");
      double numeric = central(step);
      double err = relative_error(a, numeric);
      if (err > kGradCheckRetryAbove) {
        // Rounding noise of an O(10) loss is ~1e-11 at step 1e-5, which swamps
        // gradients that are zero by symmetry; the fourth-order stencil at a
        // larger step removes it. A ReLU kink inside the stencil corrupts any
        // single estimate, which the smaller step avoids. A wrong gradient
        // disagrees with every estimate.
        for (const double alt : {five_point(step * 100.0), five_point(step * 1000.0), central(step / 10.0)}) {
          const double alt_err = relative_error(a, alt);
          if (alt_err < err) {
            err = alt_err;
            numeric = alt;
          }
        }
      }
      ++res.coordinates;
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_input = k;
        res.worst_index = i;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace

GradCheckResult gradient_check(const ScalarFn& f, const std::vector<Tensor>& point, double step) {
  std::vector<Tensor> work = point;
  std::vector<Tensor> analytic;
  {
    ag::Tape tape;
    std::vector<ag::Var> leaves;
    for (const auto& t : work) leaves.push_back(tape.input(t));
    ag::Var out = f(tape, leaves);
    check_finite(out.value().item(), "loss");
    tape.backward(out);
    for (const auto& v : leaves) {
      const Tensor& g = v.grad();
      analytic.push_back(g.empty() ? Tensor(v.rows(), v.cols()) : g);
    }
  }
  auto eval = [&]() {
    ag::Tape tape(false);
    std::vector<ag::Var> leaves;
    for (const auto& t : work) leaves.push_back(tape.constant(t));
    return f(tape, leaves).value().item();
  };
  std::vector<Tensor*> slots;
  for (auto& t : work) slots.push_back(&t);
  return compare(slots, analytic, eval, step);
}

GradCheckResult gradient_check_params(const std::function<ag::Var(ag::Tape&)>& f,
                                      std::span<ag::Parameter* const> params, double step) {
  for (auto* p : params) p->zero_grad();
  {
    ag::Tape tape;
    ag::Var out = f(tape);
    check_finite(out.value().item(), "loss");
    tape.backward(out);
  }
  std::vector<Tensor> analytic;
  std::vector<Tensor*> slots;
  for (auto* p : params) {
    analytic.push_back(p->grad);
    slots.push_back(&p->value);
  }
  auto eval = [&]() {
    ag::Tape tape(false);
    return f(tape).value().item();
  };
  return compare(slots, analytic, eval, step);
}

}  // namespace inferem

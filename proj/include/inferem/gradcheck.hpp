#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "inferem/autograd.hpp"

namespace inferem {

/// Raised when a computation produces NaN or an infinite loss.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Builds a scalar on the tape from differentiable leaves.
using ScalarFn = std::function<ag::Var(ag::Tape&, std::span<const ag::Var>)>;

/// Coordinates worse than this are re-measured with other stencils and steps;
/// the best agreement counts.
inline constexpr double kGradCheckRetryAbove = 1e-6;

/// Compares reverse-mode gradients of `f` at `point` with central differences.
/// Error per coordinate is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult gradient_check(const ScalarFn& f, const std::vector<Tensor>& point,
                               double step = 1e-5);

/// Same check, with respect to parameters read through `tape.param`.
GradCheckResult gradient_check_params(const std::function<ag::Var(ag::Tape&)>& f,
                                      std::span<ag::Parameter* const> params, double step = 1e-5);

}  // namespace inferem

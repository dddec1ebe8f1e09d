#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace inferem {

struct GradSuiteOptions {
  std::size_t seeds = 10;  ///< seeds 1..seeds
  double tolerance = 1e-4;
  /// Adds a square primitive whose backward rule is deliberately wrong.
  bool sabotage = false;
};

struct GradCaseResult {
  std::string name;
  bool composite = false;
  double max_rel_error = 0.0;  ///< worst over all seeds
  std::size_t coordinates = 0;  ///< checked coordinates summed over seeds
  bool passed = false;
};

struct GradSuiteReport {
  std::vector<GradCaseResult> cases;
  bool all_passed() const;
};

/// Finite-difference checks of every autograd primitive and of the model
/// composites (fusion block, concept encoder, decoder, each loss term, and the
/// combined loss under both alpha1 branches).
GradSuiteReport run_gradient_suite(const GradSuiteOptions& options = {});

/// One `PASS|FAIL  kind  name  max_rel_error` line per case.
void print_gradient_report(std::ostream& out, const GradSuiteReport& report);

}  // namespace inferem

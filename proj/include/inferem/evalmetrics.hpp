#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace inferem {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DistinctMode { pooled, averaged };

DistinctMode parse_distinct_mode(const std::string& name);

/// matches / total. Throws on empty input or a length mismatch.
double emotion_accuracy(std::span<const int> predictions, std::span<const int> labels);

/// exp(mean NLL) over the pooled tokens. Throws on empty input.
double perplexity(std::span<const double> per_token_nlls);

/// 100 x unique n-grams / total n-grams. PAD and EOS ids are dropped first.
/// Pooled counts over the corpus; averaged takes the mean ratio over responses
/// that have at least one n-gram. Throws when no n-gram exists or n is not 1 or 2.
double distinct_n(const std::vector<std::vector<int>>& responses, int n,
                  DistinctMode mode = DistinctMode::pooled);
/// Same over text tokens; "<pad>" and "<eos>" are dropped.
double distinct_n(const std::vector<std::vector<std::string>>& responses, int n,
                  DistinctMode mode = DistinctMode::pooled);

struct EvalReport {
  double emotion_accuracy = 0.0;  ///< fraction in [0,1]
  double perplexity = 1.0;
  double distinct1 = 0.0;  ///< percentage
  double distinct2 = 0.0;  ///< percentage
  std::size_t dialogues = 0;

  /// Throws MetricError when a field is non-finite or out of range.
  void validate() const;
};

bool operator==(const EvalReport& a, const EvalReport& b);

/// `key = value` lines with 17 significant digits, so read_report is lossless.
void write_report(const std::filesystem::path& path, const EvalReport& report);
EvalReport read_report(const std::filesystem::path& path);

/// Accuracy(%), Perplexity, Distinct-1, Distinct-2 in that order.
void print_report_table(std::ostream& out, const EvalReport& report);

}  // namespace inferem

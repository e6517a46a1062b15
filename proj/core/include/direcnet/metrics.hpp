#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace direcnet {

struct ClassMetrics {
  std::string name;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::int64_t support = 0;
};

struct MetricsReport {
  std::string mode;  // "single" or "multi"
  std::vector<ClassMetrics> classes;
  // Support-weighted mean of the per-class F1 (0 when total support is 0).
  double weighted_f1 = 0;
  // Unweighted mean of the per-class F1.
  double average_f1 = 0;
  // Single: argmax hit rate. Multi: exact match of the thresholded subset.
  double accuracy = 0;
  std::int64_t samples = 0;
  double threshold = 0.5;  // multi mode only
};

// 2PR / (P + R), 0 when both are 0.
double f1_from_pr(double precision, double recall);

// Lowest index wins ties.
template <typename P>
std::size_t argmax(std::span<const P> row);

/// counts[t * K + p] = number of samples with true class t predicted as p.
std::vector<std::int64_t> confusion_matrix(std::span<const std::int64_t> y_true,
                                           std::span<const std::int64_t> y_pred, std::size_t classes);

/// y_true: class indices [N]; probs: row-major [N, K]. Precision, recall
/// and F1 are 0 where their denominators vanish. Throws ContractError on
/// empty input or mismatched extents and ShapeError on out-of-range labels.
template <typename P>
MetricsReport single_label_metrics(std::span<const std::int64_t> y_true, std::span<const P> probs,
                                   std::size_t classes, std::vector<std::string> names = {});

/// y_true: multi-hot [N, K]; probs: [N, K]. A class is assigned when its
/// probability is strictly greater than the threshold. Only the columns in
/// `subset` (vocabulary indices) are scored.
template <typename P>
MetricsReport multilabel_metrics(std::span<const std::uint8_t> y_true, std::span<const P> probs,
                                 std::size_t classes, double threshold,
                                 const std::vector<std::size_t>& subset,
                                 std::vector<std::string> names = {});

// class,precision,recall,f1,support rows plus average / weighted average /
// accuracy summary rows; 3-decimal rendering.
std::string metrics_csv(const MetricsReport& report);
// Full-precision JSON.
std::string metrics_json(const MetricsReport& report);

}  // namespace direcnet

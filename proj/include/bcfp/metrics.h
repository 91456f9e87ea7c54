#ifndef BCFP_METRICS_H_
#define BCFP_METRICS_H_

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace bcfp {

// Binary confusion counts; label 1 (FP) is the positive class.
struct Confusion {
  size_t tp = 0;
  size_t fp = 0;
  size_t tn = 0;
  size_t fn = 0;

  size_t n() const { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

// Throws kLengthMismatch on unequal lengths, kInvalidArgument when empty.
Confusion ComputeConfusion(std::span<const int> labels,
                           std::span<const int> predictions);

struct EvalReport {
  Confusion confusion;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  // Set when the denominator was zero; the value is then reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;

  nlohmann::json ToJson() const;
};

// Point metrics from counts alone (AUC fields left at 0).
EvalReport PointMetrics(const Confusion& c);

// Mann-Whitney AUC with ties counted 1/2. Throws kSingleClass.
double RocAuc(std::span<const int> labels, std::span<const double> scores);

// Average precision over distinct thresholds, descending. Throws kNoPositives.
double PrAuc(std::span<const int> labels, std::span<const double> scores);

// Full report; predictions are scores >= threshold.
EvalReport Evaluate(std::span<const int> labels, std::span<const double> scores,
                    double threshold = 0.5);

// Aligned plain-text table, one row per model, values in percent.
std::string FormatReportTable(
    std::span<const std::pair<std::string, EvalReport>> rows);

}  // namespace bcfp

#endif  // BCFP_METRICS_H_

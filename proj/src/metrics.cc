#include "bcfp/metrics.h"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "bcfp/error.h"

namespace bcfp {

namespace {

void CheckLengths(size_t a, size_t b) {
  if (a != b) {
    Fail(ErrorCode::kLengthMismatch, "labels (" + std::to_string(a) +
                                         ") and scores (" + std::to_string(b) +
                                         ") differ in length");
  }
}

// Indices sorted by descending score; ties keep input order.
std::vector<size_t> DescendingOrder(std::span<const double> scores) {
  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

Confusion ComputeConfusion(std::span<const int> labels,
                           std::span<const int> predictions) {
  CheckLengths(labels.size(), predictions.size());
  if (labels.empty())
    Fail(ErrorCode::kInvalidArgument, "confusion of zero examples");
  Confusion c;
  for (size_t i = 0; i < labels.size(); ++i) {
    const bool y = labels[i] != 0;
    const bool p = predictions[i] != 0;
    if (y && p)
      ++c.tp;
    else if (!y && p)
      ++c.fp;
    else if (!y && !p)
      ++c.tn;
    else
      ++c.fn;
  }
  return c;
}

EvalReport PointMetrics(const Confusion& c) {
  EvalReport r;
  r.confusion = c;
  r.accuracy = c.n() ? static_cast<double>(c.tp + c.tn) /
                           static_cast<double>(c.n())
                     : 0.0;
  if (c.tp + c.fp == 0)
    r.precision_undefined = true;
  else
    r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn == 0)
    r.recall_undefined = true;
  else
    r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return r;
}

double RocAuc(std::span<const int> labels, std::span<const double> scores) {
  CheckLengths(labels.size(), scores.size());
  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  size_t pos = 0;
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]])
      ++j;
    // Tied block [i, j) shares the average 1-based rank.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (size_t k = i; k < j; ++k) {
      if (labels[idx[k]] != 0) {
        pos_rank_sum += rank;
        ++pos;
      }
    }
    i = j;
  }
  const size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    Fail(ErrorCode::kSingleClass, "ROC AUC needs both classes");
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(neg));
}

double PrAuc(std::span<const int> labels, std::span<const double> scores) {
  CheckLengths(labels.size(), scores.size());
  const size_t total_pos = static_cast<size_t>(
      std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; }));
  if (total_pos == 0)
    Fail(ErrorCode::kNoPositives, "PR AUC needs at least one positive");
  const std::vector<size_t> idx = DescendingOrder(scores);
  double ap = 0.0;
  double prev_recall = 0.0;
  size_t tp = 0;
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      tp += labels[idx[j]] != 0;
      ++j;
    }
    const double recall =
        static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(j);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

EvalReport Evaluate(std::span<const int> labels, std::span<const double> scores,
                    double threshold) {
  CheckLengths(labels.size(), scores.size());
  std::vector<int> preds;
  preds.reserve(scores.size());
  for (double s : scores)
    preds.push_back(s >= threshold ? 1 : 0);
  EvalReport r = PointMetrics(ComputeConfusion(labels, preds));
  r.roc_auc = RocAuc(labels, scores);
  r.pr_auc = PrAuc(labels, scores);
  return r;
}

nlohmann::json EvalReport::ToJson() const {
  return {{"accuracy", accuracy},
          {"precision", precision},
          {"precisionUndefined", precision_undefined},
          {"recall", recall},
          {"recallUndefined", recall_undefined},
          {"rocAuc", roc_auc},
          {"prAuc", pr_auc},
          {"confusion",
           {{"tp", confusion.tp},
            {"fp", confusion.fp},
            {"tn", confusion.tn},
            {"fn", confusion.fn}}}};
}

std::string FormatReportTable(
    std::span<const std::pair<std::string, EvalReport>> rows) {
  size_t name_width = 5;
  for (const auto& [name, r] : rows)
    name_width = std::max(name_width, name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %8s %9s %8s\n",
                static_cast<int>(name_width), "Model", "Acc.", "Prec.",
                "Recall", "ROC AUC", "PR AUC");
  out += buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s %8.2f %8.2f %8.2f %9.2f %8.2f\n",
                  static_cast<int>(name_width), name.c_str(),
                  100 * r.accuracy, 100 * r.precision, 100 * r.recall,
                  100 * r.roc_auc, 100 * r.pr_auc);
    out += buf;
  }
  return out;
}

}  // namespace bcfp

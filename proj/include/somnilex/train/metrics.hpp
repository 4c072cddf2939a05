#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "somnilex/common.hpp"
#include "somnilex/stages.hpp"

namespace somnilex {

// Confusion-matrix derived metrics: overall accuracy, per-class
// precision/recall/F1, macro-averaged F1 and Cohen's kappa
// (p_o - p_e)/(1 - p_e). Rows of the confusion matrix are truth, columns
// are predictions. The class count is 5 for staging but kept generic so
// reduced problems evaluate with the same code.
struct MetricsReport {
  int num_classes = 0;
  std::vector<std::vector<std::int64_t>> confusion;
  std::int64_t total = 0;
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  double macro_f1 = 0.0;
  double kappa = 0.0;
  // Classes absent from both truth and prediction have undefined F1; it is
  // recorded as 0 and the class is flagged here.
  std::vector<bool> f1_undefined;

  std::string class_name(int c) const {
    if (num_classes == kNumStages) return kStageNames[c];
    return "C" + std::to_string(c);
  }

  std::string to_table() const {
    std::string out;
    char buf[160];
    out += "confusion (rows=truth, cols=prediction):\n        ";
    for (int c = 0; c < num_classes; ++c) {
      std::snprintf(buf, sizeof buf, "%8s", class_name(c).c_str());
      out += buf;
    }
    out += "\n";
    for (int r = 0; r < num_classes; ++r) {
      std::snprintf(buf, sizeof buf, "%8s", class_name(r).c_str());
      out += buf;
      for (int c = 0; c < num_classes; ++c) {
        std::snprintf(buf, sizeof buf, "%8lld",
                      static_cast<long long>(confusion[r][c]));
        out += buf;
      }
      out += "\n";
    }
    std::snprintf(buf, sizeof buf,
                  "accuracy %.4f  macro_f1 %.4f  kappa %.4f  (n=%lld)\n",
                  accuracy, macro_f1, kappa, static_cast<long long>(total));
    out += buf;
    for (int c = 0; c < num_classes; ++c) {
      std::snprintf(buf, sizeof buf,
                    "  %-4s precision %.4f  recall %.4f  f1 %.4f%s\n",
                    class_name(c).c_str(), precision[c], recall[c], f1[c],
                    f1_undefined[c] ? "  [undefined, recorded as 0]" : "");
      out += buf;
    }
    return out;
  }
};

inline MetricsReport metrics_from_confusion(
    const std::vector<std::vector<std::int64_t>>& conf) {
  const int k = static_cast<int>(conf.size());
  if (k == 0) throw ConfigError("metrics: empty confusion matrix");
  for (const auto& row : conf)
    if (static_cast<int>(row.size()) != k)
      throw ShapeError("metrics: confusion matrix must be square");

  MetricsReport r;
  r.num_classes = k;
  r.confusion = conf;
  r.precision.assign(k, 0.0);
  r.recall.assign(k, 0.0);
  r.f1.assign(k, 0.0);
  r.f1_undefined.assign(k, false);

  std::vector<std::int64_t> row_sum(k, 0), col_sum(k, 0);
  std::int64_t diag = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      r.total += conf[i][j];
      row_sum[i] += conf[i][j];
      col_sum[j] += conf[i][j];
      if (i == j) diag += conf[i][j];
    }
  if (r.total == 0) throw ConfigError("metrics: confusion matrix holds no samples");
  const double m = static_cast<double>(r.total);
  r.accuracy = static_cast<double>(diag) / m;

  double f1_sum = 0.0;
  for (int c = 0; c < k; ++c) {
    const double tp = static_cast<double>(conf[c][c]);
    const double fp = static_cast<double>(col_sum[c]) - tp;
    const double fn = static_cast<double>(row_sum[c]) - tp;
    r.precision[c] = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    r.recall[c] = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
    if (row_sum[c] == 0 && col_sum[c] == 0) {
      r.f1_undefined[c] = true;
      r.f1[c] = 0.0;
    } else {
      const double denom = r.precision[c] + r.recall[c];
      r.f1[c] = denom > 0 ? 2.0 * r.precision[c] * r.recall[c] / denom : 0.0;
    }
    f1_sum += r.f1[c];
  }
  r.macro_f1 = f1_sum / k;

  const double p_o = r.accuracy;
  double p_e = 0.0;
  for (int c = 0; c < k; ++c)
    p_e += (static_cast<double>(row_sum[c]) / m) *
           (static_cast<double>(col_sum[c]) / m);
  r.kappa = (1.0 - p_e) > 0 ? (p_o - p_e) / (1.0 - p_e) : 1.0;
  return r;
}

inline MetricsReport compute_metrics(const std::vector<Stage>& truth,
                                     const std::vector<Stage>& predicted) {
  if (truth.size() != predicted.size())
    throw ShapeError("metrics: truth has " + std::to_string(truth.size()) +
                     " labels, prediction has " +
                     std::to_string(predicted.size()));
  std::vector<std::vector<std::int64_t>> conf(
      kNumStages, std::vector<std::int64_t>(kNumStages, 0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    conf[static_cast<int>(truth[i])][static_cast<int>(predicted[i])]++;
  return metrics_from_confusion(conf);
}

}  // namespace somnilex

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spoofdet/dataset_types.hpp"

namespace spoofdet {

// One model output: score is P(genuine)-oriented (higher = more genuine,
// the positive class); predicted is the hard decision that accuracy-style
// metrics count, score feeds the threshold sweeps.
struct ScoredPrediction {
  double score = 0.0;
  Label predicted = Label::synthesized;
  Label truth = Label::synthesized;
};

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;  // genuine = positive
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct PerClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct WeightedMetrics {
  double precision = 0.0;
  double recall = 0.0;  // equals accuracy by the two-class weighting identity
  double f1 = 0.0;
  PerClassMetrics genuine;
  PerClassMetrics synthesized;
};

struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;  // ROC: false-positive rate; PR: recall
  double y = 0.0;  // ROC: true-positive rate; PR: precision
};

struct AucResult {
  double auc = 0.0;
  std::vector<CurvePoint> curve;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  double balanced_accuracy = 0.0;
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  PerClassMetrics genuine;
  PerClassMetrics synthesized;
  std::vector<CurvePoint> roc_curve;
  std::vector<CurvePoint> pr_curve;
};

ConfusionCounts confusion(std::span<const ScoredPrediction> preds);

// Per-class precision/recall/F1 plus the prevalence-weighted averages.
// A class that was never predicted contributes precision 0.
WeightedMetrics weighted_metrics(const ConfusionCounts& counts);

// Mean of the two per-class recalls; both classes must appear in truth.
double balanced_accuracy(const ConfusionCounts& counts);

// Threshold sweep over distinct scores (descending), trapezoid area.
// Equals P(score_pos > score_neg) + 0.5*P(tie). Curve starts at (0,0).
AucResult roc_auc(std::span<const ScoredPrediction> preds);

// Average precision: sum of precision * recall-increment at each distinct
// threshold, no interpolation. Curve starts at (0,1) by convention.
AucResult pr_auc(std::span<const ScoredPrediction> preds);

MetricsReport evaluate(std::span<const ScoredPrediction> preds);

// JSON with keys: accuracy, precision_weighted, recall_weighted,
// f1_weighted, balanced_accuracy, roc_auc, pr_auc, per_class.
std::string to_json_string(const MetricsReport& report);

// CSV `threshold,x,y` with a header row.
void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve);

// Two-decimal percentage with round-half-away-from-zero (Table formatting).
std::string format_percent(double fraction);

}  // namespace spoofdet

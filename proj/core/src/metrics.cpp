#include "spoofdet/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "spoofdet/error.hpp"

namespace spoofdet {

bool parse_label(std::string_view text, Label& out) {
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "genuine") {
    out = Label::genuine;
    return true;
  }
  if (lower == "synthesized") {
    out = Label::synthesized;
    return true;
  }
  return false;
}

ConfusionCounts confusion(std::span<const ScoredPrediction> preds) {
  if (preds.empty()) throw UsageError("confusion: empty prediction list");
  ConfusionCounts c;
  for (const auto& p : preds) {
    if (p.truth == Label::genuine)
      (p.predicted == Label::genuine ? c.tp : c.fn)++;
    else
      (p.predicted == Label::synthesized ? c.tn : c.fp)++;
  }
  return c;
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1_of(double precision, double recall) {
  double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

}  // namespace

WeightedMetrics weighted_metrics(const ConfusionCounts& c) {
  double total = static_cast<double>(c.total());
  if (total == 0.0) throw UsageError("weighted_metrics: zero predictions");
  auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  auto tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);

  WeightedMetrics w;
  // Zero-denominator precision counts as 0 (a never-predicted class).
  w.genuine.precision = safe_div(tp, tp + fp);
  w.genuine.recall = safe_div(tp, tp + fn);
  w.genuine.f1 = f1_of(w.genuine.precision, w.genuine.recall);
  w.synthesized.precision = safe_div(tn, tn + fn);
  w.synthesized.recall = safe_div(tn, tn + fp);
  w.synthesized.f1 = f1_of(w.synthesized.precision, w.synthesized.recall);

  double weight_genuine = (tp + fn) / total;
  double weight_synth = (tn + fp) / total;
  w.precision = weight_genuine * w.genuine.precision + weight_synth * w.synthesized.precision;
  // Prevalence-weighted recall telescopes to plain accuracy; computing it
  // as such keeps the identity exact in floating point.
  w.recall = (tp + tn) / total;
  w.f1 = weight_genuine * w.genuine.f1 + weight_synth * w.synthesized.f1;
  return w;
}

double balanced_accuracy(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0)
    throw MetricError("balanced_accuracy: both classes must appear in the truth labels");
  double recall_genuine = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  double recall_synth = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return 0.5 * (recall_genuine + recall_synth);
}

namespace {

// Indices sorted by score descending; groups of equal scores are handled
// together by both sweeps.
std::vector<std::size_t> descending_order(std::span<const ScoredPrediction> preds) {
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  return order;
}

void require_both_classes(std::size_t positives, std::size_t negatives, const char* op) {
  if (positives == 0 || negatives == 0)
    throw MetricError(std::string(op) + ": both classes must appear in the truth labels");
}

}  // namespace

AucResult roc_auc(std::span<const ScoredPrediction> preds) {
  if (preds.empty()) throw UsageError("roc_auc: empty prediction list");
  std::size_t positives = 0;
  for (const auto& p : preds) positives += p.truth == Label::genuine ? 1 : 0;
  std::size_t negatives = preds.size() - positives;
  require_both_classes(positives, negatives, "roc_auc");

  auto order = descending_order(preds);
  AucResult result;
  result.curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double inv_p = 1.0 / static_cast<double>(positives);
  double inv_n = 1.0 / static_cast<double>(negatives);
  std::size_t tp = 0, fp = 0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    double threshold = preds[order[i]].score;
    // Consume the whole tie group at this threshold.
    while (i < order.size() && preds[order[i]].score == threshold) {
      if (preds[order[i]].truth == Label::genuine)
        ++tp;
      else
        ++fp;
      ++i;
    }
    double fpr = static_cast<double>(fp) * inv_n;
    double tpr = static_cast<double>(tp) * inv_p;
    result.curve.push_back({threshold, fpr, tpr});
    result.auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  return result;
}

AucResult pr_auc(std::span<const ScoredPrediction> preds) {
  if (preds.empty()) throw UsageError("pr_auc: empty prediction list");
  std::size_t positives = 0;
  for (const auto& p : preds) positives += p.truth == Label::genuine ? 1 : 0;
  std::size_t negatives = preds.size() - positives;
  require_both_classes(positives, negatives, "pr_auc");

  auto order = descending_order(preds);
  AucResult result;
  result.curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  double inv_p = 1.0 / static_cast<double>(positives);
  std::size_t tp = 0, fp = 0;
  double prev_recall = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    double threshold = preds[order[i]].score;
    while (i < order.size() && preds[order[i]].score == threshold) {
      if (preds[order[i]].truth == Label::genuine)
        ++tp;
      else
        ++fp;
      ++i;
    }
    double recall = static_cast<double>(tp) * inv_p;
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    result.curve.push_back({threshold, recall, precision});
    // Average precision: step integration, no interpolation.
    result.auc += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return result;
}

MetricsReport evaluate(std::span<const ScoredPrediction> preds) {
  ConfusionCounts counts = confusion(preds);
  WeightedMetrics w = weighted_metrics(counts);
  MetricsReport report;
  report.accuracy = static_cast<double>(counts.tp + counts.tn) / static_cast<double>(counts.total());
  report.precision_weighted = w.precision;
  report.recall_weighted = w.recall;
  report.f1_weighted = w.f1;
  report.balanced_accuracy = balanced_accuracy(counts);
  report.genuine = w.genuine;
  report.synthesized = w.synthesized;
  AucResult roc = roc_auc(preds);
  AucResult pr = pr_auc(preds);
  report.roc_auc = roc.auc;
  report.pr_auc = pr.auc;
  report.roc_curve = std::move(roc.curve);
  report.pr_curve = std::move(pr.curve);
  return report;
}

std::string to_json_string(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["precision_weighted"] = r.precision_weighted;
  j["recall_weighted"] = r.recall_weighted;
  j["f1_weighted"] = r.f1_weighted;
  j["balanced_accuracy"] = r.balanced_accuracy;
  j["roc_auc"] = r.roc_auc;
  j["pr_auc"] = r.pr_auc;
  j["per_class"]["genuine"] = {{"precision", r.genuine.precision},
                               {"recall", r.genuine.recall},
                               {"f1", r.genuine.f1}};
  j["per_class"]["synthesized"] = {{"precision", r.synthesized.precision},
                                   {"recall", r.synthesized.recall},
                                   {"f1", r.synthesized.f1}};
  return j.dump(2) + "\n";
}

void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot create " + path.string());
  f << "threshold,x,y\n";
  f.precision(17);
  for (const auto& p : curve) f << p.threshold << ',' << p.x << ',' << p.y << '\n';
  if (!f) throw IoError("short write to " + path.string());
}

std::string format_percent(double fraction) {
  double percent = fraction * 100.0;
  // Round half away from zero at two decimals.
  double scaled = percent * 100.0;
  long long rounded = static_cast<long long>(scaled >= 0.0 ? std::floor(scaled + 0.5)
                                                           : std::ceil(scaled - 0.5));
  long long whole = rounded / 100;
  long long frac = std::llabs(rounded % 100);
  std::string out = std::to_string(whole);
  out += '.';
  if (frac < 10) out += '0';
  out += std::to_string(frac);
  return out;
}

}  // namespace spoofdet

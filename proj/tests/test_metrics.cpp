#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spoofdet/error.hpp"
#include "spoofdet/metrics.hpp"
#include "spoofdet/models.hpp"
#include "spoofdet/rng.hpp"

using namespace spoofdet;

namespace {

// Truth labels shaped like the corpus test split: 7,355 genuine among
// 71,237.
std::vector<Label> corpus_test_labels() {
  std::vector<Label> t(71237, Label::synthesized);
  for (std::size_t i = 0; i < 7355; ++i) t[i] = Label::genuine;
  return t;
}

std::vector<ScoredPrediction> constant_prediction(const std::vector<Label>& truths,
                                                  Label predicted) {
  std::vector<ScoredPrediction> preds;
  preds.reserve(truths.size());
  for (Label t : truths) preds.push_back({0.5, predicted, t});
  return preds;
}

// Probability that a positive outranks a negative, ties at half credit:
// the textbook reading of ROC AUC, checked pair by pair.
double pairwise_roc_auc(const std::vector<ScoredPrediction>& preds) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (const auto& p : preds) {
    if (p.truth != Label::genuine) continue;
    for (const auto& n : preds) {
      if (n.truth != Label::synthesized) continue;
      ++pairs;
      if (p.score > n.score)
        wins += 1.0;
      else if (p.score == n.score)
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// Average precision by brute-force sweep over distinct thresholds.
double sweep_pr_auc(const std::vector<ScoredPrediction>& preds) {
  std::vector<double> thresholds;
  for (const auto& p : preds) thresholds.push_back(p.score);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::size_t positives = 0;
  for (const auto& p : preds) positives += p.truth == Label::genuine ? 1 : 0;

  double auc = 0.0, prev_recall = 0.0;
  for (double th : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (const auto& p : preds) {
      if (p.score < th) continue;
      (p.truth == Label::genuine ? tp : fp)++;
    }
    double recall = static_cast<double>(tp) / static_cast<double>(positives);
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    auc += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return auc;
}

std::vector<ScoredPrediction> random_predictions(std::uint64_t seed, std::size_t n,
                                                 bool force_ties = false) {
  Rng rng(seed);
  std::vector<ScoredPrediction> preds;
  // Loop until both classes appear.
  for (;;) {
    preds.clear();
    for (std::size_t i = 0; i < n; ++i) {
      double score = force_ties ? std::floor(rng.next_unit() * 8.0) / 8.0 : rng.next_unit();
      Label truth = rng.next_unit() < 0.3 ? Label::genuine : Label::synthesized;
      preds.push_back({score, score >= 0.5 ? Label::genuine : Label::synthesized, truth});
    }
    bool has_g = false, has_s = false;
    for (const auto& p : preds) (p.truth == Label::genuine ? has_g : has_s) = true;
    if (has_g && has_s) return preds;
  }
}

}  // namespace

TEST_CASE("confusion counts land in the right cells") {
  std::vector<ScoredPrediction> preds = {
      {0.9, Label::genuine, Label::genuine},        // tp
      {0.8, Label::genuine, Label::synthesized},    // fp
      {0.2, Label::synthesized, Label::synthesized},// tn
      {0.1, Label::synthesized, Label::genuine},    // fn
      {0.7, Label::genuine, Label::genuine},        // tp
  };
  ConfusionCounts c = confusion(preds);
  CHECK(c.tp == 2);
  CHECK(c.fp == 1);
  CHECK(c.tn == 1);
  CHECK(c.fn == 1);
  CHECK(c.total() == 5);

  CHECK_THROWS_AS(confusion(std::vector<ScoredPrediction>{}), UsageError);
}

TEST_CASE("always-genuine on the corpus test split reproduces the published row") {
  auto preds = constant_prediction(corpus_test_labels(), Label::genuine);
  MetricsReport r = evaluate(preds);

  CHECK(format_percent(r.accuracy) == "10.32");
  CHECK(format_percent(r.precision_weighted) == "1.07");
  CHECK(format_percent(r.recall_weighted) == "10.32");
  CHECK(format_percent(r.f1_weighted) == "1.93");
  CHECK(format_percent(r.balanced_accuracy) == "50.00");
  CHECK(r.roc_auc == doctest::Approx(0.5));
  CHECK(r.pr_auc == doctest::Approx(7355.0 / 71237.0));  // prevalence 0.1032

  // The never-predicted class takes precision 0 by convention.
  CHECK(r.synthesized.precision == 0.0);
  CHECK(r.synthesized.recall == 0.0);
  CHECK(r.genuine.recall == 1.0);
}

TEST_CASE("always-synthesized on the corpus test split reproduces the published row") {
  auto preds = constant_prediction(corpus_test_labels(), Label::synthesized);
  MetricsReport r = evaluate(preds);

  CHECK(format_percent(r.accuracy) == "89.68");
  CHECK(format_percent(r.precision_weighted) == "80.42");
  CHECK(format_percent(r.recall_weighted) == "89.68");
  CHECK(format_percent(r.f1_weighted) == "84.79");
  CHECK(format_percent(r.balanced_accuracy) == "50.00");
  CHECK(r.roc_auc == doctest::Approx(0.5));
  CHECK(r.pr_auc == doctest::Approx(7355.0 / 71237.0));
}

TEST_CASE("a coin-flip prior lands near chance") {
  TrivialBaseline prior{TrivialBaseline::Kind::prior, 2580.0 / 25380.0};
  auto truths = corpus_test_labels();
  auto preds = trivial_predict(prior, truths, 42);
  MetricsReport r = evaluate(preds);
  // A single draw: accuracy within half a point of the expected 81.59,
  // balanced accuracy within half a point of chance.
  CHECK(r.accuracy == doctest::Approx(0.8159).epsilon(0.01));
  CHECK(std::abs(r.balanced_accuracy - 0.5) < 0.005);
  CHECK(r.roc_auc == doctest::Approx(0.5));
  CHECK(r.pr_auc == doctest::Approx(7355.0 / 71237.0));
}

TEST_CASE("weighted recall is accuracy, exactly, always") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto preds = random_predictions(seed, 40 + seed % 77);
    MetricsReport r = evaluate(preds);
    CHECK(r.recall_weighted == r.accuracy);  // bitwise identity
  }
}

TEST_CASE("balanced accuracy averages the two recalls") {
  ConfusionCounts c{8, 5, 15, 2};
  // genuine recall 0.8, synthesized recall 0.75.
  CHECK(balanced_accuracy(c) == doctest::Approx(0.775));

  ConfusionCounts one_class{3, 0, 0, 1};
  CHECK_THROWS_AS(balanced_accuracy(one_class), MetricError);
}

TEST_CASE("perfect and inverted rankings bound the AUCs") {
  std::vector<ScoredPrediction> perfect;
  for (int i = 0; i < 10; ++i)
    perfect.push_back({0.9 + 0.001 * i, Label::genuine, Label::genuine});
  for (int i = 0; i < 30; ++i)
    perfect.push_back({0.1 + 0.001 * i, Label::synthesized, Label::synthesized});
  CHECK(roc_auc(perfect).auc == doctest::Approx(1.0));
  CHECK(pr_auc(perfect).auc == doctest::Approx(1.0));

  std::vector<ScoredPrediction> inverted = perfect;
  for (auto& p : inverted) p.score = 1.0 - p.score;
  CHECK(roc_auc(inverted).auc == doctest::Approx(0.0));
}

TEST_CASE("all-tied scores score exactly one half") {
  std::vector<ScoredPrediction> preds;
  for (int i = 0; i < 12; ++i)
    preds.push_back({0.5, Label::genuine, i < 4 ? Label::genuine : Label::synthesized});
  CHECK(roc_auc(preds).auc == 0.5);
  CHECK(pr_auc(preds).auc == doctest::Approx(4.0 / 12.0));  // prevalence
}

TEST_CASE("trapezoid sweep equals the pairwise oracle to 1e-12") {
  for (std::uint64_t seed = 100; seed < 300; ++seed) {
    std::size_t n = 2 + seed % 199;
    bool ties = seed % 3 == 0;
    auto preds = random_predictions(seed, n, ties);
    double fast = roc_auc(preds).auc;
    double slow = pairwise_roc_auc(preds);
    INFO("seed ", seed, " n ", n, " ties ", ties);
    CHECK(std::abs(fast - slow) < 1e-12);
  }
}

TEST_CASE("average precision equals the threshold-sweep oracle to 1e-12") {
  for (std::uint64_t seed = 500; seed < 600; ++seed) {
    std::size_t n = 2 + seed % 150;
    bool ties = seed % 2 == 0;
    auto preds = random_predictions(seed, n, ties);
    double fast = pr_auc(preds).auc;
    double slow = sweep_pr_auc(preds);
    INFO("seed ", seed, " n ", n, " ties ", ties);
    CHECK(std::abs(fast - slow) < 1e-12);
  }
}

TEST_CASE("ROC AUC is invariant under monotone score transforms") {
  auto preds = random_predictions(7, 120);
  double base = roc_auc(preds).auc;

  auto warped = preds;
  for (auto& p : warped) p.score = std::exp(3.0 * p.score) - 2.0;
  CHECK(std::abs(roc_auc(warped).auc - base) < 1e-12);

  // Negating scores and swapping labels restores the same ranking problem.
  auto flipped = preds;
  for (auto& p : flipped) {
    p.score = -p.score;
    p.truth = p.truth == Label::genuine ? Label::synthesized : Label::genuine;
  }
  CHECK(std::abs(roc_auc(flipped).auc - base) < 1e-12);

  // Negating scores alone inverts the ranking.
  auto negated = preds;
  for (auto& p : negated) p.score = -p.score;
  CHECK(std::abs(roc_auc(negated).auc - (1.0 - base)) < 1e-12);
}

TEST_CASE("single-class truth sets are metric errors") {
  std::vector<ScoredPrediction> all_genuine = {
      {0.4, Label::genuine, Label::genuine},
      {0.6, Label::synthesized, Label::genuine},
  };
  CHECK_THROWS_AS(roc_auc(all_genuine), MetricError);
  CHECK_THROWS_AS(pr_auc(all_genuine), MetricError);
  CHECK_THROWS_AS(evaluate(all_genuine), MetricError);
  CHECK_THROWS_AS(roc_auc(std::vector<ScoredPrediction>{}), UsageError);
}

TEST_CASE("curves carry the documented endpoints") {
  auto preds = random_predictions(9, 50);
  AucResult roc = roc_auc(preds);
  REQUIRE(!roc.curve.empty());
  CHECK(std::isinf(roc.curve.front().threshold));
  CHECK(roc.curve.front().x == 0.0);
  CHECK(roc.curve.front().y == 0.0);
  CHECK(roc.curve.back().x == doctest::Approx(1.0));
  CHECK(roc.curve.back().y == doctest::Approx(1.0));

  AucResult pr = pr_auc(preds);
  CHECK(std::isinf(pr.curve.front().threshold));
  CHECK(pr.curve.front().y == 1.0);  // precision anchor
  CHECK(pr.curve.back().x == doctest::Approx(1.0));  // full recall reached
}

TEST_CASE("reports serialize to stable JSON and curves to CSV") {
  auto preds = random_predictions(21, 64);
  MetricsReport r = evaluate(preds);
  std::string a = to_json_string(r);
  std::string b = to_json_string(evaluate(preds));
  CHECK(a == b);
  CHECK(a.find("\"accuracy\"") != std::string::npos);
  CHECK(a.find("\"balanced_accuracy\"") != std::string::npos);
  CHECK(a.find("\"per_class\"") != std::string::npos);
  CHECK(a.find("\"roc_auc\"") != std::string::npos);

  auto dir = std::filesystem::temp_directory_path() / "spoofdet_metrics_test";
  std::filesystem::create_directories(dir);
  auto csv = dir / "roc.csv";
  write_curve_csv(csv, r.roc_curve);
  std::ifstream f(csv);
  std::string header;
  std::getline(f, header);
  CHECK(header == "threshold,x,y");
  std::size_t rows = 0;
  for (std::string line; std::getline(f, line);) ++rows;
  CHECK(rows == r.roc_curve.size());
}

TEST_CASE("percent formatting rounds half away from zero at two decimals") {
  CHECK(format_percent(0.5) == "50.00");
  CHECK(format_percent(0.0) == "0.00");
  CHECK(format_percent(1.0) == "100.00");
  CHECK(format_percent(7355.0 / 71237.0) == "10.32");
  CHECK(format_percent(63882.0 / 71237.0) == "89.68");
  CHECK(format_percent(0.00005) == "0.01");   // the half case rounds up
  CHECK(format_percent(0.00004) == "0.00");
  CHECK(format_percent(0.104999) == "10.50");
  CHECK(format_percent(0.001) == "0.10");
}

TEST_CASE("label parsing for metrics vocabulary") {
  Label out;
  CHECK(parse_label("genuine", out));
  CHECK(out == Label::genuine);
  CHECK(parse_label("SyNtheSized", out));
  CHECK(out == Label::synthesized);
  CHECK(!parse_label("bona-fide", out));
  CHECK(std::string(label_name(Label::genuine)) == "genuine");
  CHECK(std::string(label_name(Label::synthesized)) == "synthesized");
}

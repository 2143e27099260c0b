#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spoofdet/dataset.hpp"
#include "spoofdet/metrics.hpp"
#include "spoofdet/models.hpp"

namespace spoofdet {

struct TrainConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;      // epochs without validation ROC-AUC gain
  bool class_weighting = false;  // inverse-prevalence loss weights
  std::uint64_t seed = 42;
  std::size_t threads = 0;  // gradient workers; 0 = hardware count

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, consecutive
  double train_loss = 0.0;
  MetricsReport validation;
  double wall_ms = 0.0;  // excluded from determinism comparisons
  double param_norm = 0.0;
};

struct RunLog {
  std::vector<EpochRecord> epochs;
};

// One JSON object per line per epoch (scalar metrics only, no curves).
std::string runlog_to_jsonl(const RunLog& log, bool include_wall = true);
bool runlog_equal_ignoring_walltime(const RunLog& a, const RunLog& b);

// Model-ready dense input (side² values in [0,1]) with its label.
struct TrainExample {
  std::vector<double> input;
  Label label = Label::synthesized;
};

TrainExample make_train_example(const LabeledExample& example, std::size_t side);

struct TrainResult {
  RunLog log;
  std::size_t best_epoch = 0;
  double best_val_roc_auc = 0.0;
};

// Adam over seed-shuffled mini-batches; per-epoch validation; keeps the
// parameters of the best validation-ROC-AUC epoch and stops after
// `patience` epochs without improvement. Deterministic for fixed
// (data, config, seed) regardless of `threads`. Non-finite loss aborts
// with a training error.
TrainResult train(CctModel& model, std::span<const TrainExample> train_set,
                  std::span<const TrainExample> val_set, const TrainConfig& config);
TrainResult train(CnnModel& model, std::span<const TrainExample> train_set,
                  std::span<const TrainExample> val_set, const TrainConfig& config);

// Scores every example: score = p(genuine), predicted = argmax (tie → genuine).
std::vector<ScoredPrediction> score_examples(const CctModel& model,
                                             std::span<const TrainExample> examples);
std::vector<ScoredPrediction> score_examples(const CnnModel& model,
                                             std::span<const TrainExample> examples);
std::vector<ScoredPrediction> score_examples(const LinearModel& model,
                                             std::span<const TrainExample> examples);

// Mean cross-entropy of a frozen model (checkpoint round-trip checks).
double evaluate_loss(const CctModel& model, std::span<const TrainExample> examples);

struct LinearTrainResult {
  LinearModel model;
  RunLog log;
};

// train_linear plus a per-epoch log (train objective, validation metrics).
LinearTrainResult train_linear_logged(std::span<const std::vector<double>> xs,
                                      std::span<const Label> ys,
                                      std::span<const std::vector<double>> val_xs,
                                      std::span<const Label> val_ys, LinearModel::Kind kind,
                                      const LinearTrainConfig& config);

// ---------------------------------------------------------------------------
// Checkpoints: "SPDT" magic, format version, kind, config JSON, then the
// parameter tensors as (name, shape, little-endian 64-bit floats).

enum class ModelKind { cct, cnn, logistic, svm };

std::string model_kind_name(ModelKind kind);
bool parse_model_kind(std::string_view text, ModelKind& out);

struct LoadedCheckpoint {
  ModelKind kind = ModelKind::cct;
  std::variant<CctModel, CnnModel, LinearModel> model;
};

void save_checkpoint(const std::filesystem::path& path, const CctModel& model);
void save_checkpoint(const std::filesystem::path& path, const CnnModel& model);
void save_checkpoint(const std::filesystem::path& path, const LinearModel& model);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Run configuration JSON (strict: unknown keys are config errors). Flat
// keys: learning_rate, beta1, beta2, adam_eps, batch_size, max_epochs,
// patience, class_weighting, seed, threads, dropout, and the linear_*
// family (learning_rate, epochs, batch_size, lambda).

struct RunConfig {
  TrainConfig train;
  LinearTrainConfig linear;
  double dropout = 0.0;
  bool seed_provided = false;
};

RunConfig parse_run_config(const std::string& json_text);

}  // namespace spoofdet

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spoofdet/dataset_types.hpp"
#include "spoofdet/metrics.hpp"
#include "spoofdet/ops.hpp"
#include "spoofdet/rng.hpp"
#include "spoofdet/spectrogram.hpp"
#include "spoofdet/tensor.hpp"

namespace spoofdet {

// ---------------------------------------------------------------------------
// Compact convolutional transformer

struct CctConfig {
  std::size_t input_side = 128;                    // square 1-channel input
  std::array<std::size_t, 2> conv_channels = {64, 128};
  std::size_t encoder_layers = 2;
  std::size_t heads = 4;
  std::size_t ff_dim = 2048;
  double dropout = 0.0;  // residual-branch dropout; 0 disables

  // Tokens are the final feature maps: one token per map, each map
  // flattened row-major into the token vector.
  std::size_t token_count() const { return conv_channels[1]; }
  std::size_t token_dim() const {
    std::size_t side = input_side / 4;
    return side * side;
  }

  void validate() const;
  static CctConfig paper_preset();  // 128×128, [64,128] → 128 tokens × 1024
  static CctConfig desk_preset();   // 64×64, [32,64] → 64 tokens × 256, ff 512
};

struct EncoderLayerParams {
  Tensor ln1_gain, ln1_shift;
  AttentionParams attention;
  Tensor ln2_gain, ln2_shift;
  Tensor ff1_w, ff1_b;  // [d×f], [f]
  Tensor ff2_w, ff2_b;  // [f×d], [d]
};

struct CctModel {
  CctConfig config;
  Tensor conv1_w, conv1_b;  // [c1×1×3×3], [c1]
  Tensor conv2_w, conv2_b;  // [c2×c1×3×3], [c2]
  Tensor pos_embedding;     // [T×d], learnable
  std::vector<EncoderLayerParams> layers;
  Tensor pool_w;          // [d×1]: sequence-pool scalar projection (bias-free)
  Tensor head_w, head_b;  // [d×2], [2]

  // Stable (name, tensor) ordering; checkpoint and optimizer layout.
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
};

// Xavier-uniform weights, zero biases, unit layer-norm gains, N(0, 0.02)
// positional embedding; every tensor drawn from a stream derived off
// `base` by parameter name, so initialization is order-independent.
CctModel init_cct(const CctConfig& config, const Rng& base);

// Deep copy whose parameters are tracked leaves of `tape` (for training).
CctModel mount(const CctModel& model, Tape& tape);

struct CctDiagnostics {
  std::vector<std::vector<double>> pool_weights;  // one [T] row per example
  MhaDiag attention;                              // per (layer, example, head)
};

struct ForwardOptions {
  bool training = false;
  Rng* dropout_rng = nullptr;  // required when training with dropout > 0
};

// x: [1×S×S] -> tokens [T×d]: conv+ReLU+pool twice, then each feature map
// row-concatenated into one token.
Tensor cct_tokenize(const Tensor& x, const CctModel& model);

// batch: [B×1×S×S] -> logits [B×2]. Pre-norm encoder layers (multi-head
// attention and GELU feed-forward, both residual), softmax sequence
// pooling, linear head. No classification token.
Tensor cct_forward(const Tensor& batch, const CctModel& model, CctDiagnostics* diag = nullptr,
                   const ForwardOptions& options = {});

// ---------------------------------------------------------------------------
// Small CNN baseline

struct CnnConfig {
  std::size_t input_side = 128;
  std::array<std::size_t, 3> channels = {16, 32, 64};
  std::size_t fc_dim = 128;

  std::size_t flat_dim() const {
    std::size_t side = input_side / 8;
    return channels[2] * side * side;
  }
  void validate() const;
  static CnnConfig paper_preset();
  static CnnConfig desk_preset();
};

struct CnnModel {
  CnnConfig config;
  Tensor conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b;
  Tensor fc1_w, fc1_b;  // [flat×128], [128]
  Tensor fc2_w, fc2_b;  // [128×2], [2]

  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
};

CnnModel init_cnn(const CnnConfig& config, const Rng& base);
CnnModel mount(const CnnModel& model, Tape& tape);

// batch: [B×1×S×S] -> logits [B×2]: three conv(3×3)+ReLU+pool stages,
// flatten, linear→ReLU→linear.
Tensor cnn_forward(const Tensor& batch, const CnnModel& model, const ForwardOptions& options = {});

// ---------------------------------------------------------------------------
// Classical models on flattened spectrograms

// Row-major 16,384-vector; grid[r][c] lands at index r*128+c.
std::vector<double> flatten_spectrogram(const Spectrogram& s);

// Mean-pools the 128×128 grid down to side×side (side must divide 128)
// and returns it flattened; identity when side == 128. Network inputs.
std::vector<double> spectrogram_to_input(const Spectrogram& s, std::size_t side);

struct LinearModel {
  enum class Kind { logistic, svm };
  Kind kind = Kind::logistic;
  std::vector<double> weights;
  double bias = 0.0;

  double score(std::span<const double> x) const;      // w·x + b, genuine-positive
  double p_genuine(std::span<const double> x) const;  // sigmoid(score)
};

struct LinearTrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lambda = 1e-4;  // L2 strength; used by the svm objective
  std::uint64_t seed = 42;
};

// Mean objective over the set: logistic log-loss, or hinge + λ‖w‖².
double linear_objective(const LinearModel& model, std::span<const std::vector<double>> xs,
                        std::span<const Label> ys, double lambda);
// Gradient of linear_objective at the model's parameters.
void linear_gradient(const LinearModel& model, std::span<const std::vector<double>> xs,
                     std::span<const Label> ys, double lambda, std::span<double> dw, double& db);

// Seeded mini-batch SGD; both classes must be present.
LinearModel train_linear(std::span<const std::vector<double>> xs, std::span<const Label> ys,
                         LinearModel::Kind kind, const LinearTrainConfig& config);

// One shuffled SGD pass over the set; epoch_index keys the shuffle stream,
// so running indices 0..n-1 in turn replays train_linear exactly.
void linear_sgd_epoch(LinearModel& model, std::span<const std::vector<double>> xs,
                      std::span<const Label> ys, const LinearTrainConfig& config,
                      std::size_t epoch_index);

struct KnnResult {
  Label label = Label::synthesized;
  double score = 0.0;  // fraction of genuine neighbors
};

// Euclidean k-nearest-neighbor vote; exact distance ties broken by lower
// training index; vote ties go to genuine.
KnnResult knn_predict(std::span<const std::vector<double>> train_xs,
                      std::span<const Label> train_ys, std::span<const double> query,
                      std::size_t k = 5);

// ---------------------------------------------------------------------------
// Trivial baselines

struct TrivialBaseline {
  enum class Kind { minority, majority, prior };
  Kind kind = Kind::minority;
  // P(genuine) of the training split; prior kind only, must lie in (0,1).
  double train_genuine_fraction = 0.5;
};

// Predictions against the given truths: minority always genuine, majority
// always synthesized, prior i.i.d. by the training distribution. Scores
// are a constant 0.5 so the curves degenerate honestly.
std::vector<ScoredPrediction> trivial_predict(const TrivialBaseline& baseline,
                                              std::span<const Label> truths, std::uint64_t seed);

}  // namespace spoofdet

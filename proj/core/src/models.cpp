#include "spoofdet/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "spoofdet/error.hpp"

namespace spoofdet {
namespace {

void check_positive(std::size_t v, const char* what) {
  if (v == 0) throw ConfigError(std::string(what) + " must be positive");
}

// Xavier-uniform tensor: bound sqrt(6 / (fan_in + fan_out)).
std::vector<double> xavier_values(std::size_t count, std::size_t fan_in, std::size_t fan_out,
                                  Rng rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(count);
  for (double& x : v) x = rng.next_uniform(-bound, bound);
  return v;
}

std::vector<double> normal_values(std::size_t count, double stddev, Rng rng) {
  std::vector<double> v(count);
  for (double& x : v) x = rng.next_normal(0.0, stddev);
  return v;
}

template <class Model, class T>
std::vector<std::pair<std::string, T*>> cct_parameter_list(Model& m) {
  std::vector<std::pair<std::string, T*>> out;
  out.emplace_back("conv1.weight", &m.conv1_w);
  out.emplace_back("conv1.bias", &m.conv1_b);
  out.emplace_back("conv2.weight", &m.conv2_w);
  out.emplace_back("conv2.bias", &m.conv2_b);
  out.emplace_back("pos_embedding", &m.pos_embedding);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    auto& layer = m.layers[i];
    std::string p = "enc" + std::to_string(i) + ".";
    out.emplace_back(p + "ln1.gain", &layer.ln1_gain);
    out.emplace_back(p + "ln1.shift", &layer.ln1_shift);
    out.emplace_back(p + "attn.wq", &layer.attention.wq);
    out.emplace_back(p + "attn.wk", &layer.attention.wk);
    out.emplace_back(p + "attn.wv", &layer.attention.wv);
    out.emplace_back(p + "attn.wo", &layer.attention.wo);
    out.emplace_back(p + "attn.bo", &layer.attention.bo);
    out.emplace_back(p + "ln2.gain", &layer.ln2_gain);
    out.emplace_back(p + "ln2.shift", &layer.ln2_shift);
    out.emplace_back(p + "ff1.weight", &layer.ff1_w);
    out.emplace_back(p + "ff1.bias", &layer.ff1_b);
    out.emplace_back(p + "ff2.weight", &layer.ff2_w);
    out.emplace_back(p + "ff2.bias", &layer.ff2_b);
  }
  out.emplace_back("pool.weight", &m.pool_w);
  out.emplace_back("head.weight", &m.head_w);
  out.emplace_back("head.bias", &m.head_b);
  return out;
}

template <class Model, class T>
std::vector<std::pair<std::string, T*>> cnn_parameter_list(Model& m) {
  std::vector<std::pair<std::string, T*>> out;
  out.emplace_back("conv1.weight", &m.conv1_w);
  out.emplace_back("conv1.bias", &m.conv1_b);
  out.emplace_back("conv2.weight", &m.conv2_w);
  out.emplace_back("conv2.bias", &m.conv2_b);
  out.emplace_back("conv3.weight", &m.conv3_w);
  out.emplace_back("conv3.bias", &m.conv3_b);
  out.emplace_back("fc1.weight", &m.fc1_w);
  out.emplace_back("fc1.bias", &m.fc1_b);
  out.emplace_back("fc2.weight", &m.fc2_w);
  out.emplace_back("fc2.bias", &m.fc2_b);
  return out;
}

Tensor dropout_mask_apply(const Tensor& x, double p, Rng& rng) {
  double keep = 1.0 - p;
  std::vector<double> mask(x.size());
  for (double& m : mask) m = (rng.next_unit() < keep) ? 1.0 / keep : 0.0;
  return mul(x, Tensor::from_values(x.shape(), std::move(mask)));
}

void check_batch_input(const Tensor& batch, std::size_t side) {
  if (batch.rank() != 4 || batch.dim(1) != 1)
    throw DimensionError("model input must be [B×1×S×S], got " + shape_to_string(batch.shape()));
  if (batch.dim(2) != side || batch.dim(3) != side)
    throw DimensionError("model expects " + std::to_string(side) + "×" + std::to_string(side) +
                         " inputs, got " + shape_to_string(batch.shape()));
  if (batch.dim(0) == 0) throw DimensionError("empty batch");
}

}  // namespace

// ---------------------------------------------------------------------------
// CCT

void CctConfig::validate() const {
  check_positive(input_side, "input_side");
  check_positive(conv_channels[0], "conv_channels[0]");
  check_positive(conv_channels[1], "conv_channels[1]");
  check_positive(encoder_layers, "encoder_layers");
  check_positive(heads, "heads");
  check_positive(ff_dim, "ff_dim");
  if (input_side % 4 != 0) throw ConfigError("input_side must be divisible by 4 (two 2×2 pools)");
  if (token_dim() % heads != 0)
    throw ConfigError("token dim " + std::to_string(token_dim()) + " not divisible by " +
                      std::to_string(heads) + " heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

CctConfig CctConfig::paper_preset() { return CctConfig{}; }

CctConfig CctConfig::desk_preset() {
  CctConfig c;
  c.input_side = 64;
  c.conv_channels = {32, 64};
  c.ff_dim = 512;
  return c;
}

std::vector<std::pair<std::string, Tensor*>> CctModel::named_parameters() {
  return cct_parameter_list<CctModel, Tensor>(*this);
}

std::vector<std::pair<std::string, const Tensor*>> CctModel::named_parameters() const {
  return cct_parameter_list<const CctModel, const Tensor>(*this);
}

CctModel init_cct(const CctConfig& config, const Rng& base) {
  config.validate();
  std::size_t c1 = config.conv_channels[0];
  std::size_t c2 = config.conv_channels[1];
  std::size_t d = config.token_dim();
  std::size_t t = config.token_count();
  std::size_t f = config.ff_dim;

  CctModel m;
  m.config = config;
  auto xavier = [&](const std::string& name, Shape shape, std::size_t fan_in,
                    std::size_t fan_out) {
    std::size_t n = shape_numel(shape);
    return Tensor::from_values(std::move(shape),
                               xavier_values(n, fan_in, fan_out, base.derive("init." + name)));
  };
  m.conv1_w = xavier("conv1.weight", {c1, 1, 3, 3}, 9, c1 * 9);
  m.conv1_b = Tensor::zeros({c1});
  m.conv2_w = xavier("conv2.weight", {c2, c1, 3, 3}, c1 * 9, c2 * 9);
  m.conv2_b = Tensor::zeros({c2});
  m.pos_embedding = Tensor::from_values(
      {t, d}, normal_values(t * d, 0.02, base.derive("init.pos_embedding")));
  m.layers.resize(config.encoder_layers);
  for (std::size_t i = 0; i < config.encoder_layers; ++i) {
    auto& layer = m.layers[i];
    std::string p = "enc" + std::to_string(i) + ".";
    layer.ln1_gain = Tensor::full({d}, 1.0);
    layer.ln1_shift = Tensor::zeros({d});
    layer.attention.wq = xavier(p + "attn.wq", {d, d}, d, d);
    layer.attention.wk = xavier(p + "attn.wk", {d, d}, d, d);
    layer.attention.wv = xavier(p + "attn.wv", {d, d}, d, d);
    layer.attention.wo = xavier(p + "attn.wo", {d, d}, d, d);
    layer.attention.bo = Tensor::zeros({d});
    layer.ln2_gain = Tensor::full({d}, 1.0);
    layer.ln2_shift = Tensor::zeros({d});
    layer.ff1_w = xavier(p + "ff1.weight", {d, f}, d, f);
    layer.ff1_b = Tensor::zeros({f});
    layer.ff2_w = xavier(p + "ff2.weight", {f, d}, f, d);
    layer.ff2_b = Tensor::zeros({d});
  }
  m.pool_w = xavier("pool.weight", {d, 1}, d, 1);
  m.head_w = xavier("head.weight", {d, 2}, d, 2);
  m.head_b = Tensor::zeros({2});
  return m;
}

namespace {

template <class Model>
Model mount_copy(const Model& model, Tape& tape) {
  Model mounted = model;  // copies config and aliases tensors
  auto src = model.named_parameters();
  auto dst = mounted.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Tensor& s = *src[i].second;
    *dst[i].second = tape.leaf(s.shape(), {s.values().begin(), s.values().end()});
  }
  return mounted;
}

}  // namespace

CctModel mount(const CctModel& model, Tape& tape) { return mount_copy(model, tape); }
CnnModel mount(const CnnModel& model, Tape& tape) { return mount_copy(model, tape); }

Tensor cct_tokenize(const Tensor& x, const CctModel& model) {
  std::size_t side = model.config.input_side;
  if (x.rank() != 3 || x.dim(0) != 1 || x.dim(1) != side || x.dim(2) != side)
    throw DimensionError("tokenizer input must be [1×" + std::to_string(side) + "×" +
                         std::to_string(side) + "], got " + shape_to_string(x.shape()));
  Tensor h = maxpool2(relu(conv2d(x, model.conv1_w, model.conv1_b)));
  h = maxpool2(relu(conv2d(h, model.conv2_w, model.conv2_b)));
  // [c2 × S/4 × S/4] -> one token per feature map, maps flattened row-major.
  return reshape(h, {model.config.token_count(), model.config.token_dim()});
}

Tensor cct_forward(const Tensor& batch, const CctModel& model, CctDiagnostics* diag,
                   const ForwardOptions& options) {
  const CctConfig& cfg = model.config;
  check_batch_input(batch, cfg.input_side);
  bool drop = options.training && cfg.dropout > 0.0;
  if (drop && options.dropout_rng == nullptr)
    throw UsageError("dropout requires an rng in training mode");

  std::size_t b = batch.dim(0);
  std::size_t t = cfg.token_count();
  std::size_t d = cfg.token_dim();
  std::size_t ss = cfg.input_side * cfg.input_side;

  Tensor flat = reshape(batch, {b, ss});
  std::vector<Tensor> per_example;
  per_example.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    Tensor xi = reshape(slice_rows(flat, i, i + 1), {1, cfg.input_side, cfg.input_side});
    per_example.push_back(add(cct_tokenize(xi, model), model.pos_embedding));
  }
  Tensor x = concat_rows(per_example);  // [(b·t) × d]

  for (const auto& layer : model.layers) {
    Tensor h = layer_norm(x, layer.ln1_gain, layer.ln1_shift);
    Tensor attn = mha_stacked(h, layer.attention, cfg.heads, b, diag ? &diag->attention : nullptr);
    if (drop) attn = dropout_mask_apply(attn, cfg.dropout, *options.dropout_rng);
    x = add(x, attn);
    Tensor h2 = layer_norm(x, layer.ln2_gain, layer.ln2_shift);
    Tensor ff = gelu(add_row_bias(matmul(h2, layer.ff1_w), layer.ff1_b));
    ff = add_row_bias(matmul(ff, layer.ff2_w), layer.ff2_b);
    if (drop) ff = dropout_mask_apply(ff, cfg.dropout, *options.dropout_rng);
    x = add(x, ff);
  }

  // Sequence pooling: learned scalar score per token, softmax across the
  // example's tokens, weighted sum of token vectors. The projection is
  // bias-free: a shared score offset cancels inside the softmax.
  Tensor scores = matmul(x, model.pool_w);  // [(b·t) × 1]
  std::vector<Tensor> pooled;
  pooled.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    Tensor si = reshape(slice_rows(scores, i * t, (i + 1) * t), {1, t});
    Tensor wi = softmax(si);
    if (diag) diag->pool_weights.emplace_back(wi.values().begin(), wi.values().end());
    pooled.push_back(matmul(wi, slice_rows(x, i * t, (i + 1) * t)));  // [1 × d]
  }
  Tensor summary = concat_rows(pooled);  // [b × d]
  return add_row_bias(matmul(summary, model.head_w), model.head_b);
}

// ---------------------------------------------------------------------------
// CNN

void CnnConfig::validate() const {
  check_positive(input_side, "input_side");
  for (std::size_t c : channels) check_positive(c, "channels");
  check_positive(fc_dim, "fc_dim");
  if (input_side % 8 != 0) throw ConfigError("input_side must be divisible by 8 (three 2×2 pools)");
}

CnnConfig CnnConfig::paper_preset() { return CnnConfig{}; }

CnnConfig CnnConfig::desk_preset() {
  CnnConfig c;
  c.input_side = 64;
  return c;
}

std::vector<std::pair<std::string, Tensor*>> CnnModel::named_parameters() {
  return cnn_parameter_list<CnnModel, Tensor>(*this);
}

std::vector<std::pair<std::string, const Tensor*>> CnnModel::named_parameters() const {
  return cnn_parameter_list<const CnnModel, const Tensor>(*this);
}

CnnModel init_cnn(const CnnConfig& config, const Rng& base) {
  config.validate();
  auto [k1, k2, k3] = config.channels;
  std::size_t flat = config.flat_dim();

  CnnModel m;
  m.config = config;
  auto xavier = [&](const std::string& name, Shape shape, std::size_t fan_in,
                    std::size_t fan_out) {
    std::size_t n = shape_numel(shape);
    return Tensor::from_values(std::move(shape),
                               xavier_values(n, fan_in, fan_out, base.derive("init." + name)));
  };
  m.conv1_w = xavier("conv1.weight", {k1, 1, 3, 3}, 9, k1 * 9);
  m.conv1_b = Tensor::zeros({k1});
  m.conv2_w = xavier("conv2.weight", {k2, k1, 3, 3}, k1 * 9, k2 * 9);
  m.conv2_b = Tensor::zeros({k2});
  m.conv3_w = xavier("conv3.weight", {k3, k2, 3, 3}, k2 * 9, k3 * 9);
  m.conv3_b = Tensor::zeros({k3});
  m.fc1_w = xavier("fc1.weight", {flat, config.fc_dim}, flat, config.fc_dim);
  m.fc1_b = Tensor::zeros({config.fc_dim});
  m.fc2_w = xavier("fc2.weight", {config.fc_dim, 2}, config.fc_dim, 2);
  m.fc2_b = Tensor::zeros({2});
  return m;
}

Tensor cnn_forward(const Tensor& batch, const CnnModel& model, const ForwardOptions&) {
  const CnnConfig& cfg = model.config;
  check_batch_input(batch, cfg.input_side);
  std::size_t b = batch.dim(0);
  std::size_t ss = cfg.input_side * cfg.input_side;

  Tensor flat_in = reshape(batch, {b, ss});
  std::vector<Tensor> rows;
  rows.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    Tensor x = reshape(slice_rows(flat_in, i, i + 1), {1, cfg.input_side, cfg.input_side});
    x = maxpool2(relu(conv2d(x, model.conv1_w, model.conv1_b)));
    x = maxpool2(relu(conv2d(x, model.conv2_w, model.conv2_b)));
    x = maxpool2(relu(conv2d(x, model.conv3_w, model.conv3_b)));
    rows.push_back(reshape(x, {1, cfg.flat_dim()}));
  }
  Tensor h = concat_rows(rows);  // [b × flat]
  h = relu(add_row_bias(matmul(h, model.fc1_w), model.fc1_b));
  return add_row_bias(matmul(h, model.fc2_w), model.fc2_b);
}

// ---------------------------------------------------------------------------
// Flatten / downsample

std::vector<double> flatten_spectrogram(const Spectrogram& s) { return s.v; }

std::vector<double> spectrogram_to_input(const Spectrogram& s, std::size_t side) {
  constexpr std::size_t kFull = Spectrogram::kSide;
  if (side == 0 || side > kFull || kFull % side != 0)
    throw ConfigError("input side " + std::to_string(side) + " must divide " +
                      std::to_string(kFull));
  if (side == kFull) return s.v;
  std::size_t f = kFull / side;
  double inv = 1.0 / static_cast<double>(f * f);
  std::vector<double> out(side * side, 0.0);
  for (std::size_t r = 0; r < kFull; ++r)
    for (std::size_t c = 0; c < kFull; ++c) out[(r / f) * side + c / f] += s.at(r, c);
  for (double& x : out) x *= inv;
  return out;
}

// ---------------------------------------------------------------------------
// Linear models

double LinearModel::score(std::span<const double> x) const {
  if (x.size() != weights.size())
    throw DimensionError("feature size " + std::to_string(x.size()) + " != model dim " +
                         std::to_string(weights.size()));
  return std::inner_product(x.begin(), x.end(), weights.begin(), bias);
}

double LinearModel::p_genuine(std::span<const double> x) const {
  return 1.0 / (1.0 + std::exp(-score(x)));
}

namespace {

void check_linear_inputs(std::span<const std::vector<double>> xs, std::span<const Label> ys,
                         std::size_t dim) {
  if (xs.empty()) throw ValidationError("empty training set");
  if (xs.size() != ys.size()) throw DimensionError("feature/label count mismatch");
  for (const auto& x : xs)
    if (x.size() != dim) throw DimensionError("inconsistent feature dimensions");
}

}  // namespace

double linear_objective(const LinearModel& model, std::span<const std::vector<double>> xs,
                        std::span<const Label> ys, double lambda) {
  check_linear_inputs(xs, ys, model.weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double s = model.score(xs[i]);
    if (model.kind == LinearModel::Kind::logistic) {
      // -log p(y): stable form log(1 + e^-|s|) + max(0, -ys') with y in {0,1}
      double z = (ys[i] == Label::genuine) ? s : -s;
      total += (z > 0) ? std::log1p(std::exp(-z)) : (-z + std::log1p(std::exp(z)));
    } else {
      double y = (ys[i] == Label::genuine) ? 1.0 : -1.0;
      total += std::max(0.0, 1.0 - y * s);
    }
  }
  double obj = total / static_cast<double>(xs.size());
  if (model.kind == LinearModel::Kind::svm) {
    double w2 = std::inner_product(model.weights.begin(), model.weights.end(),
                                   model.weights.begin(), 0.0);
    obj += lambda * w2;
  }
  return obj;
}

void linear_gradient(const LinearModel& model, std::span<const std::vector<double>> xs,
                     std::span<const Label> ys, double lambda, std::span<double> dw, double& db) {
  check_linear_inputs(xs, ys, model.weights.size());
  if (dw.size() != model.weights.size()) throw DimensionError("gradient buffer size mismatch");
  std::fill(dw.begin(), dw.end(), 0.0);
  db = 0.0;
  double inv = 1.0 / static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double s = model.score(xs[i]);
    double g = 0.0;
    if (model.kind == LinearModel::Kind::logistic) {
      double p = 1.0 / (1.0 + std::exp(-s));
      g = (p - ((ys[i] == Label::genuine) ? 1.0 : 0.0)) * inv;
    } else {
      double y = (ys[i] == Label::genuine) ? 1.0 : -1.0;
      if (y * s < 1.0) g = -y * inv;  // hinge subgradient; 0 outside the margin
    }
    if (g != 0.0) {
      const auto& x = xs[i];
      for (std::size_t j = 0; j < dw.size(); ++j) dw[j] += g * x[j];
      db += g;
    }
  }
  if (model.kind == LinearModel::Kind::svm)
    for (std::size_t j = 0; j < dw.size(); ++j) dw[j] += 2.0 * lambda * model.weights[j];
}

void linear_sgd_epoch(LinearModel& model, std::span<const std::vector<double>> xs,
                      std::span<const Label> ys, const LinearTrainConfig& config,
                      std::size_t epoch_index) {
  std::size_t dim = model.weights.size();
  check_linear_inputs(xs, ys, dim);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = Rng(config.seed).derive("shuffle", epoch_index);
  shuffle_rng.shuffle(order);

  std::vector<double> dw(dim);
  std::vector<std::vector<double>> bx;
  std::vector<Label> by;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    std::size_t stop = std::min(order.size(), start + config.batch_size);
    bx.clear();
    by.clear();
    for (std::size_t i = start; i < stop; ++i) {
      bx.push_back(xs[order[i]]);
      by.push_back(ys[order[i]]);
    }
    double db = 0.0;
    linear_gradient(model, bx, by, config.lambda, dw, db);
    for (std::size_t j = 0; j < dim; ++j) model.weights[j] -= config.learning_rate * dw[j];
    model.bias -= config.learning_rate * db;
  }
}

LinearModel train_linear(std::span<const std::vector<double>> xs, std::span<const Label> ys,
                         LinearModel::Kind kind, const LinearTrainConfig& config) {
  if (config.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (config.epochs == 0 || config.batch_size == 0)
    throw ConfigError("epochs and batch_size must be positive");
  if (xs.empty()) throw ValidationError("empty training set");
  check_linear_inputs(xs, ys, xs[0].size());

  bool has_genuine = false, has_synth = false;
  for (Label y : ys) (y == Label::genuine ? has_genuine : has_synth) = true;
  if (!has_genuine || !has_synth)
    throw TrainingError("training set must contain both classes");

  LinearModel model;
  model.kind = kind;
  model.weights.assign(xs[0].size(), 0.0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch)
    linear_sgd_epoch(model, xs, ys, config, epoch);
  return model;
}

// ---------------------------------------------------------------------------
// K-nearest neighbors

KnnResult knn_predict(std::span<const std::vector<double>> train_xs,
                      std::span<const Label> train_ys, std::span<const double> query,
                      std::size_t k) {
  if (train_xs.empty()) throw UsageError("knn requires a non-empty training set");
  if (train_xs.size() != train_ys.size()) throw DimensionError("feature/label count mismatch");
  if (k == 0 || k > train_xs.size())
    throw UsageError("k must lie in [1, " + std::to_string(train_xs.size()) + "]");

  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(train_xs.size());
  for (std::size_t i = 0; i < train_xs.size(); ++i) {
    const auto& x = train_xs[i];
    if (x.size() != query.size()) throw DimensionError("inconsistent feature dimensions");
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      double diff = x[j] - query[j];
      d2 += diff * diff;
    }
    dist.emplace_back(d2, i);
  }
  // Lexicographic (distance, index): exact ties resolve to the earlier row.
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  std::size_t genuine_votes = 0;
  for (std::size_t i = 0; i < k; ++i)
    if (train_ys[dist[i].second] == Label::genuine) ++genuine_votes;
  KnnResult r;
  r.score = static_cast<double>(genuine_votes) / static_cast<double>(k);
  r.label = (2 * genuine_votes >= k) ? Label::genuine : Label::synthesized;
  return r;
}

// ---------------------------------------------------------------------------
// Trivial baselines

std::vector<ScoredPrediction> trivial_predict(const TrivialBaseline& baseline,
                                              std::span<const Label> truths, std::uint64_t seed) {
  if (baseline.kind == TrivialBaseline::Kind::prior &&
      !(baseline.train_genuine_fraction > 0.0 && baseline.train_genuine_fraction < 1.0))
    throw ConfigError("prior baseline needs a training genuine fraction in (0, 1)");

  Rng rng = Rng(seed).derive("prior-draws");
  std::vector<ScoredPrediction> out;
  out.reserve(truths.size());
  for (Label truth : truths) {
    ScoredPrediction p;
    p.score = 0.5;  // constant: no ranking information
    p.truth = truth;
    switch (baseline.kind) {
      case TrivialBaseline::Kind::minority:
        p.predicted = Label::genuine;
        break;
      case TrivialBaseline::Kind::majority:
        p.predicted = Label::synthesized;
        break;
      case TrivialBaseline::Kind::prior: {
        double p_synth = 1.0 - baseline.train_genuine_fraction;
        p.predicted = (rng.next_unit() < p_synth) ? Label::synthesized : Label::genuine;
        break;
      }
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace spoofdet

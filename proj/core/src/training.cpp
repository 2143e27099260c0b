#include "spoofdet/training.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "spoofdet/error.hpp"
#include "spoofdet/ops.hpp"
#include "spoofdet/rng.hpp"

namespace spoofdet {
namespace {

using ordered_json = nlohmann::ordered_json;

// Examples per gradient chunk. A fixed constant (never derived from the
// host) so the chunk partition — and with it the floating-point reduction
// order — is identical on every machine and thread count.
constexpr std::size_t kGradChunk = 8;
constexpr std::size_t kEvalChunk = 32;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::size_t effective_threads(std::size_t requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void check_examples(std::span<const TrainExample> examples, std::size_t side, const char* which) {
  std::size_t want = side * side;
  for (const auto& e : examples)
    if (e.input.size() != want)
      throw DimensionError(std::string(which) + " example has " + std::to_string(e.input.size()) +
                           " values, model expects " + std::to_string(want));
}

Tensor stack_inputs(std::span<const TrainExample> examples, std::size_t begin, std::size_t end,
                    std::size_t side) {
  std::size_t ss = side * side;
  std::vector<double> v;
  v.reserve((end - begin) * ss);
  for (std::size_t i = begin; i < end; ++i)
    v.insert(v.end(), examples[i].input.begin(), examples[i].input.end());
  return Tensor::from_values({end - begin, 1, side, side}, std::move(v));
}

Tensor forward_any(const CctModel& m, const Tensor& batch, const ForwardOptions& options) {
  return cct_forward(batch, m, nullptr, options);
}
Tensor forward_any(const CnnModel& m, const Tensor& batch, const ForwardOptions& options) {
  return cnn_forward(batch, m, options);
}

double model_dropout(const CctModel& m) { return m.config.dropout; }
double model_dropout(const CnnModel&) { return 0.0; }

template <class Model>
std::vector<ScoredPrediction> score_impl(const Model& model,
                                         std::span<const TrainExample> examples) {
  std::size_t side = model.config.input_side;
  check_examples(examples, side, "eval");
  std::vector<ScoredPrediction> out;
  out.reserve(examples.size());
  for (std::size_t start = 0; start < examples.size(); start += kEvalChunk) {
    std::size_t stop = std::min(examples.size(), start + kEvalChunk);
    Tensor logits = forward_any(model, stack_inputs(examples, start, stop, side), {});
    for (std::size_t i = 0; i < stop - start; ++i) {
      double l0 = logits.at({i, 0});  // synthesized
      double l1 = logits.at({i, 1});  // genuine
      ScoredPrediction p;
      p.score = sigmoid(l1 - l0);
      p.predicted = (l1 >= l0) ? Label::genuine : Label::synthesized;
      p.truth = examples[i + start].label;
      out.push_back(p);
    }
  }
  return out;
}

struct ChunkResult {
  std::vector<double> grads;
  double loss = 0.0;
};

template <class Model>
ChunkResult chunk_gradients(const Model& model, std::span<const TrainExample> examples,
                            std::span<const std::size_t> order, std::size_t begin, std::size_t end,
                            std::span<const double> class_weights, double weight_scale,
                            Rng dropout_rng) {
  std::size_t side = model.config.input_side;
  std::size_t ss = side * side;
  std::size_t g = end - begin;

  std::vector<double> values;
  values.reserve(g * ss);
  std::vector<int> labels;
  labels.reserve(g);
  for (std::size_t i = begin; i < end; ++i) {
    const TrainExample& e = examples[order[i]];
    values.insert(values.end(), e.input.begin(), e.input.end());
    labels.push_back(static_cast<int>(e.label));
  }
  Tensor x = Tensor::from_values({g, 1, side, side}, std::move(values));

  Tape tape;
  Model mounted = mount(model, tape);
  ForwardOptions options;
  options.training = true;
  options.dropout_rng = &dropout_rng;
  Tensor logits = forward_any(mounted, x, options);
  // Chunk loss is weight-normalized within the chunk; rescaling by the
  // chunk's share of the batch weight makes the per-chunk losses (and
  // their gradients) sum exactly to the batch-mean quantities.
  Tensor loss = scale(cross_entropy(logits, labels, class_weights), weight_scale);
  tape.backward(loss);

  ChunkResult r;
  r.loss = loss.scalar();
  for (const auto& [name, tensor] : mounted.named_parameters()) {
    auto grad = tensor->grad();
    r.grads.insert(r.grads.end(), grad.begin(), grad.end());
  }
  return r;
}

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;
};

template <class Model>
TrainResult train_impl(Model& model, std::span<const TrainExample> train_set,
                       std::span<const TrainExample> val_set, const TrainConfig& config) {
  config.validate();
  model.config.validate();
  std::size_t side = model.config.input_side;
  check_examples(train_set, side, "train");
  check_examples(val_set, side, "validation");
  if (train_set.empty()) throw ValidationError("empty training set");
  if (val_set.empty()) throw ValidationError("empty validation set");

  std::size_t n_genuine = 0;
  for (const auto& e : train_set)
    if (e.label == Label::genuine) ++n_genuine;
  if (n_genuine == 0 || n_genuine == train_set.size())
    throw TrainingError("training set must contain both classes");

  // Inverse-prevalence class weights; all-ones when weighting is off.
  std::vector<double> class_weights(2, 1.0);
  if (config.class_weighting) {
    double n = static_cast<double>(train_set.size());
    class_weights[static_cast<int>(Label::synthesized)] =
        n / (2.0 * static_cast<double>(train_set.size() - n_genuine));
    class_weights[static_cast<int>(Label::genuine)] = n / (2.0 * static_cast<double>(n_genuine));
  }

  auto params = model.named_parameters();
  std::size_t total = 0;
  for (const auto& [name, tensor] : params) total += tensor->size();

  AdamState adam;
  adam.m.assign(total, 0.0);
  adam.v.assign(total, 0.0);
  std::vector<double> grads(total);

  std::vector<double> best_params(total);
  auto snapshot = [&](std::vector<double>& out) {
    std::size_t off = 0;
    for (const auto& [name, tensor] : params) {
      auto v = tensor->values();
      std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
      off += v.size();
    }
  };
  auto restore = [&](const std::vector<double>& in) {
    std::size_t off = 0;
    for (auto& [name, tensor] : params) {
      auto v = tensor->values_mut();
      std::copy(in.begin() + static_cast<std::ptrdiff_t>(off),
                in.begin() + static_cast<std::ptrdiff_t>(off + v.size()), v.begin());
      off += v.size();
    }
  };
  snapshot(best_params);

  TrainResult result;
  result.best_val_roc_auc = -1.0;
  double dropout = model_dropout(model);
  std::size_t workers = effective_threads(config.threads);
  Rng base(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t chunk_serial = 0;
  std::size_t stale_epochs = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    auto epoch_start = std::chrono::steady_clock::now();
    Rng shuffle_rng = base.derive("shuffle", epoch);
    shuffle_rng.shuffle(order);

    double epoch_loss_sum = 0.0;
    double epoch_weight = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t stop = std::min(order.size(), start + config.batch_size);
      double batch_weight = 0.0;
      for (std::size_t i = start; i < stop; ++i)
        batch_weight += class_weights[static_cast<int>(train_set[order[i]].label)];

      // Chunk boundaries are fixed; only execution may be concurrent.
      struct ChunkPlan {
        std::size_t begin, end;
        double scale;
        Rng rng;
      };
      std::vector<ChunkPlan> plan;
      for (std::size_t cb = start; cb < stop; cb += kGradChunk) {
        std::size_t ce = std::min(stop, cb + kGradChunk);
        double w = 0.0;
        for (std::size_t i = cb; i < ce; ++i)
          w += class_weights[static_cast<int>(train_set[order[i]].label)];
        plan.push_back({cb, ce, w / batch_weight,
                        dropout > 0.0 ? base.derive("dropout", chunk_serial) : Rng(0)});
        ++chunk_serial;
      }

      std::vector<ChunkResult> results(plan.size());
      auto run_chunk = [&](std::size_t ci) {
        const ChunkPlan& p = plan[ci];
        return chunk_gradients(model, train_set, order, p.begin, p.end, class_weights, p.scale,
                               p.rng);
      };
      if (workers <= 1 || plan.size() <= 1) {
        for (std::size_t ci = 0; ci < plan.size(); ++ci) results[ci] = run_chunk(ci);
      } else {
        std::vector<std::future<ChunkResult>> futures;
        futures.reserve(plan.size());
        for (std::size_t ci = 0; ci < plan.size(); ++ci)
          futures.push_back(std::async(std::launch::async, run_chunk, ci));
        for (std::size_t ci = 0; ci < plan.size(); ++ci) results[ci] = futures[ci].get();
      }

      // Reduce in chunk order: bitwise-reproducible for any worker count.
      std::fill(grads.begin(), grads.end(), 0.0);
      double batch_loss = 0.0;
      for (const ChunkResult& r : results) {
        for (std::size_t j = 0; j < total; ++j) grads[j] += r.grads[j];
        batch_loss += r.loss;
      }
      if (!std::isfinite(batch_loss))
        throw TrainingError("training diverged: non-finite loss at epoch " +
                            std::to_string(epoch) + ", example offset " + std::to_string(start));

      ++adam.t;
      double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.t));
      double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.t));
      std::size_t off = 0;
      for (auto& [name, tensor] : params) {
        auto v = tensor->values_mut();
        for (std::size_t j = 0; j < v.size(); ++j) {
          std::size_t k = off + j;
          double g = grads[k];
          adam.m[k] = config.beta1 * adam.m[k] + (1.0 - config.beta1) * g;
          adam.v[k] = config.beta2 * adam.v[k] + (1.0 - config.beta2) * g * g;
          double mhat = adam.m[k] / c1;
          double vhat = adam.v[k] / c2;
          v[j] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
        }
        off += v.size();
      }

      epoch_loss_sum += batch_loss * batch_weight;
      epoch_weight += batch_weight;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss_sum / epoch_weight;
    record.validation = evaluate(score_impl(model, val_set));
    double norm2 = 0.0;
    for (const auto& [name, tensor] : params)
      for (double p : tensor->values()) norm2 += p * p;
    record.param_norm = std::sqrt(norm2);
    record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               epoch_start)
                         .count();
    result.log.epochs.push_back(record);

    if (record.validation.roc_auc > result.best_val_roc_auc) {
      result.best_val_roc_auc = record.validation.roc_auc;
      result.best_epoch = epoch;
      snapshot(best_params);
      stale_epochs = 0;
    } else if (++stale_epochs >= config.patience) {
      break;
    }
  }

  restore(best_params);
  return result;
}

// ---------------------------------------------------------------------------
// Binary checkpoint IO

void put_bytes(std::ofstream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  put_bytes(os, b, 4);
}

void put_u64(std::ofstream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 8);
}

void put_f64(std::ofstream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::ofstream& os, std::string_view s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  put_bytes(os, s.data(), s.size());
}

void get_bytes(std::ifstream& is, void* data, std::size_t n, const char* what) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw LoadError("checkpoint truncated while reading " + std::string(what));
}

std::uint32_t get_u32(std::ifstream& is, const char* what) {
  unsigned char b[4];
  get_bytes(is, b, 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::ifstream& is, const char* what) {
  unsigned char b[8];
  get_bytes(is, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::ifstream& is, const char* what) {
  return std::bit_cast<double>(get_u64(is, what));
}

std::string get_string(std::ifstream& is, const char* what) {
  std::uint32_t n = get_u32(is, what);
  if (n > (1u << 20)) throw LoadError("checkpoint string for " + std::string(what) + " too long");
  std::string s(n, '\0');
  get_bytes(is, s.data(), n, what);
  return s;
}

constexpr char kMagic[4] = {'S', 'P', 'D', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class Model>
void write_checkpoint(const std::filesystem::path& path, const Model& model,
                      std::string_view kind, const std::string& config_json) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  put_bytes(os, kMagic, 4);
  put_u32(os, kVersion);
  put_string(os, kind);
  put_string(os, config_json);
  auto params = model.named_parameters();
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    put_string(os, name);
    const Shape& shape = tensor->shape();
    put_u32(os, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put_u64(os, d);
    for (double v : tensor->values()) put_f64(os, v);
  }
  os.flush();
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

template <class Model>
void read_parameters(std::ifstream& is, Model& model) {
  auto params = model.named_parameters();
  std::uint32_t count = get_u32(is, "tensor count");
  if (count != params.size())
    throw LoadError("checkpoint holds " + std::to_string(count) + " tensors, model needs " +
                    std::to_string(params.size()));
  for (auto& [name, tensor] : params) {
    std::string got = get_string(is, "tensor name");
    if (got != name)
      throw LoadError("checkpoint field '" + got + "' where '" + name + "' was expected");
    std::uint32_t rank = get_u32(is, name.c_str());
    Shape shape(rank);
    for (auto& d : shape) d = get_u64(is, name.c_str());
    if (shape != tensor->shape())
      throw LoadError("checkpoint field '" + name + "' has shape " + shape_to_string(shape) +
                      ", expected " + shape_to_string(tensor->shape()));
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = get_f64(is, name.c_str());
    *tensor = Tensor::from_values(std::move(shape), std::move(values));
  }
  if (is.peek() != std::ifstream::traits_type::eof())
    throw LoadError("checkpoint has trailing data");
}

template <class T>
T require_key(const nlohmann::json& j, const char* key, const char* ctx) {
  if (!j.contains(key))
    throw LoadError("checkpoint config missing key '" + std::string(key) + "' (" + ctx + ")");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw LoadError("checkpoint config key '" + std::string(key) + "' has the wrong type");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be finite and nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (patience > max_epochs) throw ConfigError("patience must not exceed max_epochs");
}

std::string runlog_to_jsonl(const RunLog& log, bool include_wall) {
  std::string out;
  for (const EpochRecord& r : log.epochs) {
    ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["param_norm"] = r.param_norm;
    if (include_wall) j["wall_ms"] = r.wall_ms;
    ordered_json val;
    val["accuracy"] = r.validation.accuracy;
    val["precision_weighted"] = r.validation.precision_weighted;
    val["recall_weighted"] = r.validation.recall_weighted;
    val["f1_weighted"] = r.validation.f1_weighted;
    val["balanced_accuracy"] = r.validation.balanced_accuracy;
    val["roc_auc"] = r.validation.roc_auc;
    val["pr_auc"] = r.validation.pr_auc;
    j["val"] = std::move(val);
    out += j.dump();
    out += '\n';
  }
  return out;
}

bool runlog_equal_ignoring_walltime(const RunLog& a, const RunLog& b) {
  return runlog_to_jsonl(a, false) == runlog_to_jsonl(b, false);
}

TrainExample make_train_example(const LabeledExample& example, std::size_t side) {
  TrainExample e;
  e.input = spectrogram_to_input(example.spectrogram, side);
  e.label = example.label;
  return e;
}

TrainResult train(CctModel& model, std::span<const TrainExample> train_set,
                  std::span<const TrainExample> val_set, const TrainConfig& config) {
  return train_impl(model, train_set, val_set, config);
}

TrainResult train(CnnModel& model, std::span<const TrainExample> train_set,
                  std::span<const TrainExample> val_set, const TrainConfig& config) {
  return train_impl(model, train_set, val_set, config);
}

std::vector<ScoredPrediction> score_examples(const CctModel& model,
                                             std::span<const TrainExample> examples) {
  return score_impl(model, examples);
}

std::vector<ScoredPrediction> score_examples(const CnnModel& model,
                                             std::span<const TrainExample> examples) {
  return score_impl(model, examples);
}

std::vector<ScoredPrediction> score_examples(const LinearModel& model,
                                             std::span<const TrainExample> examples) {
  std::vector<ScoredPrediction> out;
  out.reserve(examples.size());
  for (const TrainExample& e : examples) {
    ScoredPrediction p;
    double s = model.score(e.input);
    p.score = sigmoid(s);
    p.predicted = (s >= 0.0) ? Label::genuine : Label::synthesized;
    p.truth = e.label;
    out.push_back(p);
  }
  return out;
}

double evaluate_loss(const CctModel& model, std::span<const TrainExample> examples) {
  if (examples.empty()) throw ValidationError("empty example set");
  std::size_t side = model.config.input_side;
  check_examples(examples, side, "loss");
  double total = 0.0;
  for (std::size_t start = 0; start < examples.size(); start += kEvalChunk) {
    std::size_t stop = std::min(examples.size(), start + kEvalChunk);
    std::vector<int> labels;
    for (std::size_t i = start; i < stop; ++i)
      labels.push_back(static_cast<int>(examples[i].label));
    Tensor logits = cct_forward(stack_inputs(examples, start, stop, side), model);
    total += cross_entropy(logits, labels).scalar() * static_cast<double>(stop - start);
  }
  return total / static_cast<double>(examples.size());
}

LinearTrainResult train_linear_logged(std::span<const std::vector<double>> xs,
                                      std::span<const Label> ys,
                                      std::span<const std::vector<double>> val_xs,
                                      std::span<const Label> val_ys, LinearModel::Kind kind,
                                      const LinearTrainConfig& config) {
  LinearTrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto epoch_start = std::chrono::steady_clock::now();
    // Re-run training from scratch up to `epoch` would be quadratic; run
    // incrementally instead by training one epoch at a time.
    LinearTrainConfig upto = config;
    upto.epochs = 1;
    if (epoch == 1) {
      result.model = train_linear(xs, ys, kind, upto);
    } else {
      linear_sgd_epoch(result.model, xs, ys, config, epoch - 1);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = linear_objective(result.model, xs, ys, config.lambda);
    std::vector<ScoredPrediction> preds;
    preds.reserve(val_xs.size());
    for (std::size_t i = 0; i < val_xs.size(); ++i) {
      ScoredPrediction p;
      double s = result.model.score(val_xs[i]);
      p.score = sigmoid(s);
      p.predicted = (s >= 0.0) ? Label::genuine : Label::synthesized;
      p.truth = val_ys[i];
      preds.push_back(p);
    }
    record.validation = evaluate(preds);
    double norm2 = result.model.bias * result.model.bias;
    for (double w : result.model.weights) norm2 += w * w;
    record.param_norm = std::sqrt(norm2);
    record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               epoch_start)
                         .count();
    result.log.epochs.push_back(record);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::cct: return "cct";
    case ModelKind::cnn: return "cnn";
    case ModelKind::logistic: return "logistic";
    case ModelKind::svm: return "svm";
  }
  throw UsageError("unreachable model kind");
}

bool parse_model_kind(std::string_view text, ModelKind& out) {
  if (text == "cct") out = ModelKind::cct;
  else if (text == "cnn") out = ModelKind::cnn;
  else if (text == "logistic") out = ModelKind::logistic;
  else if (text == "svm") out = ModelKind::svm;
  else return false;
  return true;
}

void save_checkpoint(const std::filesystem::path& path, const CctModel& model) {
  ordered_json cfg;
  cfg["input_side"] = model.config.input_side;
  cfg["conv_channels"] = model.config.conv_channels;
  cfg["encoder_layers"] = model.config.encoder_layers;
  cfg["heads"] = model.config.heads;
  cfg["ff_dim"] = model.config.ff_dim;
  cfg["dropout"] = model.config.dropout;
  write_checkpoint(path, model, "cct", cfg.dump());
}

void save_checkpoint(const std::filesystem::path& path, const CnnModel& model) {
  ordered_json cfg;
  cfg["input_side"] = model.config.input_side;
  cfg["channels"] = model.config.channels;
  cfg["fc_dim"] = model.config.fc_dim;
  write_checkpoint(path, model, "cnn", cfg.dump());
}

void save_checkpoint(const std::filesystem::path& path, const LinearModel& model) {
  ordered_json cfg;
  cfg["dim"] = model.weights.size();
  std::string kind = (model.kind == LinearModel::Kind::logistic) ? "logistic" : "svm";

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  put_bytes(os, kMagic, 4);
  put_u32(os, kVersion);
  put_string(os, kind);
  put_string(os, cfg.dump());
  put_u32(os, 2);
  put_string(os, "weights");
  put_u32(os, 1);
  put_u64(os, model.weights.size());
  for (double v : model.weights) put_f64(os, v);
  put_string(os, "bias");
  put_u32(os, 1);
  put_u64(os, 1);
  put_f64(os, model.bias);
  os.flush();
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  get_bytes(is, magic, 4, "magic");
  if (std::string_view(magic, 4) != std::string_view(kMagic, 4))
    throw LoadError("bad checkpoint magic in " + path.string());
  std::uint32_t version = get_u32(is, "version");
  if (version != kVersion)
    throw LoadError("unsupported checkpoint version " + std::to_string(version));
  std::string kind_text = get_string(is, "model kind");
  LoadedCheckpoint out;
  if (!parse_model_kind(kind_text, out.kind))
    throw LoadError("unknown model kind '" + kind_text + "' in checkpoint");

  std::string cfg_text = get_string(is, "config");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(cfg_text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }

  switch (out.kind) {
    case ModelKind::cct: {
      CctConfig c;
      c.input_side = require_key<std::size_t>(cfg, "input_side", "cct");
      c.conv_channels = require_key<std::array<std::size_t, 2>>(cfg, "conv_channels", "cct");
      c.encoder_layers = require_key<std::size_t>(cfg, "encoder_layers", "cct");
      c.heads = require_key<std::size_t>(cfg, "heads", "cct");
      c.ff_dim = require_key<std::size_t>(cfg, "ff_dim", "cct");
      c.dropout = require_key<double>(cfg, "dropout", "cct");
      c.validate();
      // Skeleton with correctly shaped tensors; values are overwritten.
      CctModel m = init_cct(c, Rng(0));
      read_parameters(is, m);
      out.model = std::move(m);
      break;
    }
    case ModelKind::cnn: {
      CnnConfig c;
      c.input_side = require_key<std::size_t>(cfg, "input_side", "cnn");
      c.channels = require_key<std::array<std::size_t, 3>>(cfg, "channels", "cnn");
      c.fc_dim = require_key<std::size_t>(cfg, "fc_dim", "cnn");
      c.validate();
      CnnModel m = init_cnn(c, Rng(0));
      read_parameters(is, m);
      out.model = std::move(m);
      break;
    }
    case ModelKind::logistic:
    case ModelKind::svm: {
      std::size_t dim = require_key<std::size_t>(cfg, "dim", "linear");
      LinearModel m;
      m.kind = (out.kind == ModelKind::logistic) ? LinearModel::Kind::logistic
                                                 : LinearModel::Kind::svm;
      std::uint32_t count = get_u32(is, "tensor count");
      if (count != 2) throw LoadError("linear checkpoint must hold 2 tensors");
      std::string name = get_string(is, "tensor name");
      if (name != "weights") throw LoadError("checkpoint field '" + name + "' where 'weights' was expected");
      std::uint32_t rank = get_u32(is, "weights");
      if (rank != 1) throw LoadError("checkpoint field 'weights' must be rank 1");
      std::uint64_t n = get_u64(is, "weights");
      if (n != dim) throw LoadError("checkpoint field 'weights' length mismatch");
      m.weights.resize(dim);
      for (double& v : m.weights) v = get_f64(is, "weights");
      name = get_string(is, "tensor name");
      if (name != "bias") throw LoadError("checkpoint field '" + name + "' where 'bias' was expected");
      rank = get_u32(is, "bias");
      n = get_u64(is, "bias");
      if (rank != 1 || n != 1) throw LoadError("checkpoint field 'bias' must be a single value");
      m.bias = get_f64(is, "bias");
      if (is.peek() != std::ifstream::traits_type::eof())
        throw LoadError("checkpoint has trailing data");
      out.model = std::move(m);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run configuration

RunConfig parse_run_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  RunConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "learning_rate") cfg.train.learning_rate = value.get<double>();
      else if (key == "beta1") cfg.train.beta1 = value.get<double>();
      else if (key == "beta2") cfg.train.beta2 = value.get<double>();
      else if (key == "adam_eps") cfg.train.adam_eps = value.get<double>();
      else if (key == "batch_size") cfg.train.batch_size = value.get<std::size_t>();
      else if (key == "max_epochs") cfg.train.max_epochs = value.get<std::size_t>();
      else if (key == "patience") cfg.train.patience = value.get<std::size_t>();
      else if (key == "class_weighting") cfg.train.class_weighting = value.get<bool>();
      else if (key == "seed") {
        cfg.train.seed = value.get<std::uint64_t>();
        cfg.linear.seed = cfg.train.seed;
        cfg.seed_provided = true;
      } else if (key == "threads") cfg.train.threads = value.get<std::size_t>();
      else if (key == "dropout") cfg.dropout = value.get<double>();
      else if (key == "linear_learning_rate") cfg.linear.learning_rate = value.get<double>();
      else if (key == "linear_epochs") cfg.linear.epochs = value.get<std::size_t>();
      else if (key == "linear_batch_size") cfg.linear.batch_size = value.get<std::size_t>();
      else if (key == "linear_lambda") cfg.linear.lambda = value.get<double>();
      else throw ConfigError("unknown config key: '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
  }
  cfg.train.validate();
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
    throw ConfigError("dropout must lie in [0, 1)");
  return cfg;
}

}  // namespace spoofdet

// Command-line front end: corpus generation, featurization, training,
// evaluation, single-file inference, and gradient verification.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spoofdet/audio.hpp"
#include "spoofdet/dataset.hpp"
#include "spoofdet/error.hpp"
#include "spoofdet/gradcheck_suite.hpp"
#include "spoofdet/metrics.hpp"
#include "spoofdet/models.hpp"
#include "spoofdet/ops.hpp"
#include "spoofdet/rng.hpp"
#include "spoofdet/spectrogram.hpp"
#include "spoofdet/training.hpp"

namespace fs = std::filesystem;
using namespace spoofdet;
using ordered_json = nlohmann::ordered_json;

namespace {

// Seed precedence: --seed flag, config file, SPOOFDET_SEED, default 42.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& cli_seed,
                           const std::optional<std::uint64_t>& config_seed) {
  if (cli_seed) return *cli_seed;
  if (config_seed) return *config_seed;
  if (const char* env = std::getenv("SPOOFDET_SEED")) {
    std::string text(env);
    try {
      std::size_t used = 0;
      std::uint64_t v = std::stoull(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw UsageError("SPOOFDET_SEED is not a valid unsigned integer: '" + text + "'");
    }
  }
  return 42;
}

void require_readable(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

std::string zero_pad(std::size_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, value);
  return buf;
}

RunConfig load_run_config(const std::string& config_path) {
  RunConfig cfg;
  if (config_path.empty()) return cfg;
  require_readable(config_path, "config file");
  std::ifstream is(config_path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse_run_config(buffer.str());
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
  std::string out;
  std::size_t n = 3500;
  double genuine_frac = 0.1032;
  double duration = 2.0;
  std::uint32_t sample_rate = 16000;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

int run_gen_data(const GenDataArgs& args) {
  fs::path out(args.out);
  if (fs::exists(out) && !fs::is_empty(out) && !args.force)
    throw IoError("output directory " + out.string() + " is not empty (use --force to overwrite)");

  SyntheticRecipe recipe;
  recipe.n_total = args.n;
  recipe.genuine_fraction = args.genuine_frac;
  recipe.duration_s = args.duration;
  recipe.sample_rate = args.sample_rate;
  recipe.seed = resolve_seed(args.seed, std::nullopt);
  recipe.validate();

  fs::create_directories(out / "wav");
  auto corpus = generate_synthetic(recipe);

  DatasetManifest manifest;
  manifest.base_dir = out;
  std::vector<Label> labels;
  labels.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::string rel = "wav/" + zero_pad(i, 6) + ".wav";
    write_wav(out / rel, corpus[i].first);
    manifest.entries.push_back({rel, corpus[i].second});
    labels.push_back(corpus[i].second);
  }

  auto splits = split_manifest(manifest, SplitFractions{}, recipe.seed);
  const char* names[3] = {"train.csv", "validation.csv", "test.csv"};
  for (int s = 0; s < 3; ++s) save_manifest(out / names[s], splits[s]);

  ClassDistribution dist = class_distribution(manifest);
  std::cout << "wrote " << corpus.size() << " signals (" << dist.genuine << " genuine, "
            << dist.synthesized << " synthesized) under " << out.string() << "\n";
  for (int s = 0; s < 3; ++s)
    std::cout << "  " << names[s] << ": " << splits[s].entries.size() << " entries\n";
  return 0;
}

// ---------------------------------------------------------------------------
// featurize

struct FeaturizeArgs {
  std::string manifest;
  std::string out;
  std::size_t jobs = 1;
};

int run_featurize(const FeaturizeArgs& args) {
  require_readable(args.manifest, "manifest");
  DatasetManifest manifest = load_manifest(args.manifest);
  fs::path out(args.out);
  fs::create_directories(out / "cache");

  std::vector<std::string> cache_rel(manifest.entries.size());
  std::vector<std::string> failures(manifest.entries.size());
  std::vector<char> ok(manifest.entries.size(), 0);

  auto work = [&](std::size_t i) {
    fs::path wav_path = manifest.resolve(i);
    try {
      AudioSignal signal = read_wav(wav_path);
      Spectrogram spec = featurize(signal);
      std::string rel = "cache/" + zero_pad(i, 6) + ".spg";
      save_spectrogram(out / rel, spec);
      cache_rel[i] = rel;
      ok[i] = 1;
    } catch (const Error& e) {
      failures[i] = wav_path.string() + ": " + e.what();
    }
  };

  std::size_t jobs = std::max<std::size_t>(1, args.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::mutex next_mutex;
    std::size_t next = 0;
    for (std::size_t t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= manifest.entries.size()) return;
            i = next++;
          }
          work(i);
        }
      });
    for (auto& th : pool) th.join();
  }

  FeatureIndex index;
  index.base_dir = out;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (ok[i]) {
      index.entries.push_back(
          {fs::absolute(manifest.resolve(i)).lexically_normal().string(),
           manifest.entries[i].label, cache_rel[i]});
    } else {
      ++failed;
      std::cerr << "featurize failed: " << failures[i] << "\n";
    }
  }
  save_feature_index(out / "index.csv", index);
  std::cout << "cached " << index.entries.size() << "/" << manifest.entries.size()
            << " spectrograms under " << out.string() << "\n";
  return failed == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string model;
  std::string train_index;
  std::string val_index;
  std::string config;
  std::string out = "model.spdt";
  std::string runlog;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

ModelKind parse_model_or_throw(const std::string& text) {
  ModelKind kind;
  if (!parse_model_kind(text, kind))
    throw UsageError("unknown model '" + text + "' (expected cct, cnn, logistic, or svm)");
  return kind;
}

std::vector<TrainExample> to_train_examples(const std::vector<LabeledExample>& examples,
                                            std::size_t side) {
  std::vector<TrainExample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(make_train_example(e, side));
  return out;
}

int run_train(const TrainArgs& args) {
  ModelKind kind = parse_model_or_throw(args.model);
  if (args.preset != "desk" && args.preset != "paper")
    throw UsageError("unknown preset '" + args.preset + "' (expected desk or paper)");
  require_readable(args.train_index, "training index");
  require_readable(args.val_index, "validation index");

  RunConfig cfg = load_run_config(args.config);
  std::uint64_t seed = resolve_seed(
      args.seed, cfg.seed_provided ? std::optional<std::uint64_t>(cfg.train.seed) : std::nullopt);
  cfg.train.seed = seed;
  cfg.linear.seed = seed;
  if (args.threads) cfg.train.threads = *args.threads;

  FeatureIndex train_index = load_feature_index(args.train_index);
  FeatureIndex val_index = load_feature_index(args.val_index);
  std::vector<LabeledExample> train_ex = load_examples(train_index);
  std::vector<LabeledExample> val_ex = load_examples(val_index);

  fs::path out(args.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  fs::path runlog_path =
      args.runlog.empty() ? (out.has_parent_path() ? out.parent_path() / "runlog.jsonl"
                                                   : fs::path("runlog.jsonl"))
                          : fs::path(args.runlog);

  RunLog log;
  std::string summary;
  if (kind == ModelKind::cct || kind == ModelKind::cnn) {
    std::size_t side = 0;
    if (kind == ModelKind::cct) {
      CctConfig config =
          (args.preset == "paper") ? CctConfig::paper_preset() : CctConfig::desk_preset();
      config.dropout = cfg.dropout;
      side = config.input_side;
      auto train_set = to_train_examples(train_ex, side);
      auto val_set = to_train_examples(val_ex, side);
      CctModel model = init_cct(config, Rng(seed));
      TrainResult result = train(model, train_set, val_set, cfg.train);
      save_checkpoint(out, model);
      log = std::move(result.log);
      summary = "best epoch " + std::to_string(result.best_epoch) + ", validation ROC AUC " +
                std::to_string(result.best_val_roc_auc);
    } else {
      CnnConfig config =
          (args.preset == "paper") ? CnnConfig::paper_preset() : CnnConfig::desk_preset();
      side = config.input_side;
      auto train_set = to_train_examples(train_ex, side);
      auto val_set = to_train_examples(val_ex, side);
      CnnModel model = init_cnn(config, Rng(seed));
      TrainResult result = train(model, train_set, val_set, cfg.train);
      save_checkpoint(out, model);
      log = std::move(result.log);
      summary = "best epoch " + std::to_string(result.best_epoch) + ", validation ROC AUC " +
                std::to_string(result.best_val_roc_auc);
    }
  } else {
    std::vector<std::vector<double>> xs, val_xs;
    std::vector<Label> ys, val_ys;
    for (const auto& e : train_ex) {
      xs.push_back(flatten_spectrogram(e.spectrogram));
      ys.push_back(e.label);
    }
    for (const auto& e : val_ex) {
      val_xs.push_back(flatten_spectrogram(e.spectrogram));
      val_ys.push_back(e.label);
    }
    LinearModel::Kind lk =
        (kind == ModelKind::logistic) ? LinearModel::Kind::logistic : LinearModel::Kind::svm;
    LinearTrainResult result = train_linear_logged(xs, ys, val_xs, val_ys, lk, cfg.linear);
    save_checkpoint(out, result.model);
    log = std::move(result.log);
    if (!log.epochs.empty())
      summary = "final validation ROC AUC " +
                std::to_string(log.epochs.back().validation.roc_auc);
  }

  std::ofstream rl(runlog_path, std::ios::trunc);
  if (!rl) throw IoError("cannot write run log: " + runlog_path.string());
  rl << runlog_to_jsonl(log);
  rl.close();

  std::cout << "checkpoint " << out.string() << " written (" << summary << "); run log at "
            << runlog_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval / curves

struct EvalArgs {
  std::string model;
  std::string test_index;
  std::string out;        // metrics JSON (eval) or directory (curves)
  std::string train_index;  // prior baseline only
  std::optional<std::uint64_t> seed;
};

bool is_baseline_name(const std::string& name) {
  return name == "minority" || name == "majority" || name == "prior";
}

std::vector<ScoredPrediction> score_model_arg(const EvalArgs& args) {
  require_readable(args.test_index, "test index");
  FeatureIndex test_index = load_feature_index(args.test_index);

  if (is_baseline_name(args.model)) {
    std::vector<Label> truths;
    truths.reserve(test_index.entries.size());
    for (const auto& e : test_index.entries) truths.push_back(e.label);

    TrivialBaseline baseline;
    if (args.model == "minority") {
      baseline.kind = TrivialBaseline::Kind::minority;
    } else if (args.model == "majority") {
      baseline.kind = TrivialBaseline::Kind::majority;
    } else {
      if (args.train_index.empty())
        throw UsageError("--model prior requires --train for the training prior");
      require_readable(args.train_index, "training index");
      FeatureIndex train_index = load_feature_index(args.train_index);
      std::size_t genuine = 0;
      for (const auto& e : train_index.entries)
        if (e.label == Label::genuine) ++genuine;
      if (train_index.entries.empty()) throw ValidationError("empty training index");
      baseline.kind = TrivialBaseline::Kind::prior;
      baseline.train_genuine_fraction =
          static_cast<double>(genuine) / static_cast<double>(train_index.entries.size());
    }
    return trivial_predict(baseline, truths, resolve_seed(args.seed, std::nullopt));
  }

  require_readable(args.model, "checkpoint");
  LoadedCheckpoint ckpt = load_checkpoint(args.model);
  std::vector<LabeledExample> examples = load_examples(test_index);
  if (const auto* cct = std::get_if<CctModel>(&ckpt.model)) {
    return score_examples(*cct, to_train_examples(examples, cct->config.input_side));
  }
  if (const auto* cnn = std::get_if<CnnModel>(&ckpt.model)) {
    return score_examples(*cnn, to_train_examples(examples, cnn->config.input_side));
  }
  const auto& linear = std::get<LinearModel>(ckpt.model);
  std::vector<TrainExample> flat;
  flat.reserve(examples.size());
  for (const auto& e : examples)
    flat.push_back(TrainExample{flatten_spectrogram(e.spectrogram), e.label});
  return score_examples(linear, flat);
}

int run_eval(const EvalArgs& args) {
  MetricsReport report = evaluate(score_model_arg(args));

  fs::path out(args.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream os(out, std::ios::trunc);
  if (!os) throw IoError("cannot write metrics: " + out.string());
  os << to_json_string(report);
  os.close();

  fs::path stem = out.parent_path() / out.stem();
  write_curve_csv(stem.string() + "_roc.csv", report.roc_curve);
  write_curve_csv(stem.string() + "_pr.csv", report.pr_curve);

  std::cout << "accuracy " << format_percent(report.accuracy) << ", balanced accuracy "
            << format_percent(report.balanced_accuracy) << ", ROC AUC " << report.roc_auc
            << ", PR AUC " << report.pr_auc << "\n";
  std::cout << "report " << out.string() << "; curves " << stem.string() << "_{roc,pr}.csv\n";
  return 0;
}

int run_curves(const EvalArgs& args) {
  MetricsReport report = evaluate(score_model_arg(args));
  fs::path dir(args.out);
  fs::create_directories(dir);
  write_curve_csv(dir / "roc.csv", report.roc_curve);
  write_curve_csv(dir / "pr.csv", report.pr_curve);
  std::cout << "curves under " << dir.string() << " (ROC AUC " << report.roc_auc << ", PR AUC "
            << report.pr_auc << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// infer

struct InferArgs {
  std::string model;
  std::string wav;
};

int run_infer(const InferArgs& args) {
  require_readable(args.model, "checkpoint");
  require_readable(args.wav, "wav file");
  LoadedCheckpoint ckpt = load_checkpoint(args.model);

  double p_genuine = 0.0;
  try {
    AudioSignal signal = read_wav(args.wav);
    Spectrogram spec = featurize(signal);
    if (const auto* cct = std::get_if<CctModel>(&ckpt.model)) {
      std::size_t side = cct->config.input_side;
      Tensor x = Tensor::from_values({1, 1, side, side}, spectrogram_to_input(spec, side));
      Tensor logits = cct_forward(x, *cct);
      p_genuine = 1.0 / (1.0 + std::exp(logits.at({0, 0}) - logits.at({0, 1})));
    } else if (const auto* cnn = std::get_if<CnnModel>(&ckpt.model)) {
      std::size_t side = cnn->config.input_side;
      Tensor x = Tensor::from_values({1, 1, side, side}, spectrogram_to_input(spec, side));
      Tensor logits = cnn_forward(x, *cnn);
      p_genuine = 1.0 / (1.0 + std::exp(logits.at({0, 0}) - logits.at({0, 1})));
    } else {
      p_genuine = std::get<LinearModel>(ckpt.model).p_genuine(flatten_spectrogram(spec));
    }
  } catch (const Error& e) {
    ordered_json err;
    err["error"] = e.what();
    std::cout << err.dump() << "\n";
    return 1;
  }

  ordered_json j;
  j["label"] = (p_genuine >= 0.5) ? "genuine" : "synthesized";  // tie → genuine
  j["p_genuine"] = p_genuine;
  j["p_synthesized"] = 1.0 - p_genuine;
  std::cout << j.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  bool inject_fault = false;
  std::size_t coords = 8;
};

int run_gradcheck(const GradcheckArgs& args) {
  if (args.preset != "desk")
    throw UsageError("gradcheck supports only the desk preset (paper-preset finite differences "
                     "exceed any sane budget)");
  std::uint64_t seed = resolve_seed(args.seed, std::nullopt);

  set_backward_fault_injection(args.inject_fault);
  bool all_pass = true;
  auto report = [&](const GradCheckOutcome& o) {
    std::printf("%-24s max_rel_err %.3e  coords %5zu", o.name.c_str(), o.result.max_rel_error,
                o.result.coords_checked);
    if (o.result.coords_excluded > 0)
      std::printf(" (+%zu at kinks, skipped)", o.result.coords_excluded);
    std::printf("  %s\n", o.pass ? "PASS" : "FAIL");
    all_pass = all_pass && o.pass;
  };
  for (const auto& c : primitive_gradcheck_cases(seed)) report(run_gradcheck_case(c));
  report(run_gradcheck_case(desk_model_gradcheck_case(seed, args.coords)));
  set_backward_fault_injection(false);

  std::printf("overall: %s\n", all_pass ? "PASS" : "FAIL");
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesized-speech detection toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic labeled WAV corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--n", gen.n, "Number of signals");
  gen_cmd->add_option("--genuine-frac", gen.genuine_frac, "Fraction of genuine signals");
  gen_cmd->add_option("--duration", gen.duration, "Signal length in seconds");
  gen_cmd->add_option("--sample-rate", gen.sample_rate, "Sample rate in Hz");
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_flag("--force", gen.force, "Write into a non-empty directory");
  gen_cmd->callback([&] { action = [&] { return run_gen_data(gen); }; });

  FeaturizeArgs feat;
  auto* feat_cmd = app.add_subcommand("featurize", "Cache spectrograms for a manifest");
  feat_cmd->add_option("--manifest", feat.manifest, "Manifest CSV")->required();
  feat_cmd->add_option("--out", feat.out, "Cache directory")->required();
  feat_cmd->add_option("--jobs", feat.jobs, "Worker threads");
  feat_cmd->callback([&] { action = [&] { return run_featurize(feat); }; });

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on cached features");
  train_cmd->add_option("--model", tr.model, "cct, cnn, logistic, or svm")->required();
  train_cmd->add_option("--train", tr.train_index, "Training feature index")->required();
  train_cmd->add_option("--val", tr.val_index, "Validation feature index")->required();
  train_cmd->add_option("--config", tr.config, "JSON config file");
  train_cmd->add_option("--out", tr.out, "Checkpoint path");
  train_cmd->add_option("--runlog", tr.runlog, "Run-log path (default: runlog.jsonl beside --out)");
  train_cmd->add_option("--preset", tr.preset, "Model size preset: desk or paper");
  train_cmd->add_option("--seed", tr.seed, "Random seed");
  train_cmd->add_option("--threads", tr.threads, "Gradient worker threads");
  train_cmd->callback([&] { action = [&] { return run_train(tr); }; });

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or trivial baseline");
  eval_cmd->add_option("--model", ev.model, "Checkpoint path, or minority|majority|prior")
      ->required();
  eval_cmd->add_option("--test", ev.test_index, "Test feature index")->required();
  eval_cmd->add_option("--out", ev.out, "Metrics JSON path")->required();
  eval_cmd->add_option("--train", ev.train_index, "Training index (prior baseline)");
  eval_cmd->add_option("--seed", ev.seed, "Random seed (prior baseline)");
  eval_cmd->callback([&] { action = [&] { return run_eval(ev); }; });

  EvalArgs cu;
  auto* curves_cmd = app.add_subcommand("curves", "Export ROC/PR curve CSVs");
  curves_cmd->add_option("--model", cu.model, "Checkpoint path, or minority|majority|prior")
      ->required();
  curves_cmd->add_option("--test", cu.test_index, "Test feature index")->required();
  curves_cmd->add_option("--out", cu.out, "Output directory")->required();
  curves_cmd->add_option("--train", cu.train_index, "Training index (prior baseline)");
  curves_cmd->add_option("--seed", cu.seed, "Random seed (prior baseline)");
  curves_cmd->callback([&] { action = [&] { return run_curves(cu); }; });

  InferArgs inf;
  auto* infer_cmd = app.add_subcommand("infer", "Classify one WAV file");
  infer_cmd->add_option("--model", inf.model, "Checkpoint path")->required();
  infer_cmd->add_option("--wav", inf.wav, "Input WAV")->required();
  infer_cmd->callback([&] { action = [&] { return run_infer(inf); }; });

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gc_cmd->add_option("--preset", gc.preset, "Model preset (desk)");
  gc_cmd->add_option("--seed", gc.seed, "Random seed");
  gc_cmd->add_option("--coords", gc.coords, "Sampled coordinates per model tensor");
  gc_cmd->add_flag("--inject-fault", gc.inject_fault, "Arm the backward fault (negative control)");
  gc_cmd->callback([&] { action = [&] { return run_gradcheck(gc); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spoofdet/dataset.hpp"
#include "spoofdet/training.hpp"

using namespace spoofdet;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path workspace() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "spoofdet_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the installed binary through the shell, capturing both streams.
RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  fs::path out_file = workspace() / ("stdout_" + std::to_string(counter) + ".txt");
  fs::path err_file = workspace() / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;

  std::string cmd = env_prefix + "\"" + SPOOFDET_CLI_PATH + "\" " + args + " > \"" +
                    out_file.string() + "\" 2> \"" + err_file.string() + "\"";
  int status = std::system(cmd.c_str());

  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

fs::path corpus_dir() { return workspace() / "corpus"; }
fs::path features_dir(const char* split) { return workspace() / "features" / split; }
fs::path index_csv(const char* split) { return features_dir(split) / "index.csv"; }

// Generated once; later cases depend on it, which doctest runs in order.
void require_corpus() {
  static bool done = [] {
    RunResult gen = run_cli("gen-data --out \"" + corpus_dir().string() +
                            "\" --n 24 --genuine-frac 0.25 --duration 0.6 --seed 5");
    REQUIRE(gen.exit_code == 0);
    for (const char* split : {"train", "validation", "test"}) {
      fs::path manifest = corpus_dir() / (std::string(split) + ".csv");
      RunResult feat = run_cli("featurize --manifest \"" + manifest.string() + "\" --out \"" +
                               features_dir(split).string() + "\"");
      REQUIRE(feat.exit_code == 0);
    }
    return true;
  }();
  (void)done;
}

fs::path logistic_ckpt() {
  static fs::path path = [] {
    require_corpus();
    fs::path ckpt = workspace() / "logistic.ckpt";
    RunResult r = run_cli("train --model logistic --train \"" + index_csv("train").string() +
                          "\" --val \"" + index_csv("validation").string() + "\" --out \"" +
                          ckpt.string() + "\" --runlog \"" +
                          (workspace() / "logistic_runlog.jsonl").string() + "\"");
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(ckpt));
    return ckpt;
  }();
  return path;
}

}  // namespace

TEST_CASE("gen-data writes a split corpus") {
  require_corpus();
  std::size_t wavs = 0;
  for (const auto& e : fs::directory_iterator(corpus_dir() / "wav"))
    wavs += e.path().extension() == ".wav" ? 1 : 0;
  CHECK(wavs == 24);

  std::size_t total = 0, genuine = 0;
  for (const char* split : {"train", "validation", "test"}) {
    DatasetManifest m = load_manifest(corpus_dir() / (std::string(split) + ".csv"));
    CHECK(!m.entries.empty());
    total += m.entries.size();
    for (const auto& e : m.entries) genuine += e.label == Label::genuine ? 1 : 0;
  }
  CHECK(total == 24);
  CHECK(genuine == 6);
}

TEST_CASE("gen-data refuses to clobber without --force and is seed-stable with it") {
  require_corpus();
  RunResult refuse = run_cli("gen-data --out \"" + corpus_dir().string() + "\" --n 24 --seed 5");
  CHECK(refuse.exit_code == 1);
  CHECK(refuse.err.find("--force") != std::string::npos);

  std::string manifest_before = slurp(corpus_dir() / "train.csv");
  std::string wav_before = slurp(corpus_dir() / "wav" / "000000.wav");
  RunResult redo = run_cli("gen-data --out \"" + corpus_dir().string() +
                           "\" --n 24 --genuine-frac 0.25 --duration 0.6 --seed 5 --force");
  CHECK(redo.exit_code == 0);
  CHECK(slurp(corpus_dir() / "train.csv") == manifest_before);
  CHECK(slurp(corpus_dir() / "wav" / "000000.wav") == wav_before);
}

TEST_CASE("the seed falls back to SPOOFDET_SEED") {
  fs::path a = workspace() / "seed_flag";
  fs::path b = workspace() / "seed_env";
  RunResult ra = run_cli("gen-data --out \"" + a.string() +
                         "\" --n 20 --genuine-frac 0.25 --duration 0.6 --seed 9");
  RunResult rb = run_cli("gen-data --out \"" + b.string() + "\" --n 20 --genuine-frac 0.25 --duration 0.6",
                         "SPOOFDET_SEED=9 ");
  REQUIRE(ra.exit_code == 0);
  REQUIRE(rb.exit_code == 0);
  CHECK(slurp(a / "train.csv") == slurp(b / "train.csv"));
  CHECK(slurp(a / "wav" / "000003.wav") == slurp(b / "wav" / "000003.wav"));

  RunResult bad = run_cli("gen-data --out \"" + (workspace() / "seed_bad").string() +
                          "\" --n 20 --genuine-frac 0.25 --duration 0.6",
                          "SPOOFDET_SEED=banana ");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("featurize records every cache and survives bad files by reporting them") {
  require_corpus();
  FeatureIndex idx = load_feature_index(index_csv("train"));
  DatasetManifest m = load_manifest(corpus_dir() / "train.csv");
  CHECK(idx.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < idx.entries.size(); ++i)
    CHECK(fs::exists(idx.resolve_cache(i)));

  // A silent file cannot be featurized: the run finishes, names the file,
  // indexes the rest, and exits nonzero.
  fs::path broken_dir = workspace() / "broken";
  fs::create_directories(broken_dir / "wav");
  fs::copy(corpus_dir() / "wav", broken_dir / "wav",
           fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  fs::copy_file(corpus_dir() / "train.csv", broken_dir / "train.csv",
                fs::copy_options::overwrite_existing);
  DatasetManifest bm = load_manifest(broken_dir / "train.csv");
  std::string victim = bm.entries[0].path;
  {
    AudioSignal silent;
    silent.samples.assign(9600, 0.0);
    write_wav(broken_dir / victim, silent);
  }
  RunResult r = run_cli("featurize --manifest \"" + (broken_dir / "train.csv").string() +
                        "\" --out \"" + (broken_dir / "features").string() + "\"");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find(victim) != std::string::npos);
  FeatureIndex partial = load_feature_index(broken_dir / "features" / "index.csv");
  CHECK(partial.entries.size() == bm.entries.size() - 1);
}

TEST_CASE("multi-threaded featurize produces the same index") {
  require_corpus();
  fs::path out = workspace() / "features_jobs4";
  RunResult r = run_cli("featurize --manifest \"" + (corpus_dir() / "train.csv").string() +
                        "\" --out \"" + out.string() + "\" --jobs 4");
  CHECK(r.exit_code == 0);
  CHECK(slurp(out / "index.csv") == slurp(index_csv("train")));
  FeatureIndex a = load_feature_index(out / "index.csv");
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    CHECK(slurp(a.resolve_cache(i)) ==
          slurp(features_dir("train") / a.entries[i].cache_path));
}

TEST_CASE("train writes a checkpoint and a run log") {
  fs::path ckpt = logistic_ckpt();
  CHECK(fs::exists(workspace() / "logistic_runlog.jsonl"));
  std::istringstream lines(slurp(workspace() / "logistic_runlog.jsonl"));
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line); ++n)
    CHECK(nlohmann::json::parse(line).contains("val"));
  CHECK(n == 30);  // stock linear schedule

  // A config file overrides the schedule; unknown keys are fatal.
  fs::path config = workspace() / "short.json";
  std::ofstream(config) << R"({"linear_epochs": 5})";
  fs::path ckpt2 = workspace() / "logistic_short.ckpt";
  fs::path log2 = workspace() / "logistic_short.jsonl";
  RunResult r = run_cli("train --model logistic --train \"" + index_csv("train").string() +
                        "\" --val \"" + index_csv("validation").string() + "\" --out \"" +
                        ckpt2.string() + "\" --runlog \"" + log2.string() + "\" --config \"" +
                        config.string() + "\"");
  CHECK(r.exit_code == 0);
  std::istringstream short_lines(slurp(log2));
  std::size_t n2 = 0;
  for (std::string line; std::getline(short_lines, line);) ++n2;
  CHECK(n2 == 5);

  fs::path bad_config = workspace() / "bad.json";
  std::ofstream(bad_config) << R"({"linear_epoch": 5})";
  RunResult rb = run_cli("train --model logistic --train \"" + index_csv("train").string() +
                         "\" --val \"" + index_csv("validation").string() + "\" --out \"" +
                         (workspace() / "never.ckpt").string() + "\" --config \"" +
                         bad_config.string() + "\"");
  CHECK(rb.exit_code == 1);
  CHECK(rb.err.find("linear_epoch") != std::string::npos);
}

TEST_CASE("usage mistakes exit with 2") {
  require_corpus();
  RunResult unknown_model =
      run_cli("train --model forest --train \"" + index_csv("train").string() + "\" --val \"" +
              index_csv("validation").string() + "\"");
  CHECK(unknown_model.exit_code == 2);
  CHECK(unknown_model.err.find("forest") != std::string::npos);

  CHECK(run_cli("train --model logistic").exit_code == 2);       // missing required options
  CHECK(run_cli("no-such-command").exit_code == 2);
  CHECK(run_cli("eval --model prior --test \"" + index_csv("test").string() +
                "\" --out \"" + (workspace() / "prior.json").string() + "\"")
            .exit_code == 2);  // prior needs --train
  CHECK(run_cli("gradcheck --preset paper").exit_code == 2);
  CHECK(run_cli("infer --model nope.ckpt --wav nope.wav").exit_code == 1);  // missing files
}

TEST_CASE("eval reproduces the trivial baselines on the test index") {
  require_corpus();
  FeatureIndex test_idx = load_feature_index(index_csv("test"));
  std::size_t genuine = 0;
  for (const auto& e : test_idx.entries) genuine += e.label == Label::genuine ? 1 : 0;
  double n = static_cast<double>(test_idx.entries.size());
  double prevalence = static_cast<double>(genuine) / n;

  fs::path out = workspace() / "metrics" / "majority.json";
  RunResult r = run_cli("eval --model majority --test \"" + index_csv("test").string() +
                        "\" --out \"" + out.string() + "\"");
  REQUIRE(r.exit_code == 0);
  auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["accuracy"].get<double>() == doctest::Approx(1.0 - prevalence));
  CHECK(j["balanced_accuracy"].get<double>() == doctest::Approx(0.5));
  CHECK(j["roc_auc"].get<double>() == doctest::Approx(0.5));
  CHECK(j["pr_auc"].get<double>() == doctest::Approx(prevalence));
  CHECK(fs::exists(workspace() / "metrics" / "majority_roc.csv"));
  CHECK(fs::exists(workspace() / "metrics" / "majority_pr.csv"));

  fs::path min_out = workspace() / "metrics" / "minority.json";
  RunResult rm = run_cli("eval --model minority --test \"" + index_csv("test").string() +
                         "\" --out \"" + min_out.string() + "\"");
  REQUIRE(rm.exit_code == 0);
  auto jm = nlohmann::json::parse(slurp(min_out));
  CHECK(jm["accuracy"].get<double>() == doctest::Approx(prevalence));

  fs::path prior_out = workspace() / "metrics" / "prior.json";
  RunResult rp = run_cli("eval --model prior --test \"" + index_csv("test").string() +
                         "\" --train \"" + index_csv("train").string() + "\" --out \"" +
                         prior_out.string() + "\" --seed 3");
  CHECK(rp.exit_code == 0);
}

TEST_CASE("eval of a checkpoint is bit-stable across runs") {
  fs::path ckpt = logistic_ckpt();
  fs::path out1 = workspace() / "metrics" / "logistic1.json";
  fs::path out2 = workspace() / "metrics" / "logistic2.json";
  RunResult r1 = run_cli("eval --model \"" + ckpt.string() + "\" --test \"" +
                         index_csv("test").string() + "\" --out \"" + out1.string() + "\"");
  RunResult r2 = run_cli("eval --model \"" + ckpt.string() + "\" --test \"" +
                         index_csv("test").string() + "\" --out \"" + out2.string() + "\"");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(out1) == slurp(out2));
  // Stdout repeats the output paths, so compare only the metrics line.
  CHECK(r1.out.substr(0, r1.out.find('\n')) == r2.out.substr(0, r2.out.find('\n')));
}

TEST_CASE("curves exports the two sweeps") {
  fs::path ckpt = logistic_ckpt();
  fs::path dir = workspace() / "curves_out";
  RunResult r = run_cli("curves --model \"" + ckpt.string() + "\" --test \"" +
                        index_csv("test").string() + "\" --out \"" + dir.string() + "\"");
  REQUIRE(r.exit_code == 0);
  for (const char* name : {"roc.csv", "pr.csv"}) {
    std::istringstream f(slurp(dir / name));
    std::string header;
    std::getline(f, header);
    CHECK(header == "threshold,x,y");
    std::size_t rows = 0;
    for (std::string line; std::getline(f, line);) ++rows;
    CHECK(rows >= 2);
  }
}

TEST_CASE("infer emits one JSON verdict with complementary probabilities") {
  fs::path ckpt = logistic_ckpt();
  DatasetManifest m = load_manifest(corpus_dir() / "test.csv");
  fs::path wav = corpus_dir() / m.entries[0].path;

  RunResult r = run_cli("infer --model \"" + ckpt.string() + "\" --wav \"" + wav.string() + "\"");
  REQUIRE(r.exit_code == 0);
  auto j = nlohmann::json::parse(r.out);
  std::string label = j["label"].get<std::string>();
  CHECK((label == "genuine" || label == "synthesized"));
  double pg = j["p_genuine"].get<double>();
  double ps = j["p_synthesized"].get<double>();
  CHECK(pg >= 0.0);
  CHECK(pg <= 1.0);
  CHECK(std::abs(pg + ps - 1.0) <= 1e-9);
  CHECK(label == (pg >= 0.5 ? "genuine" : "synthesized"));

  // Degenerate audio comes back as a structured error on stdout, exit 1.
  fs::path silent = workspace() / "silent.wav";
  AudioSignal quiet;
  quiet.samples.assign(9600, 0.0);
  write_wav(silent, quiet);
  RunResult re = run_cli("infer --model \"" + ckpt.string() + "\" --wav \"" + silent.string() + "\"");
  CHECK(re.exit_code == 1);
  auto je = nlohmann::json::parse(re.out);
  CHECK(je.contains("error"));
}

TEST_CASE("gradcheck passes clean and fails the armed fault") {
  RunResult ok = run_cli("gradcheck --seed 4 --coords 1");
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("overall: PASS") != std::string::npos);

  RunResult again = run_cli("gradcheck --seed 4 --coords 1");
  CHECK(again.out == ok.out);  // same seed, same report

  RunResult fault = run_cli("gradcheck --seed 4 --coords 1 --inject-fault");
  CHECK(fault.exit_code == 1);
  CHECK(fault.out.find("overall: FAIL") != std::string::npos);
  CHECK(fault.out.find("FAIL") < fault.out.find("overall"));
}

#include "spoofdet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "spoofdet/error.hpp"
#include "spoofdet/fft.hpp"
#include "spoofdet/rng.hpp"

namespace spoofdet {

std::filesystem::path DatasetManifest::resolve(std::size_t i) const {
  std::filesystem::path p = entries.at(i).path;
  return p.is_absolute() ? p : base_dir / p;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open manifest " + csv.string());
  DatasetManifest manifest;
  manifest.base_dir = csv.has_parent_path() ? csv.parent_path() : std::filesystem::path(".");
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (!header_done) {
      if (t != "path,label")
        throw ParseError(csv.string() + ":" + std::to_string(line_no) +
                         ": expected header 'path,label', got '" + t + "'");
      header_done = true;
      continue;
    }
    // Labels contain no commas, so split at the last one; paths may.
    std::size_t comma = t.rfind(',');
    if (comma == std::string::npos)
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": missing label column");
    std::string path = trim(t.substr(0, comma));
    std::string label_text = trim(t.substr(comma + 1));
    Label label;
    if (!parse_label(label_text, label))
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": unknown label '" +
                       label_text + "' (expected genuine or synthesized)");
    if (path.empty())
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": empty path");
    if (!seen.insert(path).second)
      throw ValidationError(csv.string() + ": duplicate path '" + path + "'");
    manifest.entries.push_back({path, label});
  }
  if (!header_done) throw ParseError(csv.string() + ": empty manifest (missing header)");
  return manifest;
}

void save_manifest(const std::filesystem::path& csv, const DatasetManifest& manifest) {
  std::ofstream out(csv, std::ios::trunc);
  if (!out) throw IoError("cannot create " + csv.string());
  out << "path,label\n";
  for (const auto& e : manifest.entries) out << e.path << ',' << label_name(e.label) << '\n';
  if (!out) throw IoError("short write to " + csv.string());
}

ClassDistribution class_distribution(const DatasetManifest& manifest) {
  if (manifest.entries.empty()) throw ValidationError("class_distribution: empty manifest");
  ClassDistribution d;
  for (const auto& e : manifest.entries)
    (e.label == Label::genuine ? d.genuine : d.synthesized)++;
  double total = static_cast<double>(manifest.entries.size());
  d.genuine_fraction = static_cast<double>(d.genuine) / total;
  d.synthesized_fraction = static_cast<double>(d.synthesized) / total;
  d.single_class = d.genuine == 0 || d.synthesized == 0;
  return d;
}

void SyntheticRecipe::validate() const {
  if (!(genuine_fraction > 0.0 && genuine_fraction < 1.0))
    throw ConfigError("synthetic recipe: genuine_fraction must lie in (0,1)");
  if (n_total < 20) throw ConfigError("synthetic recipe: n_total must be at least 20");
  if (duration_s <= 0.0 || sample_rate == 0)
    throw ConfigError("synthetic recipe: duration and sample rate must be positive");
  if (static_cast<std::size_t>(duration_s * sample_rate) < 512)
    throw ConfigError("synthetic recipe: signals must be at least 512 samples long");
  if (flatten_alpha < 0.0 || flatten_alpha > 1.0)
    throw ConfigError("synthetic recipe: flatten_alpha must lie in [0,1]");
  if (reset_period_s <= 0.0) throw ConfigError("synthetic recipe: reset period must be positive");
}

namespace {

constexpr std::size_t kBlock = 512;

// Pulls the magnitude spectrum of one 512-sample block toward its mean
// while keeping phases: the "vocoder buzz" surrogate.
void flatten_block(double* x, double alpha) {
  std::vector<std::complex<double>> spec(kBlock);
  for (std::size_t i = 0; i < kBlock; ++i) spec[i] = {x[i], 0.0};
  fft::transform(spec);
  double mean_mag = 0.0;
  for (const auto& c : spec) mean_mag += std::abs(c);
  mean_mag /= static_cast<double>(kBlock);
  for (auto& c : spec) {
    double m = std::abs(c);
    if (m > 0.0) c *= (m + alpha * (mean_mag - m)) / m;
  }
  fft::inverse(spec);
  for (std::size_t i = 0; i < kBlock; ++i) x[i] = spec[i].real();
}

AudioSignal synthesize_example(const SyntheticRecipe& recipe, Rng ex, bool synthesized) {
  std::size_t n = static_cast<std::size_t>(recipe.duration_s * recipe.sample_rate);
  double sr = static_cast<double>(recipe.sample_rate);

  double f0 = ex.next_uniform(80.0, 300.0);
  int harmonics = static_cast<int>(ex.next_int(3, 8));
  std::vector<double> phase(static_cast<std::size_t>(harmonics));
  for (double& p : phase) p = ex.next_uniform(0.0, 2.0 * std::numbers::pi);
  double am_rate = ex.next_uniform(0.5, 3.0);
  double am_phase = ex.next_uniform(0.0, 2.0 * std::numbers::pi);
  constexpr double kAmDepth = 0.3;

  std::size_t reset_period = std::max<std::size_t>(
      1, static_cast<std::size_t>(recipe.reset_period_s * sr));
  std::size_t reset_offset = 0, block_offset = 0;
  if (synthesized) {
    reset_offset = static_cast<std::size_t>(ex.next_below(reset_period));
    block_offset = static_cast<std::size_t>(ex.next_below(kBlock));
  }

  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // Synthesized voices restart their oscillators every reset period,
    // leaving periodic phase discontinuities.
    double t = synthesized
                   ? static_cast<double>((i + reset_period - reset_offset) % reset_period) / sr
                   : static_cast<double>(i) / sr;
    double v = 0.0;
    for (int k = 1; k <= harmonics; ++k) {
      double freq = f0 * static_cast<double>(k);
      if (synthesized && freq > 4000.0) continue;  // band-limited vocoder
      v += std::sin(2.0 * std::numbers::pi * freq * t + phase[static_cast<std::size_t>(k - 1)]) /
           static_cast<double>(k);
    }
    double env =
        1.0 - kAmDepth * 0.5 *
                  (1.0 - std::cos(2.0 * std::numbers::pi * am_rate * static_cast<double>(i) / sr +
                                  am_phase));
    double jitter = 1.0 + 0.05 * (2.0 * ex.next_unit() - 1.0);
    x[i] = v * env * jitter;
  }

  if (synthesized && recipe.flatten_alpha > 0.0) {
    for (std::size_t start = block_offset, parity = 0; start + kBlock <= n;
         start += kBlock, parity ^= 1)
      if (parity == 0) flatten_block(x.data() + start, recipe.flatten_alpha);
  }

  double rms = 0.0;
  for (double v : x) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(n));
  double noise_std = rms * std::pow(10.0, recipe.noise_db / 20.0);
  for (double& v : x) v += noise_std * ex.next_normal();

  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  double gain = peak > 0.0 ? 0.7 / peak : 1.0;
  for (double& v : x) v = std::clamp(v * gain, -1.0, 1.0);

  AudioSignal signal;
  signal.sample_rate = recipe.sample_rate;
  signal.samples = std::move(x);
  return signal;
}

}  // namespace

std::vector<std::pair<AudioSignal, Label>> generate_synthetic(const SyntheticRecipe& recipe) {
  recipe.validate();
  std::size_t genuine_count = static_cast<std::size_t>(
      std::llround(recipe.genuine_fraction * static_cast<double>(recipe.n_total)));
  genuine_count = std::clamp<std::size_t>(genuine_count, 1, recipe.n_total - 1);

  Rng base(recipe.seed);
  std::vector<std::pair<AudioSignal, Label>> out;
  out.reserve(recipe.n_total);
  for (std::size_t i = 0; i < recipe.n_total; ++i) {
    bool genuine = i < genuine_count;
    out.emplace_back(synthesize_example(recipe, base.derive("example", i), !genuine),
                     genuine ? Label::genuine : Label::synthesized);
  }
  return out;
}

std::array<std::vector<std::size_t>, 3> stratified_split_indices(std::span<const Label> labels,
                                                                 const SplitFractions& fractions,
                                                                 std::uint64_t seed) {
  const std::array<double, 3> f = {fractions.train, fractions.validation, fractions.test};
  double sum = f[0] + f[1] + f[2];
  for (double x : f)
    if (x < 0.0) throw ConfigError("split: fractions must be nonnegative");
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split: fractions must sum to 1, got " + std::to_string(sum));
  std::size_t active_splits = 0;
  for (double x : f) active_splits += x > 0.0 ? 1 : 0;

  std::array<std::vector<std::size_t>, 3> result;
  Rng base(seed);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (static_cast<int>(labels[i]) == cls) members.push_back(i);
    if (members.empty()) continue;
    if (members.size() < active_splits)
      throw StratificationError(std::string("split: class '") +
                                label_name(static_cast<Label>(cls)) + "' has " +
                                std::to_string(members.size()) + " examples for " +
                                std::to_string(active_splits) + " splits");
    Rng stream = base.derive("split-class", static_cast<std::uint64_t>(cls));
    stream.shuffle(members);

    // Largest-remainder apportionment keeps each split within ±1 example
    // of the exact per-class share.
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      double exact = f[static_cast<std::size_t>(s)] * static_cast<double>(members.size());
      counts[static_cast<std::size_t>(s)] = static_cast<std::size_t>(std::floor(exact));
      remainders[static_cast<std::size_t>(s)] = exact - std::floor(exact);
      assigned += counts[static_cast<std::size_t>(s)];
    }
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return remainders[static_cast<std::size_t>(a)] >
                                                remainders[static_cast<std::size_t>(b)]; });
    for (std::size_t leftover = members.size() - assigned, j = 0; j < leftover; ++j)
      counts[static_cast<std::size_t>(order[j % 3])]++;

    std::size_t cursor = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t j = 0; j < counts[static_cast<std::size_t>(s)]; ++j)
        result[static_cast<std::size_t>(s)].push_back(members[cursor++]);
    }
  }
  for (auto& split : result) std::sort(split.begin(), split.end());
  return result;
}

std::array<DatasetManifest, 3> split_manifest(const DatasetManifest& manifest,
                                              const SplitFractions& fractions,
                                              std::uint64_t seed) {
  std::vector<Label> labels;
  labels.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) labels.push_back(e.label);
  auto indices = stratified_split_indices(labels, fractions, seed);
  static const char* kTags[3] = {"train", "validation", "test"};
  std::array<DatasetManifest, 3> out;
  for (int s = 0; s < 3; ++s) {
    out[static_cast<std::size_t>(s)].split_tag = kTags[s];
    out[static_cast<std::size_t>(s)].base_dir = manifest.base_dir;
    for (std::size_t i : indices[static_cast<std::size_t>(s)])
      out[static_cast<std::size_t>(s)].entries.push_back(manifest.entries[i]);
  }
  return out;
}

std::filesystem::path FeatureIndex::resolve_cache(std::size_t i) const {
  std::filesystem::path p = entries.at(i).cache_path;
  return p.is_absolute() ? p : base_dir / p;
}

FeatureIndex load_feature_index(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open index " + csv.string());
  FeatureIndex index;
  index.base_dir = csv.has_parent_path() ? csv.parent_path() : std::filesystem::path(".");
  std::string line;
  std::size_t line_no = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (!header_done) {
      if (t != "path,label,cache_path")
        throw ParseError(csv.string() + ":" + std::to_string(line_no) +
                         ": expected header 'path,label,cache_path', got '" + t + "'");
      header_done = true;
      continue;
    }
    std::size_t c2 = t.rfind(',');
    if (c2 == std::string::npos)
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": missing columns");
    std::size_t c1 = t.rfind(',', c2 - 1);
    if (c1 == std::string::npos)
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": missing columns");
    std::string path = trim(t.substr(0, c1));
    std::string label_text = trim(t.substr(c1 + 1, c2 - c1 - 1));
    std::string cache = trim(t.substr(c2 + 1));
    Label label;
    if (!parse_label(label_text, label))
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": unknown label '" +
                       label_text + "'");
    if (path.empty() || cache.empty())
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": empty column");
    index.entries.push_back({path, label, cache});
  }
  if (!header_done) throw ParseError(csv.string() + ": empty index (missing header)");
  return index;
}

void save_feature_index(const std::filesystem::path& csv, const FeatureIndex& index) {
  std::ofstream out(csv, std::ios::trunc);
  if (!out) throw IoError("cannot create " + csv.string());
  out << "path,label,cache_path\n";
  for (const auto& e : index.entries)
    out << e.path << ',' << label_name(e.label) << ',' << e.cache_path << '\n';
  if (!out) throw IoError("short write to " + csv.string());
}

std::vector<LabeledExample> load_examples(const FeatureIndex& index) {
  std::vector<LabeledExample> out;
  out.reserve(index.entries.size());
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    LabeledExample ex;
    ex.spectrogram = load_spectrogram(index.resolve_cache(i));
    ex.label = index.entries[i].label;
    ex.source_id = index.entries[i].path;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace spoofdet

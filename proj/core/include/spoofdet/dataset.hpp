#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spoofdet/audio.hpp"
#include "spoofdet/dataset_types.hpp"
#include "spoofdet/spectrogram.hpp"

namespace spoofdet {

struct ManifestEntry {
  std::string path;  // as written in the CSV; resolve() applies base_dir
  Label label = Label::synthesized;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::string split_tag;                // "train" / "validation" / "test" / ""
  std::filesystem::path base_dir;       // directory the CSV lived in

  std::filesystem::path resolve(std::size_t i) const;
};

// CSV with header `path,label`; labels case-insensitive. Unknown labels are
// parse errors carrying the line number; duplicate paths validation errors.
DatasetManifest load_manifest(const std::filesystem::path& csv);
void save_manifest(const std::filesystem::path& csv, const DatasetManifest& manifest);

struct ClassDistribution {
  std::size_t genuine = 0;
  std::size_t synthesized = 0;
  double genuine_fraction = 0.0;
  double synthesized_fraction = 0.0;
  bool single_class = false;  // warning flag, not an error
};

ClassDistribution class_distribution(const DatasetManifest& manifest);

// Desk-scale stand-in corpus: harmonic voices with per-class artifacts.
struct SyntheticRecipe {
  std::size_t n_total = 100;
  double genuine_fraction = 0.1032;  // mirrors the real test prevalence
  double duration_s = 2.0;
  std::uint32_t sample_rate = 16000;
  std::uint64_t seed = 42;
  // Artifact strengths for the synthesized class.
  double flatten_alpha = 0.5;    // pull of block magnitudes toward their mean
  double reset_period_s = 0.1;   // oscillator phase-reset period
  double noise_db = -30.0;       // additive noise level, both classes

  void validate() const;
};

// Deterministic in the recipe (per-example derived seeds). Genuine signals
// are harmonic stacks (f0 uniform in [80,300] Hz, 3-8 harmonics with 1/k
// decay, ±5% per-sample jitter, 0.5-3 Hz AM, noise at noise_db). The
// synthesized class runs the same construction, then: harmonics above 4 kHz
// dropped, every other 512-sample block's spectrum flattened toward its
// mean magnitude, and oscillator phases reset every reset_period_s — both
// block grids start at a per-example random offset.
std::vector<std::pair<AudioSignal, Label>> generate_synthetic(const SyntheticRecipe& recipe);

struct SplitFractions {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

// Stratified by label: per class, a seeded shuffle then largest-remainder
// apportionment, so each split's class ratio is within ±1 example of the
// requested fractions. Returned index lists are sorted ascending.
std::array<std::vector<std::size_t>, 3> stratified_split_indices(std::span<const Label> labels,
                                                                 const SplitFractions& fractions,
                                                                 std::uint64_t seed);

std::array<DatasetManifest, 3> split_manifest(const DatasetManifest& manifest,
                                              const SplitFractions& fractions, std::uint64_t seed);

// A featurized, labeled example ready for a model.
struct LabeledExample {
  Spectrogram spectrogram;
  Label label = Label::synthesized;
  std::string source_id;
};

// Cache index written by featurization: CSV `path,label,cache_path`.
struct IndexEntry {
  std::string path;
  Label label = Label::synthesized;
  std::string cache_path;
};

struct FeatureIndex {
  std::vector<IndexEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve_cache(std::size_t i) const;
};

FeatureIndex load_feature_index(const std::filesystem::path& csv);
void save_feature_index(const std::filesystem::path& csv, const FeatureIndex& index);

// Reads every cache in the index.
std::vector<LabeledExample> load_examples(const FeatureIndex& index);

}  // namespace spoofdet

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spoofdet/gradcheck.hpp"
#include "spoofdet/models.hpp"

namespace spoofdet {

// A named finite-difference check: inputs plus a scalar-loss builder.
// Shared by the verification CLI, the unit tests, and the acceptance
// suite so they all exercise the identical catalog.
struct GradCheckCase {
  std::string name;
  std::vector<GradCheckInput> inputs;
  std::function<Tensor(Tape&, std::span<Tensor>)> make_loss;
  GradCheckOptions options;
};

// One case per differentiable primitive at small shapes; deterministic in
// `seed`. Non-smooth ops (relu, maxpool) get inputs placed away from their
// kinks so central differences are meaningful.
std::vector<GradCheckCase> primitive_gradcheck_cases(std::uint64_t seed);

// Cross-entropy of a full model with the given config on one random input,
// every parameter tensor (and the image) a leaf; `coords_per_input` sampled
// coordinates per tensor keep the finite-difference pass tractable (0 means
// exhaustive). Probe windows are screened for tokenizer branch flips.
GradCheckCase model_gradcheck_case(const CctConfig& config, std::string name, std::uint64_t seed,
                                   std::size_t coords_per_input);

// The model case at the desk preset; the default coordinate budget keeps the
// finite-difference pass under a minute on one core.
GradCheckCase desk_model_gradcheck_case(std::uint64_t seed, std::size_t coords_per_input = 8);

struct GradCheckOutcome {
  std::string name;
  GradCheckResult result;
  bool pass = false;
};

GradCheckOutcome run_gradcheck_case(const GradCheckCase& c, double tolerance = 1e-4);

}  // namespace spoofdet

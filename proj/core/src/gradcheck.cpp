#include "spoofdet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "spoofdet/error.hpp"
#include "spoofdet/rng.hpp"

namespace spoofdet {

namespace {

double evaluate(const std::function<Tensor(Tape&, std::span<Tensor>)>& make_loss,
                const std::vector<GradCheckInput>& inputs) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const auto& in : inputs) leaves.push_back(tape.leaf(in.shape, in.values));
  Tensor loss = make_loss(tape, leaves);
  if (!loss.defined() || loss.size() != 1)
    throw UsageError("grad_check: loss function must return a scalar");
  return loss.scalar();
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor(Tape&, std::span<Tensor>)>& make_loss,
                           std::span<const GradCheckInput> inputs,
                           const GradCheckOptions& options) {
  if (inputs.empty()) throw UsageError("grad_check: no inputs supplied");
  std::vector<GradCheckInput> work(inputs.begin(), inputs.end());

  // Analytic gradients from one tracked evaluation.
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(work.size());
    for (const auto& in : work) leaves.push_back(tape.leaf(in.shape, in.values));
    Tensor loss = make_loss(tape, leaves);
    if (!loss.defined() || loss.size() != 1)
      throw UsageError("grad_check: loss function must return a scalar");
    tape.backward(loss);
    for (const Tensor& leaf : leaves)
      analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
  }

  GradCheckResult result;
  Rng sampler(options.seed);
  for (std::size_t i = 0; i < work.size(); ++i) {
    std::size_t n = work[i].values.size();
    std::size_t quota = options.max_coords_per_input;
    std::vector<std::size_t> coords;
    if (quota == 0 || n <= quota) {
      quota = n;
      coords.resize(n);
      for (std::size_t c = 0; c < n; ++c) coords[c] = c;
    } else {
      // Draw spare candidates so excluded coordinates can be replaced.
      std::size_t want = options.branch_trace ? std::min(n, 4 * quota) : quota;
      Rng stream = sampler.derive("coords", i);
      while (coords.size() < want) {
        std::size_t c = static_cast<std::size_t>(stream.next_below(n));
        if (std::find(coords.begin(), coords.end(), c) == coords.end()) coords.push_back(c);
      }
      std::sort(coords.begin(), coords.end());
    }
    std::size_t accepted = 0;
    for (std::size_t c : coords) {
      if (accepted == quota) break;
      double original = work[i].values[c];
      if (options.branch_trace) {
        work[i].values[c] = original + options.eps;
        auto up_branches = options.branch_trace(work, i);
        work[i].values[c] = original - options.eps;
        auto down_branches = options.branch_trace(work, i);
        work[i].values[c] = original;
        if (up_branches != down_branches) {
          ++result.coords_excluded;
          continue;
        }
      }
      work[i].values[c] = original + options.eps;
      double up = evaluate(make_loss, work);
      work[i].values[c] = original - options.eps;
      double down = evaluate(make_loss, work);
      work[i].values[c] = original;
      double numeric = (up - down) / (2.0 * options.eps);
      double a = analytic[i][c];
      double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      result.max_rel_error = std::max(result.max_rel_error, rel);
      ++result.coords_checked;
      ++accepted;
    }
  }
  return result;
}

}  // namespace spoofdet

#include "spoofdet/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "spoofdet/models.hpp"
#include "spoofdet/ops.hpp"
#include "spoofdet/rng.hpp"

namespace spoofdet {
namespace {

// Branch decisions (relu signs, pool argmax picks) of the tokenizer
// front-end; everything past the second pool stage is smooth. The probe
// window of a single coordinate is kink-free exactly when these agree at
// both endpoints, because each pre-activation is linear in the coordinate
// between branch flips. Inputs 0-3 are the conv parameters, in[n_params]
// the image, matching the parameter order of the full-model case.
std::vector<std::uint8_t> tokenizer_branches(const CctConfig& config,
                                             std::span<const GradCheckInput> in,
                                             std::size_t n_params) {
  std::size_t side = config.input_side;
  Tensor x = Tensor::from_values({1, side, side}, in[n_params].values);
  Tensor w1 = Tensor::from_values(in[0].shape, in[0].values);
  Tensor b1 = Tensor::from_values(in[1].shape, in[1].values);
  Tensor w2 = Tensor::from_values(in[2].shape, in[2].values);
  Tensor b2 = Tensor::from_values(in[3].shape, in[3].values);

  std::vector<std::uint8_t> trace;
  // Records the signs of one conv stage's pre-activations and the argmax
  // of each 2x2 window of relu(z) (first occurrence wins ties, matching
  // maxpool2), then returns the pooled map for the next stage.
  auto stage = [&trace](const Tensor& z) {
    auto zs = z.values();
    for (double v : zs) trace.push_back(v > 0.0 ? 1 : 0);
    std::size_t c = z.dim(0), h = z.dim(1), w = z.dim(2);
    std::vector<double> pooled(c * (h / 2) * (w / 2));
    std::size_t o = 0;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t r = 0; r < h; r += 2)
        for (std::size_t q = 0; q < w; q += 2) {
          std::size_t base = ch * h * w + r * w + q;
          std::uint8_t pick = 0;
          double best = std::max(zs[base], 0.0);
          std::uint8_t k = 1;
          for (std::size_t dr = 0; dr < 2; ++dr)
            for (std::size_t dq = 0; dq < 2; ++dq) {
              if (dr == 0 && dq == 0) continue;
              double v = std::max(zs[base + dr * w + dq], 0.0);
              if (v > best) {
                best = v;
                pick = k;
              }
              ++k;
            }
          trace.push_back(pick);
          pooled[o++] = best;
        }
    return Tensor::from_values({c, h / 2, w / 2}, pooled);
  };
  Tensor h1 = stage(conv2d(x, w1, b1));
  stage(conv2d(h1, w2, b2));
  return trace;
}

std::vector<double> uniform_values(std::size_t n, Rng rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.next_uniform(lo, hi);
  return v;
}

// Values bounded away from zero, where relu's derivative jumps.
std::vector<double> off_kink_values(std::size_t n, Rng rng) {
  std::vector<double> v(n);
  for (double& x : v) {
    do {
      x = rng.next_uniform(-1.0, 1.0);
    } while (std::abs(x) < 0.05);
  }
  return v;
}

// Values whose 2x2 pooling windows have a clear argmax margin.
std::vector<double> pool_safe_values(Shape shape, Rng rng) {
  std::size_t c = shape[0], h = shape[1], w = shape[2];
  std::vector<double> v;
  for (;;) {
    v = uniform_values(c * h * w, rng);
    bool ok = true;
    for (std::size_t ch = 0; ch < c && ok; ++ch)
      for (std::size_t r = 0; r < h && ok; r += 2)
        for (std::size_t col = 0; col < w && ok; col += 2) {
          double win[4] = {v[(ch * h + r) * w + col], v[(ch * h + r) * w + col + 1],
                           v[(ch * h + r + 1) * w + col], v[(ch * h + r + 1) * w + col + 1]};
          for (int i = 0; i < 4 && ok; ++i)
            for (int j = i + 1; j < 4; ++j)
              if (std::abs(win[i] - win[j]) < 1e-3) {
                ok = false;
                break;
              }
        }
    if (ok) return v;
  }
}

GradCheckInput make_input(Shape shape, std::vector<double> values) {
  return GradCheckInput{std::move(shape), std::move(values)};
}

// Scalarizes a non-scalar op output with a fixed random projection so the
// finite-difference check sees every output coordinate.
Tensor project(const Tensor& out, const std::vector<double>& proj) {
  return sum(mul(out, Tensor::from_values(out.shape(), proj)));
}

}  // namespace

std::vector<GradCheckCase> primitive_gradcheck_cases(std::uint64_t seed) {
  Rng base(seed);
  std::vector<GradCheckCase> cases;
  auto stream = [&](const std::string& name, std::uint64_t i = 0) {
    return base.derive("case." + name, i);
  };

  {
    GradCheckCase c;
    c.name = "add";
    c.inputs = {make_input({3, 4}, uniform_values(12, stream("add", 0))),
                make_input({3, 4}, uniform_values(12, stream("add", 1)))};
    auto proj = uniform_values(12, stream("add", 2));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) { return project(add(in[0], in[1]), proj); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "sub";
    c.inputs = {make_input({3, 4}, uniform_values(12, stream("sub", 0))),
                make_input({3, 4}, uniform_values(12, stream("sub", 1)))};
    auto proj = uniform_values(12, stream("sub", 2));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) { return project(sub(in[0], in[1]), proj); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "mul";
    c.inputs = {make_input({3, 4}, uniform_values(12, stream("mul", 0))),
                make_input({3, 4}, uniform_values(12, stream("mul", 1)))};
    auto proj = uniform_values(12, stream("mul", 2));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) { return project(mul(in[0], in[1]), proj); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "scale";
    c.inputs = {make_input({2, 5}, uniform_values(10, stream("scale")))};
    auto proj = uniform_values(10, stream("scale", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) { return project(scale(in[0], 1.7), proj); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "add_scalar";
    c.inputs = {make_input({2, 5}, uniform_values(10, stream("add_scalar")))};
    auto proj = uniform_values(10, stream("add_scalar", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      return project(add_scalar(in[0], 0.3), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "relu";
    c.inputs = {make_input({3, 4}, off_kink_values(12, stream("relu")))};
    auto proj = uniform_values(12, stream("relu", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) { return project(relu(in[0]), proj); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "gelu";
    c.inputs = {make_input({3, 4}, uniform_values(12, stream("gelu"), -2.0, 2.0))};
    auto proj = uniform_values(12, stream("gelu", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) { return project(gelu(in[0]), proj); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "reshape";
    c.inputs = {make_input({2, 6}, uniform_values(12, stream("reshape")))};
    auto proj = uniform_values(12, stream("reshape", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      return project(reshape(in[0], {3, 4}), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "transpose";
    c.inputs = {make_input({3, 4}, uniform_values(12, stream("transpose")))};
    auto proj = uniform_values(12, stream("transpose", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) { return project(transpose(in[0]), proj); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "block";
    c.inputs = {make_input({4, 5}, uniform_values(20, stream("block")))};
    auto proj = uniform_values(2 * 3, stream("block", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      return project(block(in[0], 1, 3, 2, 5), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "slice_rows";
    c.inputs = {make_input({5, 3}, uniform_values(15, stream("slice_rows")))};
    auto proj = uniform_values(6, stream("slice_rows", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      return project(slice_rows(in[0], 2, 4), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "slice_cols";
    c.inputs = {make_input({3, 5}, uniform_values(15, stream("slice_cols")))};
    auto proj = uniform_values(6, stream("slice_cols", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      return project(slice_cols(in[0], 3, 5), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "concat_rows";
    c.inputs = {make_input({2, 3}, uniform_values(6, stream("concat_rows", 0))),
                make_input({1, 3}, uniform_values(3, stream("concat_rows", 1)))};
    auto proj = uniform_values(9, stream("concat_rows", 2));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      std::vector<Tensor> parts = {in[0], in[1]};
      return project(concat_rows(parts), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "concat_cols";
    c.inputs = {make_input({2, 2}, uniform_values(4, stream("concat_cols", 0))),
                make_input({2, 3}, uniform_values(6, stream("concat_cols", 1)))};
    auto proj = uniform_values(10, stream("concat_cols", 2));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      std::vector<Tensor> parts = {in[0], in[1]};
      return project(concat_cols(parts), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "sum";
    c.inputs = {make_input({3, 3}, uniform_values(9, stream("sum")))};
    c.make_loss = [](Tape&, std::span<Tensor> in) { return sum(in[0]); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "mean";
    c.inputs = {make_input({3, 3}, uniform_values(9, stream("mean")))};
    c.make_loss = [](Tape&, std::span<Tensor> in) { return mean(in[0]); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "matmul";
    c.inputs = {make_input({3, 4}, uniform_values(12, stream("matmul", 0))),
                make_input({4, 2}, uniform_values(8, stream("matmul", 1)))};
    auto proj = uniform_values(6, stream("matmul", 2));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      return project(matmul(in[0], in[1]), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "matmul_nt";
    c.inputs = {make_input({3, 4}, uniform_values(12, stream("matmul_nt", 0))),
                make_input({2, 4}, uniform_values(8, stream("matmul_nt", 1)))};
    auto proj = uniform_values(6, stream("matmul_nt", 2));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      return project(matmul_nt(in[0], in[1]), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "add_row_bias";
    c.inputs = {make_input({3, 4}, uniform_values(12, stream("add_row_bias", 0))),
                make_input({4}, uniform_values(4, stream("add_row_bias", 1)))};
    auto proj = uniform_values(12, stream("add_row_bias", 2));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      return project(add_row_bias(in[0], in[1]), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "layer_norm";
    c.inputs = {make_input({3, 6}, uniform_values(18, stream("layer_norm", 0))),
                make_input({6}, uniform_values(6, stream("layer_norm", 1), 0.5, 1.5)),
                make_input({6}, uniform_values(6, stream("layer_norm", 2)))};
    auto proj = uniform_values(18, stream("layer_norm", 3));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      return project(layer_norm(in[0], in[1], in[2]), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "softmax";
    c.inputs = {make_input({3, 5}, uniform_values(15, stream("softmax"), -2.0, 2.0))};
    auto proj = uniform_values(15, stream("softmax", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) { return project(softmax(in[0]), proj); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "maxpool2";
    Shape shape = {2, 4, 4};
    c.inputs = {make_input(shape, pool_safe_values(shape, stream("maxpool2")))};
    auto proj = uniform_values(2 * 2 * 2, stream("maxpool2", 1));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) { return project(maxpool2(in[0]), proj); };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "conv2d";
    c.inputs = {make_input({2, 5, 6}, uniform_values(60, stream("conv2d", 0))),
                make_input({3, 2, 3, 3}, uniform_values(54, stream("conv2d", 1))),
                make_input({3}, uniform_values(3, stream("conv2d", 2)))};
    auto proj = uniform_values(3 * 5 * 6, stream("conv2d", 3));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      return project(conv2d(in[0], in[1], in[2]), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "multi_head_attention";
    c.inputs = {make_input({5, 8}, uniform_values(40, stream("mha", 0)))};
    for (int p = 0; p < 4; ++p)
      c.inputs.push_back(make_input({8, 8}, uniform_values(64, stream("mha", 10 + p))));
    c.inputs.push_back(make_input({8}, uniform_values(8, stream("mha", 20))));
    auto proj = uniform_values(40, stream("mha", 30));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      AttentionParams params{in[1], in[2], in[3], in[4], in[5]};
      return project(multi_head_attention(in[0], params, 2), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "mha_stacked";
    c.inputs = {make_input({6, 8}, uniform_values(48, stream("mha_stacked", 0)))};
    for (int p = 0; p < 4; ++p)
      c.inputs.push_back(make_input({8, 8}, uniform_values(64, stream("mha_stacked", 10 + p))));
    c.inputs.push_back(make_input({8}, uniform_values(8, stream("mha_stacked", 20))));
    auto proj = uniform_values(48, stream("mha_stacked", 30));
    c.make_loss = [proj](Tape&, std::span<Tensor> in) {
      AttentionParams params{in[1], in[2], in[3], in[4], in[5]};
      return project(mha_stacked(in[0], params, 2, 2), proj);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "cross_entropy";
    c.inputs = {make_input({4, 2}, uniform_values(8, stream("cross_entropy"), -2.0, 2.0))};
    c.make_loss = [](Tape&, std::span<Tensor> in) {
      static const std::vector<int> labels = {0, 1, 1, 0};
      return cross_entropy(in[0], labels);
    };
    cases.push_back(std::move(c));
  }
  {
    GradCheckCase c;
    c.name = "cross_entropy_weighted";
    c.inputs = {make_input({4, 2}, uniform_values(8, stream("cross_entropy_w"), -2.0, 2.0))};
    c.make_loss = [](Tape&, std::span<Tensor> in) {
      static const std::vector<int> labels = {1, 0, 1, 1};
      static const std::vector<double> weights = {0.3, 1.7};
      return cross_entropy(in[0], labels, weights);
    };
    cases.push_back(std::move(c));
  }
  return cases;
}

GradCheckCase model_gradcheck_case(const CctConfig& config, std::string name, std::uint64_t seed,
                                   std::size_t coords_per_input) {
  Rng base(seed);
  CctModel reference = init_cct(config, base.derive("model"));

  GradCheckCase c;
  c.name = std::move(name);
  c.options.max_coords_per_input = coords_per_input;
  c.options.seed = base.derive("coords").next_u64();
  for (const auto& [name, tensor] : reference.named_parameters())
    c.inputs.push_back(
        make_input(tensor->shape(), {tensor->values().begin(), tensor->values().end()}));
  std::size_t side = config.input_side;
  c.inputs.push_back(
      make_input({1, 1, side, side}, uniform_values(side * side, base.derive("image"), 0.0, 1.0)));

  std::size_t n_params = c.inputs.size() - 1;
  // Unlike the primitive cases, whose inputs are drawn clear of relu kinks
  // and pool ties, a full model owns too many activations to screen up
  // front; instead each probed coordinate's window is checked for branch
  // flips. Only the conv parameters (inputs 0-3) and the image can move a
  // branch, so other perturbations skip the recomputation.
  c.options.branch_trace = [config, n_params](std::span<const GradCheckInput> in,
                                              std::size_t perturbed) -> std::vector<std::uint8_t> {
    if (perturbed > 3 && perturbed != n_params) return {};
    return tokenizer_branches(config, in, n_params);
  };
  c.make_loss = [config, n_params](Tape&, std::span<Tensor> in) {
    CctModel m;
    m.config = config;
    m.layers.resize(config.encoder_layers);
    auto params = m.named_parameters();
    for (std::size_t i = 0; i < n_params; ++i) *params[i].second = in[i];
    static const std::vector<int> labels = {1};
    return cross_entropy(cct_forward(in[n_params], m), labels);
  };
  return c;
}

GradCheckCase desk_model_gradcheck_case(std::uint64_t seed, std::size_t coords_per_input) {
  return model_gradcheck_case(CctConfig::desk_preset(), "cct_desk_loss", seed, coords_per_input);
}

GradCheckOutcome run_gradcheck_case(const GradCheckCase& c, double tolerance) {
  GradCheckOutcome out;
  out.name = c.name;
  out.result = grad_check(c.make_loss, c.inputs, c.options);
  out.pass = out.result.max_rel_error < tolerance;
  return out;
}

}  // namespace spoofdet

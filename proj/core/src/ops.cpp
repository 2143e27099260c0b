#include "spoofdet/ops.hpp"

// Eigen evaluates small products (k+m+n < 20) with coefficient-wise dot
// reductions whose summation order peels to the runtime alignment of the
// operand buffers, so identical inputs at different heap addresses can
// differ by an ulp. The packed-kernel path accumulates in a fixed order
// regardless of operand addresses; force it for every size so results are
// a pure function of the input values.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 1
#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>

#include "spoofdet/error.hpp"

namespace spoofdet {

namespace {

std::atomic<bool> g_backward_fault{false};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajorMatrix>;
using ConstMatMap = Eigen::Map<const RowMajorMatrix>;

// C[m×n] (+)= op(A)·op(B). A is stored row-major as [m×k] (or [k×m] when
// transposed), likewise B. Everything the library multiplies funnels
// through here so the matrix kernel is swappable in one place.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  auto em = static_cast<Eigen::Index>(m);
  auto en = static_cast<Eigen::Index>(n);
  auto ek = static_cast<Eigen::Index>(k);
  MatMap cm(c, em, en);
  auto run = [&](const auto& prod) {
    if (accumulate)
      cm.noalias() += prod;
    else
      cm.noalias() = prod;
  };
  if (!trans_a && !trans_b)
    run(ConstMatMap(a, em, ek) * ConstMatMap(b, ek, en));
  else if (!trans_a && trans_b)
    run(ConstMatMap(a, em, ek) * ConstMatMap(b, en, ek).transpose());
  else if (trans_a && !trans_b)
    run(ConstMatMap(a, ek, em).transpose() * ConstMatMap(b, ek, en));
  else
    run(ConstMatMap(a, ek, em).transpose() * ConstMatMap(b, en, ek).transpose());
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw UsageError(std::string(op) + ": undefined tensor argument");
}

// All tracked inputs must live on one tape; returns it (or null).
Tape* merge_tapes(std::initializer_list<const Tensor*> inputs, const char* op) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->tracked()) continue;
    if (!tape)
      tape = t->tape();
    else if (tape != t->tape())
      throw UsageError(std::string(op) + ": inputs tracked by different tapes");
  }
  return tape;
}

void check_finite_values(const Tensor& t, const char* op) {
  if (!finite_checks_enabled()) return;
  for (double v : t.values())
    if (!std::isfinite(v)) throw ValidationError(std::string(op) + ": non-finite output value");
}

Tensor make_output(Shape shape, std::vector<double> values, Tape* tape, const char* op) {
  Tensor out = TensorAccess::make(std::move(shape), std::move(values), tape);
  check_finite_values(out, op);
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_to_string(t.shape()));
}

// Shared skeleton for unary elementwise ops with local derivative df(x).
template <typename Fwd, typename Dfdx>
Tensor unary_elementwise(const Tensor& x, const char* op, Fwd fwd, Dfdx dfdx, bool faultable) {
  require_defined(x, op);
  auto xs = x.values();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = fwd(xs[i]);
  Tape* tape = merge_tapes({&x}, op);
  Tensor result = make_output(x.shape(), std::move(out), tape, op);
  if (tape) {
    TensorAccess::push_node(tape, [x, result, dfdx, faultable]() {
      auto g = result.grad();
      auto xs2 = x.values();
      auto dx = TensorAccess::grad_mut(x);
      double fault = (faultable && g_backward_fault.load()) ? 1.05 : 1.0;
      for (std::size_t i = 0; i < xs2.size(); ++i) dx[i] += fault * g[i] * dfdx(xs2[i]);
    });
  }
  return result;
}

}  // namespace

void set_backward_fault_injection(bool armed) { g_backward_fault.store(armed); }
bool backward_fault_injection() { return g_backward_fault.load(); }

bool all_finite(const Tensor& t) {
  if (!t.defined()) return false;
  for (double v : t.values())
    if (!std::isfinite(v)) return false;
  if (t.tracked())
    for (double g : t.grad())
      if (!std::isfinite(g)) return false;
  return true;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  require_same_shape(a, b, "add");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  Tape* tape = merge_tapes({&a, &b}, "add");
  Tensor result = make_output(a.shape(), std::move(out), tape, "add");
  if (tape) {
    TensorAccess::push_node(tape, [a, b, result]() {
      auto g = result.grad();
      if (a.tracked()) {
        auto da = TensorAccess::grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (b.tracked()) {
        auto db = TensorAccess::grad_mut(b);
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
      }
    });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  require_same_shape(a, b, "sub");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  Tape* tape = merge_tapes({&a, &b}, "sub");
  Tensor result = make_output(a.shape(), std::move(out), tape, "sub");
  if (tape) {
    TensorAccess::push_node(tape, [a, b, result]() {
      auto g = result.grad();
      if (a.tracked()) {
        auto da = TensorAccess::grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (b.tracked()) {
        auto db = TensorAccess::grad_mut(b);
        for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
      }
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require_same_shape(a, b, "mul");
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  Tape* tape = merge_tapes({&a, &b}, "mul");
  Tensor result = make_output(a.shape(), std::move(out), tape, "mul");
  if (tape) {
    TensorAccess::push_node(tape, [a, b, result]() {
      auto g = result.grad();
      auto av2 = a.values();
      auto bv2 = b.values();
      if (a.tracked()) {
        auto da = TensorAccess::grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv2[i];
      }
      if (b.tracked()) {
        auto db = TensorAccess::grad_mut(b);
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av2[i];
      }
    });
  }
  return result;
}

Tensor scale(const Tensor& x, double factor) {
  return unary_elementwise(
      x, "scale", [factor](double v) { return factor * v; },
      [factor](double) { return factor; }, /*faultable=*/false);
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary_elementwise(
      x, "add_scalar", [value](double v) { return v + value; }, [](double) { return 1.0; },
      /*faultable=*/false);
}

Tensor relu(const Tensor& x) {
  return unary_elementwise(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; }, /*faultable=*/true);
}

Tensor gelu(const Tensor& x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c = 0.044715;
  return unary_elementwise(
      x, "gelu",
      [](double v) {
        double u = k * (v + c * v * v * v);
        return 0.5 * v * (1.0 + std::tanh(u));
      },
      [](double v) {
        double u = k * (v + c * v * v * v);
        double t = std::tanh(u);
        double du = k * (1.0 + 3.0 * c * v * v);
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      },
      /*faultable=*/true);
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.size())
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                         shape_to_string(shape));
  Tape* tape = merge_tapes({&x}, "reshape");
  std::vector<double> out(x.values().begin(), x.values().end());
  Tensor result = make_output(std::move(shape), std::move(out), tape, "reshape");
  if (tape) {
    TensorAccess::push_node(tape, [x, result]() {
      auto g = result.grad();
      auto dx = TensorAccess::grad_mut(x);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    });
  }
  return result;
}

Tensor transpose(const Tensor& x) {
  require_defined(x, "transpose");
  require_rank2(x, "transpose");
  std::size_t rows = x.dim(0), cols = x.dim(1);
  auto xs = x.values();
  std::vector<double> out(xs.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = xs[r * cols + c];
  Tape* tape = merge_tapes({&x}, "transpose");
  Tensor result = make_output({cols, rows}, std::move(out), tape, "transpose");
  if (tape) {
    TensorAccess::push_node(tape, [x, result, rows, cols]() {
      auto g = result.grad();
      auto dx = TensorAccess::grad_mut(x);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += g[c * rows + r];
    });
  }
  return result;
}

Tensor block(const Tensor& x, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  require_defined(x, "block");
  require_rank2(x, "block");
  std::size_t rows = x.dim(0), cols = x.dim(1);
  if (r0 >= r1 || r1 > rows || c0 >= c1 || c1 > cols)
    throw DimensionError("block: range [" + std::to_string(r0) + "," + std::to_string(r1) +
                         ")x[" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") invalid for " + shape_to_string(x.shape()));
  std::size_t br = r1 - r0, bc = c1 - c0;
  auto xs = x.values();
  std::vector<double> out(br * bc);
  for (std::size_t r = 0; r < br; ++r)
    for (std::size_t c = 0; c < bc; ++c) out[r * bc + c] = xs[(r0 + r) * cols + (c0 + c)];
  Tape* tape = merge_tapes({&x}, "block");
  Tensor result = make_output({br, bc}, std::move(out), tape, "block");
  if (tape) {
    TensorAccess::push_node(tape, [x, result, r0, c0, br, bc, cols]() {
      auto g = result.grad();
      auto dx = TensorAccess::grad_mut(x);
      for (std::size_t r = 0; r < br; ++r)
        for (std::size_t c = 0; c < bc; ++c) dx[(r0 + r) * cols + (c0 + c)] += g[r * bc + c];
    });
  }
  return result;
}

Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1) {
  require_defined(x, "slice_rows");
  require_rank2(x, "slice_rows");
  return block(x, r0, r1, 0, x.dim(1));
}

Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1) {
  require_defined(x, "slice_cols");
  require_rank2(x, "slice_cols");
  return block(x, 0, x.dim(0), c0, c1);
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  std::size_t cols = 0, rows = 0;
  for (const Tensor& p : parts) {
    require_defined(p, "concat_rows");
    require_rank2(p, "concat_rows");
    if (cols == 0)
      cols = p.dim(1);
    else if (p.dim(1) != cols)
      throw DimensionError("concat_rows: column mismatch " + std::to_string(cols) + " vs " +
                           std::to_string(p.dim(1)));
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  Tape* tape = nullptr;
  for (const Tensor& p : parts) {
    if (!p.tracked()) continue;
    if (!tape)
      tape = p.tape();
    else if (tape != p.tape())
      throw UsageError("concat_rows: inputs tracked by different tapes");
  }
  Tensor result = make_output({rows, cols}, std::move(out), tape, "concat_rows");
  if (tape) {
    std::vector<Tensor> held(parts.begin(), parts.end());
    TensorAccess::push_node(tape, [held, result]() {
      auto g = result.grad();
      std::size_t offset = 0;
      for (const Tensor& p : held) {
        std::size_t n = p.size();
        if (p.tracked()) {
          auto dp = TensorAccess::grad_mut(p);
          for (std::size_t i = 0; i < n; ++i) dp[i] += g[offset + i];
        }
        offset += n;
      }
    });
  }
  return result;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  std::size_t rows = 0, cols = 0;
  for (const Tensor& p : parts) {
    require_defined(p, "concat_cols");
    require_rank2(p, "concat_cols");
    if (rows == 0)
      rows = p.dim(0);
    else if (p.dim(0) != rows)
      throw DimensionError("concat_cols: row mismatch " + std::to_string(rows) + " vs " +
                           std::to_string(p.dim(0)));
    cols += p.dim(1);
  }
  std::vector<double> out(rows * cols);
  std::size_t col_offset = 0;
  for (const Tensor& p : parts) {
    std::size_t pc = p.dim(1);
    auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pc; ++c) out[r * cols + col_offset + c] = pv[r * pc + c];
    col_offset += pc;
  }
  Tape* tape = nullptr;
  for (const Tensor& p : parts) {
    if (!p.tracked()) continue;
    if (!tape)
      tape = p.tape();
    else if (tape != p.tape())
      throw UsageError("concat_cols: inputs tracked by different tapes");
  }
  Tensor result = make_output({rows, cols}, std::move(out), tape, "concat_cols");
  if (tape) {
    std::vector<Tensor> held(parts.begin(), parts.end());
    TensorAccess::push_node(tape, [held, result, rows, cols]() {
      auto g = result.grad();
      std::size_t col_off = 0;
      for (const Tensor& p : held) {
        std::size_t pc = p.dim(1);
        if (p.tracked()) {
          auto dp = TensorAccess::grad_mut(p);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c) dp[r * pc + c] += g[r * cols + col_off + c];
        }
        col_off += pc;
      }
    });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tape* tape = merge_tapes({&x}, "sum");
  Tensor result = make_output({1}, {total}, tape, "sum");
  if (tape) {
    TensorAccess::push_node(tape, [x, result]() {
      double g = result.grad()[0];
      auto dx = TensorAccess::grad_mut(x);
      for (double& d : dx) d += g;
    });
  }
  return result;
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  double total = 0.0;
  for (double v : x.values()) total += v;
  double inv_n = 1.0 / static_cast<double>(x.size());
  Tape* tape = merge_tapes({&x}, "mean");
  Tensor result = make_output({1}, {total * inv_n}, tape, "mean");
  if (tape) {
    TensorAccess::push_node(tape, [x, result, inv_n]() {
      double g = result.grad()[0] * inv_n;
      auto dx = TensorAccess::grad_mut(x);
      for (double& d : dx) d += g;
    });
  }
  return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw DimensionError("matmul: inner dimensions disagree, " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  std::vector<double> out(m * n);
  gemm(false, false, m, n, k, a.values().data(), b.values().data(), out.data(), false);
  Tape* tape = merge_tapes({&a, &b}, "matmul");
  Tensor result = make_output({m, n}, std::move(out), tape, "matmul");
  if (tape) {
    TensorAccess::push_node(tape, [a, b, result, m, n, k]() {
      const double* g = result.grad().data();
      if (a.tracked())  // dA += G·Bᵀ
        gemm(false, true, m, k, n, g, b.values().data(), TensorAccess::grad_mut(a).data(), true);
      if (b.tracked())  // dB += Aᵀ·G
        gemm(true, false, k, n, m, a.values().data(), g, TensorAccess::grad_mut(b).data(), true);
    });
  }
  return result;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul_nt");
  require_defined(b, "matmul_nt");
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k)
    throw DimensionError("matmul_nt: inner dimensions disagree, " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()) + " transposed");
  std::vector<double> out(m * n);
  gemm(false, true, m, n, k, a.values().data(), b.values().data(), out.data(), false);
  Tape* tape = merge_tapes({&a, &b}, "matmul_nt");
  Tensor result = make_output({m, n}, std::move(out), tape, "matmul_nt");
  if (tape) {
    TensorAccess::push_node(tape, [a, b, result, m, n, k]() {
      const double* g = result.grad().data();
      if (a.tracked())  // dA += G·B
        gemm(false, false, m, k, n, g, b.values().data(), TensorAccess::grad_mut(a).data(), true);
      if (b.tracked())  // dB += Gᵀ·A
        gemm(true, false, n, k, m, g, a.values().data(), TensorAccess::grad_mut(b).data(), true);
    });
  }
  return result;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_defined(x, "add_row_bias");
  require_defined(bias, "add_row_bias");
  require_rank2(x, "add_row_bias");
  if (bias.rank() != 1 || bias.dim(0) != x.dim(1))
    throw DimensionError("add_row_bias: bias " + shape_to_string(bias.shape()) +
                         " does not match columns of " + shape_to_string(x.shape()));
  std::size_t rows = x.dim(0), cols = x.dim(1);
  auto xs = x.values();
  auto bs = bias.values();
  std::vector<double> out(xs.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xs[r * cols + c] + bs[c];
  Tape* tape = merge_tapes({&x, &bias}, "add_row_bias");
  Tensor result = make_output(x.shape(), std::move(out), tape, "add_row_bias");
  if (tape) {
    TensorAccess::push_node(tape, [x, bias, result, rows, cols]() {
      auto g = result.grad();
      if (x.tracked()) {
        auto dx = TensorAccess::grad_mut(x);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
      }
      if (bias.tracked()) {
        auto db = TensorAccess::grad_mut(bias);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) db[c] += g[r * cols + c];
      }
    });
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  require_defined(x, "layer_norm");
  require_defined(gain, "layer_norm");
  require_defined(shift, "layer_norm");
  std::size_t d = x.shape().back();
  if (gain.rank() != 1 || gain.dim(0) != d || shift.rank() != 1 || shift.dim(0) != d)
    throw DimensionError("layer_norm: gain/shift must be [" + std::to_string(d) + "], got " +
                         shape_to_string(gain.shape()) + " and " + shape_to_string(shift.shape()));
  std::size_t rows = x.size() / d;
  auto xs = x.values();
  auto gs = gain.values();
  auto ss = shift.values();
  std::vector<double> out(xs.size());
  // Captured for backward: normalized activations and 1/sigma per row.
  auto xhat = std::make_shared<std::vector<double>>(xs.size());
  auto inv_sigma = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xs.data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += row[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double c = row[i] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[r] = inv;
    for (std::size_t i = 0; i < d; ++i) {
      double xh = (row[i] - mu) * inv;
      (*xhat)[r * d + i] = xh;
      out[r * d + i] = xh * gs[i] + ss[i];
    }
  }
  Tape* tape = merge_tapes({&x, &gain, &shift}, "layer_norm");
  Tensor result = make_output(x.shape(), std::move(out), tape, "layer_norm");
  if (tape) {
    TensorAccess::push_node(tape, [x, gain, shift, result, xhat, inv_sigma, rows, d]() {
      auto g = result.grad();
      auto gv = gain.values();
      double inv_d = 1.0 / static_cast<double>(d);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* grow = g.data() + r * d;
        const double* xh = xhat->data() + r * d;
        if (x.tracked()) {
          auto dx = TensorAccess::grad_mut(x);
          double mean_dyg = 0.0, mean_dyg_xh = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            double dyg = grow[i] * gv[i];
            mean_dyg += dyg;
            mean_dyg_xh += dyg * xh[i];
          }
          mean_dyg *= inv_d;
          mean_dyg_xh *= inv_d;
          double inv = (*inv_sigma)[r];
          for (std::size_t i = 0; i < d; ++i) {
            double dyg = grow[i] * gv[i];
            dx[r * d + i] += inv * (dyg - mean_dyg - xh[i] * mean_dyg_xh);
          }
        }
        if (gain.tracked()) {
          auto dg = TensorAccess::grad_mut(gain);
          for (std::size_t i = 0; i < d; ++i) dg[i] += grow[i] * xh[i];
        }
        if (shift.tracked()) {
          auto dsh = TensorAccess::grad_mut(shift);
          for (std::size_t i = 0; i < d; ++i) dsh[i] += grow[i];
        }
      }
    });
  }
  return result;
}

Tensor softmax(const Tensor& x) {
  require_defined(x, "softmax");
  std::size_t d = x.shape().back();
  std::size_t rows = x.size() / d;
  auto xs = x.values();
  std::vector<double> out(xs.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xs.data() + r * d;
    double m = row[0];
    for (std::size_t i = 1; i < d; ++i) m = std::max(m, row[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double e = std::exp(row[i] - m);
      out[r * d + i] = e;
      z += e;
    }
    double inv_z = 1.0 / z;
    for (std::size_t i = 0; i < d; ++i) out[r * d + i] *= inv_z;
  }
  Tape* tape = merge_tapes({&x}, "softmax");
  Tensor result = make_output(x.shape(), std::move(out), tape, "softmax");
  if (tape) {
    TensorAccess::push_node(tape, [x, result, rows, d]() {
      auto g = result.grad();
      auto y = result.values();
      auto dx = TensorAccess::grad_mut(x);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* grow = g.data() + r * d;
        const double* yrow = y.data() + r * d;
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += grow[i] * yrow[i];
        for (std::size_t i = 0; i < d; ++i) dx[r * d + i] += yrow[i] * (grow[i] - dot);
      }
    });
  }
  return result;
}

Tensor maxpool2(const Tensor& x) {
  require_defined(x, "maxpool2");
  if (x.rank() != 3)
    throw DimensionError("maxpool2: expected [C×H×W], got " + shape_to_string(x.shape()));
  std::size_t channels = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0)
    throw DimensionError("maxpool2: extents must be even, got " + shape_to_string(x.shape()));
  std::size_t oh = h / 2, ow = w / 2;
  auto xs = x.values();
  std::vector<double> out(channels * oh * ow);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.size());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t q = 0; q < ow; ++q) {
        std::size_t base = c * h * w + (2 * r) * w + 2 * q;
        // First occurrence wins ties, scan order fixed: deterministic.
        std::size_t best = base;
        double best_v = xs[base];
        for (std::size_t dr = 0; dr < 2; ++dr)
          for (std::size_t dq = 0; dq < 2; ++dq) {
            std::size_t idx = base + dr * w + dq;
            if (xs[idx] > best_v) {
              best_v = xs[idx];
              best = idx;
            }
          }
        std::size_t o = c * oh * ow + r * ow + q;
        out[o] = best_v;
        (*argmax)[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  Tape* tape = merge_tapes({&x}, "maxpool2");
  Tensor result = make_output({channels, oh, ow}, std::move(out), tape, "maxpool2");
  if (tape) {
    TensorAccess::push_node(tape, [x, result, argmax]() {
      auto g = result.grad();
      auto dx = TensorAccess::grad_mut(x);
      for (std::size_t i = 0; i < g.size(); ++i) dx[(*argmax)[i]] += g[i];
    });
  }
  return result;
}

namespace {

// Unrolls 3x3 zero-padded patches of x[C×H×W] into [C·9 × H·W].
std::vector<double> im2col3x3(std::span<const double> xs, std::size_t channels, std::size_t h,
                              std::size_t w) {
  std::vector<double> col(channels * 9 * h * w, 0.0);
  std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = xs.data() + c * hw;
    for (std::size_t kr = 0; kr < 3; ++kr) {
      for (std::size_t kc = 0; kc < 3; ++kc) {
        double* dst = col.data() + (c * 9 + kr * 3 + kc) * hw;
        long dr = static_cast<long>(kr) - 1, dc = static_cast<long>(kc) - 1;
        for (std::size_t r = 0; r < h; ++r) {
          long sr = static_cast<long>(r) + dr;
          if (sr < 0 || sr >= static_cast<long>(h)) continue;
          const double* src_row = plane + static_cast<std::size_t>(sr) * w;
          double* dst_row = dst + r * w;
          std::size_t q0 = dc < 0 ? 1 : 0;
          std::size_t q1 = dc > 0 ? w - 1 : w;
          for (std::size_t q = q0; q < q1; ++q) dst_row[q] = src_row[static_cast<std::size_t>(static_cast<long>(q) + dc)];
        }
      }
    }
  }
  return col;
}

// Scatter-adds a [C·9 × H·W] gradient back onto the padded input layout.
void col2im3x3(std::span<const double> col, std::size_t channels, std::size_t h, std::size_t w,
               double* dx) {
  std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = dx + c * hw;
    for (std::size_t kr = 0; kr < 3; ++kr) {
      for (std::size_t kc = 0; kc < 3; ++kc) {
        const double* src = col.data() + (c * 9 + kr * 3 + kc) * hw;
        long dr = static_cast<long>(kr) - 1, dc = static_cast<long>(kc) - 1;
        for (std::size_t r = 0; r < h; ++r) {
          long sr = static_cast<long>(r) + dr;
          if (sr < 0 || sr >= static_cast<long>(h)) continue;
          double* dst_row = plane + static_cast<std::size_t>(sr) * w;
          const double* src_row = src + r * w;
          std::size_t q0 = dc < 0 ? 1 : 0;
          std::size_t q1 = dc > 0 ? w - 1 : w;
          for (std::size_t q = q0; q < q1; ++q)
            dst_row[static_cast<std::size_t>(static_cast<long>(q) + dc)] += src_row[q];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_defined(x, "conv2d");
  require_defined(w, "conv2d");
  require_defined(bias, "conv2d");
  if (x.rank() != 3)
    throw DimensionError("conv2d: expected input [C×H×W], got " + shape_to_string(x.shape()));
  if (w.rank() != 4 || w.dim(2) != 3 || w.dim(3) != 3)
    throw DimensionError("conv2d: expected kernel [C_out×C_in×3×3], got " + shape_to_string(w.shape()));
  std::size_t c_in = x.dim(0), h = x.dim(1), ww = x.dim(2);
  std::size_t c_out = w.dim(0);
  if (w.dim(1) != c_in)
    throw DimensionError("conv2d: channel mismatch, input " + shape_to_string(x.shape()) +
                         " vs kernel " + shape_to_string(w.shape()));
  if (bias.rank() != 1 || bias.dim(0) != c_out)
    throw DimensionError("conv2d: bias must be [" + std::to_string(c_out) + "], got " +
                         shape_to_string(bias.shape()));
  std::size_t hw = h * ww;
  auto col = std::make_shared<std::vector<double>>(im2col3x3(x.values(), c_in, h, ww));
  std::vector<double> out(c_out * hw);
  // out[c_out×HW] = W[c_out×(c_in·9)] · col[(c_in·9)×HW]
  gemm(false, false, c_out, hw, c_in * 9, w.values().data(), col->data(), out.data(), false);
  auto bs = bias.values();
  for (std::size_t c = 0; c < c_out; ++c) {
    double b = bs[c];
    double* row = out.data() + c * hw;
    for (std::size_t i = 0; i < hw; ++i) row[i] += b;
  }
  Tape* tape = merge_tapes({&x, &w, &bias}, "conv2d");
  Tensor result = make_output({c_out, h, ww}, std::move(out), tape, "conv2d");
  if (tape) {
    TensorAccess::push_node(tape, [x, w, bias, result, col, c_in, c_out, h, ww, hw]() {
      const double* g = result.grad().data();
      if (w.tracked())  // dW += G·colᵀ
        gemm(false, true, c_out, c_in * 9, hw, g, col->data(), TensorAccess::grad_mut(w).data(), true);
      if (bias.tracked()) {
        auto db = TensorAccess::grad_mut(bias);
        for (std::size_t c = 0; c < c_out; ++c) {
          double s = 0.0;
          const double* row = g + c * hw;
          for (std::size_t i = 0; i < hw; ++i) s += row[i];
          db[c] += s;
        }
      }
      if (x.tracked()) {  // dcol = Wᵀ·G, then fold patches back
        std::vector<double> dcol(c_in * 9 * hw);
        gemm(true, false, c_in * 9, hw, c_out, w.values().data(), g, dcol.data(), false);
        col2im3x3(dcol, c_in, h, ww, TensorAccess::grad_mut(x).data());
      }
    });
  }
  return result;
}

namespace {

void validate_attention(const Tensor& x, const AttentionParams& p, std::size_t heads,
                        const char* op) {
  require_defined(x, op);
  require_rank2(x, op);
  std::size_t d = x.dim(1);
  if (heads == 0) throw ConfigError(std::string(op) + ": heads must be positive");
  if (d % heads != 0)
    throw ConfigError(std::string(op) + ": token dim " + std::to_string(d) +
                      " not divisible by heads " + std::to_string(heads));
  auto check_mat = [&](const Tensor& m, const char* name) {
    require_defined(m, op);
    if (m.rank() != 2 || m.dim(0) != d || m.dim(1) != d)
      throw DimensionError(std::string(op) + ": " + name + " must be [" + std::to_string(d) +
                           "x" + std::to_string(d) + "], got " + shape_to_string(m.shape()));
  };
  auto check_vec = [&](const Tensor& v, const char* name) {
    require_defined(v, op);
    if (v.rank() != 1 || v.dim(0) != d)
      throw DimensionError(std::string(op) + ": " + name + " must be [" + std::to_string(d) +
                           "], got " + shape_to_string(v.shape()));
  };
  check_mat(p.wq, "wq");
  check_mat(p.wk, "wk");
  check_mat(p.wv, "wv");
  check_mat(p.wo, "wo");
  check_vec(p.bo, "bo");
}

}  // namespace

Tensor mha_stacked(const Tensor& x, const AttentionParams& p, std::size_t heads,
                   std::size_t batch, MhaDiag* diag) {
  validate_attention(x, p, heads, "multi_head_attention");
  std::size_t rows = x.dim(0), d = x.dim(1);
  if (batch == 0 || rows % batch != 0)
    throw DimensionError("multi_head_attention: row count " + std::to_string(rows) +
                         " not divisible into " + std::to_string(batch) + " examples");
  std::size_t t = rows / batch;
  std::size_t dh = d / heads;
  double s = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = matmul(x, p.wq);
  Tensor k = matmul(x, p.wk);
  Tensor v = matmul(x, p.wv);

  std::vector<Tensor> example_outputs;
  example_outputs.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(heads);
    for (std::size_t hidx = 0; hidx < heads; ++hidx) {
      Tensor qh = block(q, b * t, (b + 1) * t, hidx * dh, (hidx + 1) * dh);
      Tensor kh = block(k, b * t, (b + 1) * t, hidx * dh, (hidx + 1) * dh);
      Tensor vh = block(v, b * t, (b + 1) * t, hidx * dh, (hidx + 1) * dh);
      Tensor attn = softmax(scale(matmul_nt(qh, kh), s));
      if (diag) diag->attention.emplace_back(attn.values().begin(), attn.values().end());
      head_outputs.push_back(matmul(attn, vh));
    }
    example_outputs.push_back(heads == 1 ? head_outputs.front() : concat_cols(head_outputs));
  }
  Tensor mixed = batch == 1 ? example_outputs.front() : concat_rows(example_outputs);
  return add_row_bias(matmul(mixed, p.wo), p.bo);
}

Tensor multi_head_attention(const Tensor& x, const AttentionParams& p, std::size_t heads,
                            MhaDiag* diag) {
  return mha_stacked(x, p, heads, 1, diag);
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels,
                     std::span<const double> class_weights) {
  require_defined(logits, "cross_entropy");
  require_rank2(logits, "cross_entropy");
  std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
  if (!class_weights.empty() && class_weights.size() != classes)
    throw DimensionError("cross_entropy: expected " + std::to_string(classes) +
                         " class weights, got " + std::to_string(class_weights.size()));
  for (int label : labels)
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw ValidationError("cross_entropy: label " + std::to_string(label) + " outside [0," +
                            std::to_string(classes) + ")");

  auto ls = logits.values();
  auto probs = std::make_shared<std::vector<double>>(ls.size());
  auto example_weights = std::make_shared<std::vector<double>>(batch);
  double loss = 0.0, weight_total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = ls.data() + i * classes;
    double m = row[0];
    for (std::size_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      double e = std::exp(row[c] - m);
      (*probs)[i * classes + c] = e;
      z += e;
    }
    double inv_z = 1.0 / z;
    for (std::size_t c = 0; c < classes; ++c) (*probs)[i * classes + c] *= inv_z;
    double log_z = m + std::log(z);
    double nll = log_z - row[static_cast<std::size_t>(labels[i])];
    double wi = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(labels[i])];
    (*example_weights)[i] = wi;
    loss += wi * nll;
    weight_total += wi;
  }
  if (weight_total <= 0.0) throw ValidationError("cross_entropy: total example weight is zero");
  loss /= weight_total;

  Tape* tape = merge_tapes({&logits}, "cross_entropy");
  Tensor result = make_output({1}, {loss}, tape, "cross_entropy");
  if (tape) {
    std::vector<int> labels_copy(labels.begin(), labels.end());
    TensorAccess::push_node(tape, [logits, result, probs, example_weights, labels_copy, batch,
                                   classes, weight_total]() {
      double g = result.grad()[0];
      auto dl = TensorAccess::grad_mut(logits);
      for (std::size_t i = 0; i < batch; ++i) {
        double wi = (*example_weights)[i] / weight_total;
        for (std::size_t c = 0; c < classes; ++c) {
          double p = (*probs)[i * classes + c];
          double indicator = (static_cast<std::size_t>(labels_copy[i]) == c) ? 1.0 : 0.0;
          dl[i * classes + c] += g * wi * (p - indicator);
        }
      }
    });
  }
  return result;
}

}  // namespace spoofdet

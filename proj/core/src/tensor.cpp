#include "spoofdet/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "spoofdet/error.hpp"

namespace spoofdet {

namespace {
std::atomic<bool> g_finite_checks{false};
}

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

static void validate_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
}

Tensor Tensor::zeros(Shape shape) {
  validate_shape(shape);
  std::size_t n = shape_numel(shape);
  Tensor t;
  t.d_ = std::make_shared<Data>();
  t.d_->shape = std::move(shape);
  t.d_->values.assign(n, 0.0);
  return t;
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t = zeros(std::move(shape));
  for (double& v : t.d_->values) v = value;
  return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
  validate_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not fill shape " + shape_to_string(shape));
  }
  Tensor t;
  t.d_ = std::make_shared<Data>();
  t.d_->shape = std::move(shape);
  t.d_->values = std::move(values);
  return t;
}

Tensor::Data* Tensor::req() const {
  if (!d_) throw UsageError("operation on an empty (default-constructed) tensor");
  return d_.get();
}

const Shape& Tensor::shape() const { return req()->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::size() const { return req()->values.size(); }

std::span<const double> Tensor::values() const {
  const auto* d = req();
  return {d->values.data(), d->values.size()};
}

std::span<double> Tensor::values_mut() {
  req();
  return {d_->values.data(), d_->values.size()};
}

bool Tensor::tracked() const { return d_ && d_->tape != nullptr; }
bool Tensor::requires_grad() const { return d_ && d_->requires_grad; }
Tape* Tensor::tape() const { return d_ ? d_->tape : nullptr; }

std::span<const double> Tensor::grad() const {
  const auto* d = req();
  if (!d->tape) throw UsageError("gradient requested from an untracked tensor");
  return {d->grad.data(), d->grad.size()};
}

void Tensor::zero_grad() {
  req();
  for (double& g : d_->grad) g = 0.0;
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size())
    throw DimensionError("index rank " + std::to_string(index.size()) + " vs shape " + shape_to_string(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis])
      throw DimensionError("index out of range on axis " + std::to_string(axis) + " for " + shape_to_string(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return d_->values[flat];
}

double Tensor::scalar() const {
  if (size() != 1) throw UsageError("scalar() on tensor of shape " + shape_to_string(shape()));
  return d_->values[0];
}

Tensor Tensor::detached_copy() const {
  req();
  Tensor t;
  t.d_ = std::make_shared<Data>();
  t.d_->shape = d_->shape;
  t.d_->values = d_->values;
  return t;
}

Tensor Tape::leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  Tensor t = Tensor::from_values(std::move(shape), std::move(values));
  t.d_->tape = this;
  t.d_->requires_grad = requires_grad;
  t.d_->grad.assign(t.d_->values.size(), 0.0);
  return t;
}

Tensor Tape::leaf_zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.tape() != this)
    throw UsageError("backward: loss is not tracked by this tape");
  if (loss.size() != 1)
    throw UsageError("backward: loss must be scalar, got " + shape_to_string(loss.shape()));
  loss.d_->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  if (finite_checks_enabled()) {
    for (double g : loss.d_->grad)
      if (!std::isfinite(g)) throw ValidationError("backward produced non-finite gradient");
  }
}

void Tape::clear() { nodes_.clear(); }

Tensor TensorAccess::make(Shape shape, std::vector<double> values, Tape* tape) {
  Tensor t = Tensor::from_values(std::move(shape), std::move(values));
  if (tape) {
    t.d_->tape = tape;
    t.d_->requires_grad = true;
    t.d_->grad.assign(t.d_->values.size(), 0.0);
  }
  return t;
}

std::span<double> TensorAccess::grad_mut(const Tensor& t) {
  return {t.d_->grad.data(), t.d_->grad.size()};
}

void TensorAccess::push_node(Tape* tape, std::function<void()> fn) {
  tape->nodes_.push_back(std::move(fn));
}

}  // namespace spoofdet

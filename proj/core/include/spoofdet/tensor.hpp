#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spoofdet {

class Tape;

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// When enabled, every op asserts its outputs (and backward its gradients)
// are finite. Off by default; cheap enough for tests and debugging runs.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// Dense row-major N-d array of 64-bit floats. A Tensor is a cheap handle
// over shared storage; copies alias. When attached to a Tape it carries a
// same-shape gradient buffer that backward() accumulates into.
class Tensor {
 public:
  Tensor() = default;

  // Untracked factories; attach to a tape via Tape::leaf instead when the
  // tensor should participate in differentiation.
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_values(Shape shape, std::vector<double> values);

  bool defined() const { return static_cast<bool>(d_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  // Mutable view; only sensible on leaves before ops consume them.
  std::span<double> values_mut();

  bool tracked() const;
  bool requires_grad() const;
  Tape* tape() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Value of a single element / of a 1-element tensor.
  double at(std::initializer_list<std::size_t> index) const;
  double scalar() const;

  // Deep copy of values only: untracked, no gradient.
  Tensor detached_copy() const;

 private:
  struct Data {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized like values iff tracked
    Tape* tape = nullptr;
    bool requires_grad = false;
  };

  Data* req() const;  // throws UsageError on an empty handle

  std::shared_ptr<Data> d_;

  friend class Tape;
  friend struct TensorAccess;
};

// Records one backward closure per op in append order; backward() replays
// them in exact reverse order, accumulating into tracked tensors' grads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // New tracked leaf carrying `values`. `requires_grad` marks parameters;
  // gradient buffers exist (and are filled) either way.
  Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad = true);
  Tensor leaf_zeros(Shape shape, bool requires_grad = true);

  // Seeds d(loss)/d(loss) = 1 and replays recorded closures newest-first.
  // `loss` must be a scalar tracked by this tape.
  void backward(const Tensor& loss);

  // Drops recorded closures (graph), keeping nothing alive.
  void clear();
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;

  friend struct TensorAccess;
};

// Internal accessor for op implementations.
struct TensorAccess {
  static Tensor make(Shape shape, std::vector<double> values, Tape* tape);
  static std::span<double> grad_mut(const Tensor& t);
  static std::span<double> values_mut(const Tensor& t) {
    return {t.d_->values.data(), t.d_->values.size()};
  }
  static void push_node(Tape* tape, std::function<void()> fn);
};

}  // namespace spoofdet

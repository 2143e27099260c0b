#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spoofdet/error.hpp"
#include "spoofdet/ops.hpp"
#include "spoofdet/tensor.hpp"

using namespace spoofdet;

TEST_CASE("factories produce the requested shape and contents") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.shape() == Shape{2, 3});
  CHECK(z.size() == 6);
  CHECK(z.rank() == 2);
  CHECK(z.dim(1) == 3);
  for (double v : z.values()) CHECK(v == 0.0);

  Tensor f = Tensor::full({4}, 1.5);
  for (double v : f.values()) CHECK(v == 1.5);

  Tensor t = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  CHECK(t.at({0, 1}) == 2.0);
  CHECK(t.at({1, 0}) == 3.0);
}

TEST_CASE("from_values rejects a size mismatch") {
  CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1, 2, 3}), DimensionError);
}

TEST_CASE("an empty handle is a usage error") {
  Tensor t;
  CHECK(!t.defined());
  CHECK_THROWS_AS(t.shape(), UsageError);
  CHECK_THROWS_AS((void)t.values(), UsageError);
  Tensor other = Tensor::zeros({1});
  CHECK_THROWS_AS(add(t, other), UsageError);
}

TEST_CASE("scalar() wants exactly one element") {
  CHECK(Tensor::full({1}, 3.0).scalar() == 3.0);
  CHECK_THROWS_AS(Tensor::zeros({2}).scalar(), UsageError);
}

TEST_CASE("copies alias, detached_copy does not") {
  Tensor a = Tensor::from_values({2}, {1, 2});
  Tensor alias = a;
  alias.values_mut()[0] = 9.0;
  CHECK(a.values()[0] == 9.0);

  Tensor deep = a.detached_copy();
  deep.values_mut()[0] = -1.0;
  CHECK(a.values()[0] == 9.0);
  CHECK(!deep.tracked());
}

TEST_CASE("untracked tensors carry no tape state") {
  Tensor a = Tensor::zeros({2});
  CHECK(!a.tracked());
  CHECK(!a.requires_grad());
  CHECK(a.tape() == nullptr);
}

TEST_CASE("leaves are tracked and backward fills their gradients") {
  Tape tape;
  Tensor x = tape.leaf({3}, {1.0, -2.0, 0.5});
  CHECK(x.tracked());
  CHECK(x.requires_grad());
  CHECK(x.tape() == &tape);

  Tensor loss = sum(mul(x, x));  // d/dx = 2x
  tape.backward(loss);
  auto g = x.grad();
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(-4.0));
  CHECK(g[2] == doctest::Approx(1.0));
}

TEST_CASE("gradients accumulate across reuses of a tensor") {
  Tape tape;
  Tensor x = tape.leaf({2}, {3.0, 4.0});
  Tensor loss = sum(add(x, x));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(2.0));
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward requires a scalar tracked by the same tape") {
  Tape tape;
  Tensor x = tape.leaf({2}, {1.0, 2.0});
  Tensor non_scalar = add(x, x);
  CHECK_THROWS_AS(tape.backward(non_scalar), UsageError);

  Tensor untracked = Tensor::full({1}, 1.0);
  CHECK_THROWS_AS(tape.backward(untracked), UsageError);
}

TEST_CASE("mixing tensors from two tapes is rejected") {
  Tape t1, t2;
  Tensor a = t1.leaf({2}, {1.0, 2.0});
  Tensor b = t2.leaf({2}, {3.0, 4.0});
  CHECK_THROWS_AS(add(a, b), UsageError);
}

TEST_CASE("clear drops the recorded graph") {
  Tape tape;
  Tensor x = tape.leaf({2}, {1.0, 2.0});
  (void)sum(x);
  CHECK(tape.node_count() > 0);
  tape.clear();
  CHECK(tape.node_count() == 0);
}

TEST_CASE("shape helpers") {
  CHECK(shape_numel({2, 3, 4}) == 24);
  CHECK(shape_numel({}) == 1);
  CHECK(shape_to_string({2, 3}) == "[2x3]");
}

TEST_CASE("finite checks flag poisoned values when enabled") {
  set_finite_checks(true);
  Tensor bad = Tensor::from_values({2}, {1.0, std::nan("")});
  Tensor ok = Tensor::full({2}, 1.0);
  CHECK_THROWS_AS(add(bad, ok), ValidationError);
  set_finite_checks(false);
  CHECK(!all_finite(bad));
  CHECK(all_finite(ok));
}

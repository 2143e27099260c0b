#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spoofdet/error.hpp"
#include "spoofdet/gradcheck.hpp"
#include "spoofdet/gradcheck_suite.hpp"
#include "spoofdet/ops.hpp"
#include "spoofdet/rng.hpp"
#include "spoofdet/tensor.hpp"

using namespace spoofdet;

TEST_CASE("elementwise forward values") {
  Tensor a = Tensor::from_values({3}, {-1.0, 0.0, 2.0});
  Tensor b = Tensor::from_values({3}, {4.0, -5.0, 0.5});

  CHECK(add(a, b).values()[0] == 3.0);
  CHECK(sub(a, b).values()[1] == 5.0);
  CHECK(mul(a, b).values()[2] == 1.0);
  CHECK(scale(a, -2.0).values()[0] == 2.0);
  CHECK(add_scalar(a, 1.0).values()[1] == 1.0);

  Tensor rt = relu(a);  // keep the handle alive while the span is read
  auto r = rt.values();
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 2.0);

  // gelu: odd-ish saturating curve; exact anchors of the tanh form.
  CHECK(gelu(Tensor::zeros({1})).scalar() == 0.0);
  CHECK(gelu(Tensor::full({1}, 3.0)).scalar() == doctest::Approx(3.0).epsilon(0.01));
  CHECK(gelu(Tensor::full({1}, -3.0)).scalar() == doctest::Approx(0.0).epsilon(0.01));
}

TEST_CASE("elementwise shape mismatch is a dimension error") {
  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  CHECK_THROWS_AS(mul(Tensor::zeros({2, 2}), Tensor::zeros({4})), DimensionError);
}

TEST_CASE("matmul matches a hand computation and rejects bad shapes") {
  Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from_values({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(c.at({0, 0}) == 58.0);
  CHECK(c.at({0, 1}) == 64.0);
  CHECK(c.at({1, 0}) == 139.0);
  CHECK(c.at({1, 1}) == 154.0);

  Tensor bt = transpose(b);
  Tensor c2 = matmul_nt(a, bt);
  for (std::size_t i = 0; i < 4; ++i) CHECK(c2.values()[i] == c.values()[i]);

  CHECK_THROWS_AS(matmul(a, Tensor::zeros({2, 2})), DimensionError);
}

TEST_CASE("structure ops move values where they belong") {
  Tensor x = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(reshape(x, {3, 2}).at({2, 1}) == 6.0);
  CHECK_THROWS_AS(reshape(x, {4, 2}), DimensionError);

  Tensor t = transpose(x);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.at({0, 1}) == 4.0);

  CHECK(block(x, 0, 2, 1, 3).at({1, 0}) == 5.0);
  CHECK(slice_rows(x, 1, 2).at({0, 0}) == 4.0);
  CHECK(slice_cols(x, 2, 3).at({1, 0}) == 6.0);

  std::vector<Tensor> rows = {x, slice_rows(x, 0, 1)};
  CHECK(concat_rows(rows).shape() == Shape{3, 3});
  std::vector<Tensor> cols = {x, x};
  CHECK(concat_cols(cols).shape() == Shape{2, 6});

  CHECK(sum(x).scalar() == 21.0);
  CHECK(mean(x).scalar() == 3.5);
}

TEST_CASE("add_row_bias broadcasts over rows") {
  Tensor x = Tensor::zeros({2, 3});
  Tensor b = Tensor::from_values({3}, {1, 2, 3});
  Tensor y = add_row_bias(x, b);
  CHECK(y.at({0, 2}) == 3.0);
  CHECK(y.at({1, 0}) == 1.0);
}

TEST_CASE("layer_norm standardizes each row") {
  Tensor gain = Tensor::full({2}, 1.0);
  Tensor shift = Tensor::zeros({2});

  // A constant row has zero variance; eps keeps it finite and it maps to 0.
  Tensor c = layer_norm(Tensor::full({1, 2}, 5.0), gain, shift);
  CHECK(c.at({0, 0}) == doctest::Approx(0.0));

  Tensor x = Tensor::from_values({1, 2}, {1.0, -1.0});
  Tensor y = layer_norm(x, gain, shift);
  CHECK(y.at({0, 0}) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(y.at({0, 1}) == doctest::Approx(-1.0).epsilon(1e-4));

  // Affine part: gain 2, shift -1 rescales the standardized row.
  Tensor y2 = layer_norm(x, Tensor::full({2}, 2.0), Tensor::full({2}, -1.0));
  CHECK(y2.at({0, 0}) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(y2.at({0, 1}) == doctest::Approx(-3.0).epsilon(1e-4));
}

TEST_CASE("softmax rows are simplex points") {
  Tensor x = Tensor::from_values({2, 3}, {0, 0, 0, 1000, 0, -1000});
  Tensor s = softmax(x);
  for (int c = 0; c < 3; ++c) CHECK(s.at({0, (std::size_t)c}) == doctest::Approx(1.0 / 3));
  CHECK(s.at({1, 0}) == doctest::Approx(1.0));  // no overflow at 1000
  CHECK(s.at({1, 2}) == doctest::Approx(0.0));
  double row = s.at({1, 0}) + s.at({1, 1}) + s.at({1, 2});
  CHECK(row == doctest::Approx(1.0));
}

TEST_CASE("maxpool2 takes window maxima; ties go to the first in scan order") {
  Tensor x = Tensor::from_values({1, 2, 4}, {1, 2, 5, 6,
                                             3, 4, 7, 8});
  Tensor y = maxpool2(x);
  CHECK(y.shape() == Shape{1, 1, 2});
  CHECK(y.at({0, 0, 0}) == 4.0);
  CHECK(y.at({0, 0, 1}) == 8.0);
  CHECK_THROWS_AS(maxpool2(Tensor::zeros({1, 3, 4})), DimensionError);

  // All-equal window: gradient must land on the first element only.
  Tape tape;
  Tensor t = tape.leaf({1, 2, 2}, {7.0, 7.0, 7.0, 7.0});
  tape.backward(sum(maxpool2(t)));
  CHECK(t.grad()[0] == 1.0);
  CHECK(t.grad()[1] == 0.0);
  CHECK(t.grad()[2] == 0.0);
  CHECK(t.grad()[3] == 0.0);
}

TEST_CASE("conv2d: identity kernel reproduces the input away from borders") {
  Rng rng(4);
  std::vector<double> img(25);
  for (double& v : img) v = rng.next_uniform(-1, 1);
  Tensor x = Tensor::from_values({1, 5, 5}, img);
  std::vector<double> kernel(9, 0.0);
  kernel[4] = 1.0;  // center tap
  Tensor w = Tensor::from_values({1, 1, 3, 3}, kernel);
  Tensor y = conv2d(x, w, Tensor::zeros({1}));
  CHECK(y.shape() == Shape{1, 5, 5});
  for (std::size_t i = 0; i < 25; ++i) CHECK(y.values()[i] == doctest::Approx(img[i]));

  // All-ones kernel at a corner sees only the 2x2 in-bounds patch.
  Tensor w1 = Tensor::from_values({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor ones = Tensor::full({1, 2, 2}, 1.0);
  Tensor corner = conv2d(ones, w1, Tensor::zeros({1}));
  CHECK(corner.at({0, 0, 0}) == 4.0);
}

TEST_CASE("attention rows are convex weights") {
  Rng rng(9);
  std::size_t t = 4, d = 8;
  auto mat = [&](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (double& x : v) x = rng.next_uniform(-0.5, 0.5);
    return Tensor::from_values({r, c}, v);
  };
  AttentionParams p{mat(d, d), mat(d, d), mat(d, d), mat(d, d), Tensor::zeros({d})};

  MhaDiag diag;
  Tensor x = mat(t, d);
  Tensor y = multi_head_attention(x, p, 2, &diag);
  CHECK(y.shape() == Shape{t, d});
  REQUIRE(diag.attention.size() == 2);  // one grid per head
  for (const auto& grid : diag.attention) {
    REQUIRE(grid.size() == t * t);
    for (std::size_t r = 0; r < t; ++r) {
      double row = 0.0;
      for (std::size_t c = 0; c < t; ++c) {
        CHECK(grid[r * t + c] >= 0.0);
        row += grid[r * t + c];
      }
      CHECK(row == doctest::Approx(1.0));
    }
  }

  // One token can only attend to itself.
  MhaDiag solo;
  (void)multi_head_attention(mat(1, d), p, 2, &solo);
  for (const auto& grid : solo.attention) {
    REQUIRE(grid.size() == 1);
    CHECK(grid[0] == doctest::Approx(1.0));
  }

  // Identical tokens score identically, so weights are uniform 1/T.
  std::vector<double> rep;
  auto token = mat(1, d);
  for (std::size_t r = 0; r < t; ++r)
    rep.insert(rep.end(), token.values().begin(), token.values().end());
  MhaDiag uniform;
  (void)multi_head_attention(Tensor::from_values({t, d}, rep), p, 2, &uniform);
  for (const auto& grid : uniform.attention)
    for (double wgt : grid) CHECK(wgt == doctest::Approx(1.0 / (double)t));

  CHECK_THROWS_AS(multi_head_attention(x, p, 3, nullptr), ConfigError);
}

TEST_CASE("stacked attention equals per-example attention") {
  Rng rng(13);
  std::size_t t = 3, d = 8, batch = 2;
  auto mat = [&](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (double& x : v) x = rng.next_uniform(-0.5, 0.5);
    return Tensor::from_values({r, c}, v);
  };
  std::vector<double> bias(d);
  for (double& v : bias) v = rng.next_uniform(-0.5, 0.5);
  AttentionParams p{mat(d, d), mat(d, d), mat(d, d), mat(d, d),
                    Tensor::from_values({d}, bias)};

  Tensor x0 = mat(t, d);
  Tensor x1 = mat(t, d);
  std::vector<Tensor> both = {x0, x1};
  Tensor stacked_in = concat_rows(both);
  Tensor stacked_out = mha_stacked(stacked_in, p, 2, batch);

  Tensor y0 = multi_head_attention(x0, p, 2);
  Tensor y1 = multi_head_attention(x1, p, 2);
  for (std::size_t i = 0; i < t * d; ++i) {
    CHECK(std::abs(stacked_out.values()[i] - y0.values()[i]) < 1e-12);
    CHECK(std::abs(stacked_out.values()[t * d + i] - y1.values()[i]) < 1e-12);
  }
}

TEST_CASE("cross_entropy anchors") {
  // Equal logits on 2 classes: loss = ln 2 regardless of labels.
  Tensor logits = Tensor::zeros({2, 2});
  std::vector<int> labels = {0, 1};
  CHECK(cross_entropy(logits, labels).scalar() == doctest::Approx(std::log(2.0)));

  // Strongly correct logits push the loss toward 0.
  Tensor confident = Tensor::from_values({1, 2}, {-20.0, 20.0});
  std::vector<int> one = {1};
  CHECK(cross_entropy(confident, one).scalar() == doctest::Approx(0.0).epsilon(1e-6));

  std::vector<int> bad = {2};
  CHECK_THROWS_AS(cross_entropy(confident, bad), ValidationError);

  // Class weights rescale per-example terms; weighting by {1,1} is a no-op.
  std::vector<double> unit = {1.0, 1.0};
  CHECK(cross_entropy(logits, labels, unit).scalar() ==
        doctest::Approx(cross_entropy(logits, labels).scalar()));
}

TEST_CASE("finite differences agree with the tape on every primitive") {
  for (const auto& c : primitive_gradcheck_cases(2025)) {
    auto outcome = run_gradcheck_case(c, 1e-4);
    INFO(outcome.name, " rel err ", outcome.result.max_rel_error);
    CHECK(outcome.pass);
    CHECK(outcome.result.coords_checked > 0);
  }
}

TEST_CASE("matmul and conv gradients are tight") {
  for (const auto& c : primitive_gradcheck_cases(7)) {
    if (c.name != "matmul" && c.name != "conv2d") continue;
    auto outcome = run_gradcheck_case(c, 1e-6);
    INFO(outcome.name, " rel err ", outcome.result.max_rel_error);
    CHECK(outcome.pass);
  }
}

TEST_CASE("attention gradients hold to 1e-5") {
  for (const auto& c : primitive_gradcheck_cases(11)) {
    if (c.name != "multi_head_attention" && c.name != "mha_stacked") continue;
    auto outcome = run_gradcheck_case(c, 1e-5);
    INFO(outcome.name, " rel err ", outcome.result.max_rel_error);
    CHECK(outcome.pass);
  }
}

TEST_CASE("an injected backward fault is caught by the checker") {
  set_backward_fault_injection(true);
  bool any_failed = false;
  for (const auto& c : primitive_gradcheck_cases(2025)) {
    if (c.name != "relu" && c.name != "gelu") continue;
    any_failed |= !run_gradcheck_case(c, 1e-4).pass;
  }
  set_backward_fault_injection(false);
  CHECK(any_failed);

  // And with the fault disarmed the same cases pass again.
  for (const auto& c : primitive_gradcheck_cases(2025)) {
    if (c.name != "relu") continue;
    CHECK(run_gradcheck_case(c, 1e-4).pass);
  }
}

TEST_CASE("grad_check itself validates its inputs") {
  std::vector<GradCheckInput> inputs = {{Shape{2}, {1.0, 2.0}}};
  auto non_scalar = [](Tape&, std::span<Tensor> in) { return add(in[0], in[0]); };
  CHECK_THROWS_AS(grad_check(non_scalar, inputs), UsageError);
}

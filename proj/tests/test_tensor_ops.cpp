// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mcavd/ops.hpp"
#include "mcavd/rng.hpp"
#include "mcavd/tensor.hpp"

using namespace mcavd;

namespace {

Tensor<double> rand_leaf(Shape shape, SplitRng& rng, double scl = 1.0) {
  std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
  for (auto& v : data) v = scl * rng.normal();
  return Tensor<double>::from(std::move(shape), std::move(data), true);
}

} // namespace

TEST_CASE("matmul forward values") {
  // identity case
  auto eye = Tensor<float>::from({2, 2}, {1, 0, 0, 1});
  auto col = Tensor<float>::from({2, 1}, {3, 7});
  auto out = matmul(eye, col);
  CHECK(out.value() == std::vector<float>{3, 7});

  // hand multiplication
  auto a = Tensor<float>::from({2, 2}, {1, 2, 3, 4});
  auto ones = Tensor<float>::from({2, 1}, {1, 1});
  auto prod = matmul(a, ones);
  CHECK(prod.value()[0] == doctest::Approx(3));
  CHECK(prod.value()[1] == doctest::Approx(7));

  // contract violation names both shapes
  auto bad = Tensor<float>({4, 2}, 0.f);
  auto wide = Tensor<float>({2, 3}, 0.f);
  CHECK_THROWS_WITH_AS(matmul(wide, wide), doctest::Contains("(2, 3)"), ShapeError);
  CHECK_THROWS_AS(matmul(wide, bad), ShapeError);
}

TEST_CASE("softmax values, symmetry, stability") {
  auto z = Tensor<float>::from({3}, {0, 0, 0});
  auto s = softmax(z, 0);
  for (float v : s.value()) CHECK(v == doctest::Approx(1.0f / 3));

  auto x = Tensor<float>::from({2}, {2, -2});
  auto sx = softmax(x, 0);
  CHECK(sx.value()[0] == doctest::Approx(0.98201f).epsilon(1e-4));
  CHECK(sx.value()[1] == doctest::Approx(0.01799f).epsilon(1e-3));

  auto huge = Tensor<float>::from({2}, {1000, 0});
  auto sh = softmax(huge, 0);
  CHECK(std::isfinite(sh.value()[0]));
  CHECK(sh.value()[0] == doctest::Approx(1.0f));
  CHECK(sh.value()[1] == doctest::Approx(0.0f));
}

TEST_CASE("softmax rows sum to one under random input and masking") {
  SplitRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = rng.uniform_int(1, 5), n = rng.uniform_int(2, 7);
    std::vector<float> vals(static_cast<size_t>(m) * n);
    for (auto& v : vals) v = static_cast<float>(rng.normal(0, 3));
    auto x = Tensor<float>::from({m, n}, std::move(vals));
    Mask keep(static_cast<size_t>(n), 1);
    keep[static_cast<size_t>(rng.uniform_int(0, n - 1))] = trial % 2 ? 1 : 0;
    auto s = softmax(mask_cols(x, keep), 1);
    for (int i = 0; i < m; ++i) {
      float row_sum = 0;
      for (int j = 0; j < n; ++j) {
        float v = s.value()[static_cast<size_t>(i) * n + j];
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        row_sum += v;
      }
      CHECK(row_sum == doctest::Approx(1.0f).epsilon(1e-6));
    }
  }
}

TEST_CASE("layer_norm hand values and degenerate cases") {
  auto g1 = Tensor<float>::from({3}, {1, 1, 1});
  auto b0 = Tensor<float>::from({3}, {0, 0, 0});
  auto x = Tensor<float>::from({3}, {1, 2, 3});
  auto y = layer_norm(x, g1, b0, 0.0f);
  CHECK(y.value()[0] == doctest::Approx(-1.22474f).epsilon(1e-4));
  CHECK(y.value()[1] == doctest::Approx(0.0f));
  CHECK(y.value()[2] == doctest::Approx(1.22474f).epsilon(1e-4));

  auto c = Tensor<float>::from({3}, {5, 5, 5});
  auto yc = layer_norm(c, g1, b0, 1e-5f);
  for (float v : yc.value()) CHECK(v == doctest::Approx(0.0f));

  auto g0 = Tensor<float>::from({3}, {0, 0, 0});
  auto beta = Tensor<float>::from({3}, {2, 3, 4});
  auto yb = layer_norm(x, g0, beta, 1e-5f);
  CHECK(yb.value() == std::vector<float>{2, 3, 4});
}

TEST_CASE("layer_norm normalizes mean and variance pre-affine") {
  SplitRng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = rng.uniform_int(3, 16);
    std::vector<float> vals(static_cast<size_t>(n));
    for (auto& v : vals) v = static_cast<float>(rng.normal(2, 5));
    auto g1 = Tensor<float>({n}, 1.f);
    auto b0 = Tensor<float>({n}, 0.f);
    auto y = layer_norm(Tensor<float>::from({n}, std::move(vals)), g1, b0, 1e-5f);
    double mean = 0, var = 0;
    for (float v : y.value()) mean += v;
    mean /= n;
    for (float v : y.value()) var += (v - mean) * (v - mean);
    var /= n;
    CHECK(std::fabs(mean) < 1e-5);
    CHECK(std::fabs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("relu and dropout contracts") {
  auto x = Tensor<float>::from({3}, {-1, 0, 2});
  CHECK(relu(x).value() == std::vector<float>{0, 0, 2});

  SplitRng rng(3);
  auto t = Tensor<float>::from({4}, {1, 2, 3, 4});
  CHECK(dropout(t, 0.0, true, rng).value() == t.value());  // p=0 identity
  CHECK(dropout(t, 0.2, false, rng).value() == t.value()); // eval identity
  CHECK_THROWS_AS(dropout(t, 1.0, true, rng), ValueError);
}

TEST_CASE("dropout zeroes ~p and preserves expectation") {
  SplitRng rng(17);
  const int64_t n = 1'000'000;
  auto x = Tensor<float>(Shape{1000, 1000}, 1.f);
  auto y = dropout(x, 0.2, true, rng);
  int64_t zeros = 0;
  double total = 0;
  for (float v : y.value()) {
    if (v == 0.0f) ++zeros;
    total += v;
  }
  const double zero_frac = static_cast<double>(zeros) / static_cast<double>(n);
  CHECK(zero_frac == doctest::Approx(0.2).epsilon(0.05)); // 0.2 +- 0.01
  CHECK(std::fabs(zero_frac - 0.2) < 0.01);
  CHECK(total / static_cast<double>(n) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("backward: analytic example and accumulation semantics") {
  auto x = Tensor<float>::from({2}, {1, 2}, true);
  auto loss = sum(mul(x, x)); // sum of squares
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2));
  CHECK(x.grad()[1] == doctest::Approx(4));

  // repeated backward without reset accumulates
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(4));
  CHECK(x.grad()[1] == doctest::Approx(8));
  Tape<float>::active().clear();

  // loss independent of a leaf leaves its grad at zero
  auto unused = Tensor<float>::from({2}, {5, 5}, true);
  auto y = Tensor<float>::from({2}, {1, 1}, true);
  auto loss2 = sum(y);
  backward(loss2);
  CHECK(unused.grad() == std::vector<float>{0, 0});
  Tape<float>::active().clear();

  // non-scalar loss rejected
  auto vec = add(y, y);
  CHECK_THROWS_AS(backward(vec), ShapeError);
  Tape<float>::active().clear();
}

TEST_CASE("fan-out gradients accumulate additively") {
  auto x = Tensor<float>::from({1}, {3}, true);
  auto y = add(mul(x, x), x); // x^2 + x -> d/dx = 2x + 1 = 7
  backward(sum(y));
  CHECK(x.grad()[0] == doctest::Approx(7));
  Tape<float>::active().clear();
}

TEST_CASE("finite differences: every differentiable op, 64-bit") {
  SplitRng rng(29);
  const double tol = 1e-4;
  const double h = 1e-4;

  auto check = [&](const char* name, std::function<Tensor<double>()> f,
                   std::vector<Tensor<double>> leaves) {
    const double err = gradcheck::max_rel_error<double>(f, leaves, h);
    INFO(std::string(name), " max rel err ", err);
    CHECK(err < tol);
  };

  auto a = rand_leaf({3, 4}, rng);
  auto b = rand_leaf({4, 2}, rng);
  check("matmul", [&] { return sum(matmul(a, b)); }, {a, b});

  auto bt = rand_leaf({2, 4}, rng);
  check("matmul_nt", [&] { return sum(matmul_nt(a, bt)); }, {a, bt});

  auto c = rand_leaf({3, 4}, rng);
  check("transpose", [&] { return sum(mul(transpose(c), transpose(c))); }, {c});

  auto u = rand_leaf({2, 3}, rng);
  auto v = rand_leaf({2, 3}, rng);
  check("add", [&] { return sum(mul(add(u, v), add(u, v))); }, {u, v});
  check("sub", [&] { return sum(mul(sub(u, v), sub(u, v))); }, {u, v});
  check("mul", [&] { return sum(mul(u, v)); }, {u, v});

  auto row = rand_leaf({3}, rng);
  check("add_row", [&] { return sum(mul(add_row(u, row), add_row(u, row))); }, {u, row});
  check("scale", [&] { return sum(scale(u, 2.5)); }, {u});

  auto w = rand_leaf({2, 5}, rng);
  check("relu", [&] { return sum(mul(relu(w), w)); }, {w});
  check("sigmoid", [&] { return sum(mul(sigmoid(w), w)); }, {w});
  check("tanh", [&] { return sum(mul(tanh(w), w)); }, {w});
  check("softmax axis1", [&] { return sum(mul(softmax(w, 1), w)); }, {w});
  check("softmax axis0", [&] { return sum(mul(softmax(w, 0), w)); }, {w});

  auto gamma = rand_leaf({5}, rng, 0.5);
  auto beta = rand_leaf({5}, rng, 0.5);
  check("layer_norm", [&] { return sum(mul(layer_norm(w, gamma, beta, 1e-5), w)); },
        {w, gamma, beta});

  auto pos = Tensor<double>::from({2, 3}, {0.5, 1.5, 2.0, 0.25, 3.0, 1.0}, true);
  check("log_clamped", [&] { return sum(mul(log_clamped(pos, 1e-12), pos)); }, {pos});

  check("sum+reshape", [&] { return sum(mul(reshape(u, {3, 2}), reshape(v, {3, 2}))); }, {u, v});

  auto p1 = rand_leaf({2, 3}, rng);
  auto p2 = rand_leaf({1, 3}, rng);
  check("concat_rows/slice_rows",
        [&] {
          auto cat = concat_rows(std::vector<Tensor<double>>{p1, p2});
          return sum(mul(slice_rows(cat, 1, 2), slice_rows(cat, 0, 2)));
        },
        {p1, p2});

  auto q1 = rand_leaf({2, 2}, rng);
  auto q2 = rand_leaf({2, 3}, rng);
  check("concat_cols/slice_cols",
        [&] {
          auto cat = concat_cols(std::vector<Tensor<double>>{q1, q2});
          return sum(mul(slice_cols(cat, 1, 3), slice_cols(cat, 2, 3)));
        },
        {q1, q2});

  Mask keep{1, 0, 1, 1};
  auto logits = rand_leaf({2, 4}, rng);
  check("mask_cols+softmax", [&] { return sum(mul(softmax(mask_cols(logits, keep), 1), logits)); },
        {logits});

  // pad id 0 is grad-excluded by contract, so probe non-pad rows only
  auto table = rand_leaf({6, 3}, rng);
  std::vector<int> ids{2, 3, 5, 2};
  check("embedding_lookup",
        [&] {
          auto e = embedding_lookup(table, ids);
          return sum(mul(e, e));
        },
        {table});

  SplitRng fixed(99);
  // dropout: freeze the mask by reusing an identical rng for every eval
  check("dropout",
        [&] {
          SplitRng d = fixed;
          return sum(mul(dropout(u, 0.3, true, d), v));
        },
        {u, v});
}

TEST_CASE("embedding lookup conventions") {
  SplitRng rng(4);
  std::vector<double> rows(12);
  for (auto& r : rows) r = rng.normal();
  rows[0] = rows[1] = rows[2] = 0; // pad row
  auto table = Tensor<double>::from({4, 3}, std::move(rows), true);

  auto pad = embedding_lookup(table, {0});
  CHECK(pad.value() == std::vector<double>{0, 0, 0});

  auto row2 = embedding_lookup(table, {2});
  for (int j = 0; j < 3; ++j) CHECK(row2.value()[static_cast<size_t>(j)] == table.value()[6 + static_cast<size_t>(j)]);

  CHECK_THROWS_AS(embedding_lookup(table, {4}), ValueError);
  CHECK_THROWS_AS(embedding_lookup(table, {-1}), ValueError);

  // pad row receives no gradient
  Tape<double>::active().clear();
  auto e = embedding_lookup(table, {0, 2});
  backward(sum(e));
  CHECK(table.grad()[0] == 0.0);
  CHECK(table.grad()[6] == 1.0);
  Tape<double>::active().clear();
}

TEST_CASE("graph determinism: same seed gives bit-identical losses") {
  auto run = [](uint64_t seed) {
    SplitRng rng(seed);
    auto drop_rng = rng.split("dropout");
    std::vector<float> vals(24);
    for (auto& v : vals) v = static_cast<float>(rng.normal());
    auto x = Tensor<float>::from({4, 6}, std::move(vals), true);
    auto y = dropout(softmax(x, 1), 0.2, true, drop_rng);
    auto loss = sum(mul(y, y));
    float out = loss.item();
    Tape<float>::active().clear();
    return out;
  };
  CHECK(run(123) == run(123));
  CHECK(run(123) != run(124));
}

#include <doctest.h>

#include <cmath>

#include "bridgepress/gradcheck.hpp"
#include "helpers.hpp"

using namespace bridgepress;
using namespace bp_test;

TEST_SUITE("tensorcore") {

TEST_CASE("matmul identity and scalar product") {
  const Tensor m = random_constant({3, 4}, 1);
  const Tensor eye = Tensor::from_matrix(RowMatrix::Identity(3, 3));
  CHECK(max_abs_diff(matmul(eye, m).values(), m.values()) == 0.0);
  const Tensor a = Tensor::constant({1, 1}, Vector::Constant(1, 2.0));
  const Tensor b = Tensor::constant({1, 1}, Vector::Constant(1, 3.0));
  CHECK(matmul(a, b).item() == 6.0);
}

TEST_CASE("matmul agrees with a triple loop") {
  const Tensor a = random_constant({3, 4}, 2);
  const Tensor b = random_constant({4, 2}, 3);
  const Vector& av = a.values();
  const Vector& bv = b.values();
  Vector expected = Vector::Zero(6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 4; ++k) expected[i * 2 + j] += av[i * 4 + k] * bv[k * 2 + j];
    }
  }
  CHECK(max_abs_diff(matmul(a, b).values(), expected) < 1e-12);
}

TEST_CASE("matmul rejects mismatched inner extents") {
  CHECK_THROWS_AS(matmul(random_constant({2, 3}, 1), random_constant({2, 3}, 2)), DimensionError);
}

TEST_CASE("matmul is associative") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor a = random_constant({3, 5}, 10 + s);
    const Tensor b = random_constant({5, 4}, 20 + s);
    const Tensor c = random_constant({4, 2}, 30 + s);
    CHECK(max_abs_diff(matmul(matmul(a, b), c).values(), matmul(a, matmul(b, c)).values()) < 1e-10);
  }
}

TEST_CASE("softmax uniform input and shift invariance") {
  const Tensor zeros = Tensor::zeros({1, 3});
  const Vector uniform = softmax(zeros, 1).values();
  for (double v : uniform) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const double c = 4.5, k = 0.7;
  Vector shifted(3), base(3);
  shifted << c, c + k, c + 2 * k;
  base << 0.0, k, 2 * k;
  const Vector a = softmax(Tensor::constant({1, 3}, shifted), 1).values();
  const Vector b = softmax(Tensor::constant({1, 3}, base), 1).values();
  CHECK(max_abs_diff(a, b) < 1e-15);
}

TEST_CASE("softmax rows are positive and sum to one on either axis") {
  const Tensor x = random_constant({4, 6}, 5, -20.0, 20.0);
  const Vector rows = softmax(x, 1).values();
  for (int r = 0; r < 4; ++r) {
    CHECK(std::abs(rows.segment(r * 6, 6).sum() - 1.0) < 1e-12);
    CHECK(rows.segment(r * 6, 6).minCoeff() > 0.0);
  }
  const Vector cols = softmax(x, 0).values();
  for (int c = 0; c < 6; ++c) {
    double total = 0.0;
    for (int r = 0; r < 4; ++r) total += cols[r * 6 + c];
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax gradient matches finite differences") {
  const Tensor x = random_param({3, 4}, 6);
  const Tensor w = random_constant({3, 4}, 7);
  const auto report = gradcheck([&] { return sum(mul(softmax(x, 1), w)); }, {x});
  CHECK(report.max_relative_error < 1e-6);
}

TEST_CASE("layer_norm constant row maps to zeros") {
  const Vector out = layer_norm(Tensor::full({2, 5}, 3.25)).values();
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("layer_norm leaves a standardized row unchanged up to eps") {
  Vector row(4);
  row << -1.0, 1.0, -1.0, 1.0;  // mean 0, population variance 1
  const double eps = 1e-5;
  const Vector out = layer_norm(Tensor::constant({1, 4}, row), {}, {}, eps).values();
  CHECK(max_abs_diff(out, row / std::sqrt(1.0 + eps)) < 1e-15);
}

TEST_CASE("layer_norm with affine matches direct computation") {
  const Tensor x = random_constant({2, 5}, 8);
  const Tensor g = random_constant({5}, 9);
  const Tensor b = random_constant({5}, 10);
  const Vector out = layer_norm(x, g, b).values();
  for (int r = 0; r < 2; ++r) {
    const Vector row = x.values().segment(r * 5, 5);
    const double mu = row.mean();
    const double var = (row.array() - mu).square().mean();
    for (int c = 0; c < 5; ++c) {
      const double expected = (row[c] - mu) / std::sqrt(var + 1e-5) * g.values()[c] + b.values()[c];
      CHECK(std::abs(out[r * 5 + c] - expected) < 1e-13);
    }
  }
}

TEST_CASE("layer_norm rejects zero-length rows") {
  CHECK_THROWS_AS(layer_norm(Tensor::zeros({3, 0})), DimensionError);
}

TEST_CASE("layer_norm gradient matches finite differences") {
  const Tensor x = random_param({3, 5}, 11);
  const Tensor g = random_param({5}, 12);
  const Tensor b = random_param({5}, 13);
  const Tensor w = random_constant({3, 5}, 14);
  const auto report = gradcheck([&] { return sum(mul(layer_norm(x, g, b), w)); }, {x, g, b});
  CHECK(report.max_relative_error < 1e-5);
}

TEST_CASE("attention with one token and identity projections returns v") {
  const AttentionWeights id = AttentionWeights::identity(4);
  const Tensor q = random_constant({1, 4}, 15);
  const Tensor v = random_constant({1, 4}, 16);
  const Vector out = multi_head_attention(q, v, v, id, 2).values();
  CHECK(max_abs_diff(out, v.values()) < 1e-15);
}

TEST_CASE("attention for one query is invariant to key/value order") {
  Rng rng(17);
  const AttentionWeights w = AttentionWeights::init(4, rng);
  const Tensor q = random_constant({1, 4}, 18);
  const Tensor kv = random_constant({4, 4}, 19);
  const std::vector<int> perm{2, 0, 3, 1};
  Vector permuted(16);
  for (int i = 0; i < 4; ++i) permuted.segment(i * 4, 4) = kv.values().segment(perm[i] * 4, 4);
  const Tensor kv2 = Tensor::constant({4, 4}, permuted);
  const Vector a = multi_head_attention(q, kv, kv, w, 2).values();
  const Vector b = multi_head_attention(q, kv2, kv2, w, 2).values();
  CHECK(max_abs_diff(a, b) < 1e-13);
}

TEST_CASE("attention rejects an indivisible head split") {
  const AttentionWeights id = AttentionWeights::identity(3);
  const Tensor x = random_constant({2, 3}, 20);
  CHECK_THROWS_AS(multi_head_attention(x, x, x, id, 2), ConfigError);
}

TEST_CASE("attention gradient on two tokens and two heads") {
  Rng rng(21);
  const AttentionWeights w = AttentionWeights::init(4, rng);
  const Tensor x = random_param({2, 4}, 22);
  const Tensor target = random_constant({2, 4}, 23);
  ParamSet set;
  w.register_params(set, "mha");
  std::vector<Tensor> inputs{x};
  for (const auto& [_, p] : set) inputs.push_back(p);
  const auto report = gradcheck(
      [&] { return sum(mul(multi_head_attention(x, x, x, w, 2), target)); }, inputs);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("backward of simple losses") {
  Tensor p = random_param({2, 3}, 24);
  sum(p).backward();
  CHECK(max_abs_diff(p.grad(), Vector::Ones(6)) == 0.0);
  p.zero_grad();
  scale(sum(square(p)), 0.5).backward();
  CHECK(max_abs_diff(p.grad(), p.values()) < 1e-15);
}

TEST_CASE("repeated backward accumulates") {
  Tensor p = random_param({4}, 25);
  const Tensor loss = sum(mul(tanh(p), p));
  loss.backward();
  const Vector once = p.grad();
  loss.backward();
  CHECK(max_abs_diff(p.grad(), 2.0 * once) < 1e-15);
}

TEST_CASE("a graph that reuses a node accumulates both paths") {
  Tensor p = random_param({3}, 26);
  const Tensor h = exp(p);
  sum(add(h, h)).backward();
  CHECK(max_abs_diff(p.grad(), 2.0 * p.values().array().exp().matrix()) < 1e-14);
}

TEST_CASE("backward needs a scalar") {
  Tensor p = random_param({3}, 27);
  CHECK_THROWS_AS(exp(p).backward(), ContractError);
}

TEST_CASE("non-finite constants are rejected") {
  Vector v(2);
  v << 1.0, std::nan("");
  CHECK_THROWS_AS(Tensor::constant({2}, v), NumericError);
}

TEST_CASE("conv2d matches a direct loop") {
  const Tensor x = random_constant({2, 5, 6}, 28);
  const Tensor w = random_constant({3, 2, 3, 3}, 29);
  const Tensor b = random_constant({3}, 30);
  const Tensor y = conv2d(x, w, b, 2, 1);
  REQUIRE(y.shape() == Shape{3, 3, 3});
  const Vector& xv = x.values();
  const Vector& wv = w.values();
  for (int o = 0; o < 3; ++o) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double acc = b.values()[o];
        for (int c = 0; c < 2; ++c) {
          for (int di = 0; di < 3; ++di) {
            for (int dj = 0; dj < 3; ++dj) {
              const int r = 2 * i - 1 + di, q = 2 * j - 1 + dj;
              if (r < 0 || r >= 5 || q < 0 || q >= 6) continue;
              acc += xv[(c * 5 + r) * 6 + q] * wv[((o * 2 + c) * 3 + di) * 3 + dj];
            }
          }
        }
        CHECK(std::abs(y.values()[(o * 3 + i) * 3 + j] - acc) < 1e-13);
      }
    }
  }
}

TEST_CASE("bce_with_logits matches the closed form") {
  Vector z(3);
  z << -2.0, 0.0, 1.5;
  const double label = 0.9;
  double expected = 0.0;
  for (double v : z) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    expected -= label * std::log(s) + (1.0 - label) * std::log(1.0 - s);
  }
  CHECK(std::abs(bce_with_logits(Tensor::constant({3}, z), label).item() - expected / 3.0) < 1e-14);
}

TEST_CASE("injected softmax fault is caught by the checker") {
  testing::inject_fault(testing::Fault::softmax_backward_sign);
  const Tensor x = random_param({2, 3}, 31);
  const Tensor w = random_constant({2, 3}, 32);
  const auto report = gradcheck([&] { return sum(mul(softmax(x, 1), w)); }, {x});
  testing::inject_fault(testing::Fault::none);
  CHECK(report.max_relative_error > 1e-4);
}

TEST_CASE("key bias gradient vanishes under softmax shift invariance") {
  Rng rng(41);
  AttentionWeights w = AttentionWeights::init(4, rng);
  const Tensor q = random_constant({3, 4}, 42), kv = random_constant({2, 4}, 43);
  const Tensor r = random_constant({3, 4}, 44);
  Tensor bias = w.key.bias;
  bias.zero_grad();
  sum(mul(multi_head_attention(q, kv, kv, w, 2), r)).backward();
  CHECK(bias.grad().cwiseAbs().maxCoeff() < 1e-14);
  const auto report =
      gradcheck([&] { return sum(mul(multi_head_attention(q, kv, kv, w, 2), r)); }, {bias, w.query.weight});
  CHECK(report.max_relative_error < 1e-4);
}

}  // TEST_SUITE

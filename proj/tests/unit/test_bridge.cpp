#include <doctest.h>

#include <cmath>
#include <random>

#include "bridgepress/bridge.hpp"
#include "helpers.hpp"

using namespace bridgepress;
using namespace bp_test;

namespace {

Eigen::ArrayXd random_array(Eigen::Index n, std::uint64_t seed) {
  return random_vector(n, seed).array();
}

Eigen::ArrayXd normal_array(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::ArrayXd a(n);
  for (Eigen::Index i = 0; i < n; ++i) a[i] = normal(rng);
  return a;
}

}  // namespace

TEST_SUITE("bridge") {

TEST_CASE("schedule values") {
  const BridgeSchedule s = make_schedule(1000, 1.0);
  CHECK(s.m[500] == 0.5);
  CHECK(s.delta[500] == 0.5);
  CHECK(s.delta[0] == 0.0);
  CHECK(s.delta[1000] == 0.0);
  const BridgeSchedule flat = make_schedule(50, 0.0);
  for (int t = 0; t <= 50; ++t) {
    CHECK(flat.delta[static_cast<std::size_t>(t)] == 0.0);
    CHECK(flat.delta_post[static_cast<std::size_t>(t)] == 0.0);
  }
  CHECK_THROWS_AS(make_schedule(0, 1.0), ConfigError);
}

TEST_CASE("posterior variance never exceeds the prior variance") {
  const BridgeSchedule s = make_schedule(200, 1.0);
  for (int t = 1; t <= 200; ++t) {
    CHECK(s.delta_post[static_cast<std::size_t>(t)] >= 0.0);
    CHECK(s.delta_post[static_cast<std::size_t>(t)] <= s.delta[static_cast<std::size_t>(t - 1)] + 1e-15);
  }
}

TEST_CASE("sampling sequence") {
  CHECK(sampling_sequence(1000, 1) == std::vector<int>{0, 1000});
  CHECK(sampling_sequence(10, 4) == std::vector<int>{0, 2, 5, 7, 10});
  CHECK_THROWS_AS(sampling_sequence(10, 0), ConfigError);
  CHECK_THROWS_AS(sampling_sequence(10, 11), ConfigError);
}

TEST_CASE("forward diffusion endpoints") {
  const BridgeSchedule s = make_schedule(1000, 1.0);
  const Eigen::ArrayXd x0 = random_array(20, 1), y = random_array(20, 2), eps = normal_array(20, 3);
  CHECK((forward_diffuse(x0, y, 0, eps, s) - x0).abs().maxCoeff() <= 1e-12);
  CHECK((forward_diffuse(x0, y, 1000, eps, s) - y).abs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(forward_diffuse(x0, y, 1001, eps, s), ContractError);
  CHECK_THROWS_AS(forward_diffuse(x0, random_array(5, 4), 3, eps, s), DimensionError);
}

TEST_CASE("forward diffusion marginal statistics at T/2") {
  const BridgeSchedule s = make_schedule(1000, 1.0);
  Eigen::ArrayXd x0(1), y(1);
  x0 << 0.3;
  y << -0.8;
  const int n = 10000;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  double total = 0.0, total_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::ArrayXd eps(1);
    eps << normal(rng);
    const double v = forward_diffuse(x0, y, 500, eps, s)[0];
    total += v;
    total_sq += v * v;
  }
  const double mean = total / n;
  const double var = total_sq / n - mean * mean;
  const double delta = 0.5;
  CHECK(std::abs(mean - (x0[0] + y[0]) / 2.0) < 4.0 * std::sqrt(delta / n));
  CHECK(std::abs(var - delta) < 0.05 * delta);
}

TEST_CASE("training target identities") {
  const BridgeSchedule s = make_schedule(100, 1.0);
  const Eigen::ArrayXd x0 = random_array(12, 6), y = random_array(12, 7), eps = normal_array(12, 8);
  CHECK(training_target(x0, y, 0, eps, s).abs().maxCoeff() == 0.0);
  const BridgeSchedule flat = make_schedule(100, 0.0);
  for (int t : {0, 17, 63, 100}) CHECK(training_target(x0, x0, t, eps, flat).abs().maxCoeff() == 0.0);
  for (int t : {1, 25, 50, 99, 100}) {
    const Eigen::ArrayXd x_t = forward_diffuse(x0, y, t, eps, s);
    const Eigen::ArrayXd target = training_target(x0, y, t, eps, s);
    CHECK((predict_x0(x_t, target) - x0).abs().maxCoeff() <= 1e-12);
  }
  CHECK((predict_x0(y, Eigen::ArrayXd::Zero(12)) - y).abs().maxCoeff() == 0.0);
}

TEST_CASE("one reverse step matches hand evaluation with T=4") {
  // m = t/4, delta = 2 m (1 - m): delta_2 = 1/2, delta_3 = 3/8.
  // delta_{3|2} = 3/8 - 1/2 (1/4 / 1/2)^2 = 1/4, delta~ = (1/4)(1/2)/(3/8) = 1/3.
  const BridgeSchedule s = make_schedule(4, 1.0);
  const StepCoefficients c = step_coefficients(s, 3, 2);
  CHECK(std::abs(c.keep_x0 - 0.5) < 1e-15);
  CHECK(std::abs(c.keep_y - 0.5) < 1e-15);
  CHECK(std::abs(c.noise - std::sqrt(1.0 / 3.0)) < 1e-15);
  CHECK(std::abs(c.correction - 2.0 / 3.0) < 1e-15);

  Eigen::ArrayXd x_t(1), x0_hat(1), y(1), z(1);
  x_t << 0.7;
  x0_hat << 0.2;
  y << 1.1;
  z << -0.4;
  const double expected = 0.5 * 0.2 + 0.5 * 1.1 +
                          (2.0 / 3.0) * (0.7 - 0.25 * 0.2 - 0.75 * 1.1) +
                          std::sqrt(1.0 / 3.0) * -0.4;
  CHECK(std::abs(sample_step(x_t, x0_hat, y, 3, 2, z, s)[0] - expected) <= 1e-12);

  // Full chain with S = 4: last jump has z = 0 and lands on x0_hat.
  const StepCoefficients last = step_coefficients(s, 1, 0);
  CHECK(last.keep_x0 == 1.0);
  CHECK(last.keep_y == 0.0);
  CHECK(last.correction == 0.0);
}

TEST_CASE("jump from T uses the continuous limit") {
  const BridgeSchedule s = make_schedule(10, 1.0);
  CHECK(s.posterior_variance(10, 7) == s.delta[7]);
  const StepCoefficients c = step_coefficients(s, 10, 7);
  CHECK(c.correction == 0.0);
  CHECK(std::abs(c.noise - std::sqrt(s.delta[7])) < 1e-15);
}

TEST_CASE("deterministic bridge steps follow the geodesic") {
  const BridgeSchedule s = make_schedule(20, 0.0);
  const Eigen::ArrayXd x0 = random_array(6, 9), y = random_array(6, 10), z = normal_array(6, 11);
  const Eigen::ArrayXd x_t = (1.0 - s.m[12]) * x0 + s.m[12] * y;
  const Eigen::ArrayXd out = sample_step(x_t, x0, y, 12, 5, z, s);
  CHECK((out - ((1.0 - s.m[5]) * x0 + s.m[5] * y)).abs().maxCoeff() <= 1e-15);
  CHECK((sample_step(x_t, x0, y, 12, 0, z, s) - x0).abs().maxCoeff() == 0.0);
}

TEST_CASE("oracle predictor recovers x0 for every S") {
  const BridgeSchedule s = make_schedule(1000, 0.0);
  const Eigen::ArrayXd x0 = random_array(30, 12), y = random_array(30, 13);
  const NoisePredictor oracle = [&](const Eigen::ArrayXd&, const Eigen::ArrayXd& yy, int t) {
    return Eigen::ArrayXd(s.m[static_cast<std::size_t>(t)] * (yy - x0));
  };
  Eigen::ArrayXd first;
  for (int S : {1, 7, 10, 200, 1000}) {
    const SampleResult r = sample(y, oracle, s, S, 42);
    CHECK((r.x0 - x0).abs().maxCoeff() <= 1e-10);
    if (first.size() == 0) first = r.x0;
    CHECK((r.x0 - first).abs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("sampling is deterministic per seed and S=1 is a single jump") {
  const BridgeSchedule s = make_schedule(100, 1.0);
  const Eigen::ArrayXd y = random_array(8, 14);
  const NoisePredictor pred = [](const Eigen::ArrayXd& x, const Eigen::ArrayXd& yy, int t) {
    return Eigen::ArrayXd(0.1 * x - 0.05 * yy + 0.001 * t);
  };
  const SampleResult a = sample(y, pred, s, 20, 7, true);
  const SampleResult b = sample(y, pred, s, 20, 7, true);
  REQUIRE(a.trace.states.size() == 21);
  for (std::size_t i = 0; i < a.trace.states.size(); ++i) {
    CHECK((a.trace.states[i] == b.trace.states[i]).all());
  }
  const SampleResult one = sample(y, pred, s, 1, 7, true);
  CHECK(one.trace.timesteps == std::vector<int>{0, 100});
  CHECK(one.trace.states.size() == 2);
  CHECK((one.x0 - predict_x0(y, pred(y, y, 100))).abs().maxCoeff() == 0.0);
}

TEST_CASE("predictor shape violations are contract errors") {
  const BridgeSchedule s = make_schedule(10, 1.0);
  const NoisePredictor bad = [](const Eigen::ArrayXd&, const Eigen::ArrayXd&, int) {
    return Eigen::ArrayXd::Zero(3).eval();
  };
  CHECK_THROWS_AS(sample(random_array(5, 15), bad, s, 2, 1), ContractError);
}

}  // TEST_SUITE

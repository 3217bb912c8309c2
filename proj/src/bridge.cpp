#include "bridgepress/bridge.hpp"

#include <random>

namespace bridgepress {

double BridgeSchedule::posterior_variance(int t, int t_prev) const {
  if (t_prev < 0 || t_prev >= t || t > steps) {
    throw ContractError("reverse jump " + std::to_string(t) + " -> " + std::to_string(t_prev) +
                        " is not valid for T = " + std::to_string(steps));
  }
  const auto ti = static_cast<std::size_t>(t), pi = static_cast<std::size_t>(t_prev);
  const double d_t = delta[ti], d_p = delta[pi];
  if (d_t == 0.0) return d_p;
  const double ratio = (1.0 - m[ti]) / (1.0 - m[pi]);
  const double d_cond = d_t - d_p * ratio * ratio;
  return d_cond * d_p / d_t;
}

BridgeSchedule make_schedule(int steps, double variance_scale) {
  if (steps < 1) throw ConfigError("bridge needs T >= 1, got " + std::to_string(steps));
  if (!(variance_scale >= 0.0)) throw ConfigError("variance scale must be >= 0");
  BridgeSchedule s;
  s.steps = steps;
  s.variance_scale = variance_scale;
  const auto n = static_cast<std::size_t>(steps) + 1;
  s.m.resize(n);
  s.delta.resize(n);
  s.delta_post.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    s.m[t] = static_cast<double>(t) / static_cast<double>(steps);
    s.delta[t] = 2.0 * variance_scale * s.m[t] * (1.0 - s.m[t]);
  }
  s.m.back() = 1.0;
  s.delta.front() = 0.0;
  s.delta.back() = 0.0;
  for (int t = 1; t <= steps; ++t) s.delta_post[static_cast<std::size_t>(t)] = s.posterior_variance(t, t - 1);
  return s;
}

std::vector<int> sampling_sequence(int steps, int sample_steps) {
  if (sample_steps < 1) throw ConfigError("sampling needs S >= 1");
  if (sample_steps > steps) {
    throw ConfigError("sampling steps S = " + std::to_string(sample_steps) + " exceed T = " +
                      std::to_string(steps));
  }
  std::vector<int> seq(static_cast<std::size_t>(sample_steps) + 1);
  for (int i = 0; i <= sample_steps; ++i) {
    seq[static_cast<std::size_t>(i)] = static_cast<int>(
        (static_cast<std::int64_t>(i) * steps) / sample_steps);
  }
  return seq;
}

StepCoefficients step_coefficients(const BridgeSchedule& sched, int t, int t_prev) {
  detail::require_step(sched, t);
  const double post = sched.posterior_variance(t, t_prev);
  const auto ti = static_cast<std::size_t>(t), pi = static_cast<std::size_t>(t_prev);
  double slack = sched.delta[pi] - post;
  if (slack < 0.0) {
    if (slack < -1e-12) {
      throw ScheduleError("posterior variance exceeds delta at step " + std::to_string(t));
    }
    slack = 0.0;
  }
  StepCoefficients c;
  c.keep_x0 = 1.0 - sched.m[pi];
  c.keep_y = sched.m[pi];
  c.correction = sched.delta[ti] == 0.0 ? 0.0 : std::sqrt(slack / sched.delta[ti]);
  c.noise = std::sqrt(std::max(post, 0.0));
  return c;
}

SampleResult sample(const Eigen::ArrayXd& y, const NoisePredictor& predictor,
                    const BridgeSchedule& sched, int sample_steps, std::uint64_t seed,
                    bool record_states) {
  SampleResult result;
  result.trace.timesteps = sampling_sequence(sched.steps, sample_steps);
  result.trace.seed = seed;
  const std::vector<int>& ts = result.trace.timesteps;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::ArrayXd x = y;
  if (record_states) result.trace.states.push_back(x);
  for (std::size_t i = ts.size() - 1; i >= 1; --i) {
    const int t = ts[i], t_prev = ts[i - 1];
    const Eigen::ArrayXd eps_hat = predictor(x, y, t);
    if (eps_hat.size() != x.size()) {
      throw ContractError("noise predictor returned " + std::to_string(eps_hat.size()) +
                          " values for a state of " + std::to_string(x.size()));
    }
    const Eigen::ArrayXd x0_hat = predict_x0(x, eps_hat);
    Eigen::ArrayXd z = Eigen::ArrayXd::Zero(x.size());
    if (t_prev > 0) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
    }
    x = sample_step(x, x0_hat, y, t, t_prev, z, sched);
    if (record_states) result.trace.states.push_back(x);
  }
  result.x0 = std::move(x);
  return result;
}

}  // namespace bridgepress

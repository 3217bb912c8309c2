#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "bridgepress/errors.hpp"

namespace bridgepress {

/// Brownian-bridge schedule over t = 0..T:
///   m_t       = t / T
///   delta_t   = 2 s m_t (1 - m_t)
///   delta~_t  = delta_{t|t-1} delta_{t-1} / delta_t,
///   delta_{t|t-1} = delta_t - delta_{t-1} ((1 - m_t) / (1 - m_{t-1}))^2
/// Both ends carry zero variance, so x_0 and x_T are pinned.
struct BridgeSchedule {
  int steps = 0;  // T
  double variance_scale = 1.0;
  std::vector<double> m;
  std::vector<double> delta;
  std::vector<double> delta_post;  // delta_post[0] is unused and 0

  /// Posterior variance for a reverse jump t -> t_prev (t_prev < t). Equals
  /// delta_post[t] when t_prev = t - 1. When delta_t = 0 (the t = T end)
  /// the 0/0 is resolved by its continuous limit, delta_{t_prev}.
  double posterior_variance(int t, int t_prev) const;
};

BridgeSchedule make_schedule(int steps, double variance_scale = 1.0);

/// Evenly spaced sub-sequence [0, tau_1, ..., tau_S = T], tau_i = floor(i T / S).
std::vector<int> sampling_sequence(int steps, int sample_steps);

namespace detail {

template <typename DA, typename DB>
void require_same_extent(const Eigen::ArrayBase<DA>& a, const Eigen::ArrayBase<DB>& b,
                         const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": operand shapes differ");
  }
}

inline void require_step(const BridgeSchedule& s, int t) {
  if (t < 0 || t > s.steps) {
    throw ContractError("time step " + std::to_string(t) + " outside [0, " +
                        std::to_string(s.steps) + "]");
  }
}

}  // namespace detail

/// x_t = (1 - m_t) x0 + m_t y + sqrt(delta_t) eps.
template <typename D0, typename DY, typename DE>
typename D0::PlainObject forward_diffuse(const Eigen::ArrayBase<D0>& x0,
                                         const Eigen::ArrayBase<DY>& y, int t,
                                         const Eigen::ArrayBase<DE>& eps,
                                         const BridgeSchedule& sched) {
  detail::require_same_extent(x0, y, "forward_diffuse");
  detail::require_same_extent(x0, eps, "forward_diffuse");
  detail::require_step(sched, t);
  const double m = sched.m[static_cast<std::size_t>(t)];
  const double sd = std::sqrt(sched.delta[static_cast<std::size_t>(t)]);
  return (1.0 - m) * x0.derived() + m * y.derived() + sd * eps.derived();
}

/// Regression target of the denoiser: m_t (y - x0) + sqrt(delta_t) eps.
template <typename D0, typename DY, typename DE>
typename D0::PlainObject training_target(const Eigen::ArrayBase<D0>& x0,
                                         const Eigen::ArrayBase<DY>& y, int t,
                                         const Eigen::ArrayBase<DE>& eps,
                                         const BridgeSchedule& sched) {
  detail::require_same_extent(x0, y, "training_target");
  detail::require_same_extent(x0, eps, "training_target");
  detail::require_step(sched, t);
  const double m = sched.m[static_cast<std::size_t>(t)];
  const double sd = std::sqrt(sched.delta[static_cast<std::size_t>(t)]);
  return m * (y.derived() - x0.derived()) + sd * eps.derived();
}

/// x0_hat = x_t - eps_hat.
template <typename DX, typename DE>
typename DX::PlainObject predict_x0(const Eigen::ArrayBase<DX>& x_t,
                                    const Eigen::ArrayBase<DE>& eps_hat) {
  detail::require_same_extent(x_t, eps_hat, "predict_x0");
  return x_t.derived() - eps_hat.derived();
}

/// Coefficients of one reverse jump t -> t_prev.
struct StepCoefficients {
  double keep_x0 = 0.0;     // 1 - m_{t_prev}
  double keep_y = 0.0;      // m_{t_prev}
  double correction = 0.0;  // sqrt((delta_{t_prev} - delta~) / delta_t), 0 when delta_t = 0
  double noise = 0.0;       // sqrt(delta~)
};

StepCoefficients step_coefficients(const BridgeSchedule& sched, int t, int t_prev);

/// One accelerated reverse step:
///   x_{t_prev} = (1 - m_{t_prev}) x0_hat + m_{t_prev} y
///              + sqrt((delta_{t_prev} - delta~) / delta_t) (x_t - (1 - m_t) x0_hat - m_t y)
///              + sqrt(delta~) z
template <typename DX, typename D0, typename DY, typename DZ>
typename DX::PlainObject sample_step(const Eigen::ArrayBase<DX>& x_t,
                                     const Eigen::ArrayBase<D0>& x0_hat,
                                     const Eigen::ArrayBase<DY>& y, int t, int t_prev,
                                     const Eigen::ArrayBase<DZ>& z, const BridgeSchedule& sched) {
  detail::require_same_extent(x_t, x0_hat, "sample_step");
  detail::require_same_extent(x_t, y, "sample_step");
  detail::require_same_extent(x_t, z, "sample_step");
  const StepCoefficients c = step_coefficients(sched, t, t_prev);
  const double m_t = sched.m[static_cast<std::size_t>(t)];
  return c.keep_x0 * x0_hat.derived() + c.keep_y * y.derived() +
         c.correction * (x_t.derived() - (1.0 - m_t) * x0_hat.derived() - m_t * y.derived()) +
         c.noise * z.derived();
}

struct SampleTrace {
  std::vector<int> timesteps;           // [0, tau_1, ..., tau_S]
  std::vector<Eigen::ArrayXd> states;   // x at tau_S, ..., tau_0 when recorded
  std::uint64_t seed = 0;
};

/// eps_hat = predictor(x_t, y, t).
using NoisePredictor =
    std::function<Eigen::ArrayXd(const Eigen::ArrayXd& x_t, const Eigen::ArrayXd& y, int t)>;

struct SampleResult {
  Eigen::ArrayXd x0;
  SampleTrace trace;
};

/// Runs the accelerated sampler from x_T = y down to t = 0. Fresh standard
/// normal noise is drawn for every jump except the last one (z = 0).
SampleResult sample(const Eigen::ArrayXd& y, const NoisePredictor& predictor,
                    const BridgeSchedule& sched, int sample_steps, std::uint64_t seed,
                    bool record_states = false);

}  // namespace bridgepress

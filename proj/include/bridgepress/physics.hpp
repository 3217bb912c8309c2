#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "bridgepress/errors.hpp"

namespace bridgepress {

/// Row-major 2-D grid; rows run along the mat's short side.
template <typename Scalar>
using GridT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Grid = GridT<double>;

inline constexpr double kGravity = 9.81;          // m/s^2
inline constexpr Eigen::Index kPressureRows = 27;
inline constexpr Eigen::Index kPressureCols = 64;
inline constexpr double kSmoothingSigma = 1.4;

struct NormalizationSpec {
  enum class Mode { global, individual };
  Mode mode = Mode::global;
  double global_max_kpa = 0.0;

  void validate() const;
};

std::string to_string(NormalizationSpec::Mode mode);
NormalizationSpec::Mode parse_normalization_mode(const std::string& text);

/// Pressure image plus the taxel geometry needed to turn it into a mass.
/// Physical maps hold kPa. A normalized map remembers the divisor it was
/// produced with and the exact division remainder, so the round trip back
/// to kPa reproduces the original bits.
struct PressureMap {
  Grid values;
  double taxel_area_m2 = 0.0;
  double gravity = kGravity;
  bool normalized = false;
  double divisor_kpa = 1.0;
  Grid remainder;  // empty unless produced by normalize()

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// M = sum_i p_i A_i / g with p in Pa. Throws ContractError on a normalized map.
double mass_from_pressure(const PressureMap& p);

/// |sum_i (p_i - p_hat_i)|: the mass-consistency loss without its constant
/// A_tot / g factor.
template <typename DA, typename DB>
typename DA::Scalar wol(const Eigen::ArrayBase<DA>& p, const Eigen::ArrayBase<DB>& p_hat) {
  if (p.rows() != p_hat.rows() || p.cols() != p_hat.cols()) {
    throw DimensionError("wol: shape mismatch");
  }
  return std::abs((p.derived() - p_hat.derived()).sum());
}

/// sum_i |p_i - p_hat_i|; an upper bound of `wol` by the triangle inequality.
template <typename DA, typename DB>
typename DA::Scalar wol_l1(const Eigen::ArrayBase<DA>& p, const Eigen::ArrayBase<DB>& p_hat) {
  if (p.rows() != p_hat.rows() || p.cols() != p_hat.cols()) {
    throw DimensionError("wol_l1: shape mismatch");
  }
  return (p.derived() - p_hat.derived()).abs().sum();
}

double wol(const PressureMap& p, const PressureMap& p_hat);
double wol_l1(const PressureMap& p, const PressureMap& p_hat);

/// Sampled Gaussian, radius ceil(3 sigma), normalized to unit sum.
Eigen::ArrayXd gaussian_kernel(double sigma);
/// Maps any integer index into [0, n) by half-sample symmetric reflection
/// (d c b a | a b c d | d c b a).
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n);
/// Separable Gaussian convolution with reflected borders.
Grid gaussian_smooth(const Grid& grid, double sigma);
PressureMap gaussian_smooth(const PressureMap& p, double sigma = kSmoothingSigma);

/// Area-weighted downsampling: each output cell averages the source area it
/// covers (fractional overlaps included).
Grid resize_area(const Grid& grid, Eigen::Index rows, Eigen::Index cols);
/// Downsamples and rescales the taxel area so sum(p_i A_i) is preserved.
PressureMap resize_pressure(const PressureMap& p, Eigen::Index rows = kPressureRows,
                            Eigen::Index cols = kPressureCols);

PressureMap normalize(const PressureMap& p, const NormalizationSpec& spec);
PressureMap denormalize(const PressureMap& p);

}  // namespace bridgepress

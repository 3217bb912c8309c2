#include "bridgepress/physics.hpp"

#include <cmath>

namespace bridgepress {

using Eigen::Index;

void NormalizationSpec::validate() const {
  if (mode == Mode::global && !(global_max_kpa > 0.0)) {
    throw ConfigError("global normalization needs a positive global_max_kpa");
  }
}

std::string to_string(NormalizationSpec::Mode mode) {
  return mode == NormalizationSpec::Mode::global ? "global" : "individual";
}

NormalizationSpec::Mode parse_normalization_mode(const std::string& text) {
  if (text == "global") return NormalizationSpec::Mode::global;
  if (text == "individual") return NormalizationSpec::Mode::individual;
  throw ConfigError("unknown normalization mode '" + text + "'");
}

double mass_from_pressure(const PressureMap& p) {
  if (p.normalized) {
    throw ContractError("mass_from_pressure needs a map in kPa, got a normalized map");
  }
  if (!(p.taxel_area_m2 > 0.0) || !(p.gravity > 0.0)) {
    throw ConfigError("taxel area and gravity must be positive");
  }
  return p.values.sum() * 1000.0 * p.taxel_area_m2 / p.gravity;
}

namespace {

void require_same_state(const PressureMap& a, const PressureMap& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch");
  }
  if (a.normalized != b.normalized) {
    throw ContractError(std::string(op) + ": maps are in different normalization states");
  }
}

// Row-weight matrix for area resampling of one axis: out x src.
Eigen::MatrixXd overlap_weights(Index src, Index out) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(out, src);
  const double ratio = static_cast<double>(src) / static_cast<double>(out);
  for (Index o = 0; o < out; ++o) {
    const double lo = o * ratio, hi = (o + 1) * ratio;
    for (Index s = static_cast<Index>(std::floor(lo)); s < src && s < hi; ++s) {
      const double overlap = std::min(hi, static_cast<double>(s + 1)) -
                             std::max(lo, static_cast<double>(s));
      if (overlap > 0.0) w(o, s) = overlap / ratio;
    }
  }
  return w;
}

}  // namespace

double wol(const PressureMap& p, const PressureMap& p_hat) {
  require_same_state(p, p_hat, "wol");
  return wol(p.values, p_hat.values);
}

double wol_l1(const PressureMap& p, const PressureMap& p_hat) {
  require_same_state(p, p_hat, "wol_l1");
  return wol_l1(p.values, p_hat.values);
}

Eigen::ArrayXd gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("Gaussian sigma must be positive");
  const Index radius = static_cast<Index>(std::ceil(3.0 * sigma));
  Eigen::ArrayXd k(2 * radius + 1);
  for (Index i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
  }
  return k / k.sum();
}

Index reflect_index(Index i, Index n) {
  const Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Grid gaussian_smooth(const Grid& grid, double sigma) {
  const Eigen::ArrayXd k = gaussian_kernel(sigma);
  const Index radius = (k.size() - 1) / 2;
  const Index R = grid.rows(), C = grid.cols();
  Grid horizontal(R, C);
  for (Index r = 0; r < R; ++r) {
    for (Index c = 0; c < C; ++c) {
      double acc = 0.0;
      for (Index j = -radius; j <= radius; ++j) acc += k[j + radius] * grid(r, reflect_index(c + j, C));
      horizontal(r, c) = acc;
    }
  }
  Grid out(R, C);
  for (Index r = 0; r < R; ++r) {
    for (Index c = 0; c < C; ++c) {
      double acc = 0.0;
      for (Index j = -radius; j <= radius; ++j) {
        acc += k[j + radius] * horizontal(reflect_index(r + j, R), c);
      }
      out(r, c) = acc;
    }
  }
  return out;
}

PressureMap gaussian_smooth(const PressureMap& p, double sigma) {
  PressureMap out = p;
  out.values = gaussian_smooth(p.values, sigma);
  out.remainder.resize(0, 0);
  return out;
}

Grid resize_area(const Grid& grid, Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw ConfigError("resize target must be positive");
  if (rows > grid.rows() || cols > grid.cols()) {
    throw UnsupportedError("resize_area only downsamples (" + std::to_string(grid.rows()) + "x" +
                           std::to_string(grid.cols()) + " -> " + std::to_string(rows) + "x" +
                           std::to_string(cols) + ")");
  }
  const Eigen::MatrixXd wr = overlap_weights(grid.rows(), rows);
  const Eigen::MatrixXd wc = overlap_weights(grid.cols(), cols);
  return (wr * grid.matrix() * wc.transpose()).array();
}

PressureMap resize_pressure(const PressureMap& p, Index rows, Index cols) {
  PressureMap out = p;
  out.values = resize_area(p.values, rows, cols);
  out.remainder.resize(0, 0);
  out.taxel_area_m2 = p.taxel_area_m2 * static_cast<double>(p.rows()) * static_cast<double>(p.cols()) /
                      (static_cast<double>(rows) * static_cast<double>(cols));
  return out;
}

PressureMap normalize(const PressureMap& p, const NormalizationSpec& spec) {
  if (p.normalized) throw ContractError("map is already normalized");
  spec.validate();
  double divisor = spec.global_max_kpa;
  if (spec.mode == NormalizationSpec::Mode::individual) {
    divisor = p.values.maxCoeff();
    if (!(divisor > 0.0)) {
      throw DegenerateInputError("individual normalization of a map with no positive pressure");
    }
  }
  PressureMap out = p;
  out.normalized = true;
  out.divisor_kpa = divisor;
  out.values = p.values / divisor;
  // Exact remainder of each division: p = q * d + r holds in real arithmetic.
  out.remainder.resize(p.rows(), p.cols());
  for (Index i = 0; i < p.values.size(); ++i) {
    out.remainder.data()[i] = std::fma(-out.values.data()[i], divisor, p.values.data()[i]);
  }
  return out;
}

PressureMap denormalize(const PressureMap& p) {
  if (!p.normalized) throw ContractError("map is not normalized");
  PressureMap out = p;
  out.normalized = false;
  const bool exact = p.remainder.rows() == p.rows() && p.remainder.cols() == p.cols();
  for (Index i = 0; i < p.values.size(); ++i) {
    const double q = p.values.data()[i];
    out.values.data()[i] = exact ? std::fma(q, p.divisor_kpa, p.remainder.data()[i])
                                 : q * p.divisor_kpa;
  }
  out.divisor_kpa = 1.0;
  out.remainder.resize(0, 0);
  return out;
}

}  // namespace bridgepress

#pragma once

#include <random>

#include "bridgepress/physics.hpp"
#include "bridgepress/tensor.hpp"

namespace bp_test {

using namespace bridgepress;

inline Vector random_vector(Index n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline Grid random_grid(Index rows, Index cols, std::uint64_t seed, double lo = 0.0,
                        double hi = 1.0) {
  const Vector v = random_vector(rows * cols, seed, lo, hi);
  Grid g(rows, cols);
  for (Index i = 0; i < v.size(); ++i) g.data()[i] = v[i];
  return g;
}

inline Tensor random_param(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  const Index n = shape_size(shape);
  return Tensor::parameter(std::move(shape), random_vector(n, seed, lo, hi));
}

inline Tensor random_constant(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  const Index n = shape_size(shape);
  return Tensor::constant(std::move(shape), random_vector(n, seed, lo, hi));
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace bp_test

#include <doctest.h>

#include <cmath>

#include "bridgepress/data.hpp"
#include "bridgepress/physics.hpp"
#include "helpers.hpp"

using namespace bridgepress;
using namespace bp_test;

namespace {

PressureMap kpa_map(const Grid& values, double area = 1e-3) {
  PressureMap p;
  p.values = values;
  p.taxel_area_m2 = area;
  return p;
}

}  // namespace

TEST_SUITE("physics") {

TEST_CASE("mass of zero and uniform maps") {
  CHECK(mass_from_pressure(kpa_map(Grid::Zero(27, 64))) == 0.0);
  double total = 0.0;
  for (int i = 0; i < 27 * 64; ++i) total += 1.0 * 1000.0 * 1e-3;
  const double expected = total / 9.81;
  const double mass = mass_from_pressure(kpa_map(Grid::Ones(27, 64)));
  CHECK(std::abs(mass - expected) < 1e-9);
  CHECK(mass == doctest::Approx(176.15).epsilon(1e-4));
}

TEST_CASE("normalized maps are refused") {
  PressureMap p = kpa_map(Grid::Ones(2, 2));
  p.normalized = true;
  CHECK_THROWS_AS(mass_from_pressure(p), ContractError);
}

TEST_CASE("mass is linear") {
  const PressureMap a = kpa_map(random_grid(5, 7, 1));
  const PressureMap b = kpa_map(random_grid(5, 7, 2));
  const PressureMap mix = kpa_map(2.5 * a.values + 0.75 * b.values);
  CHECK(std::abs(mass_from_pressure(mix) -
                 (2.5 * mass_from_pressure(a) + 0.75 * mass_from_pressure(b))) < 1e-9);
}

TEST_CASE("a toy map built for 60 kg carries 60 kg") {
  const ToySpec spec;
  ToySubject subject = draw_subject(spec, 99);
  subject.anthro.mass_kg = 60.0;
  for (Posture posture : {Posture::supine, Posture::left, Posture::right}) {
    const PressureMap p = toy_pressure(spec, subject, posture);
    CHECK(std::abs(mass_from_pressure(p) - 60.0) < 1e-9);
  }
}

TEST_CASE("wol and wol_l1 on small cases") {
  Grid p(1, 2), q(1, 2);
  p << 1, 2;
  q << 2, 1;
  CHECK(wol(p, p) == 0.0);
  CHECK(wol(p, q) == 0.0);
  CHECK(wol_l1(p, q) == 2.0);
  Grid ones = Grid::Ones(1, 2), zeros = Grid::Zero(1, 2);
  CHECK(wol(ones, zeros) == 2.0);
  CHECK_THROWS_AS(wol(Grid::Ones(2, 2), Grid::Ones(1, 4)), DimensionError);
}

TEST_CASE("wol never exceeds wol_l1") {
  int violations = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Grid a = random_grid(3, 4, 2 * s, -1.0, 1.0);
    const Grid b = random_grid(3, 4, 2 * s + 1, -1.0, 1.0);
    if (wol(a, b) > wol_l1(a, b)) ++violations;
  }
  CHECK(violations == 0);
  // Equality when every residual has the same sign.
  const Grid a = random_grid(3, 4, 5);
  CHECK(std::abs(wol(a + 1.0, a) - wol_l1(a + 1.0, a)) < 1e-12);
}

TEST_CASE("gaussian kernel radius and unit mass") {
  const Eigen::ArrayXd k = gaussian_kernel(1.4);
  CHECK(k.size() == 2 * 5 + 1);
  CHECK(std::abs(k.sum() - 1.0) < 1e-15);
  CHECK_THROWS_AS(gaussian_kernel(0.0), ConfigError);
}

TEST_CASE("reflect padding is half-sample symmetric") {
  CHECK(reflect_index(-1, 5) == 0);
  CHECK(reflect_index(-2, 5) == 1);
  CHECK(reflect_index(5, 5) == 4);
  CHECK(reflect_index(6, 5) == 3);
  CHECK(reflect_index(2, 5) == 2);
}

TEST_CASE("smoothing a constant map leaves it unchanged") {
  const Grid c = Grid::Constant(9, 11, 3.5);
  CHECK((gaussian_smooth(c, 1.4) - c).abs().maxCoeff() < 1e-14);
}

TEST_CASE("smoothing a delta reproduces the kernel") {
  Grid delta = Grid::Zero(21, 23);
  delta(10, 11) = 1.0;
  const Grid out = gaussian_smooth(delta, 1.4);
  // Dense 2-D convolution of the delta with exp(-(i^2 + j^2) / 2 sigma^2).
  const int radius = 5;
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) norm += std::exp(-0.5 * i * i / (1.4 * 1.4));
  for (int r = 0; r < 21; ++r) {
    for (int c = 0; c < 23; ++c) {
      const int di = r - 10, dj = c - 11;
      double expected = 0.0;
      if (std::abs(di) <= radius && std::abs(dj) <= radius) {
        expected = std::exp(-0.5 * (di * di + dj * dj) / (1.4 * 1.4)) / (norm * norm);
      }
      CHECK(std::abs(out(r, c) - expected) < 1e-15);
    }
  }
  CHECK(std::abs(out.sum() - 1.0) < 1e-6);
}

TEST_CASE("smoothing lowers the peak of any spike") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const double sigma = 0.5 + 0.05 * static_cast<double>(s);
    Grid g = random_grid(12, 15, s, 0.0, 0.1);
    g(static_cast<Index>(s % 12), static_cast<Index>(s % 15)) = 5.0;
    CHECK(gaussian_smooth(g, sigma).maxCoeff() < g.maxCoeff());
  }
}

TEST_CASE("resize of a constant map keeps the value") {
  const Grid out = resize_area(Grid::Constant(54, 128, 2.0), 27, 64);
  CHECK(out.rows() == 27);
  CHECK((out - 2.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("integer-factor resize is a block mean") {
  const Grid g = random_grid(54, 128, 7);
  const Grid out = resize_area(g, 27, 64);
  for (int r = 0; r < 27; ++r) {
    for (int c = 0; c < 64; ++c) {
      const double block = (g(2 * r, 2 * c) + g(2 * r + 1, 2 * c) + g(2 * r, 2 * c + 1) +
                            g(2 * r + 1, 2 * c + 1)) / 4.0;
      CHECK(std::abs(out(r, c) - block) < 1e-14);
    }
  }
}

TEST_CASE("resize preserves mass with a rescaled taxel area") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const PressureMap p = kpa_map(random_grid(64, 120, 100 + s, 0.0, 20.0), 1.92 * 0.84 / (64 * 120));
    const PressureMap q = resize_pressure(p, 27, 64);
    CHECK(std::abs(mass_from_pressure(q) - mass_from_pressure(p)) < 1e-9);
  }
  CHECK_THROWS_AS(resize_area(Grid::Ones(10, 10), 12, 5), UnsupportedError);
}

TEST_CASE("global normalization") {
  Grid g(1, 2);
  g << 50.5, 101.0;
  const PressureMap n = normalize(kpa_map(g), {NormalizationSpec::Mode::global, 101.0});
  CHECK(n.values(0, 0) == 0.5);
  CHECK(n.values(0, 1) == 1.0);
}

TEST_CASE("global round trip is bit exact") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const PressureMap p = kpa_map(random_grid(27, 64, 200 + s, 0.0, 60.0));
    const PressureMap back = denormalize(normalize(p, {NormalizationSpec::Mode::global, 73.123}));
    CHECK((back.values == p.values).all());
    CHECK(!back.normalized);
  }
}

TEST_CASE("individual normalization maps each max to one") {
  const PressureMap p = kpa_map(random_grid(8, 9, 300, 0.0, 30.0));
  const PressureMap n = normalize(p, {NormalizationSpec::Mode::individual, 0.0});
  CHECK(n.values.maxCoeff() == 1.0);
  CHECK((denormalize(n).values == p.values).all());
  CHECK_THROWS_AS(normalize(kpa_map(Grid::Zero(3, 3)), {NormalizationSpec::Mode::individual, 0.0}),
                  DegenerateInputError);
}

TEST_CASE("global normalization preserves ratios and argmax") {
  const PressureMap p = kpa_map(random_grid(6, 7, 301, 0.1, 30.0));
  const PressureMap n = normalize(p, {NormalizationSpec::Mode::global, 40.0});
  Index r0, c0, r1, c1;
  p.values.maxCoeff(&r0, &c0);
  n.values.maxCoeff(&r1, &c1);
  CHECK(r0 == r1);
  CHECK(c0 == c1);
  CHECK(std::abs(n.values(2, 3) / n.values(4, 5) - p.values(2, 3) / p.values(4, 5)) < 1e-13);
}

}  // TEST_SUITE

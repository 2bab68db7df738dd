#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fkmoment/kernels.hpp"
#include "fkmoment/quadrature.hpp"
#include "oracles.hpp"

using namespace fkmoment;

TEST(TemporalKernel, RejectsHurstOutsideOpenInterval) {
  EXPECT_THROW(TemporalKernel(0.5), std::invalid_argument);
  EXPECT_THROW(TemporalKernel(1.0), std::invalid_argument);
  EXPECT_THROW(TemporalKernel(0.4), std::invalid_argument);
  EXPECT_NO_THROW(TemporalKernel(0.51));
}

TEST(TemporalKernel, AlphaInUnitInterval) {
  for (double h : {0.51, 0.6, 0.75, 0.99}) {
    const TemporalKernel k(h);
    EXPECT_DOUBLE_EQ(k.alpha(), h * (2.0 * h - 1.0));
    EXPECT_GT(k.alpha(), 0.0);
    EXPECT_LT(k.alpha(), 1.0);
  }
}

TEST(TemporalKernel, PointValues) {
  EXPECT_DOUBLE_EQ(eval_eta(TemporalKernel(0.75), 1.0, 0.0), 0.375);
  // 0.12 * 0.5^-0.8, evaluated independently.
  EXPECT_NEAR(eval_eta(TemporalKernel(0.6), 1.0, 0.5), 0.12 * std::exp2(0.8), 1e-14);
  EXPECT_NEAR(eval_eta(TemporalKernel(0.6), 1.0, 0.5), 0.20894, 1e-5);
  EXPECT_THROW(eval_eta(TemporalKernel(0.7), 0.3, 0.3), std::domain_error);
}

TEST(TemporalKernel, Symmetric) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const TemporalKernel k(0.65);
  for (int i = 0; i < 200; ++i) {
    const double a = u(gen), b = u(gen);
    EXPECT_EQ(k(a, b), k(b, a));
  }
}

TEST(EtaMass, Examples) {
  for (double h : {0.55, 0.75, 0.9}) {
    EXPECT_DOUBLE_EQ(eta_mass(TemporalKernel(h), 1.0, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(eta_mass(TemporalKernel(h), 1.0, 0.0), 0.0);
  }
  EXPECT_DOUBLE_EQ(eta_mass(TemporalKernel(0.75), 1.0, 0.5), 0.5);
}

class EtaMassQuadrature : public ::testing::TestWithParam<std::tuple<double, double, double>> {};

TEST_P(EtaMassQuadrature, ClosedFormMatchesIndependentAndGradedQuadrature) {
  const auto [h, t, s] = GetParam();
  const TemporalKernel k(h);
  EXPECT_NEAR(eta_mass(k, t, s), oracle::eta_mass(h, t, s), 1e-9);
  EXPECT_NEAR(eta_mass(k, t, s), quadrature::integrate_eta_graded(k, t, s), 1e-6);
  // The singular tensor rule reproduces the mass already at level 0; the
  // outer cells evaluate r^(2H-2) pointwise, hence not to rounding.
  double total = 0.0;
  for (const auto& node : quadrature::diagonal_singular_rule(k, t, s, 0)) total += node.weight;
  EXPECT_NEAR(total, eta_mass(k, t, s), 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Grid, EtaMassQuadrature,
                         ::testing::Combine(::testing::Values(0.55, 0.75, 0.9), ::testing::Values(1.0, 0.3),
                                            ::testing::Values(1.0, 0.5, 0.7)));

TEST(HeatDensity, Values) {
  EXPECT_NEAR(heat_density(1.0, 0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(heat_density(1.0, 0.0), 0.398942, 1e-6);
  EXPECT_NEAR(heat_density(2.0, 0.0), 0.282095, 1e-6);
  EXPECT_THROW(heat_density(0.0, 0.0), std::domain_error);
  EXPECT_THROW(heat_density(-1.0, 0.0), std::domain_error);
  EXPECT_EQ(heat_density(0.7, 1.3), heat_density(0.7, -1.3));
  const Point x{0.3, -0.4};
  EXPECT_NEAR(heat_density(1.5, x), heat_density(1.5, 0.3) * heat_density(1.5, -0.4), 1e-15);
}

TEST(HeatDensity, TrapezoidNormalization) {
  for (double t : {0.1, 1.0, 3.0}) {
    const double half = 10.0 * std::sqrt(t);
    const int n = 20000;
    const double dx = 2.0 * half / n;
    double acc = 0.5 * (heat_density(t, -half) + heat_density(t, half));
    for (int i = 1; i < n; ++i) acc += heat_density(t, -half + i * dx);
    EXPECT_NEAR(acc * dx, 1.0, 1e-8);
  }
}

TEST(HeatDensity, SemigroupProperty) {
  for (double x : {0.0, 0.7, -1.9}) {
    const double conv = oracle::convolve_heat(0.4, x, [](double z) { return heat_density(0.9, z); });
    EXPECT_NEAR(conv, heat_density(1.3, x), 1e-6);
  }
}

TEST(SpatialKernel, Validation) {
  EXPECT_THROW(SpatialKernel::heat(0.0, 1), std::invalid_argument);
  EXPECT_THROW(SpatialKernel::riesz(2.0, 2), std::invalid_argument);
  EXPECT_THROW(SpatialKernel::riesz(0.0, 2), std::invalid_argument);
  EXPECT_THROW(SpatialKernel::poisson(-1.0, 1), std::invalid_argument);
  EXPECT_THROW(SpatialKernel::zero(0), std::invalid_argument);
  EXPECT_THROW(SpatialKernel::heat(1.0, 2)(Point{0.0}), std::invalid_argument);
}

TEST(SpatialKernel, Values) {
  EXPECT_EQ(eval_f(SpatialKernel::zero(3), Point{1.0, 2.0, 3.0}), 0.0);
  EXPECT_NEAR(eval_f(SpatialKernel::heat(1.0, 1), Point{0.0}), 0.398942, 1e-6);
  EXPECT_DOUBLE_EQ(eval_f(SpatialKernel::riesz(1.0, 2), Point{2.0, 0.0}), 0.5);
  EXPECT_DOUBLE_EQ(eval_f(SpatialKernel::riesz(1.0, 2), Point{1.2, 1.6}), 0.5);
  EXPECT_EQ(eval_f(SpatialKernel::riesz(1.0, 2), Point{0.0, 0.0}), std::numeric_limits<double>::infinity());
  // Poisson kernel in d = 1 is the Cauchy density a / (pi (a^2 + x^2)).
  EXPECT_NEAR(eval_f(SpatialKernel::poisson(0.5, 1), Point{0.3}), 0.5 / (std::numbers::pi * (0.25 + 0.09)), 1e-15);
  // In d = 3, c_3 = Gamma(2) / pi^2.
  EXPECT_NEAR(eval_f(SpatialKernel::poisson(1.0, 3), Point{0.0, 0.0, 0.0}), 1.0 / (std::numbers::pi * std::numbers::pi),
              1e-15);
}

TEST(SpatialKernel, PoissonKernelIntegratesToOneInOneDimension) {
  const SpatialKernel f = SpatialKernel::poisson(0.7, 1);
  // x = 0.7 tan(theta) maps R to (-pi/2, pi/2).
  const double total = oracle::gk(
      [&](double th) {
        const double c = std::cos(th);
        return f(Point{0.7 * std::tan(th)}) * 0.7 / (c * c);
      },
      -std::numbers::pi / 2, std::numbers::pi / 2);
  EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(SpatialKernel, SymmetricNonnegativeAndHeatMaximalAtOrigin) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 1.5);
  const SpatialKernel kernels[] = {SpatialKernel::heat(0.8, 2), SpatialKernel::riesz(1.3, 2),
                                   SpatialKernel::poisson(0.4, 2), SpatialKernel::zero(2)};
  const SpatialKernel heat = SpatialKernel::heat(0.8, 2);
  for (int i = 0; i < 100; ++i) {
    const Point x{n(gen), n(gen)};
    const Point minus{-x[0], -x[1]};
    for (const auto& f : kernels) {
      EXPECT_EQ(f(x), f(minus));
      EXPECT_GE(f(x), 0.0);
    }
    EXPECT_LE(heat(x), heat(Point{0.0, 0.0}));
  }
}

TEST(SpatialKernel, RegimeWarnings) {
  EXPECT_TRUE(regime_warnings(SpatialKernel::riesz(0.5, 2)).empty());
  EXPECT_EQ(regime_warnings(SpatialKernel::riesz(0.5, 3)).size(), 1u);
  EXPECT_TRUE(regime_warnings(SpatialKernel::heat(1.0, 5)).empty());
}

TEST(InitialField, Constant) {
  const auto u0 = InitialCondition::constant(2.5);
  for (double t : {0.0, 0.3, 1.0}) EXPECT_EQ(initial_field(u0, t, Point{-4.0}), 2.5);
}

TEST(InitialField, GaussianBump) {
  const auto u0 = InitialCondition::bump(1.0, Point{0.0}, 1.0);
  EXPECT_DOUBLE_EQ(initial_field(u0, 0.0, Point{0.0}), 1.0);
  EXPECT_NEAR(initial_field(u0, 1.0, Point{0.0}), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(initial_field(u0, 1.0, Point{0.0}), 0.70711, 1e-5);
  EXPECT_THROW(initial_field(u0, -0.1, Point{0.0}), std::domain_error);
  EXPECT_THROW(InitialCondition::bump(1.0, Point{0.0}, 0.0), std::invalid_argument);
}

TEST(InitialField, BumpMatchesConvolutionQuadrature) {
  const auto u0 = InitialCondition::bump(1.7, Point{0.4}, 0.6);
  auto datum = [](double z) { return 1.7 * std::exp(-(z - 0.4) * (z - 0.4) / (2.0 * 0.6)); };
  for (double t : {0.05, 0.5, 1.0})
    for (double x : {-1.0, 0.4, 2.0})
      EXPECT_NEAR(initial_field(u0, t, Point{x}), oracle::convolve_heat(t, x, datum), 1e-6);
}

TEST(InitialField, AmplitudeTimesShape) {
  const auto u0 = InitialCondition::bump(-3.0, Point{1.0, 2.0}, 0.5);
  const Point x{0.2, 2.5};
  EXPECT_EQ(u0(0.3, x), -3.0 * u0.shape(0.3, x));
  EXPECT_EQ(u0.amplitude(), -3.0);
}

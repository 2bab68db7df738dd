#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "fkmoment/chaos_oracle.hpp"
#include "fkmoment/quadrature.hpp"
#include "oracles.hpp"

using namespace fkmoment;

namespace {

const SpatialKernel kHeat = SpatialKernel::heat(1.0, 1);
const InitialCondition kOne = InitialCondition::constant(1.0);

// alpha_1 at t = s = 1, H = 0.75, heat bandwidth 1, x = y, from
// oracle::alpha1_square (substitution z = |a - b|^(2H-1), Gauss-Kronrod).
constexpr double kAlpha1Unit = 0.288754085146627;
// Same at t = s = 0.5.
constexpr double kAlpha1Half = 0.116307214356932;

}  // namespace

TEST(TruncationTail, Examples) {
  EXPECT_NEAR(truncation_tail(std::vector<double>{0.1, 0.01}), 0.01 * 0.1 / 0.9, 1e-15);
  EXPECT_NEAR(truncation_tail(std::vector<double>{0.1, 0.01}), 0.00111, 1e-5);
  EXPECT_EQ(truncation_tail(std::vector<double>{0.1, 0.2}), std::numeric_limits<double>::infinity());
  EXPECT_EQ(truncation_tail(std::vector<double>{0.3, 0.0}), 0.0);
  EXPECT_EQ(truncation_tail(std::vector<double>{0.3}), std::numeric_limits<double>::infinity());
  // Ratio clamps at 0.9.
  EXPECT_NEAR(truncation_tail(std::vector<double>{1.0, 0.95}), 0.95 * 9.0, 1e-12);
}

TEST(InnerProduct, Examples) {
  const QueryPoint q{1.0, 1.0, {0.0}, {0.0}};
  EXPECT_NEAR(inner_product_closed_form(std::vector<double>{0.5}, std::vector<double>{0.5}, q, kHeat, kOne), 0.282095,
              1e-6);
  EXPECT_EQ(inner_product_closed_form({}, {}, q, kHeat, InitialCondition::constant(3.0)), 9.0);
  EXPECT_EQ(inner_product_closed_form(std::vector<double>{0.2}, std::vector<double>{0.4}, q, SpatialKernel::zero(1), kOne),
            0.0);
}

TEST(InnerProduct, UnsupportedCombinationsAreCapabilityErrors) {
  const QueryPoint q{1.0, 1.0, {0.0}, {0.0}};
  const std::vector<double> t{0.5}, s{0.5};
  EXPECT_THROW(inner_product_closed_form(t, s, q, SpatialKernel::poisson(1.0, 1), kOne), CapabilityError);
  const QueryPoint q2{1.0, 1.0, {0.0, 0.0}, {0.0, 0.0}};
  EXPECT_THROW(inner_product_closed_form(t, s, q2, SpatialKernel::riesz(1.0, 2), kOne), CapabilityError);
  EXPECT_THROW(inner_product_closed_form(t, s, q, kHeat, InitialCondition::bump(1.0, Point{0.0}, 1.0)), CapabilityError);
}

TEST(InnerProduct, ScalesWithSquaredAmplitude) {
  const QueryPoint q{1.0, 1.0, {0.3}, {-0.2}};
  const std::vector<double> t{0.1, 0.8}, s{0.6, 0.3};
  const double base = inner_product_closed_form(t, s, q, kHeat, kOne);
  EXPECT_DOUBLE_EQ(inner_product_closed_form(t, s, q, kHeat, InitialCondition::constant(-2.0)), 4.0 * base);
}

TEST(AlphaQuadrature, FirstOrderAgainstSubstitutionOracle) {
  // The frozen constants were produced by the oracle; re-derive them too.
  EXPECT_NEAR(oracle::alpha1_square(0.75, 1.0, 1.0), kAlpha1Unit, 1e-12);
  EXPECT_NEAR(oracle::alpha1_square(0.75, 0.5, 1.0), kAlpha1Half, 1e-12);
  const double tol = 1e-5;
  QuadratureOptions opt;
  opt.tol = tol;
  const auto a1 = alpha_n_quadrature(1, QueryPoint{1.0, 1.0, {0.0}, {0.0}}, TemporalKernel(0.75), kHeat, kOne, opt);
  EXPECT_NEAR(a1.value, kAlpha1Unit, 2.0 * tol * kAlpha1Unit);
  const auto a1h = alpha_n_quadrature(1, QueryPoint{0.5, 0.5, {0.0}, {0.0}}, TemporalKernel(0.75), kHeat, kOne, opt);
  EXPECT_NEAR(a1h.value, kAlpha1Half, 2.0 * tol * kAlpha1Half);
}

TEST(AlphaQuadrature, FirstOrderOtherHurstAndOffsets) {
  for (double h : {0.6, 0.9}) {
    QuadratureOptions opt;
    opt.tol = 1e-6;
    const auto a1 = alpha_n_quadrature(1, QueryPoint{1.0, 1.0, {0.0}, {0.0}}, TemporalKernel(h), kHeat, kOne, opt);
    const double ref = oracle::alpha1_square(h, 1.0, 1.0);
    EXPECT_NEAR(a1.value, ref, 2e-6 * ref) << "H = " << h;
  }
}

TEST(AlphaQuadrature, UnequalTimesAgainstSubstitutionOracle) {
  // alpha_1 = int_0^t int_0^s eta(t - a, s - b) p_{1 + a + b}(o) da db for
  // t != s. Around the singular point a0 = t - s + b put a = a0 -+ z^(1/p),
  // so that alpha r^(p-1) dr = H dz; tanh-sinh on the outer integral.
  const double t = 0.8, s = 0.3, o = 0.5;
  const TemporalKernel k(0.7);
  const double h = k.hurst(), p = 2.0 * h - 1.0;
  auto inner = [&](double b) {
    const double a0 = t - s + b;
    auto below = [&](double z) { return oracle::heat1(1.0 + a0 - std::pow(z, 1.0 / p) + b, o); };
    auto above = [&](double z) { return oracle::heat1(1.0 + a0 + std::pow(z, 1.0 / p) + b, o); };
    return h * (oracle::gk(below, 0.0, std::pow(a0, p)) + oracle::gk(above, 0.0, std::pow(t - a0, p)));
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  const double ref = ts.integrate(inner, 0.0, s);
  QuadratureOptions opt;
  opt.tol = 1e-7;
  const auto a1 = alpha_n_quadrature(1, QueryPoint{t, s, {o}, {0.0}}, k, kHeat, kOne, opt);
  EXPECT_NEAR(a1.value, ref, 1e-6 * ref);
}

TEST(AlphaQuadrature, ZeroKernelAndEmptyDomain) {
  for (std::size_t n = 1; n <= 3; ++n) {
    EXPECT_EQ(alpha_n_quadrature(n, QueryPoint{0.5, 0.5, {0.0}, {0.0}}, TemporalKernel(0.75), SpatialKernel::zero(1),
                                 InitialCondition::bump(1.0, Point{0.0}, 1.0))
                  .value,
              0.0);
    EXPECT_EQ(alpha_n_quadrature(n, QueryPoint{0.0, 0.5, {0.0}, {0.0}}, TemporalKernel(0.75), kHeat, kOne).value, 0.0);
  }
  EXPECT_THROW(alpha_n_quadrature(4, QueryPoint{0.5, 0.5, {0.0}, {0.0}}, TemporalKernel(0.75), kHeat, kOne),
               std::invalid_argument);
}

TEST(AlphaQuadrature, AmplitudeScalingIsExact) {
  const QueryPoint q{0.5, 0.4, {0.1}, {0.0}};
  const TemporalKernel k(0.75);
  for (std::size_t n = 1; n <= 2; ++n) {
    const double base = alpha_n_quadrature(n, q, k, kHeat, kOne).value;
    const double scaled = alpha_n_quadrature(n, q, k, kHeat, InitialCondition::constant(3.0)).value;
    EXPECT_EQ(scaled, 9.0 * base);
  }
}

TEST(AlphaQuadrature, NonConvergenceReportsLastIterate) {
  QuadratureOptions opt;
  opt.tol = 1e-15;
  opt.max_level = 2;
  try {
    alpha_n_quadrature(2, QueryPoint{0.5, 0.5, {0.0}, {0.0}}, TemporalKernel(0.75), kHeat, kOne, opt);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("last iterate"), std::string::npos);
  }
}

TEST(SecondMomentSeries, ZeroKernelAndZeroHorizon) {
  const auto bump = InitialCondition::bump(2.0, Point{0.3}, 0.5);
  const QueryPoint q{0.4, 0.7, {0.1}, {-0.2}};
  const auto r = second_moment_series(q, TemporalKernel(0.75), SpatialKernel::zero(1), bump, 3, 1e-5);
  EXPECT_EQ(r.total, bump(0.4, q.x) * bump(0.7, q.y));
  EXPECT_EQ(r.tail_estimate, 0.0);
  const auto z = second_moment_series(QueryPoint{0.0, 0.0, {0.1}, {-0.2}}, TemporalKernel(0.75), kHeat, kOne, 3, 1e-5);
  EXPECT_EQ(z.total, 1.0);
  EXPECT_TRUE(z.tail_is_heuristic);
}

TEST(SecondMomentSeries, TermsSumToTotalAndArePositive) {
  const QueryPoint q{0.5, 0.5, {0.2}, {0.2}};
  const auto r = second_moment_series(q, TemporalKernel(0.75), kHeat, InitialCondition::constant(1.3), 2, 1e-5);
  double sum = r.zeroth_term;
  for (double v : r.order_terms) {
    EXPECT_GT(v, 0.0);
    sum += v;
  }
  EXPECT_DOUBLE_EQ(r.total, sum);
  ASSERT_EQ(r.order_terms.size(), 2u);
  for (std::size_t i = 0; i < r.order_terms.size(); ++i)
    EXPECT_LE(r.last_differences[i], 1e-5 * std::max(r.order_terms[i], r.zeroth_term));
}

TEST(SecondMomentSeries, SwapSymmetryIsExact) {
  const TemporalKernel k(0.7);
  const auto a = second_moment_series(QueryPoint{0.6, 0.3, {0.4}, {-0.1}}, k, kHeat, kOne, 2, 1e-5);
  const auto b = second_moment_series(QueryPoint{0.3, 0.6, {-0.1}, {0.4}}, k, kHeat, kOne, 2, 1e-5);
  EXPECT_EQ(a.total, b.total);
  EXPECT_EQ(a.order_terms, b.order_terms);
}

TEST(SecondMomentSeries, TranslationInvarianceIsExact) {
  const TemporalKernel k(0.75);
  const auto a = second_moment_series(QueryPoint{0.5, 0.4, {0.25}, {-0.5}}, k, kHeat, kOne, 2, 1e-5);
  const auto b = second_moment_series(QueryPoint{0.5, 0.4, {2.25}, {1.5}}, k, kHeat, kOne, 2, 1e-5);
  EXPECT_EQ(a.total, b.total);
  EXPECT_EQ(a.order_terms, b.order_terms);
}

TEST(SecondMomentSeries, RejectsUnsupportedInputs) {
  const QueryPoint q{0.5, 0.5, {0.0}, {0.0}};
  EXPECT_THROW(second_moment_series(q, TemporalKernel(0.75), SpatialKernel::poisson(1.0, 1), kOne, 2, 1e-5),
               CapabilityError);
  EXPECT_THROW(second_moment_series(q, TemporalKernel(0.75), kHeat, kOne, 4, 1e-5), std::invalid_argument);
}

TEST(WhiteNoiseTerms, FirstOrderAgainstOneDimensionalQuadrature) {
  const double closed = (std::sqrt(3.0) - 1.0) / std::sqrt(2.0 * std::numbers::pi);
  EXPECT_NEAR(oracle::white_term1(1.0, 1.0), closed, 1e-14);
  const auto j1 = white_noise_order_term(1, 1.0, Point{0.0}, Point{0.0}, kHeat, kOne);
  EXPECT_NEAR(j1.value, closed, 1e-5 * closed);
  EXPECT_EQ(white_noise_order_term(2, 0.5, Point{0.0}, Point{0.0}, SpatialKernel::zero(1), kOne).value, 0.0);
}

TEST(WhiteNoiseTerms, SecondOrderAgainstNestedQuadrature) {
  // J_2 = int_{0<a1<a2<t} E[p(Z1) p(Z2)] with Sigma = 2 min, as nested Gauss-Kronrod.
  const double t = 0.5;
  auto inner = [&](double a2) {
    return oracle::gk(
        [&](double a1) {
          const double s11 = 2 * a1, s22 = 2 * a2, s12 = 2 * a1;
          const double det = (1 + s11) * (1 + s22) - s12 * s12;
          return 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
        },
        0.0, a2);
  };
  const double ref = oracle::gk(inner, 0.0, t);
  const auto j2 = white_noise_order_term(2, t, Point{0.0}, Point{0.0}, kHeat, kOne);
  EXPECT_NEAR(j2.value, ref, 1e-6 * ref);
}

TEST(WhiteNoiseTerms, SimplexVolume) {
  for (std::size_t n = 1; n <= 3; ++n) {
    const double v = quadrature::integrate_simplex(n, 0.7, 2, [](std::span<const double>) { return 1.0; });
    double expected = 1.0;
    for (std::size_t j = 1; j <= n; ++j) expected *= 0.7 / static_cast<double>(j);
    EXPECT_NEAR(v, expected, 1e-14);
  }
}

TEST(WhiteNoiseTerms, SimplexPointsAreOrdered) {
  quadrature::integrate_simplex(3, 1.0, 1, [](std::span<const double> a) {
    EXPECT_LT(a[0], a[1]);
    EXPECT_LT(a[1], a[2]);
    EXPECT_LT(a[2], 1.0);
    return 0.0;
  });
}

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fkmoment/chaos_oracle.hpp"
#include "fkmoment/kernels.hpp"
#include "fkmoment/mc_engine.hpp"
#include "fkmoment/parallel.hpp"
#include "fkmoment/point_process.hpp"
#include "fkmoment/random.hpp"
#include "fkmoment/statistics.hpp"

// Property suites shared by the CLI `verify` command and the acceptance binary.
namespace fkmoment::verify {

enum class Rule { AtMost, AtLeast };

struct Check {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  Rule rule = Rule::AtMost;
  bool passed = false;
};

inline const char* to_string(Rule r) { return r == Rule::AtMost ? "<=" : ">="; }

inline Check make_check(std::string name, double statistic, Rule rule, double threshold) {
  const bool ok = rule == Rule::AtMost ? statistic <= threshold : statistic >= threshold;
  return {std::move(name), statistic, threshold, rule, ok && !std::isnan(statistic)};
}

inline constexpr double kSignificance = 1e-3;

struct SuiteOptions {
  std::uint64_t seed = 42;
  std::size_t workers = 1;
};

/// The constant-one spatial covariance; isolates the temporal factor.
struct UnitCovariance {
  std::size_t d = 1;
  std::size_t dim() const noexcept { return d; }
  double operator()(std::span<const double>) const noexcept { return 1.0; }
};

namespace detail {

inline double abs_z(double estimate, double truth, double se) {
  if (se == 0.0) return estimate == truth ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(estimate - truth) / se;
}

// Per-replicate independent draws, collected in replicate order.
template <class T, class Draw>
std::vector<T> draw_all(std::size_t n, const SuiteOptions& opt, std::uint64_t salt, Draw&& draw) {
  std::vector<T> out(n);
  parallel_for(n, opt.workers, [&](std::size_t i) {
    Stream rng = Stream::substream(opt.seed ^ salt, i);
    out[i] = draw(rng);
  });
  return out;
}

}  // namespace detail

/// Planar and linear Poisson laws.
inline std::vector<Check> poisson_law(const SuiteOptions& opt = {}) {
  constexpr std::size_t n = 100'000;
  std::vector<Check> out;
  const Rectangle quarter(0.0, 0.5, 0.0, 0.5);
  const Rectangle opposite(0.5, 1.0, 0.5, 1.0);
  struct Counts {
    double total, first, second;
  };
  const auto counts = detail::draw_all<Counts>(n, opt, 0x01, [&](Stream& rng) {
    const PlanarRealization pr = sample_global(1.0, rng);
    return Counts{static_cast<double>(pr.total_count()), static_cast<double>(count_rectangle(pr, quarter)),
                  static_cast<double>(count_rectangle(pr, opposite))};
  });

  // Bins 0, 1, 2, 3 and >= 4 against Poisson(0.25).
  std::vector<double> observed(5, 0.0), expected(5, 0.0);
  std::vector<double> first(n), second(n);
  double total_sum = 0.0, empty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    observed[std::min<std::size_t>(4, static_cast<std::size_t>(counts[i].first))] += 1.0;
    first[i] = counts[i].first;
    second[i] = counts[i].second;
    total_sum += counts[i].total;
    if (counts[i].total == 0.0) empty += 1.0;
  }
  double pmf = std::exp(-0.25), cdf = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    expected[k] = pmf * static_cast<double>(n);
    cdf += pmf;
    pmf *= 0.25 / static_cast<double>(k + 1);
  }
  expected[4] = (1.0 - cdf) * static_cast<double>(n);
  out.push_back(make_check("rectangle-count-chi-square-p", chi_square_test(observed, expected).p_value, Rule::AtLeast,
                           kSignificance));
  out.push_back(make_check("disjoint-count-correlation", std::abs(pearson_correlation(first, second)), Rule::AtMost, 0.02));
  out.push_back(make_check("total-count-mean-error", std::abs(total_sum / static_cast<double>(n) - 1.0), Rule::AtMost, 0.01));
  out.push_back(make_check("empty-fraction-error", std::abs(empty / static_cast<double>(n) - std::exp(-1.0)), Rule::AtMost,
                           0.005));

  // Restricted sampling and the count identity P(K = m) m! e^{ts} = (ts)^m.
  const auto restricted = detail::draw_all<double>(
      n, opt, 0x02, [](Stream& rng) { return static_cast<double>(sample_restricted(0.5, 0.5, 1.0, rng).count()); });
  double k_sum = 0.0;
  std::vector<double> freq(3, 0.0);
  for (double k : restricted) {
    k_sum += k;
    if (k < 3.0) freq[static_cast<std::size_t>(k)] += 1.0;
  }
  out.push_back(
      make_check("restricted-count-mean-error", std::abs(k_sum / static_cast<double>(n) - 0.25), Rule::AtMost, 0.01));
  const double ts = 0.25;
  double factorial = 1.0;
  for (std::size_t m = 0; m < 3; ++m) {
    if (m > 0) factorial *= static_cast<double>(m);
    const double p_hat = freq[m] / static_cast<double>(n);
    const double p = std::pow(ts, static_cast<double>(m)) / (factorial * std::exp(ts));
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    out.push_back(make_check("count-identity-z-n" + std::to_string(m), detail::abs_z(p_hat, p, se), Rule::AtMost, 3.0));
  }

  const auto jumps = detail::draw_all<double>(
      n, opt, 0x03, [](Stream& rng) { return static_cast<double>(sample_linear_jump_times(1.0, 1.0, rng).size()); });
  double j_sum = 0.0, j_empty = 0.0;
  for (double k : jumps) {
    j_sum += k;
    if (k == 0.0) j_empty += 1.0;
  }
  out.push_back(make_check("jump-count-mean-error", std::abs(j_sum / static_cast<double>(n) - 1.0), Rule::AtMost, 0.01));
  out.push_back(make_check("jump-empty-fraction-error", std::abs(j_empty / static_cast<double>(n) - std::exp(-1.0)),
                           Rule::AtMost, 0.005));
  return out;
}

/// Given K = 2 points in [0,1] x [0,0.7], each coordinate of each point is
/// uniform. Also checks that the tilted sampler pushes |u - v| forward to
/// its analytic law.
inline std::vector<Check> conditional_uniformity(const SuiteOptions& opt = {}) {
  constexpr std::size_t n = 100'000;
  constexpr double t = 1.0, s = 0.7;
  const auto samples =
      detail::draw_all<RestrictedPointSample>(n, opt, 0x11, [](Stream& rng) { return sample_restricted(t, s, 1.0, rng); });
  std::vector<std::vector<double>> coords(4);
  for (const auto& smp : samples) {
    if (smp.count() != 2) continue;
    for (std::size_t j = 0; j < 2; ++j) {
      coords[2 * j].push_back((t - smp.points[j].tau) / t);
      coords[2 * j + 1].push_back((s - smp.points[j].rho) / s);
    }
  }
  const char* names[] = {"point1-elapsed-t", "point1-elapsed-s", "point2-elapsed-t", "point2-elapsed-s"};
  std::vector<Check> out;
  auto uniform_cdf = [](double u) { return std::clamp(u, 0.0, 1.0); };
  for (std::size_t c = 0; c < 4; ++c)
    out.push_back(make_check(std::string("ks-p-") + names[c], ks_test(coords[c], uniform_cdf).p_value, Rule::AtLeast,
                             kSignificance));
  out.push_back(make_check("conditioned-sample-size", static_cast<double>(coords[0].size()), Rule::AtLeast, 1000.0));

  // Tilted sampler on a square [0,L]^2: D = |u - v| has CDF
  //   F(d) = 2 alpha_H (L d^p / p - d^(p+1) / (p+1)) / L^(p+1).
  const TemporalKernel k(0.75);
  constexpr double side = 0.8;
  const auto gaps = detail::draw_all<double>(n, opt, 0x12, [&](Stream& rng) {
    const PlanePoint pt = sample_temporal_importance(side, side, k, rng);
    return std::abs((side - pt.tau) - (side - pt.rho));
  });
  const double p = k.exponent();
  auto gap_cdf = [&](double d) {
    d = std::clamp(d, 0.0, side);
    return 2.0 * k.alpha() * (side * std::pow(d, p) / p - std::pow(d, p + 1.0) / (p + 1.0)) /
           std::pow(side, p + 1.0);
  };
  out.push_back(make_check("ks-p-importance-gap-law", ks_test(gaps, gap_cdf).p_value, Rule::AtLeast, kSignificance));
  return out;
}

/// The planar Poisson representation of hypercube integrals.
inline std::vector<Check> integral_identity(const SuiteOptions& opt = {}, std::size_t replicates = 1'000'000) {
  std::vector<Check> out;
  for (std::size_t n = 1; n <= 3; ++n) {
    const auto est = mc_hypercube_integral([](std::span<const PlanePoint>) { return 1.0; }, n, 1.0, 1.0, replicates,
                                           opt.seed + n, opt.workers);
    out.push_back(make_check("unit-integrand-z-n" + std::to_string(n), detail::abs_z(est.mean, 1.0, est.std_error),
                             Rule::AtMost, 3.0));
  }
  for (std::size_t n = 1; n <= 3; ++n) {
    auto product = [](std::span<const PlanePoint> pts) {
      double v = 1.0;
      for (auto p : pts) v *= p.tau * p.rho;
      return v;
    };
    const auto est = mc_hypercube_integral(product, n, 1.0, 1.0, replicates, opt.seed + 10 + n, opt.workers);
    const double truth = std::pow(0.25, static_cast<double>(n));
    out.push_back(make_check("product-integrand-z-n" + std::to_string(n), detail::abs_z(est.mean, truth, est.std_error),
                             Rule::AtMost, 3.0));
  }
  const TemporalKernel k(0.75);
  auto eta_product = [&](std::span<const PlanePoint> pts) {
    double v = 1.0;
    for (auto p : pts) {
      if (p.tau == p.rho) return 0.0;
      v *= k(p.tau, p.rho);
    }
    return v;
  };
  const auto est = mc_hypercube_integral(eta_product, 1, 1.0, 1.0, replicates, opt.seed + 20, opt.workers);
  out.push_back(make_check("eta-integrand-z-n1", detail::abs_z(est.mean, k.mass(1.0, 1.0), est.std_error), Rule::AtMost,
                           3.0));
  return out;
}

/// Closed-form Gaussian inner products against Brownian Monte Carlo.
inline std::vector<Check> inner_product(const SuiteOptions& opt = {}, std::size_t replicates = 100'000) {
  std::vector<Check> out;
  const SpatialKernel f = SpatialKernel::heat(1.0, 1);
  const InitialCondition u0 = InitialCondition::constant(1.0);
  EstimatorConfig cfg;
  cfg.replicates = replicates;
  cfg.workers = opt.workers;
  for (double separation : {0.0, 1.0}) {
    for (std::size_t n = 1; n <= 3; ++n) {
      Stream rng = Stream::substream(opt.seed ^ 0x21, n);
      std::vector<double> ts(n), ss(n);
      for (std::size_t j = 0; j < n; ++j) {
        ts[j] = rng.uniform();
        ss[j] = rng.uniform();
      }
      const QueryPoint q{1.0, 1.0, {separation}, {0.0}};
      cfg.seed = opt.seed + 100 * n + static_cast<std::uint64_t>(separation);
      const double exact = inner_product_closed_form(ts, ss, q, f, u0);
      const ScalarEstimate mc = estimate_inner_product_mc(ts, ss, q, f, u0, cfg);
      out.push_back(make_check("inner-product-z-n" + std::to_string(n) + (separation == 0.0 ? "-coincident" : "-offset1"),
                               detail::abs_z(mc.mean, exact, mc.std_error), Rule::AtMost, 3.0));
    }
  }
  return out;
}

/// Exact and statistical identities of the second-moment estimators.
inline std::vector<Check> estimator_identities(const SuiteOptions& opt = {}) {
  std::vector<Check> out;
  const TemporalKernel k(0.75);
  const SpatialKernel heat = SpatialKernel::heat(1.0, 1);
  const SpatialKernel zero = SpatialKernel::zero(1);
  const InitialCondition one = InitialCondition::constant(1.0);
  const QueryPoint q{0.5, 0.5, {0.0}, {0.0}};
  EstimatorConfig cfg;
  cfg.seed = opt.seed;
  cfg.workers = opt.workers;
  cfg.replicates = 100'000;
  cfg.mode = SamplingMode::TemporalImportance;

  const auto zf = estimate_second_moment_fractional(q, k, zero, one, cfg);
  out.push_back(make_check("zero-kernel-fractional-z", detail::abs_z(zf.value, 1.0, zf.std_error), Rule::AtMost, 3.0));
  const auto zw = estimate_second_moment_white(0.5, q.x, q.y, zero, one, cfg);
  out.push_back(make_check("zero-kernel-white-z", detail::abs_z(zw.value, 1.0, zw.std_error), Rule::AtMost, 3.0));

  cfg.replicates = 20'000;
  const double c = 2.5;
  const auto base = estimate_second_moment_fractional(q, k, heat, one, cfg);
  const auto scaled = estimate_second_moment_fractional(q, k, heat, InitialCondition::constant(c), cfg);
  out.push_back(make_check("amplitude-scaling-abs-diff", std::abs(scaled.value - c * c * base.value), Rule::AtMost, 0.0));

  const auto at_zero = estimate_second_moment_fractional(QueryPoint{0.0, 0.0, {0.0}, {0.0}}, k, heat, one, cfg);
  out.push_back(make_check("zero-horizon-abs-error", std::abs(at_zero.value - 1.0) + at_zero.std_error, Rule::AtMost, 0.0));

  // Dyadic coordinates keep x - y exact after the shift.
  const QueryPoint apart{0.5, 0.5, {0.25}, {-0.5}};
  const QueryPoint shifted{0.5, 0.5, {1.25}, {0.5}};
  const auto e1 = estimate_second_moment_fractional(apart, k, heat, one, cfg);
  const auto e2 = estimate_second_moment_fractional(shifted, k, heat, one, cfg);
  out.push_back(make_check("translation-abs-diff", std::abs(e1.value - e2.value) + std::abs(e1.std_error - e2.std_error),
                           Rule::AtMost, 0.0));

  EstimatorConfig wide = cfg;
  wide.workers = 3;
  EstimatorConfig single = cfg;
  single.workers = 1;
  const auto w3 = estimate_second_moment_fractional(q, k, heat, one, wide);
  const auto w1 = estimate_second_moment_fractional(q, k, heat, one, single);
  out.push_back(make_check("worker-count-abs-diff", std::abs(w3.value - w1.value) + std::abs(w3.std_error - w1.std_error),
                           Rule::AtMost, 0.0));

  // With f == 1 the tilted replicate is exactly (C / ts)^K.
  const UnitCovariance unit;
  const double weight = k.mass(q.t, q.s) / (q.t * q.s);
  double worst = 0.0;
  for (std::size_t i = 0; i < 10'000; ++i) {
    Stream rng = Stream::substream(opt.seed ^ 0x31, i);
    const ReplicateDraw r = fractional_replicate(q, k, unit, one, SamplingMode::TemporalImportance, rng);
    double expected = 1.0;
    for (std::size_t j = 0; j < r.count; ++j) expected *= weight;
    worst = std::max(worst, std::abs(r.value - expected));
  }
  out.push_back(make_check("importance-fixed-count-spread", worst, Rule::AtMost, 0.0));

  EstimatorConfig modes = cfg;
  modes.replicates = 200'000;
  modes.mode = SamplingMode::TemporalImportance;
  const auto imp = estimate_second_moment_fractional(q, k, heat, one, modes);
  modes.mode = SamplingMode::Uniform;
  modes.seed = opt.seed + 1;
  const auto uni = estimate_second_moment_fractional(q, k, heat, one, modes);
  const double combined = std::hypot(imp.std_error, uni.std_error);
  out.push_back(make_check("mode-consistency-z", detail::abs_z(imp.value, uni.value, combined), Rule::AtMost, 3.0));
  return out;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"poisson-law", "conditional-uniformity", "integral-identity", "inner-product",
                                              "estimator-identities"};
  return names;
}

/// Runs one suite by name, or every suite for "all"; check names are
/// prefixed with the suite name.
inline std::vector<Check> run_suite(const std::string& name, const SuiteOptions& opt = {}) {
  auto tagged = [](const std::string& suite, std::vector<Check> checks) {
    for (auto& c : checks) c.name = suite + "/" + c.name;
    return checks;
  };
  if (name == "all") {
    std::vector<Check> out;
    for (const auto& s : suite_names()) {
      auto part = run_suite(s, opt);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  if (name == "poisson-law") return tagged(name, poisson_law(opt));
  if (name == "conditional-uniformity") return tagged(name, conditional_uniformity(opt));
  if (name == "integral-identity") return tagged(name, integral_identity(opt));
  if (name == "inner-product") return tagged(name, inner_product(opt));
  if (name == "estimator-identities") return tagged(name, estimator_identities(opt));
  throw std::invalid_argument("unknown verify suite '" + name + "'");
}

}  // namespace fkmoment::verify

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fkmoment/errors.hpp"
#include "fkmoment/kernels.hpp"
#include "fkmoment/parallel.hpp"
#include "fkmoment/random.hpp"
#include "fkmoment/statistics.hpp"

namespace fkmoment {

/// A point (tau, rho) of the unit square.
struct PlanePoint {
  double tau;
  double rho;
};

/// Half-open rectangle (a, b] x (c, d] inside [0, 1]^2.
class Rectangle {
 public:
  Rectangle(double a, double b, double c, double d) : a_(a), b_(b), c_(c), d_(d) {
    if (!(0.0 <= a && a < b && b <= 1.0 && 0.0 <= c && c < d && d <= 1.0))
      throw std::invalid_argument("rectangle must satisfy 0 <= a < b <= 1 and 0 <= c < d <= 1");
  }

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double c() const noexcept { return c_; }
  double d() const noexcept { return d_; }
  double area() const noexcept { return (b_ - a_) * (d_ - c_); }

  bool contains(PlanePoint p) const noexcept { return p.tau > a_ && p.tau <= b_ && p.rho > c_ && p.rho <= d_; }

 private:
  double a_, b_, c_, d_;
};

/// One realization of the planar Poisson process on [0, 1]^2: a Poisson
/// number of i.i.d. uniform points.
struct PlanarRealization {
  double rate = 1.0;
  std::vector<PlanePoint> points;

  std::size_t total_count() const noexcept { return points.size(); }

  /// N_{t,s} = #{i : tau_i <= t, rho_i <= s}. Vanishes on the axes.
  std::size_t count_below(double t, double s) const noexcept {
    if (t <= 0.0 || s <= 0.0) return 0;
    return static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [&](PlanePoint p) { return p.tau <= t && p.rho <= s; }));
  }
};

inline PlanarRealization sample_global(double rate, Stream& rng) {
  if (!(rate > 0.0)) throw std::invalid_argument("Poisson rate must be positive");
  PlanarRealization out;
  out.rate = rate;
  const unsigned total = rng.poisson(rate);
  out.points.reserve(total);
  for (unsigned i = 0; i < total; ++i) {
    const double tau = rng.uniform();
    const double rho = rng.uniform();
    out.points.push_back({tau, rho});
  }
  return out;
}

/// N_R from the corner counts: N_{a,c} + N_{b,d} - N_{a,d} - N_{b,c}.
inline std::size_t count_rectangle(const PlanarRealization& pr, const Rectangle& r) {
  const auto n_ac = static_cast<long long>(pr.count_below(r.a(), r.c()));
  const auto n_bd = static_cast<long long>(pr.count_below(r.b(), r.d()));
  const auto n_ad = static_cast<long long>(pr.count_below(r.a(), r.d()));
  const auto n_bc = static_cast<long long>(pr.count_below(r.b(), r.c()));
  return static_cast<std::size_t>(n_ac + n_bd - n_ad - n_bc);
}

enum class SamplingMode { Uniform, TemporalImportance };

inline const char* to_string(SamplingMode m) {
  return m == SamplingMode::Uniform ? "uniform" : "importance";
}

/// The points of a planar Poisson process inside [0, t] x [0, s].
///
/// In Uniform mode the points are uniform on the rectangle and each point
/// carries the temporal factor eta(t - tau, s - rho) explicitly. In
/// TemporalImportance mode the points are drawn with density proportional to
/// that factor, and every point carries the same constant weight
/// eta_mass(t, s) / (t s) in its place.
struct RestrictedPointSample {
  double t = 0.0;
  double s = 0.0;
  std::vector<PlanePoint> points;
  SamplingMode mode = SamplingMode::Uniform;
  double per_point_weight = 1.0;

  std::size_t count() const noexcept { return points.size(); }

  /// Largest tau among the points; 0 when there are none.
  double tau_star() const noexcept {
    double m = 0.0;
    for (auto p : points) m = std::max(m, p.tau);
    return m;
  }
  double rho_star() const noexcept {
    double m = 0.0;
    for (auto p : points) m = std::max(m, p.rho);
    return m;
  }
};

inline void check_horizon(double t, double s) {
  if (!(t > 0.0 && t <= 1.0 && s > 0.0 && s <= 1.0))
    throw std::invalid_argument("restricted sampling needs 0 < t <= 1 and 0 < s <= 1");
}

/// Restriction of the rate-lambda planar process to [0, t] x [0, s], drawn
/// directly: K ~ Poisson(lambda t s), then K uniform points.
inline RestrictedPointSample sample_restricted(double t, double s, double rate, Stream& rng) {
  check_horizon(t, s);
  if (!(rate > 0.0)) throw std::invalid_argument("Poisson rate must be positive");
  RestrictedPointSample out;
  out.t = t;
  out.s = s;
  const unsigned k = rng.poisson(rate * t * s);
  out.points.reserve(k);
  for (unsigned i = 0; i < k; ++i) {
    const double tau = rng.uniform(0.0, t);
    const double rho = rng.uniform(0.0, s);
    out.points.push_back({tau, rho});
  }
  return out;
}

namespace detail {

// Marginal of the elapsed time u = t - tau under the tilted density
// q(u, v) = alpha_H |u - v|^(p-1) / C on [0,t] x [0,s], p = 2H - 1, up to the
// factor 1/C:
//   m(u) = H (u^p + (s-u)^p)   for 0 <= u < s,
//   m(u) = H (u^p - (u-s)^p)   for u >= s.
inline double tilted_marginal(double u, double s, double hurst) {
  const double p = 2.0 * hurst - 1.0;
  if (u < s) return hurst * (std::pow(u, p) + std::pow(s - u, p));
  return hurst * (std::pow(u, p) - std::pow(u - s, p));
}

// sup of m over [0, t]. On [0, s) the map u -> u^p + (s-u)^p is concave and
// symmetric about s/2, so its maximum over [0, min(t, s)) sits at
// min(t, s/2). On [s, t] the derivative p (u^(p-1) - (u-s)^(p-1)) is negative,
// so the maximum there is the left endpoint value H s^p, which never exceeds
// the concave-branch maximum.
inline double tilted_marginal_sup(double t, double s, double hurst) {
  return tilted_marginal(std::min(t, 0.5 * s), s, hurst);
}

// Inverse CDF of v | u with density proportional to |u - v|^(p-1) on [0, s].
inline double sample_tilted_conditional(double u, double s, double p, Stream& rng) {
  const double left_end = std::min(u, s);
  // mass on [0, left_end]: (u^p - (u - left_end)^p) / p
  const double left = (std::pow(u, p) - std::pow(u - left_end, p)) / p;
  const double right = u < s ? std::pow(s - u, p) / p : 0.0;
  const double x = rng.uniform() * (left + right);
  double v;
  if (x < left) {
    v = u - std::pow(std::max(std::pow(u, p) - p * x, 0.0), 1.0 / p);
  } else {
    v = u + std::pow(p * (x - left), 1.0 / p);
  }
  return std::clamp(v, 0.0, s);
}

}  // namespace detail

/// One point (tau, rho) in [0,t] x [0,s] with density
/// eta(t - tau, s - rho) / eta_mass(t, s). Elapsed time u = t - tau is drawn
/// from its marginal by rejection against a uniform proposal, then
/// v = s - rho from the conditional by inverse CDF.
inline PlanePoint sample_temporal_importance(double t, double s, const TemporalKernel& k, Stream& rng) {
  if (!(t > 0.0 && s > 0.0)) throw std::invalid_argument("importance sampling needs t > 0 and s > 0");
  const double h = k.hurst();
  const double bound = detail::tilted_marginal_sup(t, s, h);
  constexpr int max_iterations = 1'000'000;
  for (int it = 0; it < max_iterations; ++it) {
    const double u = rng.uniform(0.0, t);
    if (rng.uniform() * bound <= detail::tilted_marginal(u, s, h)) {
      const double v = detail::sample_tilted_conditional(u, s, k.exponent(), rng);
      return {t - u, s - v};
    }
  }
  throw NumericError("importance sampler: rejection loop exceeded its iteration cap");
}

/// Restricted sample whose points follow the tilted density.
inline RestrictedPointSample sample_restricted_importance(double t, double s, double rate, const TemporalKernel& k,
                                                          Stream& rng) {
  check_horizon(t, s);
  if (!(rate > 0.0)) throw std::invalid_argument("Poisson rate must be positive");
  RestrictedPointSample out;
  out.t = t;
  out.s = s;
  out.mode = SamplingMode::TemporalImportance;
  out.per_point_weight = k.mass(t, s) / (t * s);
  const unsigned count = rng.poisson(rate * t * s);
  out.points.reserve(count);
  for (unsigned i = 0; i < count; ++i) out.points.push_back(sample_temporal_importance(t, s, k, rng));
  return out;
}

/// Jump times of a rate-lambda Poisson process on [0, t], increasing.
inline std::vector<double> sample_linear_jump_times(double t, double rate, Stream& rng) {
  if (!(t > 0.0)) throw std::invalid_argument("jump times need t > 0");
  if (!(rate > 0.0)) throw std::invalid_argument("Poisson rate must be positive");
  const unsigned n = rng.poisson(rate * t);
  std::vector<double> times(n);
  for (auto& x : times) x = rng.uniform(0.0, t);
  std::sort(times.begin(), times.end());
  // Ties have probability zero; keep the output strictly increasing anyway.
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

/// Monte Carlo value of the 2n-dimensional integral of a symmetric F over
/// [0,t]^n x [0,s]^n through the planar Poisson identity
///   integral = n! e^{ts} E[ F((t - tau_j, s - rho_j)_j) 1{K = n} ].
/// F receives the n pairs (t - tau_j, s - rho_j).
template <class Integrand>
ScalarEstimate mc_hypercube_integral(Integrand&& integrand, std::size_t n, double t, double s,
                                     std::size_t replicates, std::uint64_t seed, std::size_t workers = 1) {
  if (n == 0) throw std::invalid_argument("hypercube integral needs n >= 1");
  if (replicates < 2) throw std::invalid_argument("hypercube integral needs at least two replicates");
  double n_factorial = 1.0;
  for (std::size_t i = 2; i <= n; ++i) n_factorial *= static_cast<double>(i);
  const double scale = n_factorial * std::exp(t * s);
  std::vector<double> values(replicates, 0.0);
  parallel_for(replicates, workers, [&](std::size_t i) {
    Stream rng = Stream::substream(seed, i);
    const RestrictedPointSample sample = sample_restricted(t, s, 1.0, rng);
    if (sample.count() != n) return;
    std::vector<PlanePoint> reflected(n);
    for (std::size_t j = 0; j < n; ++j) reflected[j] = {t - sample.points[j].tau, s - sample.points[j].rho};
    values[i] = scale * integrand(std::span<const PlanePoint>(reflected));
  });
  return sample_mean(values);
}

}  // namespace fkmoment

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fkmoment/errors.hpp"
#include "fkmoment/gaussian_paths.hpp"
#include "fkmoment/kernels.hpp"
#include "fkmoment/parallel.hpp"
#include "fkmoment/quadrature.hpp"

namespace fkmoment {

/// The pair of space-time arguments (t, x), (s, y) of the second moment.
struct QueryPoint {
  double t = 0.0;
  double s = 0.0;
  Point x;
  Point y;

  std::size_t dim() const noexcept { return x.size(); }

  void validate(std::size_t expected_dim) const {
    if (!(t >= 0.0 && t <= 1.0 && s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("query times must lie in [0, 1]");
    if (x.size() != expected_dim || y.size() != expected_dim)
      throw std::invalid_argument("query points must have the kernel's dimension");
  }

  Point offset() const {
    Point o(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] - y[i];
    return o;
  }
};

/// Truncated chaos series for E[u(t,x) u(s,y)].
struct SeriesResult {
  double zeroth_term = 0.0;
  std::vector<double> order_terms;  // order_terms[n-1] = alpha_n / n!
  double tail_estimate = 0.0;       // +inf when the terms are not decreasing
  bool tail_is_heuristic = true;
  double total = 0.0;
  std::vector<std::size_t> levels;       // quadrature level at convergence, per order
  std::vector<double> last_differences;  // |I_level - I_(level-1)| per order
};

/// Geometric extrapolation of the remainder of a series from its last two
/// terms: r = last / previous clamped to [0, 0.9], tail = last r / (1 - r).
/// Returns +infinity when the terms are not decreasing.
inline double truncation_tail(std::span<const double> terms) {
  if (terms.empty()) return std::numeric_limits<double>::infinity();
  const double last = terms.back();
  if (last == 0.0) return 0.0;
  if (terms.size() < 2) return std::numeric_limits<double>::infinity();
  const double previous = terms[terms.size() - 2];
  if (!(previous > 0.0) || !(last > 0.0) || last >= previous) return std::numeric_limits<double>::infinity();
  const double r = std::clamp(last / previous, 0.0, 0.9);
  return last * r / (1.0 - r);
}

namespace detail {

inline void require_closed_form(const SpatialKernel& f, const InitialCondition& u0) {
  if (f.is<ZeroKernel>()) return;
  if (!f.is<HeatKernel>() || !u0.is_constant()) {
    throw CapabilityError("closed-form chaos terms need a heat spatial kernel and a constant initial condition (got " +
                          f.name() + " kernel" + (u0.is_constant() ? "" : ", non-constant initial condition") +
                          "); use the Monte Carlo estimator instead");
  }
}

// c^2 E[prod_j p_h(o + W1(a_j) - W2(b_j))] for a fixed number of pairs.
template <int N>
double heat_pair_product(const std::array<double, N>& a, const std::array<double, N>& b, double h, std::size_t d,
                         double offset_sq) {
  Eigen::Matrix<double, N, N> m;
  for (int j = 0; j < N; ++j)
    for (int k = 0; k < N; ++k) m(j, k) = std::min(a[j], a[k]) + std::min(b[j], b[k]);
  return gaussian_product_from_covariance(m, h, d, offset_sq);
}

struct TermReport {
  double value = 0.0;
  std::size_t level = 0;
  double last_difference = 0.0;
};

}  // namespace detail

/// Spatial inner product of the chaos kernels at Brownian times t_times,
/// s_times (elapsed from t and s), in closed form:
///   E[w(t - t*, B1(t*)) w(s - s*, B2(s*)) prod_j f(B1(t_j) - B2(s_j))]
/// for B1 from x and B2 from y. Needs f = heat kernel (or zero) and a constant
/// initial condition, for which the w factors equal c^2.
inline double inner_product_closed_form(std::span<const double> t_times, std::span<const double> s_times,
                                        const QueryPoint& q, const SpatialKernel& f, const InitialCondition& u0) {
  if (t_times.size() != s_times.size()) throw std::invalid_argument("time lists must have equal length");
  q.validate(f.dim());
  if (t_times.empty()) return u0(q.t, q.x) * u0(q.s, q.y);
  detail::require_closed_form(f, u0);
  if (f.is<ZeroKernel>()) return 0.0;
  const double c = u0.amplitude();
  const double h = std::get<HeatKernel>(f.variant()).bandwidth;
  const Point o = q.offset();
  return c * c * gaussian_product_expectation(difference_covariance(t_times, s_times), h, f.dim(), o);
}

struct QuadratureOptions {
  /// Relative tolerance between successive refinements.
  double tol = 1e-5;
  /// Differences are measured relative to max(|I|, abs_floor).
  double abs_floor = 0.0;
  /// Largest rule evaluated, as a count of distinct integrand evaluations.
  double max_evaluations = 4e8;
  std::size_t max_level = 16;
  std::size_t workers = 1;
};

namespace detail {

// Symmetric tensor-product sum over the n pairs: only index multisets
// i1 <= i2 <= ... are evaluated, each weighted by its number of orderings.
template <int N>
double tensor_sum(std::span<const quadrature::SingularNode> nodes, double h, std::size_t d, double offset_sq,
                  std::size_t workers) {
  const std::size_t m = nodes.size();
  std::vector<double> partial(m, 0.0);
  parallel_for(m, workers, [&](std::size_t i) {
    std::array<double, N> a{}, b{};
    a[0] = nodes[i].a;
    b[0] = nodes[i].b;
    const double wi = nodes[i].weight;
    double acc = 0.0;
    if constexpr (N == 1) {
      acc = wi * heat_pair_product<1>(a, b, h, d, offset_sq);
    } else if constexpr (N == 2) {
      for (std::size_t j = i; j < m; ++j) {
        a[1] = nodes[j].a;
        b[1] = nodes[j].b;
        const double mult = (j == i) ? 1.0 : 2.0;
        acc += mult * wi * nodes[j].weight * heat_pair_product<2>(a, b, h, d, offset_sq);
      }
    } else {
      for (std::size_t j = i; j < m; ++j) {
        a[1] = nodes[j].a;
        b[1] = nodes[j].b;
        const double wij = wi * nodes[j].weight;
        for (std::size_t k = j; k < m; ++k) {
          a[2] = nodes[k].a;
          b[2] = nodes[k].b;
          double mult;
          if (i == j && j == k) mult = 1.0;
          else if (i == j || j == k) mult = 3.0;
          else mult = 6.0;
          acc += mult * wij * nodes[k].weight * heat_pair_product<3>(a, b, h, d, offset_sq);
        }
      }
    }
    partial[i] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

inline double multiset_count(double m, std::size_t n) {
  double c = 1.0;
  for (std::size_t j = 0; j < n; ++j) c *= (m + static_cast<double>(j)) / static_cast<double>(j + 1);
  return c;
}

template <class Evaluate, class Cost>
TermReport refine_until_converged(Evaluate&& evaluate, Cost&& cost, const QuadratureOptions& opt, const char* what) {
  double previous = 0.0;
  bool have_previous = false;
  for (std::size_t level = 0; level <= opt.max_level; ++level) {
    if (cost(level) > opt.max_evaluations) break;
    const double current = evaluate(level);
    if (have_previous) {
      const double diff = std::abs(current - previous);
      if (diff <= opt.tol * std::max(std::abs(current), opt.abs_floor)) return {current, level, diff};
    }
    previous = current;
    have_previous = true;
    if (current == 0.0 && level > 0) return {0.0, level, 0.0};
  }
  std::ostringstream msg;
  msg.precision(17);
  msg << what << ": quadrature did not converge to tol " << opt.tol << " within the evaluation budget";
  if (have_previous) msg << " (last iterate " << previous << ")";
  throw NumericError(msg.str());
}

}  // namespace detail

struct AlphaReport {
  double value = 0.0;
  std::size_t level = 0;
  double last_difference = 0.0;
};

/// alpha_n: the integral over [0,t]^n x [0,s]^n of prod_j eta(t - a_j, s - b_j)
/// times the closed-form inner product at Brownian times (a_j), (b_j).
/// Tensor product of the diagonal-graded pair rule, refined until two
/// successive levels agree to the tolerance.
inline AlphaReport alpha_n_quadrature(std::size_t n, const QueryPoint& q, const TemporalKernel& k,
                                      const SpatialKernel& f, const InitialCondition& u0,
                                      const QuadratureOptions& opt = {}) {
  if (n < 1 || n > 3) throw std::invalid_argument("alpha_n quadrature supports orders 1..3");
  q.validate(f.dim());
  detail::require_closed_form(f, u0);
  if (f.is<ZeroKernel>() || q.t == 0.0 || q.s == 0.0) return {0.0, 0, 0.0};
  const double c = u0.amplitude();
  const double h = std::get<HeatKernel>(f.variant()).bandwidth;
  const double offset_sq = squared_norm(q.offset());
  const std::size_t d = f.dim();
  // The integral is symmetric in (t, s); ordering them makes the computed
  // value exactly symmetric as well.
  const double lo = std::min(q.t, q.s);
  const double hi = std::max(q.t, q.s);
  auto evaluate = [&](std::size_t level) {
    const auto nodes = quadrature::diagonal_singular_rule(k, lo, hi, level);
    double sum = 0.0;
    if (n == 1) sum = detail::tensor_sum<1>(nodes, h, d, offset_sq, opt.workers);
    else if (n == 2) sum = detail::tensor_sum<2>(nodes, h, d, offset_sq, opt.workers);
    else sum = detail::tensor_sum<3>(nodes, h, d, offset_sq, opt.workers);
    return c * c * sum;
  };
  auto cost = [&](std::size_t level) {
    const double m = static_cast<double>(quadrature::diagonal_singular_rule(k, lo, hi, level).size());
    return detail::multiset_count(m, n);
  };
  const auto r = detail::refine_until_converged(evaluate, cost, opt, "alpha_n");
  return {r.value, r.level, r.last_difference};
}

/// Order-n term of the white-in-time series: the integral over the simplex
/// 0 < a_1 < ... < a_n < t of the closed-form expectation with both Brownian
/// motions read at the same times.
inline AlphaReport white_noise_order_term(std::size_t n, double t, std::span<const double> x,
                                          std::span<const double> y, const SpatialKernel& f,
                                          const InitialCondition& u0, const QuadratureOptions& opt = {}) {
  if (n < 1 || n > 3) throw std::invalid_argument("white-noise order terms support orders 1..3");
  if (!(t > 0.0)) throw std::invalid_argument("white-noise order terms need t > 0");
  if (x.size() != f.dim() || y.size() != f.dim()) throw std::invalid_argument("query points must match the kernel dimension");
  detail::require_closed_form(f, u0);
  if (f.is<ZeroKernel>()) return {0.0, 0, 0.0};
  const double c = u0.amplitude();
  const double h = std::get<HeatKernel>(f.variant()).bandwidth;
  double offset_sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) offset_sq += (x[i] - y[i]) * (x[i] - y[i]);
  const std::size_t d = f.dim();
  auto evaluate = [&](std::size_t level) {
    const std::size_t cells = std::size_t{1} << level;
    return c * c * quadrature::integrate_simplex(n, t, cells, [&](std::span<const double> a) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
          m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = 2.0 * std::min(a[j], a[k]);
      return detail::gaussian_product_from_covariance(m, h, d, offset_sq);
    });
  };
  auto cost = [&](std::size_t level) {
    return std::pow(static_cast<double>(quadrature::kOrder << level), static_cast<double>(n));
  };
  const auto r = detail::refine_until_converged(evaluate, cost, opt, "white-noise order term");
  return {r.value, r.level, r.last_difference};
}

namespace detail {

inline double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

inline void finish_series(SeriesResult& out) {
  out.tail_estimate = out.order_terms.empty() ? 0.0 : truncation_tail(out.order_terms);
  const bool all_zero = std::all_of(out.order_terms.begin(), out.order_terms.end(), [](double v) { return v == 0.0; });
  if (all_zero) out.tail_estimate = 0.0;
  out.total = out.zeroth_term;
  for (double v : out.order_terms) out.total += v;
}

}  // namespace detail

/// Truncated chaos series w(t,x) w(s,y) + sum_{n <= n_max} alpha_n / n!.
/// The tolerance applies to each term relative to max(|term|, |zeroth term|),
/// i.e. every term is resolved to tol relative to the size of the moment.
inline SeriesResult second_moment_series(const QueryPoint& q, const TemporalKernel& k, const SpatialKernel& f,
                                         const InitialCondition& u0, std::size_t n_max, double tol,
                                         std::size_t workers = 1) {
  if (n_max > 3) throw std::invalid_argument("the chaos series is truncated at order 3 at most");
  q.validate(f.dim());
  SeriesResult out;
  out.zeroth_term = u0(q.t, q.x) * u0(q.s, q.y);
  if (n_max > 0 && !(q.t == 0.0 || q.s == 0.0 || f.is<ZeroKernel>())) detail::require_closed_form(f, u0);
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double nf = detail::factorial(n);
    QuadratureOptions opt;
    opt.tol = tol;
    opt.abs_floor = std::abs(out.zeroth_term) * nf;
    opt.workers = workers;
    const AlphaReport r = alpha_n_quadrature(n, q, k, f, u0, opt);
    out.order_terms.push_back(r.value / nf);
    out.levels.push_back(r.level);
    out.last_differences.push_back(r.last_difference / nf);
  }
  detail::finish_series(out);
  return out;
}

/// White-in-time analogue: w(t,x) w(t,y) + sum_{n <= n_max} J_n.
inline SeriesResult white_noise_series(double t, std::span<const double> x, std::span<const double> y,
                                       const SpatialKernel& f, const InitialCondition& u0, std::size_t n_max,
                                       double tol) {
  if (n_max > 3) throw std::invalid_argument("the chaos series is truncated at order 3 at most");
  SeriesResult out;
  out.zeroth_term = u0(t, x) * u0(t, y);
  for (std::size_t n = 1; n <= n_max && t > 0.0; ++n) {
    QuadratureOptions opt;
    opt.tol = tol;
    opt.abs_floor = std::abs(out.zeroth_term);
    const AlphaReport r = white_noise_order_term(n, t, x, y, f, u0, opt);
    out.order_terms.push_back(r.value);
    out.levels.push_back(r.level);
    out.last_differences.push_back(r.last_difference);
  }
  detail::finish_series(out);
  return out;
}

}  // namespace fkmoment

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "fkmoment/kernels.hpp"

namespace fkmoment::quadrature {

inline constexpr std::size_t kOrder = 8;

/// Gauss-Legendre nodes and weights of order 8 on [0, 1].
inline const std::array<std::pair<double, double>, kOrder>& unit_gauss_legendre() {
  static const auto table = [] {
    using GL = boost::math::quadrature::gauss<double, kOrder>;
    std::array<std::pair<double, double>, kOrder> out{};
    const auto& x = GL::abscissa();
    const auto& w = GL::weights();
    std::size_t k = 0;
    // boost stores the non-negative half; order 8 has no zero node.
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[k++] = {0.5 - 0.5 * x[i], 0.5 * w[i]};
      out[k++] = {0.5 + 0.5 * x[i], 0.5 * w[i]};
    }
    std::sort(out.begin(), out.end());
    return out;
  }();
  return table;
}

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }

  void append_cell(double lo, double hi) {
    const double len = hi - lo;
    for (auto [x, w] : unit_gauss_legendre()) {
      nodes.push_back(lo + len * x);
      weights.push_back(len * w);
    }
  }

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

/// Composite order-8 rule with `cells` equal cells on [lo, hi].
inline Rule1D composite(double lo, double hi, std::size_t cells) {
  Rule1D r;
  if (hi <= lo) return r;
  for (std::size_t c = 0; c < cells; ++c)
    r.append_cell(lo + (hi - lo) * static_cast<double>(c) / static_cast<double>(cells),
                  lo + (hi - lo) * static_cast<double>(c + 1) / static_cast<double>(cells));
  return r;
}

/// Composite rule on [lo, hi] with dyadic cells shrinking toward `toward`
/// (which must be lo or hi): cell k spans a 2^-(k+1)..2^-k fraction of the
/// interval measured from that end, down to 2^-levels; the last cell touches it.
inline Rule1D graded(double lo, double hi, bool toward_lo, std::size_t levels) {
  Rule1D r;
  if (hi <= lo) return r;
  const double len = hi - lo;
  auto span_at = [&](double f0, double f1) {
    if (toward_lo) r.append_cell(lo + len * f0, lo + len * f1);
    else r.append_cell(hi - len * f1, hi - len * f0);
  };
  double outer = 1.0;
  for (std::size_t k = 0; k < levels; ++k) {
    span_at(0.5 * outer, outer);
    outer *= 0.5;
  }
  span_at(0.0, outer);
  return r;
}

/// Interval graded toward both of its ends.
inline Rule1D graded_both(double lo, double hi, std::size_t levels) {
  Rule1D r = graded(lo, 0.5 * (lo + hi), true, levels);
  Rule1D right = graded(0.5 * (lo + hi), hi, false, levels);
  r.nodes.insert(r.nodes.end(), right.nodes.begin(), right.nodes.end());
  r.weights.insert(r.weights.end(), right.weights.begin(), right.weights.end());
  return r;
}

/// Gauss-Jacobi rule on [0, 1] for the weight r^(p-1), by Golub-Welsch on
/// the Jacobi matrix of (1 - x)^0 (1 + x)^(p-1). Positive weights; exact for
/// r^(p-1) times any polynomial of degree 15.
inline Rule1D power_weight_rule(double p) {
  const double b = p - 1.0;
  Eigen::Matrix<double, kOrder, kOrder> jacobi = Eigen::Matrix<double, kOrder, kOrder>::Zero();
  for (std::size_t i = 0; i < kOrder; ++i) {
    const double k = static_cast<double>(i);
    const double two_k_b = 2.0 * k + b;
    // (b^2 - a^2) / ((2k+a+b)(2k+a+b+2)) with a = 0, simplified at k = 0.
    const auto ii = static_cast<Eigen::Index>(i);
    jacobi(ii, ii) = i == 0 ? b / (b + 2.0) : b * b / (two_k_b * (two_k_b + 2.0));
    if (i + 1 < kOrder) {
      const double m = k + 1.0;
      const double d = 2.0 * m + b;
      const double beta = 4.0 * m * m * (m + b) * (m + b) / (d * d * (d + 1.0) * (d - 1.0));
      jacobi(ii, ii + 1) = jacobi(ii + 1, ii) = std::sqrt(beta);
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, kOrder, kOrder>> eig(jacobi);
  Rule1D r;
  for (std::size_t i = 0; i < kOrder; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    r.nodes.push_back(0.5 * (1.0 + eig.eigenvalues()(ii)));
    const double v = eig.eigenvectors()(0, ii);
    r.weights.push_back(v * v / p);  // total mass of r^(p-1) on [0, 1] is 1/p
  }
  return r;
}

/// Node of a two-dimensional rule in Brownian-time coordinates: `a`, `b` are
/// the elapsed times t - X and s - Y of a noise time pair (X, Y), and the
/// weight already contains eta(X, Y).
struct SingularNode {
  double a;
  double b;
  double weight;
};

/// Refinement schedule of the diagonal rule.
struct DiagonalLevel {
  std::size_t grading_levels;  // dyadic cells toward the diagonal
  std::size_t cross_cells;     // cells along the diagonal direction
};

inline DiagonalLevel diagonal_level(std::size_t level) { return {1 + level, 1 + level / 2}; }

/// Rule for integrals of eta(X, Y) g(t - X, s - Y) over [0,t] x [0,s], where
/// g is smooth and eta is singular on X = Y.
///
/// Each side of the diagonal is parameterized by the distance r = |X - Y| and
/// X. In r the cells are graded dyadically toward r = 0; the innermost cell
/// uses the power-weight rule, so the r^(2H-2) factor is integrated exactly
/// against polynomials there, and the outer cells evaluate it pointwise. The
/// extent of X for fixed r has a kink at r = |t - s|, which is a cell
/// boundary.
inline std::vector<SingularNode> diagonal_singular_rule(const TemporalKernel& k, double t, double s,
                                                        std::size_t level) {
  std::vector<SingularNode> out;
  if (!(t > 0.0 && s > 0.0)) return out;
  const DiagonalLevel lv = diagonal_level(level);
  const double p = k.exponent();
  const double alpha = k.alpha();
  const Rule1D endpoint = power_weight_rule(p);

  // Emits nodes for r in [r0, r1], X in [x_lo(r), x_hi(r)], Y = X + sign * r.
  auto emit_band = [&](double r0, double r1, double sign, auto&& x_lo, auto&& x_hi) {
    if (r1 <= r0) return;
    Rule1D r_rule;
    if (r0 == 0.0) {
      r_rule = graded(r0, r1, true, lv.grading_levels);
      // Replace the innermost cell's pointwise evaluation by the power-weight rule.
      const std::size_t inner_start = r_rule.size() - kOrder;
      double inner = r1;
      for (std::size_t g = 0; g < lv.grading_levels; ++g) inner *= 0.5;
      r_rule.nodes.resize(inner_start);
      r_rule.weights.resize(inner_start);
      for (std::size_t i = 0; i < r_rule.size(); ++i) r_rule.weights[i] *= std::pow(r_rule.nodes[i], p - 1.0);
      const double scale = std::pow(inner, p);
      for (std::size_t i = 0; i < endpoint.size(); ++i) {
        r_rule.nodes.push_back(inner * endpoint.nodes[i]);
        r_rule.weights.push_back(scale * endpoint.weights[i]);
      }
    } else {
      r_rule = composite(r0, r1, lv.cross_cells);
      for (std::size_t i = 0; i < r_rule.size(); ++i) r_rule.weights[i] *= std::pow(r_rule.nodes[i], p - 1.0);
    }
    for (std::size_t i = 0; i < r_rule.size(); ++i) {
      const double r = r_rule.nodes[i];
      const double lo = x_lo(r);
      const double hi = x_hi(r);
      if (hi <= lo) continue;
      const Rule1D x_rule = composite(lo, hi, lv.cross_cells);
      for (std::size_t j = 0; j < x_rule.size(); ++j) {
        const double x = x_rule.nodes[j];
        const double y = x + sign * r;
        out.push_back({t - x, s - y, alpha * r_rule.weights[i] * x_rule.weights[j]});
      }
    }
  };

  // Below the diagonal: Y = X - r, X in [r, min(t, s + r)].
  auto lo_below = [](double r) { return r; };
  auto hi_below = [t, s](double r) { return std::min(t, s + r); };
  const double kink_below = t > s ? t - s : t;
  emit_band(0.0, kink_below, -1.0, lo_below, hi_below);
  emit_band(kink_below, t, -1.0, lo_below, hi_below);

  // Above the diagonal: Y = X + r, X in [0, min(t, s - r)].
  auto lo_above = [](double) { return 0.0; };
  auto hi_above = [t, s](double r) { return std::min(t, s - r); };
  const double kink_above = s > t ? s - t : s;
  emit_band(0.0, kink_above, 1.0, lo_above, hi_above);
  emit_band(kink_above, s, 1.0, lo_above, hi_above);
  return out;
}

/// Iterated pointwise quadrature of eval_eta over [0,t] x [0,s]. The inner
/// integral is split at the singular point v = u and graded toward it on
/// both sides; the outer integral is graded toward u = 0, u = s and u = t,
/// where the inner integral has power-law behavior.
inline double integrate_eta_graded(const TemporalKernel& k, double t, double s, std::size_t inner_levels,
                                   std::size_t outer_levels) {
  if (!(t > 0.0 && s > 0.0)) return 0.0;
  std::vector<double> breaks{0.0, t};
  if (s < t) breaks.insert(breaks.begin() + 1, s);
  double total = 0.0;
  for (std::size_t piece = 0; piece + 1 < breaks.size(); ++piece) {
    const Rule1D outer = graded_both(breaks[piece], breaks[piece + 1], outer_levels);
    total += outer.integrate([&](double u) {
      // Integrate in the gap r = |u - v| so nodes near the singularity stay
      // representable; eta depends on its arguments only through the gap.
      auto eta_gap = [&](double r) { return k(r, 0.0); };
      if (u >= s) return graded(u - s, u, true, inner_levels).integrate(eta_gap);
      return graded(0.0, u, true, inner_levels).integrate(eta_gap) +
             graded(0.0, s - u, true, inner_levels).integrate(eta_gap);
    });
  }
  return total;
}

/// Default grading: deep enough that the untreated innermost cell of every
/// inner integral carries a fraction below 2^-40 of its mass.
inline double integrate_eta_graded(const TemporalKernel& k, double t, double s) {
  const auto inner = static_cast<std::size_t>(std::min(1000.0, std::ceil(40.0 / k.exponent())));
  return integrate_eta_graded(k, t, s, inner, 40);
}

/// Integral of F over the ordered simplex {0 < a_1 < ... < a_n < t} in
/// collapsed coordinates a_n = t u_n, a_{j-1} = a_j u_{j-1}; the Jacobian is
/// t * a_2 * ... * a_n. F receives the increasing vector (a_1, ..., a_n).
template <class F>
double integrate_simplex(std::size_t n, double t, std::size_t cells, F&& f) {
  if (n == 0) return f(std::span<const double>{});
  const Rule1D rule = composite(0.0, 1.0, cells);
  const std::size_t m = rule.size();
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> a(n);
  double total = 0.0;
  while (true) {
    double jac = t;
    double upper = t;
    double w = 1.0;
    for (std::size_t j = n; j-- > 0;) {
      a[j] = upper * rule.nodes[idx[j]];
      w *= rule.weights[idx[j]];
      if (j + 1 < n) jac *= upper;
      upper = a[j];
    }
    total += w * jac * f(std::span<const double>(a));
    std::size_t pos = 0;
    while (pos < n && ++idx[pos] == m) idx[pos++] = 0;
    if (pos == n) break;
  }
  return total;
}

}  // namespace fkmoment::quadrature

#pragma once

// Brute-force reference computations for the tests. These deliberately use
// different machinery (Boost adaptive quadrature, direct substitutions) from
// the library code they check.

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

inline double gk(auto&& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

inline double heat1(double t, double x) { return std::exp(-x * x / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t); }

// Integral of alpha |u - v|^(2H-2) over [0,t] x [0,s]. The inner integral is
// split at the singular point and handled by tanh-sinh, which tolerates
// endpoint singularities.
inline double eta_mass(double hurst, double t, double s) {
  const double alpha = hurst * (2.0 * hurst - 1.0);
  boost::math::quadrature::tanh_sinh<double> ts;
  // In the gap r = |u - v| the only singularity is at r = 0.
  auto g = [&](double r) { return r > 0.0 ? alpha * std::pow(r, 2.0 * hurst - 2.0) : 0.0; };
  auto piece = [&](double lo, double hi) { return hi - lo > 1e-300 ? ts.integrate(g, lo, hi) : 0.0; };
  auto inner = [&](double u) {
    double acc = piece(std::max(0.0, u - s), u);
    if (u < s) acc += piece(0.0, s - u);
    return acc;
  };
  return gk(inner, 0.0, std::min(s, t)) + (t > s ? gk(inner, s, t) : 0.0);
}

// alpha_1 on the square [0,L]^2 at coincident points, heat kernel bandwidth h,
// unit initial condition, d = 1:
//   int int alpha |a - b|^(2H-2) p_{h + a + b}(0) da db.
// With r = |a - b| and z = r^p (p = 2H - 1), alpha r^(p-1) dr = H dz, which
// removes the singularity; both triangles contribute equally. The outer
// integrand behaves like (side - b)^p at the far end, hence tanh-sinh there.
inline double alpha1_square(double hurst, double side, double h) {
  const double p = 2.0 * hurst - 1.0;
  auto outer = [&](double b) {
    auto inner = [&](double z) {
      const double r = std::pow(z, 1.0 / p);
      return heat1(h + 2.0 * b + r, 0.0);
    };
    return gk(inner, 0.0, std::pow(side - b, p));
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  return 2.0 * hurst * ts.integrate(outer, 0.0, side);
}

// int_0^t p_{h + 2a}(0) da: the first white-noise term at coincident points.
inline double white_term1(double t, double h) {
  return gk([&](double a) { return heat1(h + 2.0 * a, 0.0); }, 0.0, t);
}

// (p_t * g)(x) for a 1-D function g by direct quadrature.
inline double convolve_heat(double t, double x, auto&& g) {
  const double w = 12.0 * std::sqrt(t);
  return gk([&](double z) { return heat1(t, x - z) * g(z); }, x - w, x + w);
}

}  // namespace oracle

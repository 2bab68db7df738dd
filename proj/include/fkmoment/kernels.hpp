#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fkmoment {

using Point = std::vector<double>;

inline double squared_norm(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

/// Fractional-in-time covariance density eta(t, s) = alpha_H |t - s|^(2H - 2),
/// alpha_H = H (2H - 1), for Hurst index H in (1/2, 1).
class TemporalKernel {
 public:
  explicit TemporalKernel(double hurst) : hurst_(hurst) {
    if (!(hurst > 0.5 && hurst < 1.0)) {
      throw std::invalid_argument("Hurst index must lie in the open interval (1/2, 1), got " +
                                  std::to_string(hurst));
    }
    alpha_ = hurst_ * (2.0 * hurst_ - 1.0);
  }

  double hurst() const noexcept { return hurst_; }
  double alpha() const noexcept { return alpha_; }
  /// Exponent 2H - 1 of the integrated kernel; the density decays like |t-s|^(exponent-1).
  double exponent() const noexcept { return 2.0 * hurst_ - 1.0; }

  /// eta(t, s). Throws std::domain_error on the diagonal t == s, where the
  /// kernel has an integrable singularity.
  double operator()(double t, double s) const {
    const double gap = std::abs(t - s);
    if (gap == 0.0) throw std::domain_error("temporal kernel is singular at t == s");
    return alpha_ * std::pow(gap, 2.0 * hurst_ - 2.0);
  }

  /// Closed form of the double integral of eta over [0,t] x [0,s]: the fBm covariance.
  double mass(double t, double s) const {
    const double h2 = 2.0 * hurst_;
    return 0.5 * (std::pow(t, h2) + std::pow(s, h2) - std::pow(std::abs(t - s), h2));
  }

 private:
  double hurst_;
  double alpha_;
};

inline double eval_eta(const TemporalKernel& k, double t, double s) { return k(t, s); }
inline double eta_mass(const TemporalKernel& k, double t, double s) { return k.mass(t, s); }

/// Gaussian transition density p_t(x) = (2 pi t)^(-d/2) exp(-|x|^2 / (2t)).
inline double heat_density(double t, std::span<const double> x) {
  if (!(t > 0.0)) throw std::domain_error("heat density requires t > 0");
  const double d = static_cast<double>(x.size());
  return std::exp(-0.5 * d * std::log(2.0 * std::numbers::pi * t) - squared_norm(x) / (2.0 * t));
}

inline double heat_density(double t, double x) { return heat_density(t, std::span<const double>(&x, 1)); }

// Spatial covariance variants. Constants follow the conventions below; the
// Riesz kernel is deliberately unnormalized.
struct HeatKernel {
  double bandwidth;
};
struct RieszKernel {
  double order;
};
struct PoissonKernel {
  double a;
};
struct ZeroKernel {};

/// Anything the estimators can use as a spatial covariance: evaluable at a
/// point of R^d, with a fixed dimension.
template <class K>
concept SpatialCovariance = requires(const K& k, std::span<const double> x) {
  { k(x) } -> std::convertible_to<double>;
  { k.dim() } -> std::convertible_to<std::size_t>;
};

class SpatialKernel {
 public:
  using Variant = std::variant<HeatKernel, RieszKernel, PoissonKernel, ZeroKernel>;

  SpatialKernel(Variant variant, std::size_t dim) : variant_(variant), dim_(dim) {
    if (dim_ == 0) throw std::invalid_argument("spatial dimension must be positive");
    std::visit([this](const auto& v) { validate(v); }, variant_);
  }

  static SpatialKernel heat(double bandwidth, std::size_t dim) { return {HeatKernel{bandwidth}, dim}; }
  static SpatialKernel riesz(double order, std::size_t dim) { return {RieszKernel{order}, dim}; }
  static SpatialKernel poisson(double a, std::size_t dim) { return {PoissonKernel{a}, dim}; }
  static SpatialKernel zero(std::size_t dim) { return {ZeroKernel{}, dim}; }

  std::size_t dim() const noexcept { return dim_; }
  const Variant& variant() const noexcept { return variant_; }

  template <class V>
  bool is() const noexcept {
    return std::holds_alternative<V>(variant_);
  }

  std::string name() const {
    return std::visit(
        [](const auto& v) -> std::string {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, HeatKernel>) return "heat";
          else if constexpr (std::is_same_v<V, RieszKernel>) return "riesz";
          else if constexpr (std::is_same_v<V, PoissonKernel>) return "poisson";
          else return "zero";
        },
        variant_);
  }

  /// f(x). The Riesz kernel returns +infinity at the origin; callers detect
  /// this with std::isfinite.
  double operator()(std::span<const double> x) const {
    if (x.size() != dim_) throw std::invalid_argument("spatial kernel evaluated at a point of the wrong dimension");
    return std::visit([&](const auto& v) { return evaluate(v, x); }, variant_);
  }

 private:
  void validate(const HeatKernel& v) const {
    if (!(v.bandwidth > 0.0)) throw std::invalid_argument("heat kernel bandwidth must be positive");
  }
  void validate(const RieszKernel& v) const {
    if (!(v.order > 0.0 && v.order < static_cast<double>(dim_)))
      throw std::invalid_argument("Riesz kernel order must satisfy 0 < order < dim");
  }
  void validate(const PoissonKernel& v) const {
    if (!(v.a > 0.0)) throw std::invalid_argument("Poisson kernel parameter must be positive");
  }
  void validate(const ZeroKernel&) const {}

  double evaluate(const HeatKernel& v, std::span<const double> x) const { return heat_density(v.bandwidth, x); }

  double evaluate(const RieszKernel& v, std::span<const double> x) const {
    const double r2 = squared_norm(x);
    if (r2 == 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(r2, 0.5 * (v.order - static_cast<double>(dim_)));
  }

  double evaluate(const PoissonKernel& v, std::span<const double> x) const {
    const double half = 0.5 * (static_cast<double>(dim_) + 1.0);
    const double c = std::exp(std::lgamma(half) - half * std::log(std::numbers::pi));
    return c * v.a / std::pow(v.a * v.a + squared_norm(x), half);
  }

  double evaluate(const ZeroKernel&, std::span<const double>) const { return 0.0; }

  Variant variant_;
  std::size_t dim_;
};

inline double eval_f(const SpatialKernel& k, std::span<const double> x) { return k(x); }

struct ConstantField {
  double value;
};

/// amplitude * exp(-|x - center|^2 / (2 width)).
struct GaussianBump {
  double amplitude;
  Point center;
  double width;
};

/// Bounded continuous initial datum u_0. The heat-semigroup image
/// w(t, x) splits as amplitude() * shape(t, x); estimators accumulate the
/// shape and apply the amplitude once at the end.
class InitialCondition {
 public:
  using Variant = std::variant<ConstantField, GaussianBump>;

  explicit InitialCondition(Variant v) : variant_(std::move(v)) {
    if (auto* bump = std::get_if<GaussianBump>(&variant_)) {
      if (!(bump->width > 0.0)) throw std::invalid_argument("Gaussian bump width must be positive");
      if (bump->center.empty()) throw std::invalid_argument("Gaussian bump center must be non-empty");
    }
  }

  static InitialCondition constant(double c) { return InitialCondition(ConstantField{c}); }
  static InitialCondition bump(double amplitude, Point center, double width) {
    return InitialCondition(GaussianBump{amplitude, std::move(center), width});
  }

  bool is_constant() const noexcept { return std::holds_alternative<ConstantField>(variant_); }
  const Variant& variant() const noexcept { return variant_; }

  double amplitude() const noexcept {
    return std::visit([](const auto& v) {
      if constexpr (std::is_same_v<std::decay_t<decltype(v)>, ConstantField>) return v.value;
      else return v.amplitude;
    }, variant_);
  }

  double shape(double t, std::span<const double> x) const {
    if (t < 0.0) throw std::domain_error("initial field requires t >= 0");
    if (const auto* bump = std::get_if<GaussianBump>(&variant_)) {
      if (x.size() != bump->center.size()) throw std::invalid_argument("initial field evaluated in the wrong dimension");
      double r2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - bump->center[i];
        r2 += dx * dx;
      }
      const double var = bump->width + t;
      const double d = static_cast<double>(x.size());
      return std::pow(bump->width / var, 0.5 * d) * std::exp(-r2 / (2.0 * var));
    }
    return 1.0;
  }

  /// w(t, x) = (p_t * u_0)(x).
  double operator()(double t, std::span<const double> x) const { return amplitude() * shape(t, x); }

 private:
  Variant variant_;
};

inline double initial_field(const InitialCondition& u0, double t, std::span<const double> x) { return u0(t, x); }

/// Warnings for (kernel, dimension) combinations outside the regimes where a
/// square-integrable solution is known to exist. The moment formula is still
/// evaluated as stated.
inline std::vector<std::string> regime_warnings(const SpatialKernel& f) {
  std::vector<std::string> out;
  if (const auto* r = std::get_if<RieszKernel>(&f.variant())) {
    if (static_cast<double>(f.dim()) > 2.0 + r->order) {
      out.push_back("Riesz kernel with dim > 2 + order: no square-integrable solution is known in this regime");
    }
  }
  return out;
}

}  // namespace fkmoment

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "fkmoment/chaos_oracle.hpp"
#include "fkmoment/errors.hpp"
#include "fkmoment/gaussian_paths.hpp"
#include "fkmoment/kernels.hpp"
#include "fkmoment/parallel.hpp"
#include "fkmoment/point_process.hpp"
#include "fkmoment/random.hpp"
#include "fkmoment/statistics.hpp"

namespace fkmoment {

struct EstimatorConfig {
  std::size_t replicates = 100'000;
  std::uint64_t seed = 42;
  SamplingMode mode = SamplingMode::Uniform;
  std::size_t batch_count = 32;
  std::size_t max_order_tracked = 5;
  /// 0 = all hardware threads. Never affects results.
  std::size_t workers = 1;

  void validate() const {
    if (batch_count < 2) throw std::invalid_argument("batch_count must be at least 2");
    if (replicates < batch_count) throw std::invalid_argument("replicates must be at least batch_count");
  }
};

struct OrderContribution {
  std::size_t order = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;  // replicates with exactly `order` points
};

struct EstimateDiagnostics {
  double max_abs_replicate = 0.0;
  double effective_sample_size = 0.0;
  double abs_quantile_999 = 0.0;
  std::size_t singular_hits = 0;
  double naive_std_error = 0.0;
  std::vector<std::string> warnings;
};

struct MomentEstimate {
  double value = 0.0;
  double std_error = 0.0;  // batch means
  std::size_t replicates_used = 0;
  std::vector<OrderContribution> per_order;  // orders 0..max_order_tracked
  double residual = 0.0;                     // value - sum of per_order means
  EstimateDiagnostics diagnostics;
};

/// One replicate before the e^{ts} factor and the initial-condition amplitude.
struct ReplicateDraw {
  double value = 0.0;
  std::size_t count = 0;
  std::size_t singular_hits = 0;
};

namespace detail {

inline constexpr int kMaxSingularRedraws = 1000;

// shape(t - t*, x + W1(t*)) shape(s - s*, y + W2(s*)) prod_j f(x - y + W1(t_j) - W2(s_j)),
// with W1, W2 independent Brownian motions from the origin; t* = max t_j
// (0 for empty lists). Non-finite when f is singular at a sampled point.
template <SpatialCovariance F>
double path_functional(std::span<const double> t_times, std::span<const double> s_times, double t, double s,
                       std::span<const double> x, std::span<const double> y, std::span<const double> offset,
                       const F& f, const InitialCondition& u0, Stream& rng) {
  const std::size_t d = x.size();
  const Point origin(d, 0.0);
  const PathValues w1 = sample_brownian_at(t_times, origin, rng);
  const PathValues w2 = sample_brownian_at(s_times, origin, rng);
  double product = 1.0;
  Point diff(d);
  for (std::size_t j = 0; j < t_times.size(); ++j) {
    const auto a = w1.at(j);
    const auto b = w2.at(j);
    for (std::size_t c = 0; c < d; ++c) diff[c] = offset[c] + (a[c] - b[c]);
    product *= f(std::span<const double>(diff));
  }
  if (u0.is_constant()) return product;
  auto endpoint_shape = [&](const PathValues& w, std::span<const double> times, double horizon,
                            std::span<const double> start) {
    if (times.empty()) return u0.shape(horizon, start);
    const std::size_t last = w.order.back();
    Point pos(d);
    const auto v = w.at(last);
    for (std::size_t c = 0; c < d; ++c) pos[c] = start[c] + v[c];
    return u0.shape(horizon - times[last], pos);
  };
  return endpoint_shape(w1, t_times, t, x) * endpoint_shape(w2, s_times, s, y) * product;
}

template <SpatialCovariance F>
void check_inputs(const QueryPoint& q, const F& f, const InitialCondition& u0) {
  q.validate(f.dim());
  if (const auto* bump = std::get_if<GaussianBump>(&u0.variant())) {
    if (bump->center.size() != f.dim()) throw std::invalid_argument("initial condition dimension mismatch");
  }
}

struct Accumulated {
  std::vector<double> values;
  std::vector<std::uint32_t> counts;
  std::size_t singular_hits = 0;
};

template <class Draw>
Accumulated run_replicates(const EstimatorConfig& cfg, Draw&& draw) {
  Accumulated acc;
  acc.values.assign(cfg.replicates, 0.0);
  acc.counts.assign(cfg.replicates, 0);
  std::vector<std::uint32_t> hits(cfg.replicates, 0);
  parallel_for(cfg.replicates, cfg.workers, [&](std::size_t i) {
    Stream rng = Stream::substream(cfg.seed, i);
    const ReplicateDraw r = draw(rng);
    acc.values[i] = r.value;
    acc.counts[i] = static_cast<std::uint32_t>(r.count);
    hits[i] = static_cast<std::uint32_t>(r.singular_hits);
  });
  for (auto h : hits) acc.singular_hits += h;
  return acc;
}

// Reduction in replicate order. `scale` is the deterministic prefactor
// (e^{ts}, e^t, ...); `amplitude2` the product of initial amplitudes, applied
// last so that scaling the initial condition scales every output exactly.
inline MomentEstimate summarize(const Accumulated& acc, double scale, double amplitude2, const EstimatorConfig& cfg) {
  const std::size_t n = acc.values.size();
  const double nd = static_cast<double>(n);
  MomentEstimate out;
  out.replicates_used = n;
  double sum = 0.0;
  for (double v : acc.values) sum += v;
  out.value = amplitude2 * (scale * (sum / nd));
  out.std_error = std::abs(amplitude2) * (scale * batch_means_stderr(acc.values, cfg.batch_count));
  out.diagnostics.naive_std_error = std::abs(amplitude2) * (scale * sample_mean(acc.values).std_error);

  const std::size_t orders = cfg.max_order_tracked + 1;
  std::vector<double> s1(orders, 0.0), s2(orders, 0.0);
  std::vector<std::size_t> cnt(orders, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = acc.counts[i];
    if (k >= orders) continue;
    s1[k] += acc.values[i];
    s2[k] += acc.values[i] * acc.values[i];
    ++cnt[k];
  }
  double tracked = 0.0;
  for (std::size_t k = 0; k < orders; ++k) {
    const double mean = s1[k] / nd;
    const double var = std::max(0.0, (s2[k] - nd * mean * mean) / (nd - 1.0));
    OrderContribution oc;
    oc.order = k;
    oc.mean = amplitude2 * (scale * mean);
    oc.std_error = std::abs(amplitude2) * (scale * std::sqrt(var / nd));
    oc.count = cnt[k];
    tracked += oc.mean;
    out.per_order.push_back(oc);
  }
  out.residual = out.value - tracked;

  double abs_sum = 0.0, sq_sum = 0.0, max_abs = 0.0;
  std::vector<double> abs_values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::abs(acc.values[i]);
    abs_values[i] = a;
    abs_sum += a;
    sq_sum += a * a;
    max_abs = std::max(max_abs, a);
  }
  const double unit = std::abs(amplitude2) * scale;
  out.diagnostics.max_abs_replicate = unit * max_abs;
  out.diagnostics.effective_sample_size = sq_sum > 0.0 ? abs_sum * abs_sum / sq_sum : 0.0;
  const std::size_t q = std::min(n - 1, static_cast<std::size_t>(std::ceil(0.999 * nd)) - 1);
  std::nth_element(abs_values.begin(), abs_values.begin() + static_cast<std::ptrdiff_t>(q), abs_values.end());
  out.diagnostics.abs_quantile_999 = unit * abs_values[q];
  out.diagnostics.singular_hits = acc.singular_hits;
  return out;
}

template <SpatialCovariance F>
void add_kernel_warnings(EstimateDiagnostics& diag, const F& f) {
  if constexpr (std::is_same_v<F, SpatialKernel>) {
    for (auto& w : regime_warnings(f)) diag.warnings.push_back(w);
  }
}

inline MomentEstimate exact_estimate(double value, const EstimatorConfig& cfg) {
  MomentEstimate out;
  out.value = value;
  for (std::size_t k = 0; k <= cfg.max_order_tracked; ++k) out.per_order.push_back({k, k == 0 ? value : 0.0, 0.0, 0});
  return out;
}

// Points of one restricted sample with their temporal factors multiplied
// into `temporal`. Returns false when a uniform point hits the diagonal.
inline bool temporal_factor(const RestrictedPointSample& sample, const TemporalKernel& k, double& temporal) {
  temporal = 1.0;
  for (const auto& p : sample.points) {
    if (sample.mode == SamplingMode::TemporalImportance) {
      temporal *= sample.per_point_weight;
    } else {
      const double gap = std::abs((sample.t - p.tau) - (sample.s - p.rho));
      if (gap == 0.0) return false;
      temporal *= k.alpha() * std::pow(gap, 2.0 * k.hurst() - 2.0);
    }
  }
  return true;
}

template <SpatialCovariance F>
double sample_functional(const RestrictedPointSample& sample, const QueryPoint& q, std::span<const double> offset,
                         const TemporalKernel& k, const F& f, const InitialCondition& u0, Stream& rng, bool& ok) {
  double temporal = 1.0;
  ok = temporal_factor(sample, k, temporal);
  if (!ok) return 0.0;
  std::vector<double> taus(sample.count()), rhos(sample.count());
  for (std::size_t j = 0; j < sample.count(); ++j) {
    taus[j] = sample.points[j].tau;
    rhos[j] = sample.points[j].rho;
  }
  const double v = temporal * path_functional(taus, rhos, q.t, q.s, q.x, q.y, offset, f, u0, rng);
  ok = std::isfinite(v);
  return v;
}

}  // namespace detail

/// One replicate of the planar-Poisson representation:
///   V = w(t - tau*, B1(tau*)) w(s - rho*, B2(rho*)) prod_{j <= K} eta(t - tau_j, s - rho_j) f(B1(tau_j) - B2(rho_j))
/// over the K points of the rate-1 planar process in [0,t] x [0,s]. The
/// initial amplitude and the factor e^{ts} are left out. Replicates where f
/// is singular (Riesz kernel at a coincidence) are redrawn from the same stream.
template <SpatialCovariance F>
ReplicateDraw fractional_replicate(const QueryPoint& q, const TemporalKernel& k, const F& f,
                                   const InitialCondition& u0, SamplingMode mode, Stream& rng) {
  const Point offset = q.offset();
  ReplicateDraw out;
  for (int attempt = 0; attempt < detail::kMaxSingularRedraws; ++attempt) {
    const RestrictedPointSample sample = mode == SamplingMode::Uniform
                                             ? sample_restricted(q.t, q.s, 1.0, rng)
                                             : sample_restricted_importance(q.t, q.s, 1.0, k, rng);
    bool ok = true;
    const double v = detail::sample_functional(sample, q, offset, k, f, u0, rng, ok);
    if (ok) {
      out.value = v;
      out.count = sample.count();
      return out;
    }
    ++out.singular_hits;
  }
  throw NumericError("replicate kept hitting a singular kernel value; giving up after redraw cap");
}

/// E[u(t,x) u(s,y)] for fractional-in-time noise: e^{ts} times the mean of
/// fractional_replicate, times the squared initial amplitude.
template <SpatialCovariance F>
MomentEstimate estimate_second_moment_fractional(const QueryPoint& q, const TemporalKernel& k, const F& f,
                                                 const InitialCondition& u0, const EstimatorConfig& cfg) {
  cfg.validate();
  detail::check_inputs(q, f, u0);
  if (q.t * q.s == 0.0) return detail::exact_estimate(u0(q.t, q.x) * u0(q.s, q.y), cfg);
  const auto acc = detail::run_replicates(cfg, [&](Stream& rng) { return fractional_replicate(q, k, f, u0, cfg.mode, rng); });
  const double amp = u0.amplitude();
  MomentEstimate out = detail::summarize(acc, std::exp(q.t * q.s), amp * amp, cfg);
  if (cfg.mode == SamplingMode::Uniform && k.hurst() <= 0.75) {
    out.diagnostics.warnings.push_back(
        "uniform sampling with H <= 0.75: the temporal factor has infinite variance; use importance mode");
  }
  detail::add_kernel_warnings(out.diagnostics, f);
  return out;
}

/// One replicate of the white-in-time representation over the jump times
/// of a rate-1 Poisson process on [0, t]; both motions are read at the same times.
template <SpatialCovariance F>
ReplicateDraw white_replicate(double t, std::span<const double> x, std::span<const double> y, const F& f,
                              const InitialCondition& u0, Stream& rng) {
  Point offset(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) offset[i] = x[i] - y[i];
  ReplicateDraw out;
  for (int attempt = 0; attempt < detail::kMaxSingularRedraws; ++attempt) {
    const std::vector<double> times = sample_linear_jump_times(t, 1.0, rng);
    const double v = detail::path_functional(times, times, t, t, x, y, offset, f, u0, rng);
    if (std::isfinite(v)) {
      out.value = v;
      out.count = times.size();
      return out;
    }
    ++out.singular_hits;
  }
  throw NumericError("replicate kept hitting a singular kernel value; giving up after redraw cap");
}

/// E[u(t,x) u(t,y)] for white-in-time noise: e^t times the mean replicate.
template <SpatialCovariance F>
MomentEstimate estimate_second_moment_white(double t, std::span<const double> x, std::span<const double> y,
                                            const F& f, const InitialCondition& u0, const EstimatorConfig& cfg) {
  cfg.validate();
  if (!(t > 0.0)) throw std::invalid_argument("white-noise estimator needs t > 0");
  if (x.size() != f.dim() || y.size() != f.dim()) throw std::invalid_argument("query points must match the kernel dimension");
  const auto acc = detail::run_replicates(cfg, [&](Stream& rng) { return white_replicate(t, x, y, f, u0, rng); });
  const double amp = u0.amplitude();
  MomentEstimate out = detail::summarize(acc, std::exp(t), amp * amp, cfg);
  detail::add_kernel_warnings(out.diagnostics, f);
  return out;
}

/// Direct estimate of the order-n chaos term alpha_n / n!: exactly n points
/// per replicate (uniform or tilted), same integrand as the fractional
/// estimator, mean scaled by (ts)^n / n!.
template <SpatialCovariance F>
ScalarEstimate estimate_order_contribution(std::size_t n, const QueryPoint& q, const TemporalKernel& k, const F& f,
                                           const InitialCondition& u0, const EstimatorConfig& cfg) {
  cfg.validate();
  detail::check_inputs(q, f, u0);
  if (n == 0) return {u0(q.t, q.x) * u0(q.s, q.y), 0.0, 0};
  if (q.t * q.s == 0.0) return {0.0, 0.0, 0};
  const Point offset = q.offset();
  const auto acc = detail::run_replicates(cfg, [&](Stream& rng) {
    ReplicateDraw out;
    for (int attempt = 0; attempt < detail::kMaxSingularRedraws; ++attempt) {
      RestrictedPointSample sample;
      sample.t = q.t;
      sample.s = q.s;
      sample.mode = cfg.mode;
      sample.per_point_weight = cfg.mode == SamplingMode::Uniform ? 1.0 : k.mass(q.t, q.s) / (q.t * q.s);
      for (std::size_t j = 0; j < n; ++j) {
        if (cfg.mode == SamplingMode::Uniform) {
          const double tau = rng.uniform(0.0, q.t);
          const double rho = rng.uniform(0.0, q.s);
          sample.points.push_back({tau, rho});
        } else {
          sample.points.push_back(sample_temporal_importance(q.t, q.s, k, rng));
        }
      }
      bool ok = true;
      const double v = detail::sample_functional(sample, q, offset, k, f, u0, rng, ok);
      if (ok) {
        out.value = v;
        out.count = n;
        return out;
      }
      ++out.singular_hits;
    }
    throw NumericError("replicate kept hitting a singular kernel value; giving up after redraw cap");
  });
  double scale = 1.0;
  for (std::size_t j = 1; j <= n; ++j) scale *= q.t * q.s / static_cast<double>(j);
  const double amp = u0.amplitude();
  double sum = 0.0;
  for (double v : acc.values) sum += v;
  const double mean = sum / static_cast<double>(acc.values.size());
  return {amp * amp * (scale * mean), std::abs(amp * amp) * (scale * batch_means_stderr(acc.values, cfg.batch_count)),
          acc.values.size()};
}

/// Monte Carlo value of the spatial inner product at fixed Brownian times:
/// E[w(t - t*, B1(t*)) w(s - s*, B2(s*)) prod_j f(B1(t_j) - B2(s_j))].
template <SpatialCovariance F>
ScalarEstimate estimate_inner_product_mc(std::span<const double> t_times, std::span<const double> s_times,
                                         const QueryPoint& q, const F& f, const InitialCondition& u0,
                                         const EstimatorConfig& cfg) {
  cfg.validate();
  if (t_times.size() != s_times.size()) throw std::invalid_argument("time lists must have equal length");
  detail::check_inputs(q, f, u0);
  if (t_times.empty()) return {u0(q.t, q.x) * u0(q.s, q.y), 0.0, 0};
  const Point offset = q.offset();
  const auto acc = detail::run_replicates(cfg, [&](Stream& rng) {
    ReplicateDraw out;
    for (int attempt = 0; attempt < detail::kMaxSingularRedraws; ++attempt) {
      const double v = detail::path_functional(t_times, s_times, q.t, q.s, q.x, q.y, offset, f, u0, rng);
      if (std::isfinite(v)) {
        out.value = v;
        out.count = t_times.size();
        return out;
      }
      ++out.singular_hits;
    }
    throw NumericError("replicate kept hitting a singular kernel value; giving up after redraw cap");
  });
  const double amp = u0.amplitude();
  const ScalarEstimate plain = sample_mean(acc.values);
  return {amp * amp * plain.mean, std::abs(amp * amp) * plain.std_error, plain.replicates};
}

}  // namespace fkmoment

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "fkmoment/chaos_oracle.hpp"
#include "fkmoment/cli/config.hpp"
#include "fkmoment/cli/record.hpp"
#include "fkmoment/errors.hpp"
#include "fkmoment/mc_engine.hpp"
#include "fkmoment/verify.hpp"

namespace fkmoment::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericError = 3, kComparisonFailed = 4 };

/// Where records and diagnostics go. Records are the only thing written to
/// `data`; every message, warning and timing goes to `diag`.
struct Streams {
  std::ostream* data = &std::cout;
  std::ostream* diag = &std::cerr;
  std::size_t workers = 0;
};

namespace detail {

using clock = std::chrono::steady_clock;

inline double elapsed_ms(clock::time_point since) {
  return std::chrono::duration<double, std::milli>(clock::now() - since).count();
}

inline MomentEstimate run_estimator(const RunConfig& c, std::size_t workers) {
  const SpatialKernel f = c.spatial_kernel();
  const InitialCondition u0 = c.initial_condition();
  const EstimatorConfig cfg = c.estimator(workers);
  if (c.equation == "white") {
    if (c.t == 0.0) return fkmoment::detail::exact_estimate(u0(0.0, c.x) * u0(0.0, c.y), cfg);
    return estimate_second_moment_white(c.t, c.x, c.y, f, u0, cfg);
  }
  return estimate_second_moment_fractional(c.query(), c.temporal_kernel(), f, u0, cfg);
}

inline SeriesResult run_oracle(const RunConfig& c, std::size_t workers) {
  const SpatialKernel f = c.spatial_kernel();
  const InitialCondition u0 = c.initial_condition();
  if (c.equation == "white") return white_noise_series(c.t, c.x, c.y, f, u0, c.n_max, c.tol);
  return second_moment_series(c.query(), c.temporal_kernel(), f, u0, c.n_max, c.tol, workers);
}

inline void add_estimate_fields(Record& r, const MomentEstimate& e, const std::string& prefix) {
  r.add(prefix + "value", e.value);
  r.add(prefix + "stderr", e.std_error);
  r.add(prefix + "stderr_naive", e.diagnostics.naive_std_error);
  r.add(prefix + "replicates_used", e.replicates_used);
  for (const auto& o : e.per_order) {
    const std::string p = prefix + "per_order." + std::to_string(o.order) + ".";
    r.add(p + "mean", o.mean);
    r.add(p + "stderr", o.std_error);
    r.add(p + "count", o.count);
  }
  r.add(prefix + "residual", e.residual);
  r.add(prefix + "diagnostics.max_abs_replicate", e.diagnostics.max_abs_replicate);
  r.add(prefix + "diagnostics.effective_sample_size", e.diagnostics.effective_sample_size);
  r.add(prefix + "diagnostics.abs_quantile_999", e.diagnostics.abs_quantile_999);
  r.add(prefix + "diagnostics.singular_hits", e.diagnostics.singular_hits);
  r.add(prefix + "diagnostics.warning_count", e.diagnostics.warnings.size());
  for (std::size_t i = 0; i < e.diagnostics.warnings.size(); ++i)
    r.add(prefix + "diagnostics.warning." + std::to_string(i), e.diagnostics.warnings[i]);
}

inline void add_series_fields(Record& r, const SeriesResult& s, const std::string& prefix) {
  r.add(prefix + "zeroth_term", s.zeroth_term);
  for (std::size_t n = 0; n < s.order_terms.size(); ++n) {
    const std::string p = prefix + "order_term." + std::to_string(n + 1);
    r.add(p, s.order_terms[n]);
    if (n < s.levels.size()) r.add(p + ".quadrature_level", s.levels[n]);
    if (n < s.last_differences.size()) r.add(p + ".last_difference", s.last_differences[n]);
  }
  r.add(prefix + "tail_estimate", s.tail_estimate);
  r.add(prefix + "tail_is_heuristic", s.tail_is_heuristic);
  r.add(prefix + "total", s.total);
}

inline void emit_warnings(const MomentEstimate& e, std::ostream& diag) {
  for (const auto& w : e.diagnostics.warnings) diag << "warning: " << w << '\n';
}

inline Record header(const char* kind, const RunConfig& c) {
  Record r;
  r.add("record", kind);
  r.add("equation", c.equation);
  return r;
}

}  // namespace detail

/// Runs `body`, translating exceptions into exit codes and messages on the
/// diagnostic stream.
template <class Body>
int guarded(std::ostream& diag, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    diag << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const CapabilityError& e) {
    diag << "capability error: " << e.what() << '\n';
    return kNumericError;
  } catch (const NumericError& e) {
    diag << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::domain_error& e) {
    diag << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::invalid_argument& e) {
    diag << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    diag << "error: " << e.what() << '\n';
    return kNumericError;
  }
}

inline int cmd_estimate(const RunConfig& c, const Streams& io) {
  return guarded(*io.diag, [&] {
    const auto start = detail::clock::now();
    const MomentEstimate e = detail::run_estimator(c, io.workers);
    const double ms = detail::elapsed_ms(start);
    Record r = detail::header("estimate", c);
    r.add("mode", c.equation == "white" ? std::string("linear-poisson") : c.mode);
    r.add("seed", std::to_string(c.seed));
    detail::add_estimate_fields(r, e, "");
    r.add_config(c);
    detail::emit_warnings(e, *io.diag);
    // Timing stays out of the record so that records are reproducible.
    *io.diag << "wall_time_ms=" << format_short(ms) << '\n';
    r.write(*io.data, c.format);
    return static_cast<int>(kOk);
  });
}

inline int cmd_oracle(const RunConfig& c, const Streams& io) {
  return guarded(*io.diag, [&] {
    const auto start = detail::clock::now();
    const SeriesResult s = detail::run_oracle(c, io.workers);
    const double ms = detail::elapsed_ms(start);
    Record r = detail::header("oracle", c);
    detail::add_series_fields(r, s, "");
    r.add_config(c);
    *io.diag << "wall_time_ms=" << format_short(ms) << '\n';
    r.write(*io.data, c.format);
    return static_cast<int>(kOk);
  });
}

/// Monte Carlo against the oracle: pass when |mc - oracle| <= 3 stderr + tail.
/// An unbounded tail makes the comparison inconclusive, which counts as a failure.
inline int cmd_compare(const RunConfig& c, const Streams& io) {
  return guarded(*io.diag, [&] {
    const auto start = detail::clock::now();
    const SeriesResult s = detail::run_oracle(c, io.workers);
    const MomentEstimate e = detail::run_estimator(c, io.workers);
    const double ms = detail::elapsed_ms(start);
    const double diff = e.value - s.total;
    const double tolerance = 3.0 * e.std_error + s.tail_estimate;
    double z = 0.0;
    if (e.std_error > 0.0) z = diff / e.std_error;
    else if (diff != 0.0) z = std::copysign(std::numeric_limits<double>::infinity(), diff);
    std::string verdict = std::abs(diff) <= tolerance ? "pass" : "fail";
    if (std::isinf(s.tail_estimate)) verdict = "inconclusive";

    Record r = detail::header("compare", c);
    r.add("value_mc", e.value);
    r.add("stderr", e.std_error);
    r.add("value_oracle", s.total);
    r.add("tail_estimate", s.tail_estimate);
    r.add("tail_is_heuristic", s.tail_is_heuristic);
    r.add("abs_diff", std::abs(diff));
    r.add("tolerance", tolerance);
    r.add("z_score", z);
    r.add("verdict", verdict);
    detail::add_estimate_fields(r, e, "mc.");
    detail::add_series_fields(r, s, "oracle.");
    r.add_config(c);
    detail::emit_warnings(e, *io.diag);
    *io.diag << "wall_time_ms=" << format_short(ms) << '\n';
    if (verdict != "pass") *io.diag << "comparison " << verdict << ": |diff| = " << format_short(std::abs(diff))
                                    << ", tolerance = " << format_short(tolerance) << '\n';
    r.write(*io.data, c.format);
    return static_cast<int>(verdict == "pass" ? kOk : kComparisonFailed);
  });
}

inline int cmd_verify(const std::string& suite, const RunConfig& c, const Streams& io) {
  return guarded(*io.diag, [&] {
    const auto& names = verify::suite_names();
    if (suite != "all" && std::find(names.begin(), names.end(), suite) == names.end()) {
      std::string list = "all";
      for (const auto& n : names) list += "|" + n;
      throw ConfigError("unknown verify suite '" + suite + "' (expected " + list + ")");
    }
    const auto start = detail::clock::now();
    const auto checks = verify::run_suite(suite, {c.seed, io.workers});
    const double ms = detail::elapsed_ms(start);
    Record r;
    r.add("record", "verify");
    r.add("suite", suite);
    std::size_t failed = 0;
    for (const auto& ch : checks) {
      const std::string p = "check." + ch.name + ".";
      r.add(p + "statistic", ch.statistic);
      r.add(p + "rule", verify::to_string(ch.rule));
      r.add(p + "threshold", ch.threshold);
      r.add(p + "passed", ch.passed);
      if (!ch.passed) ++failed;
      *io.diag << (ch.passed ? "PASS " : "FAIL ") << ch.name << ": " << format_short(ch.statistic) << ' '
               << verify::to_string(ch.rule) << ' ' << format_short(ch.threshold) << '\n';
    }
    r.add("checks", checks.size());
    r.add("failed", failed);
    r.add("all_passed", failed == 0);
    r.add("seed", std::to_string(c.seed));
    *io.diag << "wall_time_ms=" << format_short(ms) << '\n';
    r.write(*io.data, c.format);
    return static_cast<int>(failed == 0 ? kOk : kComparisonFailed);
  });
}

/// Throughput of the estimator (and of the oracle, when the configuration
/// has a closed form). Timing is the point here, so it goes into the record.
inline int cmd_bench(const RunConfig& c, const Streams& io) {
  return guarded(*io.diag, [&] {
    Record r = detail::header("bench", c);
    r.add("workers", resolve_workers(io.workers));
    auto start = detail::clock::now();
    const MomentEstimate e = detail::run_estimator(c, io.workers);
    const double mc_ms = detail::elapsed_ms(start);
    r.add("estimate.replicates", e.replicates_used);
    r.add("estimate.wall_time_ms", mc_ms);
    r.add("estimate.replicates_per_second", mc_ms > 0.0 ? 1000.0 * static_cast<double>(e.replicates_used) / mc_ms : 0.0);
    try {
      start = detail::clock::now();
      detail::run_oracle(c, io.workers);
      r.add("oracle.supported", true);
      r.add("oracle.wall_time_ms", detail::elapsed_ms(start));
    } catch (const CapabilityError& err) {
      r.add("oracle.supported", false);
      *io.diag << "oracle skipped: " << err.what() << '\n';
    }
    r.add_config(c);
    r.write(*io.data, c.format);
    return static_cast<int>(kOk);
  });
}

}  // namespace fkmoment::cli

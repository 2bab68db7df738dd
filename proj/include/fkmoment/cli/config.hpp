#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "fkmoment/chaos_oracle.hpp"
#include "fkmoment/kernels.hpp"
#include "fkmoment/mc_engine.hpp"

namespace fkmoment::cli {

/// Invalid configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Locale-independent formatting with 17 significant digits, for records.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Shortest round-trip form, for messages meant to be read.
inline std::string format_short(double v) {
  if (!std::isfinite(v)) return format_real(v);
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_point(const Point& p) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ',';
    out += format_real(p[i]);
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Where a key's value came from, for error messages.
struct Origin {
  std::string source = "default";
  std::size_t line = 0;

  std::string describe() const { return line ? source + ":" + std::to_string(line) : source; }
};

struct RawEntry {
  std::string value;
  Origin origin;
};

/// Effective configuration of one run. Every field has a config key; see
/// `keys()` for the full list.
struct RunConfig {
  // query
  double t = 0.5;
  double s = 0.5;
  Point x{0.0};
  Point y{0.0};
  // temporal and spatial kernels
  double hurst = 0.75;
  std::string spatial = "heat";
  double bandwidth = 1.0;
  double riesz_order = 0.5;
  double poisson_a = 1.0;
  // initial condition
  std::string initial = "constant";
  double initial_value = 1.0;
  Point initial_center{0.0};
  double initial_width = 1.0;
  // estimator
  std::string equation = "fractional";
  std::size_t replicates = 100'000;
  std::uint64_t seed = 42;
  std::string mode = "importance";
  std::size_t batches = 32;
  std::size_t max_order = 5;
  // oracle
  std::size_t n_max = 3;
  double tol = 1e-5;
  // output
  std::string format = "csv";

  std::size_t dim() const noexcept { return x.size(); }

  TemporalKernel temporal_kernel() const { return TemporalKernel(hurst); }

  SpatialKernel spatial_kernel() const {
    if (spatial == "heat") return SpatialKernel::heat(bandwidth, dim());
    if (spatial == "riesz") return SpatialKernel::riesz(riesz_order, dim());
    if (spatial == "poisson") return SpatialKernel::poisson(poisson_a, dim());
    return SpatialKernel::zero(dim());
  }

  InitialCondition initial_condition() const {
    if (initial == "bump") return InitialCondition::bump(initial_value, initial_center, initial_width);
    return InitialCondition::constant(initial_value);
  }

  QueryPoint query() const { return {t, s, x, y}; }

  SamplingMode sampling_mode() const {
    return mode == "uniform" ? SamplingMode::Uniform : SamplingMode::TemporalImportance;
  }

  EstimatorConfig estimator(std::size_t workers) const {
    EstimatorConfig cfg;
    cfg.replicates = replicates;
    cfg.seed = seed;
    cfg.mode = sampling_mode();
    cfg.batch_count = batches;
    cfg.max_order_tracked = max_order;
    cfg.workers = workers;
    return cfg;
  }
};

namespace detail {

[[noreturn]] inline void fail(const Origin& o, const std::string& key, const std::string& msg) {
  throw ConfigError(o.describe() + ": key '" + key + "': " + msg);
}

inline double parse_real(const RawEntry& e, const std::string& key) {
  const std::string_view v = trim(e.value);
  if (v == "inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) fail(e.origin, key, "expected a real number, got '" + e.value + "'");
  return out;
}

inline std::uint64_t parse_unsigned(const RawEntry& e, const std::string& key) {
  const std::string_view v = trim(e.value);
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || v.empty())
    fail(e.origin, key, "expected a non-negative integer, got '" + e.value + "'");
  return out;
}

inline Point parse_point(const RawEntry& e, const std::string& key) {
  Point out;
  std::string_view rest = e.value;
  while (true) {
    const auto comma = rest.find(',');
    RawEntry part{std::string(trim(rest.substr(0, comma))), e.origin};
    if (part.value.empty()) fail(e.origin, key, "expected comma-separated coordinates, got '" + e.value + "'");
    out.push_back(parse_real(part, key));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

inline std::string parse_choice(const RawEntry& e, const std::string& key, std::initializer_list<const char*> allowed) {
  const std::string v(trim(e.value));
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return v;
    list += list.empty() ? a : std::string("|") + a;
  }
  fail(e.origin, key, "expected one of " + list + ", got '" + e.value + "'");
}

}  // namespace detail

/// Ordered (key, value) echo of a configuration. Feeding it back through
/// `set_entry` + `build_config` reproduces the same RunConfig.
inline std::vector<std::pair<std::string, std::string>> echo(const RunConfig& c) {
  return {
      {"query.t", format_real(c.t)},
      {"query.s", format_real(c.s)},
      {"query.x", format_point(c.x)},
      {"query.y", format_point(c.y)},
      {"kernel.hurst", format_real(c.hurst)},
      {"kernel.spatial", c.spatial},
      {"kernel.bandwidth", format_real(c.bandwidth)},
      {"kernel.riesz_order", format_real(c.riesz_order)},
      {"kernel.poisson_a", format_real(c.poisson_a)},
      {"initial.type", c.initial},
      {"initial.value", format_real(c.initial_value)},
      {"initial.center", format_point(c.initial_center)},
      {"initial.width", format_real(c.initial_width)},
      {"estimator.equation", c.equation},
      {"estimator.replicates", std::to_string(c.replicates)},
      {"estimator.seed", std::to_string(c.seed)},
      {"estimator.mode", c.mode},
      {"estimator.batches", std::to_string(c.batches)},
      {"estimator.max_order", std::to_string(c.max_order)},
      {"oracle.n_max", std::to_string(c.n_max)},
      {"oracle.tol", format_real(c.tol)},
      {"output.format", c.format},
  };
}

inline const std::vector<std::string>& keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (auto& [key, value] : echo(RunConfig{})) out.push_back(key);
    return out;
  }();
  return k;
}

using Entries = std::map<std::string, RawEntry>;

/// Adds `key = value` with its origin; later entries override earlier ones.
inline void set_entry(Entries& entries, const std::string& key, std::string value, Origin origin) {
  const auto& known = keys();
  if (std::find(known.begin(), known.end(), key) == known.end())
    throw ConfigError(origin.describe() + ": unknown key '" + key + "'");
  entries[key] = {std::move(value), std::move(origin)};
}

/// Parses one `key = value` assignment (as given to --set).
inline std::pair<std::string, std::string> split_assignment(std::string_view text, const Origin& origin) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ConfigError(origin.describe() + ": expected key = value, got '" + std::string(text) + "'");
  const std::string key(trim(text.substr(0, eq)));
  if (key.empty()) throw ConfigError(origin.describe() + ": empty key in '" + std::string(text) + "'");
  return {key, std::string(trim(text.substr(eq + 1)))};
}

/// Reads a plain `key = value` file. '#' starts a comment.
inline void parse_key_value_text(std::istream& in, const std::string& source, Entries& entries) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const Origin origin{source, number};
    auto [key, value] = split_assignment(body, origin);
    set_entry(entries, key, std::move(value), origin);
  }
}

/// Turns raw entries into a validated RunConfig. Range errors name the
/// offending key and where it was set.
inline RunConfig build_config(const Entries& entries) {
  RunConfig c;
  const auto get = [&](const std::string& key) -> const RawEntry* {
    const auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };
  const auto origin_of = [&](const std::string& key) { return get(key) ? get(key)->origin : Origin{}; };
  auto real = [&](const std::string& key, double& field) {
    if (const auto* e = get(key)) field = detail::parse_real(*e, key);
  };
  auto count = [&](const std::string& key, std::size_t& field) {
    if (const auto* e = get(key)) field = static_cast<std::size_t>(detail::parse_unsigned(*e, key));
  };
  auto point = [&](const std::string& key, Point& field) {
    if (const auto* e = get(key)) field = detail::parse_point(*e, key);
  };
  auto choice = [&](const std::string& key, std::string& field, std::initializer_list<const char*> allowed) {
    if (const auto* e = get(key)) field = detail::parse_choice(*e, key, allowed);
  };
  auto require = [&](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) detail::fail(origin_of(key), key, msg);
  };

  real("query.t", c.t);
  real("query.s", c.s);
  point("query.x", c.x);
  point("query.y", c.y);
  real("kernel.hurst", c.hurst);
  choice("kernel.spatial", c.spatial, {"heat", "riesz", "poisson", "zero"});
  real("kernel.bandwidth", c.bandwidth);
  real("kernel.riesz_order", c.riesz_order);
  real("kernel.poisson_a", c.poisson_a);
  choice("initial.type", c.initial, {"constant", "bump"});
  real("initial.value", c.initial_value);
  point("initial.center", c.initial_center);
  real("initial.width", c.initial_width);
  choice("estimator.equation", c.equation, {"fractional", "white"});
  count("estimator.replicates", c.replicates);
  if (const auto* e = get("estimator.seed")) c.seed = detail::parse_unsigned(*e, "estimator.seed");
  choice("estimator.mode", c.mode, {"uniform", "importance"});
  count("estimator.batches", c.batches);
  count("estimator.max_order", c.max_order);
  count("oracle.n_max", c.n_max);
  real("oracle.tol", c.tol);
  choice("output.format", c.format, {"csv", "json"});

  require(c.t >= 0.0 && c.t <= 1.0, "query.t", "time must lie in [0, 1], got " + format_short(c.t));
  require(c.s >= 0.0 && c.s <= 1.0, "query.s", "time must lie in [0, 1], got " + format_short(c.s));
  require(c.y.size() == c.x.size(), "query.y", "dimension " + std::to_string(c.y.size()) + " differs from query.x dimension " +
                                                  std::to_string(c.x.size()));
  require(c.hurst > 0.5 && c.hurst < 1.0, "kernel.hurst",
          "Hurst parameter must lie in the open interval (1/2, 1), got " + format_short(c.hurst));
  require(c.bandwidth > 0.0, "kernel.bandwidth", "heat bandwidth must be positive");
  require(c.poisson_a > 0.0, "kernel.poisson_a", "Poisson kernel scale must be positive");
  if (c.spatial == "riesz")
    require(c.riesz_order > 0.0 && c.riesz_order < static_cast<double>(c.dim()), "kernel.riesz_order",
            "Riesz order must satisfy 0 < order < dim = " + std::to_string(c.dim()));
  if (c.initial == "bump") {
    require(c.initial_width > 0.0, "initial.width", "bump width must be positive");
    require(c.initial_center.size() == c.dim(), "initial.center",
            "dimension " + std::to_string(c.initial_center.size()) + " differs from query dimension " + std::to_string(c.dim()));
  }
  require(c.batches >= 2, "estimator.batches", "need at least 2 batches");
  require(c.replicates >= c.batches, "estimator.replicates", "replicates must be at least estimator.batches");
  require(c.n_max >= 1 && c.n_max <= 3, "oracle.n_max", "chaos truncation order must be 1, 2 or 3");
  require(c.tol > 0.0, "oracle.tol", "tolerance must be positive");
  if (c.equation == "white")
    require(c.s == c.t, "query.s", "the white-in-time equation uses a single time; set query.s equal to query.t");
  return c;
}

}  // namespace fkmoment::cli

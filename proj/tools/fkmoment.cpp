#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fkmoment/cli/commands.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::vector<std::string> assignments;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<std::string> mode;
  std::optional<std::string> equation;
  std::optional<std::string> format;
  std::string out_path;
  std::size_t workers = 0;
  std::string suite = "all";
};

// File first, then --set in order, then the dedicated flags.
fkmoment::cli::RunConfig resolve(const Flags& f) {
  using namespace fkmoment::cli;
  Entries entries;
  if (!f.config_path.empty()) load_config_file(f.config_path, entries);
  for (std::size_t i = 0; i < f.assignments.size(); ++i) {
    const Origin origin{"--set #" + std::to_string(i + 1), 0};
    auto [key, value] = split_assignment(f.assignments[i], origin);
    set_entry(entries, key, std::move(value), origin);
  }
  auto flag = [&](const char* key, const char* name, const std::optional<std::string>& v) {
    if (v) set_entry(entries, key, *v, Origin{name, 0});
  };
  if (f.seed) flag("estimator.seed", "--seed", std::to_string(*f.seed));
  if (f.replicates) flag("estimator.replicates", "--replicates", std::to_string(*f.replicates));
  flag("estimator.mode", "--mode", f.mode);
  flag("estimator.equation", "--equation", f.equation);
  flag("output.format", "--format", f.format);
  return build_config(entries);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace fkmoment::cli;
  CLI::App app{"Second moments of the fractional stochastic heat equation: Monte Carlo and chaos-series oracle"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config_path, "key = value file, or a CSV/JSON record from an earlier run");
  app.add_option("--set", f.assignments, "override one key, e.g. --set kernel.hurst=0.8 (repeatable)");
  app.add_option("--seed", f.seed, "random seed");
  app.add_option("--replicates", f.replicates, "Monte Carlo replicates");
  app.add_option("--mode", f.mode, "sampling mode")->check(CLI::IsMember({"uniform", "importance"}));
  app.add_option("--equation", f.equation, "noise in time")->check(CLI::IsMember({"fractional", "white"}));
  app.add_option("--out", f.out_path, "write the record here instead of stdout");
  app.add_option("--format", f.format, "record format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--workers", f.workers, "worker threads (0 = all cores); never changes results");

  auto* estimate = app.add_subcommand("estimate", "Monte Carlo estimate of the second moment");
  auto* oracle = app.add_subcommand("oracle", "truncated chaos series by quadrature");
  auto* compare = app.add_subcommand("compare", "estimate against oracle");
  auto* verify = app.add_subcommand("verify", "run property suites");
  verify->add_option("suite", f.suite, "all|poisson-law|conditional-uniformity|integral-identity|inner-product|estimator-identities");
  auto* bench = app.add_subcommand("bench", "time the estimator and oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  RunConfig config;
  try {
    config = resolve(f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  std::ofstream file;
  Streams io;
  io.workers = f.workers;
  if (!f.out_path.empty()) {
    file.open(f.out_path, std::ios::binary);
    if (!file) {
      std::cerr << "config error: cannot open output file " << f.out_path << '\n';
      return kConfigError;
    }
    io.data = &file;
  }

  int code = kOk;
  if (*estimate) code = cmd_estimate(config, io);
  else if (*oracle) code = cmd_oracle(config, io);
  else if (*compare) code = cmd_compare(config, io);
  else if (*verify) code = cmd_verify(f.suite, config, io);
  else if (*bench) code = cmd_bench(config, io);
  io.data->flush();
  return code;
}

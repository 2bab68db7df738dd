#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fkmoment/cli/commands.hpp"

using namespace fkmoment::cli;

namespace {

RunConfig from_text(const std::string& text) {
  Entries e;
  std::istringstream in(text);
  parse_key_value_text(in, "test.cfg", e);
  return build_config(e);
}

std::string config_error(const std::string& text) {
  try {
    from_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

struct Captured {
  std::ostringstream data, diag;
  Streams io() {
    Streams s;
    s.data = &data;
    s.diag = &diag;
    s.workers = 1;
    return s;
  }
};

}  // namespace

TEST(Formatting, SeventeenDigitsInRecordsShortestInMessages) {
  EXPECT_EQ(format_real(0.4), "0.40000000000000002");
  EXPECT_EQ(format_real(0.5), "0.5");
  EXPECT_EQ(format_real(-2.0), "-2");
  EXPECT_EQ(format_real(1.0 / 0.0), "inf");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_real(v)), v);
  EXPECT_EQ(format_short(0.4), "0.4");
  EXPECT_EQ(format_short(1e-5), "1e-05");
  EXPECT_EQ(format_point({0.5, -1.0}), "0.5,-1");
}

TEST(Config, DefaultsAndOverrides) {
  const RunConfig c = from_text(
      "# comment\n"
      "kernel.hurst = 0.8\n"
      "query.x = 0.5, 0.25\n"
      "query.y = 0, 0\n"
      "\n"
      "estimator.mode = uniform  # trailing comment\n");
  EXPECT_EQ(c.hurst, 0.8);
  EXPECT_EQ(c.dim(), 2u);
  EXPECT_EQ(c.x[1], 0.25);
  EXPECT_EQ(c.mode, "uniform");
  EXPECT_EQ(c.replicates, 100000u);
  EXPECT_EQ(c.seed, 42u);
}

TEST(Config, ErrorsNameKeyAndLine) {
  std::string msg = config_error("query.t = 0.5\nkernel.hurst = 0.4\n");
  EXPECT_NE(msg.find("test.cfg:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("kernel.hurst"), std::string::npos) << msg;
  EXPECT_NE(msg.find("0.4"), std::string::npos) << msg;

  msg = config_error("kernel.hurts = 0.7\n");
  EXPECT_NE(msg.find("unknown key 'kernel.hurts'"), std::string::npos) << msg;
  msg = config_error("just some words\n");
  EXPECT_NE(msg.find("test.cfg:1"), std::string::npos) << msg;
  msg = config_error("estimator.mode = fast\n");
  EXPECT_NE(msg.find("estimator.mode"), std::string::npos) << msg;
  msg = config_error("estimator.replicates = -3\n");
  EXPECT_NE(msg.find("estimator.replicates"), std::string::npos) << msg;
  msg = config_error("query.t = abc\n");
  EXPECT_NE(msg.find("query.t"), std::string::npos) << msg;
}

TEST(Config, CrossFieldValidation) {
  EXPECT_NE(config_error("query.x = 0,0\n").find("query.y"), std::string::npos);
  EXPECT_NE(config_error("kernel.spatial = riesz\nkernel.riesz_order = 1.5\n").find("kernel.riesz_order"),
            std::string::npos);
  EXPECT_NE(config_error("initial.type = bump\ninitial.center = 0,0\n").find("initial.center"), std::string::npos);
  EXPECT_NE(config_error("estimator.equation = white\nquery.s = 0.3\n").find("query.s"), std::string::npos);
  EXPECT_NE(config_error("oracle.n_max = 4\n").find("oracle.n_max"), std::string::npos);
  EXPECT_NE(config_error("query.t = 1.5\n").find("query.t"), std::string::npos);
  EXPECT_NE(config_error("estimator.batches = 1\n").find("estimator.batches"), std::string::npos);
}

TEST(Config, LaterAssignmentsWin) {
  Entries e;
  set_entry(e, "kernel.hurst", "0.7", Origin{"file", 3});
  const auto [key, value] = split_assignment("kernel.hurst=0.9", Origin{"--set #1", 0});
  set_entry(e, key, value, Origin{"--set #1", 0});
  EXPECT_EQ(build_config(e).hurst, 0.9);
}

TEST(Record, CsvAndJsonMirrorEachOther) {
  Record r;
  r.add("a", 0.5);
  r.add("b", std::size_t{7});
  r.add("c", true);
  r.add("d", std::string("x,\"y\""));
  r.add("e", 1.0 / 0.0);
  std::ostringstream csv, json;
  r.write_csv(csv);
  r.write_json(json);
  EXPECT_EQ(csv.str(), "schema_version,field,value\n1,a,0.5\n1,b,7\n1,c,true\n1,d,\"x,\"\"y\"\"\"\n1,e,inf\n");
  const auto j = nlohmann::json::parse(json.str());
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["a"], 0.5);
  EXPECT_EQ(j["b"], 7);
  EXPECT_EQ(j["c"], true);
  EXPECT_EQ(j["d"], "x,\"y\"");
  EXPECT_EQ(j["e"], "inf");
  EXPECT_EQ(split_csv_line("1,d,\"x,\"\"y\"\"\""), (std::vector<std::string>{"1", "d", "x,\"y\""}));
}

TEST(Record, ConfigEchoRoundTrips) {
  RunConfig c = from_text("kernel.hurst = 0.85\nquery.x = 0.1\nquery.y = 0.3\ninitial.type = bump\n");
  Record r;
  r.add_config(c);
  for (const std::string format : {"csv", "json"}) {
    std::ostringstream os;
    r.write(os, format);
    Entries e;
    parse_record_config(os.str(), "record", e);
    const RunConfig back = build_config(e);
    EXPECT_EQ(echo(back), echo(c)) << format;
  }
}

TEST(Commands, EstimateRecordIsCompleteAndDiagnosticsSeparate) {
  Captured out;
  RunConfig c = from_text("estimator.replicates = 2000\n");
  EXPECT_EQ(cmd_estimate(c, out.io()), kOk);
  const std::string data = out.data.str();
  EXPECT_EQ(data.rfind("schema_version,field,value\n", 0), 0u);
  for (const char* field : {"1,record,estimate", "1,value,", "1,stderr,", "1,config.kernel.hurst,0.75",
                            "1,config.estimator.seed,42", "1,residual,"})
    EXPECT_NE(data.find(field), std::string::npos) << field;
  EXPECT_EQ(data.find("wall_time"), std::string::npos);
  EXPECT_NE(out.diag.str().find("wall_time_ms="), std::string::npos);
}

TEST(Commands, ZeroKernelCompareTriviallyPasses) {
  Captured out;
  RunConfig c = from_text("kernel.spatial = zero\nestimator.replicates = 5000\n");
  EXPECT_EQ(cmd_compare(c, out.io()), kOk);
  EXPECT_NE(out.data.str().find("1,verdict,pass"), std::string::npos);
}

TEST(Commands, CompareOnDefaultConfigPasses) {
  Captured out;
  RunConfig c = from_text("estimator.replicates = 100000\noracle.n_max = 2\n");
  EXPECT_EQ(cmd_compare(c, out.io()), kOk) << out.diag.str();
}

TEST(Commands, RieszOracleIsCapabilityError) {
  Captured out;
  RunConfig c = from_text("kernel.spatial = riesz\nquery.x = 0,0\nquery.y = 0,0\n");
  EXPECT_EQ(cmd_oracle(c, out.io()), kNumericError);
  EXPECT_NE(out.diag.str().find("capability error"), std::string::npos);
  EXPECT_TRUE(out.data.str().empty());
}

TEST(Commands, UnknownSuiteIsConfigError) {
  Captured out;
  EXPECT_EQ(cmd_verify("nonsense", RunConfig{}, out.io()), kConfigError);
}

TEST(Commands, VerifySuiteRecord) {
  Captured out;
  EXPECT_EQ(cmd_verify("poisson-law", RunConfig{}, out.io()), kOk);
  EXPECT_NE(out.data.str().find("1,all_passed,true"), std::string::npos);
}

TEST(Commands, BenchReportsOracleSupport) {
  Captured out;
  RunConfig c = from_text("kernel.spatial = riesz\nquery.x = 0,0\nquery.y = 0,0\nestimator.replicates = 1000\n");
  EXPECT_EQ(cmd_bench(c, out.io()), kOk);
  EXPECT_NE(out.data.str().find("1,oracle.supported,false"), std::string::npos);
}

TEST(Commands, WhiteAtZeroHorizonIsExact) {
  Captured out;
  RunConfig c = from_text("estimator.equation = white\nquery.t = 0\nquery.s = 0\ninitial.value = 3\n");
  EXPECT_EQ(cmd_estimate(c, out.io()), kOk);
  EXPECT_NE(out.data.str().find("1,value,9\n"), std::string::npos) << out.data.str();
}

TEST(Commands, RecordsAreIdenticalAcrossWorkerCounts) {
  RunConfig c = from_text("estimator.replicates = 4000\n");
  c.format = "json";
  Captured one, many;
  Streams a = one.io(), b = many.io();
  b.workers = 4;
  ASSERT_EQ(cmd_estimate(c, a), kOk);
  ASSERT_EQ(cmd_estimate(c, b), kOk);
  EXPECT_EQ(one.data.str(), many.data.str());
}

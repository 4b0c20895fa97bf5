#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "datko/run.hpp"
#include "oracles.hpp"

using namespace datko;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "datko_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string* header = nullptr) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  if (header) *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

RunResult run_doc(const Json& doc, const fs::path& out) {
  const RunConfig cfg = parse_config(doc, out);
  RunOptions o;
  o.out_dir = out;
  return run(cfg, o);
}

}  // namespace

TEST(Config, RejectsInvalidBlocks) {
  const char* fam = R"("family": {"kind": "scalar_exp", "f": "-2*t + t*sin(t)^2"})";
  const std::vector<std::string> docs = {
      R"({"tasks": []})",
      R"({"family": {"kind": "bogus"}})",
      R"({"family": {"kind": "scalar_exp", "f": "t +"}})",
      R"({"family": {"kind": "scalar_exp", "f": "-t", "extra": 1}})",
      R"({"family": {"kind": "matrix_ode", "A": [["1", "2"]]}})",
      R"({"family": {"kind": "tabulated", "path": "missing.csv"}})",
      std::string("{") + fam + R"(, "seed": -3})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "nope"}]})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "phi"}]})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "phi", "alpha": -1, "alpah": 2}]})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "phi", "alpha": -1, "t_grid": [3, 1]}]})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "admissible", "bracket": [0, -1]}]})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "certify", "alpha": -0.5}]})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "certify", "delta": 1.0}]})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "verify-props", "suites": ["nope"]}]})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "phi", "alpha": -1, "name": "a b"}]})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "lyapunov", "name": "x"}, {"kind": "lyapunov", "name": "x"}]})",
      std::string("{") + fam + R"(, "tasks": [{"kind": "phi", "alpha": -1, "u": {"kind": "constant", "x": [1, 2]}}]})",
  };
  for (const auto& d : docs) EXPECT_THROW(parse_config(Json::parse(d), "."), ConfigError) << d;
}

TEST(Config, AcceptsGridForms) {
  const Json doc = Json::parse(R"({
    "family": {"kind": "scalar_exp", "f": "-t"}, "seed": 4,
    "tasks": [
      {"kind": "phi", "alpha": -1, "t_grid": {"start": 0, "end": 1, "count": 5}},
      {"kind": "phi", "name": "b", "alpha": -1, "t_grid": {"start": 0, "end": 1, "step": 0.5}},
      {"kind": "phi", "name": "c", "alpha": -1, "t_grid": [0, 0.3]}
    ]})");
  const auto cfg = parse_config(doc, "/tmp");
  EXPECT_EQ(cfg.tasks.size(), 3u);
  EXPECT_EQ(cfg.seed, 4u);
  EXPECT_EQ(cfg.output_dir, fs::path("/tmp") / "out");
}

TEST(Run, EmptyTaskListExitsZero) {
  const auto out = scratch("empty");
  const auto r = run_doc(Json::parse(R"({"family": {"kind": "scalar_exp", "f": "-t"}, "tasks": []})"), out);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_TRUE(r.report["tasks"].empty());
  EXPECT_TRUE(fs::exists(out / "report.json"));
}

TEST(Run, BoundaryOfExample) {
  const auto out = scratch("boundary");
  const auto r = run_doc(Json::parse(R"({
    "family": {"kind": "scalar_exp", "f": "-2*t + t*sin(t)^2"},
    "tasks": [{"kind": "admissible", "name": "adm", "bracket": [-1.5, 0.0]}]})"),
                         out);
  EXPECT_EQ(r.exit_code, 0);
  const double b = r.report["tasks"][0]["result"]["boundary"]["boundary"].get<double>();
  EXPECT_GE(b, -1.02);
  EXPECT_LE(b, -0.98);
  std::string header;
  const auto rows = read_csv(out / "adm_M_vs_s.csv", &header);
  EXPECT_EQ(header, "s,M");
  EXPECT_FALSE(rows.empty());
}

TEST(Run, BadBracketIsPropertyFailure) {
  const auto out = scratch("bracket");
  const auto r = run_doc(Json::parse(R"({
    "family": {"kind": "scalar_exp", "f": "-2*t + t*sin(t)^2"},
    "tasks": [{"kind": "admissible", "bracket": [-0.9, 0.0]}]})"),
                         out);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(r.report["tasks"][0]["status"], "failed");
  EXPECT_TRUE(r.report["tasks"][0]["result"]["boundary"].contains("error"));
}

TEST(Run, IdentityCertifyFailsValidation) {
  const auto out = scratch("identity");
  const auto r = run_doc(Json::parse(R"({
    "family": {"kind": "scalar_exp", "f": "0"},
    "tasks": [{"kind": "certify", "p": 1, "probe_times": [0, 2], "random_probes": 1}]})"),
                         out);
  EXPECT_EQ(r.exit_code, 2);
  const auto& res = r.report["tasks"][0]["result"];
  EXPECT_EQ(res["K_validation"]["status"], "FAILED");
  EXPECT_FALSE(res["K_validation"]["bounded"].get<bool>());
  EXPECT_TRUE(res["certificate"].is_null());
}

TEST(Run, RuntimeErrorExitsOne) {
  // e^{t^3} overflows long before the end of the horizon
  const auto out = scratch("overflow");
  const auto r = run_doc(Json::parse(R"({
    "family": {"kind": "scalar_exp", "f": "t^3"},
    "tasks": [{"kind": "phi", "alpha": 0, "t_grid": [0, 10]}]})"),
                         out);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.report["tasks"][0]["status"], "error");
}

TEST(Series, PhiMatchesClosedForm) {
  const auto out = scratch("phi");
  const auto r = run_doc(Json::parse(R"({
    "family": {"kind": "scalar_exp", "f": "-2*t + t*sin(t)^2"},
    "tasks": [{"kind": "phi", "name": "p", "alpha": -1, "t_grid": {"start": 0, "end": 12, "count": 13}}]})"),
                         out);
  EXPECT_EQ(r.exit_code, 0);
  std::string header;
  const auto rows = read_csv(out / "p_phi_vs_t.csv", &header);
  EXPECT_EQ(header, "t,phi_value,arg_tau,certified");
  ASSERT_EQ(rows.size(), 13u);
  for (const auto& row : rows) {
    const double want = oracle::example_phi_minus1(row[0]);
    EXPECT_NEAR(row[1], want, 1e-6 * want) << row[0];
    EXPECT_EQ(row[3], 0.0);  // no admissible reference exponent below -1
  }
}

TEST(Series, NormVsCertificateRatio) {
  const auto out = scratch("cert");
  const auto r = run_doc(Json::parse(R"({
    "family": {"kind": "scalar_exp", "f": "-t"},
    "tasks": [{"kind": "certify", "name": "c", "p": 1, "probe_times": [0, 5], "random_probes": 0,
               "quad_rtol": 1e-12, "max_levels": 12, "verify_grid": {"start": 0, "end": 10, "step": 1}}]})"),
                         out);
  EXPECT_EQ(r.exit_code, 0);
  const auto& c = r.report["tasks"][0]["result"]["certificate"];
  EXPECT_EQ(c["status"], "PASSED");
  EXPECT_EQ(c["N"].get<double>(), 1.0);
  EXPECT_EQ(c["N_tilde"].get<double>(), 2.0);
  EXPECT_EQ(c["rate"].get<double>(), 0.5);
  std::string header;
  const auto rows = read_csv(out / "c_norm_vs_certificate.csv", &header);
  EXPECT_EQ(header, "t-s,measured_norm,certified_bound");
  ASSERT_EQ(rows.size(), 66u);
  for (const auto& row : rows) {
    EXPECT_NEAR(row[2] / row[1], 2.0 * std::exp(0.5 * row[0]), 1e-12 * row[2] / row[1]);
    EXPECT_GE(row[2] / row[1], 1.0);
  }
}

TEST(Series, MissingAndEmpty) {
  TaskFragment f;
  f.name = "x";
  EXPECT_THROW(emit_plot_series(f, SeriesKind::kPhiVsT, scratch("missing") / "a.csv"), std::invalid_argument);
  f.series[SeriesKind::kMVsS] = Series{{"s", "M"}, {}};
  const auto p = scratch("emptyseries") / "m.csv";
  emit_plot_series(f, SeriesKind::kMVsS, p);
  EXPECT_EQ(read(p), "s,M\n");
}

TEST(Run, DeterministicReport) {
  const Json doc = Json::parse(R"({
    "family": {"kind": "scalar_exp", "f": "-2*t + t*sin(t)^2"}, "seed": 99,
    "tasks": [
      {"kind": "datko", "alpha": -0.9, "probe_times": [0, 3], "random_probes": 1},
      {"kind": "verify-props", "alpha": -0.9, "cases": 3, "t_max": 5,
       "suites": ["cocycle", "projection", "homogeneity"]}
    ]})");
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto ra = run_doc(doc, a);
  RunOptions par;
  par.out_dir = b;
  par.parallel = true;
  run(parse_config(doc, b), par);
  EXPECT_EQ(ra.exit_code, 0);
  EXPECT_EQ(read(a / "report.json"), read(b / "report.json"));
  // another seed changes the random probes
  RunOptions other;
  other.out_dir = scratch("det_c");
  other.seed = 100;
  const auto rc = run(parse_config(doc, *other.out_dir), other);
  EXPECT_NE(read(a / "report.json"), read(*other.out_dir / "report.json"));
  EXPECT_EQ(rc.report["seed"], 100);
}

TEST(Run, PropsOnlyAndTabulatedFamily) {
  const auto out = scratch("tab");
  {
    std::ofstream csv(out / "fam.csv");
    csv << "t,s,u\n";
    for (int i = 0; i <= 1000; ++i) {
      char line[96];
      std::snprintf(line, sizeof line, "%.17g,0,%.17g\n", 0.1 * i, std::exp(-0.1 * i));
      csv << line;
    }
  }
  const Json doc = Json::parse(R"({
    "family": {"kind": "tabulated", "path": "fam.csv"},
    "tasks": [
      {"kind": "lyapunov", "t_max": 50, "inclusion_check": false},
      {"kind": "verify-props", "cases": 3, "t_max": 5, "alpha": -0.5,
       "suites": ["cocycle", "reversibility", "fixpoint", "decay_lemma"]}
    ]})");
  const RunConfig cfg = parse_config(doc, out);
  RunOptions o;
  o.out_dir = out / "run";
  o.props_only = true;
  const auto r = run(cfg, o);
  EXPECT_EQ(r.exit_code, 0) << r.report.dump(2);
  ASSERT_EQ(r.report["tasks"].size(), 1u);
  EXPECT_EQ(r.report["tasks"][0]["kind"], "verify-props");
  EXPECT_EQ(r.report["family"]["kind"], "tabulated");
  EXPECT_FALSE(r.report["family"]["caveats"].empty());
}

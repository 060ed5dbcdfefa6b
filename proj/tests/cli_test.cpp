#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "qredshift/cli.hpp"

namespace {

using namespace qredshift;
using nlohmann::json;
namespace fs = std::filesystem;

const std::string kSource = QREDSHIFT_SOURCE_DIR;

std::string config(const std::string& name) { return kSource + "/configs/" + name; }

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "qredshift");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

json payload(const Run& r) { return json::parse(r.out).at("payload"); }

double value(const json& node) { return std::stod(node.get<std::string>()); }

std::string without_timestamp(const std::string& doc) {
  static const std::regex stamp(R"("timestamp": "[^"]*")");
  return std::regex_replace(doc, stamp, "\"timestamp\": \"\"");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path temp_file(const std::string& name, const std::string& text = {}) {
  const auto path = fs::temp_directory_path() / ("qredshift_cli_" + name);
  if (!text.empty()) std::ofstream(path, std::ios::binary) << text;
  return path;
}

/// Runs the installed binary through the shell; stdout only.
Run run_tool(const std::string& args) {
  Run r;
  const std::string cmd = std::string(QREDSHIFT_TOOL) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, {}, {}};
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// ---------------------------------------------------------------------------

TEST(Dispatch, OverlapAtUnitChiIsOne) {
  const auto r = run({"overlap", "--config", config("single_gaussian.yaml"), "--chi", "1.0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto p = payload(r);
  EXPECT_EQ(value(p["delta"]["re"]), 1.0);
  EXPECT_EQ(value(p["delta"]["im"]), 0.0);
  EXPECT_EQ(p["mode"], "gaussian_10");
}

TEST(Dispatch, OverlapAgreesWithClosedForm) {
  const auto r = run({"overlap", "-c", config("single_gaussian.yaml"), "--chi", "1.3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto p = payload(r);
  EXPECT_NEAR(value(p["magnitude"]), value(p["closed_form"]["magnitude"]), 1e-9);
  EXPECT_LT(value(p["closed_form_gap"]), 1e-9);
}

TEST(Dispatch, SeveralChisGiveResultList) {
  const auto r = run({"overlap", "-c", config("single_gaussian.yaml"), "--chi", "1.0", "2.0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto p = payload(r);
  ASSERT_EQ(p["results"].size(), 2u);
  EXPECT_EQ(value(p["results"][0]["magnitude"]), 1.0);
  EXPECT_LT(value(p["results"][1]["magnitude"]), 1.0);
}

TEST(Dispatch, MatrixRequireUnitaryFailsOnSeparatedPair) {
  const auto r = run({"matrix", "-c", config("separated_pair.yaml"), "--chi", "5", "--require-unitary"});
  EXPECT_EQ(r.code, 4);
  const auto p = payload(r);
  EXPECT_TRUE(p["failure"].get<bool>());
  EXPECT_FALSE(p["completed"].get<bool>());
  EXPECT_GT(value(p["completion_residual"]), 1e-3);
  EXPECT_EQ(p["gram_deficit"]["eigenvalues"].size(), 2u);
}

TEST(Dispatch, MatrixWithoutRequireUnitaryReportsAndSucceeds) {
  const auto r = run({"matrix", "-c", config("separated_pair.yaml"), "--chi", "5"});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(payload(r)["failure"].get<bool>());
  EXPECT_NE(r.err.find("completion failed"), std::string::npos);
}

TEST(Dispatch, MatrixAtUnitChiIsIdentityPlusEnvironment) {
  const auto r = run({"matrix", "-c", config("separated_pair.yaml"), "--chi", "1", "--require-unitary"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto p = payload(r);
  EXPECT_TRUE(p["completed"].get<bool>());
  ASSERT_EQ(p["entries"].size(), 3u);
  EXPECT_NEAR(value(p["entries"][0][0]["re"]), 1.0, 1e-10);
  EXPECT_LT(value(p["deficit"]), 1e-10);
}

TEST(Dispatch, MatrixGenerator) {
  const auto r = run({"matrix", "-c", config("separated_pair.yaml"), "--chi", "1", "--generator"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto g = payload(r)["generator"];
  EXPECT_LE(value(g["anti_hermiticity_defect"]), 1e-3);
  EXPECT_LE(value(g["max_real_diagonal"]), 1e-3 * value(g["norm"]));
}

TEST(Dispatch, FreqRatioIsChiSquared) {
  const auto r = run({"freq", "-c", config("single_gaussian.yaml"), "--chi-squared", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto p = payload(r);
  EXPECT_NEAR(value(p["ratio"]), 2.0, 1e-12);
  EXPECT_NEAR(value(p["mean_in"]), 10.0, 1e-9);
}

TEST(Dispatch, FreqOppositeDirectionInverts) {
  const auto r = run({"freq", "-c", config("single_gaussian.yaml"), "--chi-squared", "2", "--direction", "bob-to-alice"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(value(payload(r)["ratio"]), 0.5, 1e-12);
}

TEST(Dispatch, FrequenciesReportedInUserUnits) {
  const auto r = run({"freq", "-c", config("thz.yaml"), "--chi", "1.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto p = payload(r);
  EXPECT_NEAR(value(p["mean_in"]), 193.4, 1e-9);
  EXPECT_NEAR(value(p["mean_out"]), 193.4 * 1.21, 1e-8);
}

TEST(Dispatch, UnitScaleLeavesOverlapUnchanged) {
  // Scale invariance: the THz mode has omega0/sigma = 386.8 in either unit.
  const auto a = run({"overlap", "-c", config("thz.yaml"), "--chi", "1.0001"});
  ASSERT_EQ(a.code, 0) << a.err;
  const auto closed = overlap::gaussian_closed_form(193.4, 0.5, 0.0, RedshiftFactor(1.0001));
  EXPECT_NEAR(value(payload(a)["magnitude"]), closed.magnitude, 1e-9);
}

TEST(Dispatch, FunctionalsSecondOrderLaw) {
  const auto r = run({"functionals", "-c", config("single_gaussian.yaml"), "--epsilon", "1e-4", "1e-3", "1e-2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto p = payload(r);
  EXPECT_NEAR(value(p["K"]["re"]), -0.5, 1e-9);
  EXPECT_NEAR(value(p["mu_squared"]), 25.75, 1e-8);
  EXPECT_NEAR(value(p["c2"]), 51.0, 1e-7);
  EXPECT_EQ(p["perturbative"].size(), 3u);
  EXPECT_GE(value(p["law_gap_slope"]), 2.9);
}

TEST(Dispatch, PerturbativeGuardWarns) {
  const auto r = run({"functionals", "-c", config("single_gaussian.yaml"), "--epsilon", "0.3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(payload(r)["perturbative"][0]["outside_guard"].get<bool>());
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST(Dispatch, OptimizePhaseNeverWorse) {
  const auto r = run({"optimize-phase", "-c", config("family.yaml"), "--mode", "2", "--chi", "1.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto p = payload(r);
  EXPECT_EQ(p["mode"], "chirp_a");
  EXPECT_GE(value(p["achieved"]["magnitude"]), value(p["baseline"]["magnitude"]));
}

TEST(Dispatch, BoundaryBracket) {
  const auto r = run({"boundary", "-c", config("separated_pair.yaml"), "--lo", "1", "--hi", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto p = payload(r);
  const double chi_star = value(p["chi_star"]);
  EXPECT_GT(chi_star, 1.0);
  EXPECT_LE(value(p["hi"]) - value(p["lo"]), 1e-3 * chi_star);
}

TEST(Dispatch, ParamsMatchesLibrary) {
  const auto r = run({"params", "-c", config("params.yaml"), "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cfg = config::parse_config(config("params.yaml"));
  const auto& ps = *cfg.parameter_scan;
  const auto records = validity::scan_parameters(ps.base, ps.axis1, ps.values1, ps.axis2, ps.values2,
                                                 RedshiftFactor(ps.chi), *cfg.threshold, cfg.quadrature);
  EXPECT_EQ(r.out, validity::parameters_csv(records));
}

TEST(Dispatch, ModeOutOfRange) {
  const auto r = run({"overlap", "-c", config("single_gaussian.yaml"), "--chi", "1", "--mode", "3"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("out of range"), std::string::npos);
}

TEST(Dispatch, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"overlap"}).code, 2);
  EXPECT_EQ(run({"unknown"}).code, 2);
  EXPECT_EQ(run({"overlap", "-c", config("single_gaussian.yaml")}).code, 2);
  EXPECT_EQ(run({"overlap", "-c", config("single_gaussian.yaml"), "--chi", "1", "--chi-squared", "1"}).code, 2);
  EXPECT_EQ(run({"overlap", "-c", config("single_gaussian.yaml"), "--chi", "-1"}).code, 2);
  EXPECT_EQ(run({"matrix", "-c", config("separated_pair.yaml"), "--chi", "1", "2"}).code, 2);
  EXPECT_EQ(run({"params", "-c", config("single_gaussian.yaml")}).code, 2);
}

TEST(Dispatch, QuadratureNonConvergenceExitsThree) {
  const auto r = run({"overlap", "-c", config("single_gaussian.yaml"), "--chi", "1.5", "--rel-tol", "1e-15",
                      "--abs-tol", "1e-300", "--max-subdivisions", "1"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("QuadratureFailure"), std::string::npos);
}

// ---------------------------------------------------------------------------

TEST(ConfigParse, TwoGaussians) {
  const auto cfg = config::parse_config(config("separated_pair.yaml"));
  EXPECT_EQ(cfg.modes.size(), 2u);
  EXPECT_EQ(cfg.modes[1].name, "high");
  EXPECT_EQ(cfg.threshold, 1e-3);
  EXPECT_EQ(cfg.format, config::Format::json);
}

TEST(ConfigParse, OriginGuardRejected) {
  const auto path = temp_file("guard.yaml", "modes:\n  - {name: a, type: gaussian, omega0: 2.0, sigma: 1.0}\n");
  const auto r = run({"overlap", "-c", path.string(), "--chi", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("PositiveSupport"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find(path.string() + ":2:"), std::string::npos) << r.err;
}

TEST(ConfigParse, OriginGuardOverride) {
  const auto path = temp_file("override.yaml",
                              "modes:\n  - {name: a, type: gaussian, omega0: 2.0, sigma: 1.0, allow_near_origin: true}\n");
  const auto r = run({"overlap", "-c", path.string(), "--chi", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(value(payload(r)["magnitude"]), 1.0, 1e-9);
}

TEST(ConfigParse, UnknownKeyRejectedWithLocation) {
  const auto path = temp_file("unknown.yaml",
                              "modes:\n  - name: a\n    type: gaussian\n    omega0: 10.0\n    sigma_: 1.0\n");
  try {
    (void)config::parse_config(path.string());
    FAIL();
  } catch (const config::ConfigError& e) {
    EXPECT_EQ(e.line(), 5);
    EXPECT_EQ(e.column(), 5);
    EXPECT_NE(std::string(e.what()).find("sigma_"), std::string::npos);
  }
  const auto r = run({"overlap", "-c", path.string(), "--chi", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(":5:5: unknown key 'sigma_'"), std::string::npos) << r.err;
}

TEST(ConfigParse, MalformedYaml) {
  try {
    (void)config::parse_config_text("modes: [\n  - {a: 1\n", "inline");
    FAIL();
  } catch (const config::ConfigError& e) {
    EXPECT_GT(e.line(), 0);
  }
}

TEST(ConfigParse, Rejections) {
  const std::vector<std::string> bad{
      "unit_scale: 0\nmodes: []\n",
      "unit_scale: abc\n",
      "modes:\n  - {type: gaussian, omega0: 10.0}\n",
      "modes:\n  - {type: lorentzian, omega0: 10.0, sigma: 1.0}\n",
      "modes:\n  - {type: gaussian, omega0: 10.0, sigma: -1.0}\n",
      "modes:\n  - {type: comb, teeth: [{center: 10.0, width: 1.0, weight: 0}]}\n",
      "modes:\n  - {type: sampled, omega: [1, 2], amplitude: [1]}\n",
      "output: {format: xml}\n",
      "quadrature: {rel_tol: -1}\n",
      "quadrature: {policy: nearest}\n",
      "parameter_scan: {axis1: {name: width, values: [1]}, axis2: {name: sigma, values: [1]}}\n",
      "threshold: [1, 2]\n",
      "extra: 1\n",
  };
  for (const auto& text : bad) {
    EXPECT_THROW((void)config::parse_config_text(text, "inline"), config::ConfigError) << text;
  }
}

TEST(ConfigParse, UnitScaleConvertsFrequencies) {
  const auto cfg = config::parse_config_text(
      "unit_scale: 2.0\nmodes:\n  - {name: g, type: gaussian, omega0: 10.0, sigma: 1.0, phi: 0.4, beta: 0.8}\n", "inline");
  const auto& g = std::get<spectra::GaussianChirp>(cfg.modes[0].mode.variant());
  EXPECT_EQ(g.omega0, 20.0);
  EXPECT_EQ(g.sigma, 2.0);
  EXPECT_EQ(g.phi, 0.2);
  EXPECT_EQ(g.beta, 0.2);
}

TEST(ConfigParse, CombAndSampledAreNormalized) {
  const auto cfg = config::parse_config(config("family.yaml"));
  ASSERT_EQ(cfg.modes.size(), 12u);
  for (const auto& m : cfg.modes) EXPECT_NEAR(spectra::norm_squared(m.mode).value.real(), 1.0, 1e-9) << m.name;
}

TEST(ConfigParse, DigestIsStableAndContentSensitive) {
  const auto a = config::parse_config(config("separated_pair.yaml"));
  const auto b = config::parse_config(config("separated_pair.yaml"));
  const auto c = config::parse_config(config("narrow_pair.yaml"));
  EXPECT_EQ(config::digest(a.text), config::digest(b.text));
  EXPECT_NE(config::digest(a.text), config::digest(c.text));
  EXPECT_EQ(config::digest(a.text).size(), 16u);
  // FNV-1a 64 reference values.
  EXPECT_EQ(config::digest(""), "cbf29ce484222325");
  EXPECT_EQ(config::digest("a"), "af63dc4c8601ec8c");
}

// ---------------------------------------------------------------------------

TEST(Emit, SameRunTwiceIsIdentical) {
  const std::vector<std::string> args{"scan", "-c", config("separated_pair.yaml"), "--points", "9"};
  EXPECT_EQ(without_timestamp(run(args).out), without_timestamp(run(args).out));
}

TEST(Emit, ScanIndependentOfWorkers) {
  const std::vector<std::string> base{"scan", "-c", config("separated_pair.yaml"), "--points", "21"};
  auto one = base, eight = base;
  one.insert(one.end(), {"--workers", "1"});
  eight.insert(eight.end(), {"--workers", "8"});
  EXPECT_EQ(without_timestamp(run(one).out), without_timestamp(run(eight).out));
  one.insert(one.end(), {"--format", "csv"});
  eight.insert(eight.end(), {"--format", "csv"});
  EXPECT_EQ(run(one).out, run(eight).out);
}

TEST(Emit, ToolBinaryIsDeterministic) {
  const std::string args = "scan -c " + config("separated_pair.yaml") + " --points 21 --workers ";
  const auto a = run_tool(args + "1");
  const auto b = run_tool(args + "8");
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_FALSE(a.out.empty());
  EXPECT_EQ(without_timestamp(a.out), without_timestamp(b.out));
}

TEST(Emit, NoParallelEnvironment) {
  ::setenv("QREDSHIFT_NO_PARALLEL", "1", 1);
  EXPECT_EQ(cli::resolve_workers(8), 1u);
  const auto a = run({"scan", "-c", config("separated_pair.yaml"), "--points", "5", "--workers", "8", "--format", "csv"});
  ::unsetenv("QREDSHIFT_NO_PARALLEL");
  EXPECT_EQ(cli::resolve_workers(8), 8u);
  const auto b = run({"scan", "-c", config("separated_pair.yaml"), "--points", "5", "--format", "csv"});
  EXPECT_EQ(a.out, b.out);
}

TEST(Emit, DocumentEnvelope) {
  const auto r = run({"overlap", "-c", config("single_gaussian.yaml"), "--chi", "1.2"});
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["command"], "overlap");
  EXPECT_EQ(doc["tool_version"], QREDSHIFT_VERSION);
  EXPECT_EQ(doc["config_digest"], config::digest(read_file(config("single_gaussian.yaml"))));
  EXPECT_TRUE(std::regex_match(doc["timestamp"].get<std::string>(),
                               std::regex(R"(\d{4}-\d\d-\d\dT\d\d:\d\d:\d\dZ)")));
  EXPECT_EQ(r.out.find('\r'), std::string::npos);
  EXPECT_EQ(r.out.back(), '\n');
}

TEST(Emit, KeysAreSorted) {
  const auto r = run({"functionals", "-c", config("single_gaussian.yaml")});
  const auto p = payload(r);
  std::string previous;
  for (const auto& [key, v] : p.items()) {
    EXPECT_LT(previous, key);
    previous = key;
  }
  EXPECT_LT(r.out.find("\"command\""), r.out.find("\"payload\""));
}

TEST(Emit, JsonRoundTripsAtSeventeenDigits) {
  const auto r = run({"overlap", "-c", config("family.yaml"), "--all-modes", "--chi", "1.07"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cfg = config::parse_config(config("family.yaml"));
  const auto results = payload(r)["results"];
  ASSERT_EQ(results.size(), cfg.modes.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto direct = overlap::overlap_exact(cfg.modes[i].mode, RedshiftFactor(1.07), cfg.quadrature);
    const auto& row = results[i];
    // Parsing the string recovers the double bit for bit.
    EXPECT_EQ(value(row["delta"]["re"]), direct.delta.real());
    EXPECT_EQ(value(row["delta"]["im"]), direct.delta.imag());
    EXPECT_EQ(value(row["magnitude"]), direct.magnitude);
    EXPECT_EQ(cli::num(value(row["phase"])), row["phase"].get<std::string>());
  }
  // A second pass through a generic parser changes nothing.
  const auto doc = json::parse(r.out);
  EXPECT_EQ(json::parse(doc.dump()), doc);
}

TEST(Emit, NumberFormatting) {
  EXPECT_EQ(cli::num(0.1), "0.10000000000000001");
  EXPECT_EQ(cli::num(1.0), "1");
  EXPECT_EQ(cli::num(std::nan("")), "nan");
  EXPECT_EQ(cli::num(-std::numeric_limits<double>::infinity()), "-inf");
  for (const double v : {1.0 / 3.0, 2.0e-300, 6.02214076e23, -0.0}) EXPECT_EQ(std::stod(cli::num(v)), v);
}

TEST(Emit, ScanCsvMatchesValiditySchema) {
  const auto r = run({"scan", "-c", config("separated_pair.yaml"), "--chi-min", "0.9", "--chi-max", "1.3", "--points",
                      "9", "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cfg = config::parse_config(config("separated_pair.yaml"));
  std::vector<spectra::SpectralMode> raw;
  for (const auto& m : cfg.modes) raw.push_back(m.mode);
  const auto basis = mixer::gram_schmidt(raw, cfg.quadrature);
  const auto records = validity::scan_chi(basis, validity::linear_grid(0.9, 1.3, 9), 1e-3, cfg.quadrature);
  EXPECT_EQ(r.out, validity::scan_csv(records));
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "chi,residual,deficit,min_eig,converged");
}

TEST(Emit, ScanChiListAndDirection) {
  const auto fwd = run({"scan", "-c", config("separated_pair.yaml"), "--chi-list", "0.5", "2", "--format", "csv"});
  const auto back = run({"scan", "-c", config("separated_pair.yaml"), "--chi-list", "0.5", "2", "--direction",
                         "bob-to-alice", "--format", "csv"});
  EXPECT_EQ(fwd.out, back.out);  // {0.5, 2} is closed under inversion
}

TEST(Emit, NonTabularCsvIsFieldValue) {
  const auto r = run({"freq", "-c", config("single_gaussian.yaml"), "--chi", "2", "--format", "csv"});
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "field,value");
  while (std::getline(lines, line)) EXPECT_EQ(std::count(line.begin(), line.end(), ','), 1) << line;
  EXPECT_NE(r.out.find("\nratio,4\n"), std::string::npos);
}

TEST(Emit, OutputFileAndPlot) {
  const auto out = temp_file("scan.json");
  const auto plot = temp_file("scan.dat");
  const std::vector<std::string> args{"scan", "-c", config("separated_pair.yaml"), "--points", "5"};
  auto with_files = args;
  with_files.insert(with_files.end(), {"--output", out.string(), "--plot", plot.string()});
  const auto r = run(with_files);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(without_timestamp(read_file(out)), without_timestamp(run(args).out));
  const auto data = read_file(plot);
  EXPECT_EQ(data.rfind("# chi residual\n", 0), 0u);
  EXPECT_EQ(std::count(data.begin(), data.end(), '\n'), 6);
}

// ---------------------------------------------------------------------------

class Help : public ::testing::TestWithParam<std::string> {};

TEST_P(Help, MatchesGolden) {
  const auto& name = GetParam();
  const auto r = name == "main" ? run({"--help"}) : run({name, "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, read_file(kSource + "/tests/golden/" + name + ".txt"));
}

INSTANTIATE_TEST_SUITE_P(Subcommands, Help,
                         ::testing::Values("main", "overlap", "functionals", "matrix", "scan", "boundary", "params",
                                           "freq", "optimize-phase"),
                         [](const auto& info) {
                           std::string n = info.param;
                           std::replace(n.begin(), n.end(), '-', '_');
                           return n;
                         });

TEST(HelpText, EverySubcommandListsConfig) {
  for (const auto& sub : cli::subcommands()) {
    const auto r = run({sub, "--help"});
    EXPECT_NE(r.out.find("--config"), std::string::npos) << sub;
    EXPECT_NE(r.out.find("--format"), std::string::npos) << sub;
  }
}

}  // namespace

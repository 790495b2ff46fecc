#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "higgsloc/config.hpp"

using namespace higgsloc;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ParseConfig, MinimalFreeSpreadingGetsDefaults) {
  const auto c = parse_config(
      "scenario = free-spreading\n"
      "[params]\nM = 2\n"
      "[free]\nsigma0 = 1.5\n"
      "[grid]\nn = 2048\n"
      "[run]\nT = 4\ndt = 0.001\n");
  EXPECT_EQ(c.scenario, "free-spreading");
  EXPECT_EQ(c.params.M, 2.0);
  EXPECT_EQ(c.sigma0, 1.5);
  EXPECT_EQ(c.n, 2048u);
  EXPECT_EQ(c.T, 4.0);
  EXPECT_EQ(c.dt, 0.001);
  const ScenarioConfig d;
  EXPECT_EQ(c.params.m, d.params.m);
  EXPECT_EQ(c.params.v, d.params.v);
  EXPECT_EQ(c.stride, d.stride);
  EXPECT_EQ(c.family, Family::OneD_B);
  EXPECT_EQ(c.convention, CouplingConvention::motion_equation);
  EXPECT_NO_THROW(check_config(c));
  const auto echoed = serialize_config(c);
  EXPECT_NE(echoed.find("stride = 100"), std::string::npos);
  EXPECT_NE(echoed.find("sigma0 = 1.5"), std::string::npos);
}

TEST(ParseConfig, InconsistentOneDBParsesButFailsValidation) {
  const auto c = parse_config(
      "scenario = soliton-propagation\n"
      "[params]\nM = 1\nm = 1\nv = 1\n"
      "[soliton]\nfamily = OneD_B\n");
  EXPECT_NO_THROW(check_config(c));
  const auto r = validate_params(c.params, SolitonSpec::one_d_b(c.params));
  EXPECT_FALSE(r.ok());
  EXPECT_NEAR(r.find("V_s real: (3/2) m^3 v^2 <= M^3")->margin, -0.5, 1e-9);
}

TEST(ParseConfig, DuplicateKeyNamesBothLines) {
  const auto msg = error_of("scenario = yukawa-oracle\n[params]\nm = 0.5\n\nm = 0.6\n");
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
}

TEST(ParseConfig, UnknownKeyRejectedWithLine) {
  const auto msg = error_of("scenario = yukawa-oracle\n[grid]\nnodes = 12\n");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("unknown key 'grid.nodes'"), std::string::npos) << msg;
}

TEST(ParseConfig, TypeMismatchRejectedWithLine) {
  for (const char* bad : {"[grid]\nn = 12.5\n", "[grid]\nn = -4\n", "[params]\nm = half\n",
                          "[soliton]\nat_rest = yes\n", "[run]\nmode = implicit\n",
                          "[params]\nm = inf\n"}) {
    const auto msg = error_of(std::string("scenario = yukawa-oracle\n") + bad);
    EXPECT_NE(msg.find("type mismatch"), std::string::npos) << bad << " -> " << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << bad << " -> " << msg;
  }
}

TEST(ParseConfig, MissingScenarioAndMalformedLines) {
  EXPECT_NE(error_of("[params]\nM = 1\n").find("missing required key 'scenario'"),
            std::string::npos);
  EXPECT_NE(error_of("scenario = free-spreading\njust words\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("scenario = free-spreading\n[grid\n").find("section header"),
            std::string::npos);
}

TEST(ParseConfig, CommentsAndWhitespace) {
  const auto c = parse_config(
      "# header comment\n"
      "  scenario   =   choquard-stationary   ; trailing\n"
      "\n[ run ]\n  T = 50 # fifty\r\n");
  EXPECT_EQ(c.scenario, "choquard-stationary");
  EXPECT_EQ(c.T, 50.0);
}

TEST(CheckConfig, UnknownScenarioListsValidOnes) {
  ScenarioConfig c;
  c.scenario = "warp-drive";
  try {
    check_config(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (auto n : kScenarioNames) EXPECT_NE(msg.find(n), std::string::npos) << n;
  }
}

TEST(CheckConfig, RangeAndSweepChecks) {
  ScenarioConfig c;
  c.scenario = "free-spreading";
  EXPECT_NO_THROW(check_config(c));
  auto bad = c;
  bad.T = -1.0;
  EXPECT_THROW(check_config(bad), ConfigError);
  bad = c;
  bad.stride = 0;
  EXPECT_THROW(check_config(bad), ConfigError);
  bad = c;
  bad.strength = -0.5;
  EXPECT_THROW(check_config(bad), ConfigError);
  bad = c;
  bad.scenario = "param-sweep";
  bad.sweep_base = "param-sweep";
  EXPECT_THROW(check_config(bad), ConfigError);
  bad.sweep_base = "yukawa-oracle";
  bad.sweep_key = "params.q";
  EXPECT_THROW(check_config(bad), ConfigError);
  bad.sweep_key = "params.m";
  EXPECT_NO_THROW(check_config(bad));
}

TEST(Overrides, ApplyDottedKeys) {
  ScenarioConfig c;
  apply_override(c, "params.m = 0.3");
  apply_override(c, "run.mode=choquard");
  apply_override(c, "toggles.coupling_convention=printed_static");
  EXPECT_EQ(c.params.m, 0.3);
  EXPECT_EQ(c.mode, EvolutionMode::choquard);
  EXPECT_EQ(c.convention, CouplingConvention::printed_static);
  EXPECT_THROW(apply_override(c, "params.m"), ConfigError);
  EXPECT_THROW(apply_override(c, "params.mass=1"), ConfigError);
}

TEST(RoundTrip, DefaultsAndEditedValues) {
  ScenarioConfig c;
  c.scenario = "perturbation-stability";
  EXPECT_EQ(parse_config(serialize_config(c)), c);
  c.params = {1.25, 0.1 + 0.2, 1.0 / 3.0};
  c.family = Family::ThreeD_B;
  c.variant_13 = Variant13::corrected_sech_squared;
  c.at_rest = true;
  c.seed = 18446744073709551615ull;
  c.output_dir = "some dir/with spaces";
  c.perturbation = PerturbationKind::width_rescale;
  c.sweep_values = "0.4, 0.5";
  EXPECT_EQ(parse_config(serialize_config(c)), c);
}

TEST(RoundTrip, RandomValues) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::uniform_int_distribution<std::size_t> n(1, 1u << 20);
  for (int i = 0; i < 200; ++i) {
    ScenarioConfig c;
    c.scenario = std::string(kScenarioNames[static_cast<std::size_t>(i) % kScenarioNames.size()]);
    c.params = {u(rng), u(rng), u(rng)};
    c.omega = u(rng);
    c.x0 = u(rng) * 1e-7;
    c.T = std::abs(u(rng)) * 1e5;
    c.dt = std::abs(u(rng)) * 1e-9;
    c.n = n(rng);
    c.stride = n(rng);
    c.seed = rng();
    c.mode = i % 2 ? EvolutionMode::coupled : EvolutionMode::choquard;
    c.scheme_checks = i % 3 == 0;
    EXPECT_EQ(parse_config(serialize_config(c)), c) << serialize_config(c);
  }
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(-2.5e-12), "-2.5e-12");
}

TEST(SampleConfigs, AllParseAndCheck) {
  const std::filesystem::path dir = HIGGSLOC_CONFIG_DIR;
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".cfg") continue;
    ++count;
    ScenarioConfig c;
    ASSERT_NO_THROW(c = parse_config(read_file(entry.path()))) << entry.path();
    EXPECT_NO_THROW(check_config(c)) << entry.path();
  }
  EXPECT_GE(count, 7u);
}

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "higgsloc/scenarios.hpp"

using namespace higgsloc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / "higgsloc_scenarios" / name;
  fs::remove_all(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig make(const std::string& scenario, const std::string& dir,
                    const std::vector<std::string>& overrides = {}) {
  ScenarioConfig c;
  c.scenario = scenario;
  c.output_dir = scratch(dir).string();
  for (const auto& o : overrides) apply_override(c, o);
  return c;
}

std::set<int> ids_of(const RunReport& r) {
  std::set<int> ids;
  for (const auto& c : r.criteria) ids.insert(c.id);
  return ids;
}

}  // namespace

TEST(YukawaScenario, WritesReportSnapshotsAndPlotData) {
  const auto c = make("yukawa-oracle", "yukawa", {"yukawa.n1=128", "yukawa.n3=16"});
  const auto rep = run_scenario(c);
  ASSERT_EQ(rep.status, RunStatus::ok) << rep.error;
  const fs::path dir = c.output_dir;
  for (const char* f : {"config.cfg", "report.json", "yukawa_1d.csv", "yukawa_3d.bin"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_FALSE(fs::exists(dir / "FAILED"));

  const auto j = Json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(j["scenario"], "yukawa-oracle");
  EXPECT_EQ(j["exit_code"], rep.exit_code());
  ASSERT_EQ(j["criteria"].size(), 3u);
  for (const auto& cr : j["criteria"]) EXPECT_EQ(cr["criterion"], 7);
  EXPECT_LT(j["data"]["max_abs_rel_1d"].get<double>(), 1e-6);
  EXPECT_EQ(parse_config(j["config"].get<std::string>()), c);

  const std::string csv = read_file(dir / "yukawa_1d.csv");
  EXPECT_EQ(csv.rfind("# dim=1 n=128", 0), 0u);
  EXPECT_NE(csv.find("1/N"), std::string::npos);

  const std::string bin = read_file(dir / "yukawa_3d.bin");
  const auto header_end = bin.find('\n');
  ASSERT_NE(header_end, std::string::npos);
  const std::string header = bin.substr(0, header_end);
  EXPECT_NE(header.find("encoding=float64-le"), std::string::npos);
  EXPECT_NE(header.find("fields=source,phi_spectral,phi_direct"), std::string::npos);
  EXPECT_EQ(bin.size() - header_end - 1, 3u * 16u * 16u * 16u * 8u);
}

TEST(RunScenario, UnknownScenarioIsConfigError) {
  const auto c = make("warp-drive", "unknown");
  const auto rep = run_scenario(c);
  EXPECT_EQ(rep.status, RunStatus::config_error);
  EXPECT_EQ(rep.exit_code(), 2);
  EXPECT_NE(rep.error.find("verify-residuals"), std::string::npos);
}

TEST(RunScenario, InvalidPhysicsIsConfigError) {
  const auto c = make("soliton-propagation", "invalid", {"params.m=1", "params.v=1"});
  const auto rep = run_scenario(c);
  EXPECT_EQ(rep.exit_code(), 2) << rep.error;
  EXPECT_NE(rep.error.find("V_s"), std::string::npos) << rep.error;
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "FAILED"));
}

TEST(RunScenario, NumericalAbortWritesFailedMarker) {
  const auto c = make("soliton-propagation", "abort",
                      {"grid.n=256", "run.T=1", "run.dt=0.5", "checks.scheme=false"});
  const auto rep = run_scenario(c);
  EXPECT_EQ(rep.status, RunStatus::aborted);
  EXPECT_EQ(rep.exit_code(), 3);
  ASSERT_TRUE(rep.abort_time.has_value());
  const fs::path dir = c.output_dir;
  EXPECT_TRUE(fs::exists(dir / "FAILED"));
  const auto j = Json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(j["exit_code"], 3);
  EXPECT_TRUE(j.contains("abort_time"));
}

TEST(RunScenario, PerturbationRunsAreDeterministic) {
  const auto a = make("perturbation-stability", "det_a", {"grid.n=512", "run.T=1", "run.stride=20"});
  auto b = a;
  b.output_dir = scratch("det_b").string();
  const auto ra = run_scenario(a);
  const auto rb = run_scenario(b);
  ASSERT_EQ(ra.status, RunStatus::ok) << ra.error;
  EXPECT_EQ(read_file(fs::path(a.output_dir) / "series.csv"),
            read_file(fs::path(b.output_dir) / "series.csv"));
  EXPECT_EQ(ids_of(ra), std::set<int>{10});
  EXPECT_EQ(ra.exit_code(), 0);
  const std::string csv = read_file(fs::path(a.output_dir) / "series.csv");
  EXPECT_EQ(csv.rfind("t,norm,centroid,width,peak_pos,phi_min,validity_flag\n", 0), 0u);
  EXPECT_TRUE(fs::exists(fs::path(a.output_dir) / "plot.gp"));
}

TEST(RunScenario, CriteriaMapToTheirScenario) {
  struct Case {
    const char* scenario;
    std::vector<std::string> overrides;
    std::set<int> ids;
  };
  const std::vector<Case> cases = {
      {"soliton-propagation", {"grid.n=512", "run.T=1", "run.stride=20"}, {5, 9}},
      {"soliton-propagation", {"grid.n=512", "run.T=1", "checks.scheme=false"}, {5}},
      {"free-spreading", {"grid.n=512", "run.T=1"}, {6}},
      {"choquard-stationary", {"grid.n=512", "run.T=1", "soliton.at_rest=true"}, {8}},
      {"verify-residuals", {"audit.n=1024", "run.T=2"}, {1, 2, 3, 4}},
  };
  int k = 0;
  for (const auto& cs : cases) {
    const auto c = make(cs.scenario, "map_" + std::to_string(k++), cs.overrides);
    const auto rep = run_scenario(c);
    EXPECT_NE(rep.status, RunStatus::config_error) << cs.scenario << ": " << rep.error;
    EXPECT_NE(rep.status, RunStatus::aborted) << cs.scenario << ": " << rep.error;
    EXPECT_EQ(ids_of(rep), cs.ids) << cs.scenario;
  }
}

TEST(ParamSweep, WorkerCountDoesNotChangeResults) {
  auto base = make("param-sweep", "sweep_1",
                   {"sweep.base=yukawa-oracle", "sweep.key=params.m", "sweep.values=0.4, 0.5, 0.6",
                    "yukawa.n1=128", "yukawa.n3=16", "sweep.workers=1"});
  auto par = base;
  par.output_dir = scratch("sweep_3").string();
  par.sweep_workers = 3;
  const auto a = run_scenario(base);
  const auto b = run_scenario(par);
  ASSERT_EQ(a.criteria.size(), 9u);
  ASSERT_EQ(a.criteria.size(), b.criteria.size());
  for (std::size_t i = 0; i < a.criteria.size(); ++i) {
    EXPECT_EQ(a.criteria[i].value, b.criteria[i].value);
    EXPECT_EQ(a.criteria[i].detail, b.criteria[i].detail);
    EXPECT_EQ(a.criteria[i].passed, b.criteria[i].passed);
  }
  EXPECT_EQ(a.criteria.front().detail.rfind("params.m = 0.4", 0), 0u);
  EXPECT_EQ(a.criteria.back().detail.rfind("params.m = 0.6", 0), 0u);
  for (int i = 0; i < 3; ++i)
    EXPECT_TRUE(fs::exists(fs::path(par.output_dir) / ("run_" + std::to_string(i)) / "report.json"));
}

TEST(ParamSweep, BadKeyIsConfigError) {
  const auto c = make("param-sweep", "sweep_bad", {"sweep.key=params.q"});
  EXPECT_EQ(run_scenario(c).exit_code(), 2);
}

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "cfmesmo/campaign.hpp"
#include "cfmesmo/config.hpp"
#include "cfmesmo/csv.hpp"

using namespace cfmesmo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cfmesmo_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string error_of(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

CampaignConfig tiny_random(const fs::path& dir) {
  CampaignConfig c;
  c.optimizer = "random";
  c.optimizer_config.budget.total_cost = 20.0;
  c.output_dir = dir.string();
  return c;
}

#ifdef CFMESMO_CLI
int run_cli(const std::string& args) {
  const int status = std::system((std::string(CFMESMO_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}
#endif

}  // namespace

TEST_CASE("config defaults and round trip") {
  const CampaignConfig empty = parse_config("");
  CHECK(empty == CampaignConfig{});
  CHECK_NOTHROW(validate_config(empty));
  CHECK(parse_config(emit_config(CampaignConfig{})) == CampaignConfig{});

  CampaignConfig c;
  c.problem = "zdt1";
  c.seeds = {3, 1, 4};
  c.optimizer_config.acquisition.pool_size = 77;
  c.optimizer_config.gp.noise_min = 1.25e-7;
  c.reram.device.sigma_prog = 0.031;
  c.synthetic_cost.c0 = 0.3;
  CHECK(parse_config(emit_config(c)) == c);
  CHECK(emit_config(parse_config(emit_config(c))) == emit_config(c));
}

TEST_CASE("config errors name the key and line") {
  const std::string typo = error_of("problem: zdt1\noptimzer: random\n");
  CHECK(typo.find("optimzer") != std::string::npos);
  CHECK(typo.find("line 2") != std::string::npos);

  const std::string nested = error_of("gp:\n  restarts: 2\n  lenghtscale_min: 0.1\n");
  CHECK(nested.find("gp.lenghtscale_min") != std::string::npos);
  CHECK(nested.find("line 3") != std::string::npos);

  const std::string type = error_of("budget:\n  total_cost: lots\n");
  CHECK(type.find("budget.total_cost") != std::string::npos);
  CHECK(type.find("line 2") != std::string::npos);

  CHECK(error_of("seeds: [1, 2\n").find("line") != std::string::npos);
  CHECK(!error_of("optimizer: annealing\n").empty());
  CHECK(!error_of("problem: rosenbrock\n").empty());
  CHECK(!error_of("budget:\n  total_cost: -1\n").empty());
  CHECK(error_of("optimizer: mesmo\nseeds: [5, 6]\n").empty());
}

TEST_CASE("config hash ignores settings that do not change results") {
  CampaignConfig a, b;
  b.output_dir = "elsewhere";
  b.workers = 4;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seeds = {9};
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("environment overrides") {
  CampaignConfig c;
  ::setenv("CFMESMO_OUT_DIR", "/tmp/somewhere", 1);
  ::setenv("CFMESMO_WORKERS", "3", 1);
  apply_environment(c);
  CHECK(c.output_dir == "/tmp/somewhere");
  CHECK(c.workers == 3);
  ::setenv("CFMESMO_WORKERS", "zero", 1);
  CHECK_THROWS_AS(apply_environment(c), ConfigError);
  ::unsetenv("CFMESMO_OUT_DIR");
  ::unsetenv("CFMESMO_WORKERS");
  CampaignConfig d;
  apply_environment(d);
  CHECK(d == CampaignConfig{});
}

TEST_CASE("random campaign outputs are byte-identical across reruns") {
  const fs::path d1 = scratch("det1"), d2 = scratch("det2");
  const CampaignOutcome o1 = run_campaign(tiny_random(d1));
  CampaignConfig c2 = tiny_random(d2);
  c2.workers = 2;
  const CampaignOutcome o2 = run_campaign(c2);
  REQUIRE(o1.all_completed());
  REQUIRE(o1.files.size() == o2.files.size());
  for (std::size_t i = 0; i < o1.files.size(); ++i) {
    CHECK(fs::path(o1.files[i]).filename() == fs::path(o2.files[i]).filename());
    CHECK(slurp(o1.files[i]) == slurp(o2.files[i]));
  }
  const std::string trace = slurp(d1 / "trace_seed0.csv");
  CHECK(trace.rfind("# config_hash=" + config_hash(tiny_random(d1)) + " seed=0\n", 0) == 0);
  CHECK(trace.find('\r') == std::string::npos);
  CHECK(slurp(d1 / "campaign_seed0.json").find(config_hash(tiny_random(d1))) != std::string::npos);
}

TEST_CASE("multi-seed run writes one trace per seed plus aggregates") {
  const fs::path dir = scratch("multi");
  CampaignConfig c = tiny_random(dir);
  c.seeds = {1, 2, 3};
  c.workers = 2;
  const CampaignOutcome o = run_campaign(c);
  REQUIRE(o.all_completed());
  for (int s : {1, 2, 3}) {
    CHECK(fs::exists(dir / ("trace_seed" + std::to_string(s) + ".csv")));
    CHECK(fs::exists(dir / ("front_seed" + std::to_string(s) + ".csv")));
    CHECK(fs::exists(dir / ("campaign_seed" + std::to_string(s) + ".json")));
  }
  CHECK(fs::exists(dir / "hv_vs_cost.csv"));
  CHECK(fs::exists(dir / "fidelity_trace.csv"));
  CHECK(o.files.size() == 11);

  std::ifstream hv(dir / "hv_vs_cost.csv");
  const Eigen::MatrixXd table = read_numeric_csv(hv, "hv_vs_cost.csv");
  CHECK(table.rows() == 101);
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    CHECK(table(i, 1) <= table(i, 2));
    CHECK(table(i, 2) <= table(i, 3));
    if (i > 0) CHECK(table(i, 2) >= table(i - 1, 2));
  }
}

TEST_CASE("aggregation helpers") {
  CHECK(quantile({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(quantile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(quantile({7}, 0.75) == 7.0);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(quantile({1, inf, inf, 2}, 0.5) == inf);
  CHECK(quantile({1, 2, inf}, 0.5) == 2.0);
  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
  std::vector<TraceRow> t(2);
  t[0].cumulative_cost = 1;
  t[0].hypervolume = 2;
  t[1].cumulative_cost = 3;
  t[1].hypervolume = 5;
  CHECK(hypervolume_at_cost(t, 0.5) == 0.0);
  CHECK(hypervolume_at_cost(t, 2.9) == 2.0);
  CHECK(hypervolume_at_cost(t, 3.0) == 5.0);
  const auto g = cost_grid(60, 101);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 60.0);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 6.0, -1e-300, 123456789.125, 2.5e-9}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(6.0) == "6");
}

#ifdef CFMESMO_CLI
TEST_CASE("command-line tool") {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "ok.yaml") << "optimizer: random\nbudget:\n  total_cost: 12\n";
    std::ofstream(dir / "bad.yaml") << "optimzer: random\n";
    std::ofstream(dir / "front.csv") << "a,b\n3,1\n2,2\n1,3\n";
  }
  CHECK(run_cli("run --config " + (dir / "ok.yaml").string() + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "trace_seed0.csv"));
  CHECK(run_cli("run --config " + (dir / "bad.yaml").string()) != 0);
  CHECK(run_cli("emit-defaults") == 0);
  CHECK(run_cli("hv --front " + (dir / "front.csv").string() + " --ref 0,0") == 0);
  CHECK(run_cli("evaluate --config " + (dir / "ok.yaml").string() + " --x 0.5,0.5 --z 0.3") == 0);
  CHECK(run_cli("evaluate --config " + (dir / "ok.yaml").string() + " --x 0.5") != 0);
  CHECK(run_cli("frobnicate") != 0);
}
#endif

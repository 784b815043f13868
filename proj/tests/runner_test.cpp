#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dopt/runner.hpp"

using dopt::ConfigError;
using dopt::RunConfig;
using dopt::StepSize;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "dopt_runner_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunConfig logistic_config(const fs::path& out) {
  RunConfig cfg;
  cfg.experiment = "logistic";
  cfg.algorithm = "subgradient";
  cfg.n = 4;
  cfg.iterations = 20;
  cfg.step_text = "diminishing:0.6";
  cfg.graph_p = 0.8;
  cfg.seed = 5;
  cfg.out_dir = out.string();
  return cfg;
}

// round -> value for one metric of one agent (-1 = network scope)
std::map<long, double> metric_series(const fs::path& csv,
                                     const std::string& metric, long agent) {
  std::ifstream f(csv);
  REQUIRE(f.good());
  std::map<long, double> series;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string round_s, agent_s, name, value_s;
    std::getline(ss, round_s, ',');
    std::getline(ss, agent_s, ',');
    std::getline(ss, name, ',');
    std::getline(ss, value_s, ',');
    if (name == metric && std::stol(agent_s) == agent)
      series[std::stol(round_s)] = std::stod(value_s);
  }
  return series;
}

}  // namespace

TEST_CASE("step specifications parse and reject junk") {
  StepSize c = dopt::parse_step("constant:0.05");
  CHECK(c.rule == StepSize::Rule::constant);
  CHECK(c.at(9) == 0.05);
  StepSize d = dopt::parse_step("diminishing:0.75");
  CHECK(d.rule == StepSize::Rule::diminishing);
  CHECK(d.at(1) == 1.0);
  CHECK_THROWS_AS(dopt::parse_step("constant"), ConfigError);
  CHECK_THROWS_AS(dopt::parse_step("linear:0.1"), ConfigError);
  CHECK_THROWS_AS(dopt::parse_step("constant:zero"), ConfigError);
  CHECK_THROWS_AS(dopt::parse_step("constant:-0.1"), ConfigError);
  CHECK_THROWS_AS(dopt::parse_step("diminishing:0.4"), ConfigError);
  CHECK_THROWS_AS(dopt::parse_step(""), ConfigError);
}

TEST_CASE("config entries apply by CLI option name") {
  RunConfig cfg;
  dopt::apply_config_entry(cfg, "experiment", "svm");
  dopt::apply_config_entry(cfg, "algorithm", "constraints_consensus");
  dopt::apply_config_entry(cfg, "n", "7");
  dopt::apply_config_entry(cfg, "iterations", "33");
  dopt::apply_config_entry(cfg, "step", "constant:0.01");
  dopt::apply_config_entry(cfg, "graph-p", "0.9");
  dopt::apply_config_entry(cfg, "graph-seed", "12");
  dopt::apply_config_entry(cfg, "undirected", "false");
  dopt::apply_config_entry(cfg, "seed", "99");
  dopt::apply_config_entry(cfg, "horizon", "5");
  dopt::apply_config_entry(cfg, "timeout", "2.5");
  dopt::apply_config_entry(cfg, "microgrid-a-min", "0.9");
  CHECK(cfg.experiment == "svm");
  CHECK(cfg.algorithm == "constraints_consensus");
  CHECK(cfg.n == 7);
  CHECK(cfg.iterations == 33);
  CHECK(cfg.step_text == "constant:0.01");
  CHECK(cfg.graph_p == 0.9);
  CHECK(cfg.graph_seed == 12);
  CHECK_FALSE(cfg.undirected);
  CHECK(cfg.seed == 99);
  CHECK(cfg.horizon == 5);
  CHECK(cfg.timeout_seconds == 2.5);
  CHECK(cfg.microgrid.a_min == 0.9);
  // instance-hash is accepted (and ignored) so manifests can be re-ingested
  CHECK_NOTHROW(dopt::apply_config_entry(cfg, "instance-hash", "abc"));
  CHECK_THROWS_AS(dopt::apply_config_entry(cfg, "no-such-key", "1"),
                  ConfigError);
  CHECK_THROWS_AS(dopt::apply_config_entry(cfg, "n", "four"), ConfigError);
  CHECK_THROWS_AS(dopt::apply_config_entry(cfg, "undirected", "maybe"),
                  ConfigError);
}

TEST_CASE("config files parse with comments and report bad lines") {
  fs::path dir = fresh_dir("config");
  fs::path good = dir / "good.cfg";
  std::ofstream(good) << "# run setup\n"
                         "experiment = logistic\n"
                         "algorithm=subgradient\n"
                         "\n"
                         "n = 6   # inline comment\n"
                         "step = constant:0.02\n";
  RunConfig cfg = dopt::parse_config_file(good.string());
  CHECK(cfg.experiment == "logistic");
  CHECK(cfg.algorithm == "subgradient");
  CHECK(cfg.n == 6);
  CHECK(cfg.step_text == "constant:0.02");

  fs::path bad = dir / "bad.cfg";
  std::ofstream(bad) << "experiment = logistic\nnonsense line\n";
  try {
    dopt::parse_config_file(bad.string());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK_THROWS_AS(dopt::parse_config_file((dir / "absent.cfg").string()),
                  ConfigError);
}

TEST_CASE("validation enforces the experiment/algorithm matrix") {
  fs::path dir = fresh_dir("validate");
  RunConfig cfg = logistic_config(dir);
  CHECK_NOTHROW(dopt::validate_config(cfg));

  RunConfig bad = cfg;
  bad.algorithm = "constraints_consensus";
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);

  bad = cfg;
  bad.experiment = "svm";
  bad.algorithm = "subgradient";
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);

  bad = cfg;
  bad.algorithm = "gradient_tracking";  // needs a constant step
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);
  bad.step_text = "constant:0.01";
  CHECK_NOTHROW(dopt::validate_config(bad));
  bad.undirected = false;  // and an undirected graph
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);

  bad = cfg;
  bad.experiment = "microgrid";
  bad.algorithm = "primal_decomposition";
  bad.undirected = false;
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);

  bad = cfg;
  bad.transport = "tcp";  // needs an agent id in range
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);
  bad.agent_id = bad.n;
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);
  bad.agent_id = 0;
  CHECK_NOTHROW(dopt::validate_config(bad));

  bad = cfg;
  bad.graph_p = 0.0;
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);
  bad = cfg;
  bad.n = 0;
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);
  bad = cfg;
  bad.experiment = "mystery";
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);
  bad = cfg;
  bad.transport = "carrier-pigeon";
  CHECK_THROWS_AS(dopt::validate_config(bad), ConfigError);
}

TEST_CASE("the seed environment variable overrides the config") {
  RunConfig cfg;
  cfg.seed = 3;
  REQUIRE(setenv("DOPT_SEED", "41", 1) == 0);
  dopt::apply_seed_env(cfg);
  CHECK(cfg.seed == 41);
  REQUIRE(setenv("DOPT_SEED", "not-a-number", 1) == 0);
  CHECK_THROWS_AS(dopt::apply_seed_env(cfg), ConfigError);
  unsetenv("DOPT_SEED");
  cfg.seed = 3;
  dopt::apply_seed_env(cfg);
  CHECK(cfg.seed == 3);
}

TEST_CASE("manifests echo the config and re-ingest losslessly") {
  fs::path dir = fresh_dir("manifest");
  RunConfig cfg = logistic_config(dir);
  std::string manifest = dopt::manifest_text(cfg, "deadbeef00000000");
  CHECK(manifest.find("experiment=logistic") != std::string::npos);
  CHECK(manifest.find("instance-hash=deadbeef00000000") !=
        std::string::npos);

  fs::path mpath = dir / "manifest.txt";
  std::ofstream(mpath) << manifest;
  RunConfig back = dopt::parse_config_file(mpath.string());
  CHECK(back.experiment == cfg.experiment);
  CHECK(back.algorithm == cfg.algorithm);
  CHECK(back.n == cfg.n);
  CHECK(back.iterations == cfg.iterations);
  CHECK(back.step_text == cfg.step_text);
  CHECK(back.graph_p == cfg.graph_p);
  CHECK(back.seed == cfg.seed);
  CHECK(dopt::manifest_text(back, "deadbeef00000000") == manifest);
}

TEST_CASE("cmd_run produces instance, manifest and metrics files") {
  fs::path dir = fresh_dir("run");
  RunConfig cfg = logistic_config(dir);
  REQUIRE(dopt::cmd_run(cfg) == 0);
  CHECK(fs::exists(dir / "instance.bin"));
  CHECK(fs::exists(dir / "manifest.txt"));
  CHECK(fs::exists(dir / "metrics.csv"));

  std::string csv = slurp(dir / "metrics.csv");
  CHECK(csv.rfind("round,agent,metric,value\n", 0) == 0);

  // per-agent solution error series spans rounds 0..iterations
  auto series = metric_series(dir / "metrics.csv", "solution_error", 0);
  REQUIRE(series.size() == 21);
  CHECK(series.count(0) == 1);
  CHECK(series.count(20) == 1);
  // network cost error exists and decreases overall
  auto cost = metric_series(dir / "metrics.csv", "cost_error", -1);
  REQUIRE(cost.size() == 21);
  CHECK(cost.at(20) < cost.at(0));

  // the manifest alone reproduces the run bit for bit
  std::string manifest = slurp(dir / "manifest.txt");
  fs::path dir2 = fresh_dir("run_again");
  RunConfig again = dopt::parse_config_file((dir / "manifest.txt").string());
  again.out_dir = dir2.string();
  REQUIRE(dopt::cmd_run(again) == 0);
  CHECK(slurp(dir2 / "metrics.csv") == slurp(dir / "metrics.csv"));
}

TEST_CASE("cmd_report summarizes a metrics file") {
  fs::path dir = fresh_dir("report");
  RunConfig cfg = logistic_config(dir);
  REQUIRE(dopt::cmd_run(cfg) == 0);
  CHECK(dopt::cmd_report((dir / "metrics.csv").string()) == 0);

  fs::path missing = dir / "absent.csv";
  CHECK_THROWS(dopt::cmd_report(missing.string()));

  fs::path malformed = dir / "broken.csv";
  std::ofstream(malformed) << "round,agent,metric,value\n1,2,three\n";
  try {
    dopt::cmd_report(malformed.string());
    FAIL("expected a parse error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find(":2: malformed row") !=
          std::string::npos);
  }
}

#ifdef DOPT_CLI_PATH
namespace {

std::string q(const std::string& s) { return "'" + s + "'"; }

int run_cli(const std::string& args) {
  std::string cmd = std::string(DOPT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("the command line runs, reports and maps error kinds to codes") {
  fs::path dir = fresh_dir("cli");
  int code = run_cli("run --experiment logistic --algorithm subgradient"
                     " --n 4 --iterations 10 --seed 3 --graph-p 0.8 --out " +
                     q((dir / "a").string()));
  CHECK(code == 0);
  CHECK(fs::exists(dir / "a" / "metrics.csv"));
  CHECK(run_cli("report " + q((dir / "a" / "metrics.csv").string())) == 0);

  // config errors exit 1
  CHECK(run_cli("run --experiment svm --algorithm subgradient --n 4 --out " +
                q((dir / "b").string())) == 1);
  CHECK(run_cli("run --experiment logistic --algorithm subgradient"
                " --step nonsense --n 4 --out " +
                q((dir / "c").string())) == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("report " + q((dir / "missing.csv").string())) == 2);

  // a config file plus a flag override reproduces flag-only behaviour
  fs::path cfgfile = dir / "run.cfg";
  std::ofstream(cfgfile) << "experiment = logistic\n"
                            "algorithm = subgradient\n"
                            "n = 4\n"
                            "iterations = 10\n"
                            "graph-p = 0.8\n"
                            "seed = 99\n";
  CHECK(run_cli("run --config " + q(cfgfile.string()) + " --seed 3 --out " +
                q((dir / "d").string())) == 0);
  CHECK(slurp(dir / "d" / "metrics.csv") == slurp(dir / "a" / "metrics.csv"));

  // DOPT_SEED wins over both
  std::string env_cmd = std::string("DOPT_SEED=3 ") + DOPT_CLI_PATH +
                        " run --config " + q(cfgfile.string()) + " --out " +
                        q((dir / "e").string()) + " >/dev/null 2>&1";
  int status = std::system(env_cmd.c_str());
  REQUIRE(status != -1);
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(slurp(dir / "e" / "metrics.csv") == slurp(dir / "a" / "metrics.csv"));
}

TEST_CASE("tcp and in-process runs produce identical outputs") {
  fs::path dir = fresh_dir("transports");
  std::string common =
      " --experiment microgrid --algorithm dual_subgradient --n 3"
      " --horizon 3 --iterations 25 --seed 13 --graph-p 0.9";
  REQUIRE(run_cli("run" + common + " --out " + q((dir / "inproc").string())) ==
          0);

  std::string tcp_base = std::string("run") + common +
                         " --transport tcp --base-port 42310 --out " +
                         q((dir / "tcp").string());
  std::vector<FILE*> procs;
  for (int id = 0; id < 3; ++id) {
    std::string cmd = std::string(DOPT_CLI_PATH) + " " + tcp_base +
                      " --agent-id " + std::to_string(id) +
                      " >/dev/null 2>&1";
    procs.push_back(popen(cmd.c_str(), "r"));
    REQUIRE(procs.back() != nullptr);
  }
  for (FILE* p : procs) {
    int status = pclose(p);
    CHECK(WEXITSTATUS(status) == 0);
  }
  CHECK(slurp(dir / "tcp" / "metrics.csv") ==
        slurp(dir / "inproc" / "metrics.csv"));
  CHECK(slurp(dir / "tcp" / "manifest.txt") !=
        slurp(dir / "inproc" / "manifest.txt"));  // transports differ
}
#endif  // DOPT_CLI_PATH

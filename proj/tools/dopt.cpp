#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dopt/runner.hpp"
#include "dopt/transport.hpp"

namespace {

// Every flag funnels through apply_config_entry as text, so the command
// line, config files, and manifests share one parser and one set of
// diagnostics.
struct Flag {
  const char* option;
  const char* key;
  const char* help;
  std::string value;
  CLI::Option* parsed = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cooperative distributed optimization over agent networks"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "execute a configured run");
  std::string config_path;
  run->add_option("--config", config_path,
                  "key=value config file; explicit flags override it");
  std::vector<Flag> flags = {
      {"--experiment", "experiment", "logistic | svm | microgrid", {}, {}},
      {"--algorithm", "algorithm",
       "subgradient | gradient_tracking | constraints_consensus | "
       "dual_subgradient | primal_decomposition",
       {},
       {}},
      {"--n", "n", "number of agents", {}, {}},
      {"--iterations", "iterations", "communication rounds to run", {}, {}},
      {"--step", "step", "constant:<alpha> or diminishing:<exponent>", {}, {}},
      {"--graph-p", "graph-p", "edge probability of the random topology", {},
       {}},
      {"--graph-seed", "graph-seed", "topology seed", {}, {}},
      {"--undirected", "undirected", "true | false", {}, {}},
      {"--transport", "transport", "inproc | tcp", {}, {}},
      {"--roster", "roster", "tcp roster file with `id host port` lines", {},
       {}},
      {"--base-port", "base-port",
       "first port of the synthesized localhost roster", {}, {}},
      {"--agent-id", "agent-id", "tcp: the agent this process runs", {}, {}},
      {"--seed", "seed", "instance seed (env DOPT_SEED overrides)", {}, {}},
      {"--out", "out", "output directory", {}, {}},
      {"--horizon", "horizon", "microgrid stage count", {}, {}},
      {"--c-reg", "c-reg", "logistic regularization weight", {}, {}},
      {"--timeout", "timeout", "receive timeout in seconds", {}, {}},
      {"--microgrid-a-min", "microgrid-a-min", "dynamics range low", {}, {}},
      {"--microgrid-a-max", "microgrid-a-max", "dynamics range high", {}, {}},
      {"--microgrid-u-min", "microgrid-u-min", "input lower bound", {}, {}},
      {"--microgrid-u-max", "microgrid-u-max", "input upper bound", {}, {}},
      {"--microgrid-cost-min", "microgrid-cost-min", "stage reward low", {},
       {}},
      {"--microgrid-cost-max", "microgrid-cost-max", "stage reward high", {},
       {}},
      {"--microgrid-budget-fraction", "microgrid-budget-fraction",
       "per-stage budget as a fraction of n", {}, {}},
  };
  for (Flag& f : flags) f.parsed = run->add_option(f.option, f.value, f.help);

  CLI::App* report = app.add_subcommand("report", "summarize a metrics CSV");
  std::string metrics_path;
  report->add_option("metrics", metrics_path, "path to metrics.csv")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      dopt::RunConfig cfg;
      if (!config_path.empty()) cfg = dopt::parse_config_file(config_path);
      for (const Flag& f : flags)
        if (f.parsed->count() > 0) dopt::apply_config_entry(cfg, f.key, f.value);
      dopt::apply_seed_env(cfg);
      return dopt::cmd_run(cfg);
    }
    return dopt::cmd_report(metrics_path);
  } catch (const dopt::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const dopt::TimeoutError& e) {
    std::fprintf(stderr, "timeout: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

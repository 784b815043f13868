#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "dopt/algorithms.hpp"
#include "dopt/experiments.hpp"

namespace dopt {

// Invalid flag/config-file input; the CLI maps it to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string experiment;  // logistic | svm | microgrid
  std::string algorithm;   // subgradient | gradient_tracking |
                           // constraints_consensus | dual_subgradient |
                           // primal_decomposition
  int n = 10;
  int iterations = 100;
  std::string step_text = "diminishing:0.6";
  double graph_p = 0.4;
  std::uint64_t graph_seed = 1;
  bool undirected = true;
  std::string transport = "inproc";  // inproc | tcp
  std::string roster;      // tcp: roster file; empty synthesizes localhost
  int base_port = 5500;    // tcp: first port of the synthesized roster
  int agent_id = -1;       // tcp: the one agent this process runs
  std::uint64_t seed = 1;  // instance / rng seed
  std::string out_dir = "out";
  int horizon = 8;         // microgrid stages
  double c_reg = 10.0;     // logistic regularization
  double timeout_seconds = 30.0;
  MicrogridParams microgrid;
};

StepSize parse_step(const std::string& text);

// key=value lines, '#' comments; keys match the CLI long option names.
RunConfig parse_config_file(const std::string& path);
void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value);

// DOPT_SEED, when set, overrides the configured seed.
void apply_seed_env(RunConfig& config);

void validate_config(const RunConfig& config);

// Config echo in the config-file format plus the instance hash; feeding it
// back through --config reproduces the run.
std::string manifest_text(const RunConfig& config,
                          const std::string& instance_hash);

// Executes the configured run and writes instance/manifest/metrics files
// into the output directory. Throws ConfigError / TimeoutError /
// std::runtime_error; returns 0 on success.
int cmd_run(const RunConfig& config);

// Prints final-round metrics and the first rounds reaching the built-in
// thresholds from a metrics CSV.
int cmd_report(const std::string& metrics_path);

}  // namespace dopt

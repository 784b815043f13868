#include "dopt/runner.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include "dopt/graph.hpp"
#include "dopt/message.hpp"
#include "dopt/transport.hpp"

namespace dopt {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

long long parse_int(const std::string& key, const std::string& value) {
  size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty())
    throw ConfigError("value for " + key + " is not an integer: '" + value +
                      "'");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty() || value[0] == '-')
    throw ConfigError("value for " + key +
                      " is not a nonnegative integer: '" + value + "'");
  return v;
}

double parse_dbl(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty())
    throw ConfigError("value for " + key + " is not a number: '" + value +
                      "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("value for " + key + " is not a boolean: '" + value +
                    "'");
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

// ---------------------------------------------------------------- instance

struct Instance {
  std::vector<ClassificationData> classification;
  std::vector<MicrogridData> microgrid;
};

Instance make_instance(const RunConfig& c) {
  Instance inst;
  if (c.experiment == "logistic")
    inst.classification = gen_classification(c.n, c.seed, c.c_reg);
  else if (c.experiment == "svm")
    inst.classification = gen_svm(c.n, c.seed);
  else
    inst.microgrid = gen_microgrid(c.n, c.horizon, c.seed, c.microgrid);
  return inst;
}

LocalData agent_local_data(const RunConfig& c, const Instance& inst, int i) {
  if (c.experiment == "logistic")
    return CostCoupledLocal{
        local_logistic_objective(inst.classification[static_cast<size_t>(i)],
                                 c.n),
        {}};
  if (c.experiment == "svm")
    return local_svm_problem(inst.classification[static_cast<size_t>(i)]);
  return local_microgrid_problem(inst.microgrid[static_cast<size_t>(i)], c.n);
}

std::unique_ptr<Algorithm> make_algorithm(const std::string& name) {
  if (name == "subgradient") return std::make_unique<SubgradientMethod>();
  if (name == "gradient_tracking") return std::make_unique<GradientTracking>();
  if (name == "constraints_consensus")
    return std::make_unique<ConstraintsConsensus>();
  if (name == "dual_subgradient") return std::make_unique<DualSubgradient>();
  if (name == "primal_decomposition")
    return std::make_unique<PrimalDecomposition>();
  throw ConfigError("unknown algorithm: " + name);
}

bool uses_weights(const std::string& algorithm) {
  return algorithm != "constraints_consensus";
}

std::map<int, double> weight_row(const Eigen::MatrixXd& w, const Graph& g,
                                 int i) {
  std::map<int, double> row;
  row[i] = w(i, i);
  for (int j : g.in_neighbors(i)) row[j] = w(i, j);
  return row;
}

// ------------------------------------------------------------------ shards

std::string shard_path(const std::string& out_dir, int agent) {
  return out_dir + "/shard_agent" + std::to_string(agent) + ".bin";
}

void write_history_shard(const std::string& path, const History& h) {
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.emplace_back("rounds", Tensor::scalar(static_cast<double>(h.size())));
  Eigen::VectorXd costs(static_cast<Eigen::Index>(h.size()));
  for (size_t k = 0; k < h.size(); ++k)
    costs(static_cast<Eigen::Index>(k)) = h[k].local_cost;
  entries.emplace_back("costs", Tensor::vector(costs));
  for (size_t k = 0; k < h.size(); ++k) {
    std::string prefix = "r" + std::to_string(k) + "/";
    entries.emplace_back(prefix + "x", Tensor::vector(h[k].x));
    entries.emplace_back(prefix + "aux", Tensor::vector(h[k].auxiliary));
  }
  std::string tmp = path + ".tmp";
  write_tensor_archive(tmp, entries);
  fs::rename(tmp, path);
}

History read_history_shard(const std::string& path) {
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : read_tensor_archive(path)) by_name.emplace(name, t);
  auto fetch = [&](const std::string& name) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error(path + " is missing entry " + name);
    return it->second;
  };
  size_t rounds = static_cast<size_t>(fetch("rounds").as_scalar());
  Eigen::VectorXd costs = fetch("costs").as_vector();
  if (static_cast<size_t>(costs.size()) != rounds)
    throw std::runtime_error(path + " has a malformed cost series");
  History h(rounds);
  for (size_t k = 0; k < rounds; ++k) {
    std::string prefix = "r" + std::to_string(k) + "/";
    h[k].round = k;
    h[k].local_cost = costs(static_cast<Eigen::Index>(k));
    h[k].x = fetch(prefix + "x").as_vector();
    h[k].auxiliary = fetch(prefix + "aux").as_vector();
  }
  return h;
}

// ----------------------------------------------------------------- metrics

void append_row(std::string& out, size_t round, int agent, const char* metric,
                double value) {
  out += std::to_string(round);
  out += ',';
  out += std::to_string(agent);
  out += ',';
  out += metric;
  out += ',';
  out += fmt(value);
  out += '\n';
}

std::string logistic_metrics(const RunConfig& c, const Instance& inst,
                             const std::vector<History>& hs) {
  OracleResult oracle = centralized_logistic(inst.classification);
  std::vector<Expression> locals;
  locals.reserve(inst.classification.size());
  for (const ClassificationData& d : inst.classification)
    locals.push_back(local_logistic_objective(d, c.n));

  std::string out = "round,agent,metric,value\n";
  size_t rounds = hs[0].size();
  for (size_t t = 0; t < rounds; ++t) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(hs[0][t].x.size());
    double worst = 0.0;
    for (int i = 0; i < c.n; ++i) {
      const Eigen::VectorXd& x = hs[static_cast<size_t>(i)][t].x;
      mean += x;
      double err = (x - oracle.x).norm();
      worst = std::max(worst, err);
      append_row(out, t, i, "solution_error", err);
    }
    mean /= c.n;
    double cost = 0.0;
    for (const Expression& f : locals) cost += f.evaluate_scalar(mean);
    append_row(out, t, -1, "cost_error",
               std::abs(cost - oracle.objective) / std::abs(oracle.objective));
    append_row(out, t, -1, "solution_error", worst);
  }
  return out;
}

std::string svm_metrics(const RunConfig& c, const Instance& inst,
                        const std::vector<History>& hs) {
  OracleResult oracle = centralized_svm(inst.classification);

  std::string out = "round,agent,metric,value\n";
  size_t rounds = hs[0].size();
  for (size_t t = 0; t < rounds; ++t) {
    double worst_cost = 0.0;
    for (int i = 0; i < c.n; ++i) {
      const Eigen::VectorXd& x = hs[static_cast<size_t>(i)][t].x;
      append_row(out, t, i, "violation",
                 svm_violation(inst.classification, x));
      double cost = 0.5 * x.head(2).squaredNorm();
      worst_cost = std::max(worst_cost, std::abs(cost - oracle.objective));
    }
    append_row(out, t, -1, "cost_error", worst_cost);

    // Bases agree when every agent carries the same row count and
    // bit-identical rows (rows are flooded verbatim, so exact comparison
    // is the right test).
    bool agree = true;
    const Eigen::VectorXd& first = hs[0][t].auxiliary;
    Eigen::Index width = hs[0][t].x.size() + 2;
    Eigen::Index prefix =
        1 + static_cast<Eigen::Index>(first(0)) * width;
    for (int i = 1; i < c.n && agree; ++i) {
      const Eigen::VectorXd& aux = hs[static_cast<size_t>(i)][t].auxiliary;
      if (aux.size() != first.size() || aux(0) != first(0) ||
          (aux.head(prefix).array() != first.head(prefix).array()).any())
        agree = false;
    }
    append_row(out, t, -1, "bases_agree", agree ? 1.0 : 0.0);
  }
  return out;
}

std::string microgrid_metrics(const RunConfig& c, const Instance& inst,
                              const std::vector<History>& hs) {
  OracleResult oracle = centralized_microgrid(inst.microgrid);
  if (oracle.x.size() == 0)
    throw std::runtime_error("the generated instance has no feasible point");

  int s = c.horizon;
  int dim = 2 * s;
  std::vector<Eigen::MatrixXd> g_mats;
  std::vector<Eigen::VectorXd> g_offs;
  for (const MicrogridData& d : inst.microgrid) {
    ConstraintCoupledLocal local = local_microgrid_problem(d, c.n);
    Eigen::MatrixXd g;
    Eigen::VectorXd off;
    local.coupling.affine_coefficients(dim, g, off);
    g_mats.push_back(std::move(g));
    g_offs.push_back(std::move(off));
  }
  bool primal = c.algorithm == "primal_decomposition";

  std::string out = "round,agent,metric,value\n";
  size_t rounds = hs[0].size();
  Eigen::VectorXd alloc0;
  for (size_t t = 0; t < rounds; ++t) {
    double cost = 0.0;
    Eigen::VectorXd coupling = Eigen::VectorXd::Zero(s);
    Eigen::VectorXd alloc = Eigen::VectorXd::Zero(s);
    for (int i = 0; i < c.n; ++i) {
      const HistoryRecord& rec = hs[static_cast<size_t>(i)][t];
      cost += rec.local_cost;
      coupling += g_mats[static_cast<size_t>(i)] * rec.x +
                  g_offs[static_cast<size_t>(i)];
      if (primal) alloc += rec.auxiliary.tail(s);
      append_row(out, t, i, "local_cost", rec.local_cost);
    }
    append_row(out, t, -1, "cost_error",
               std::abs(cost - oracle.objective) / std::abs(oracle.objective));
    append_row(out, t, -1, "coupling_value", coupling.maxCoeff());
    if (primal) {
      if (t == 0) alloc0 = alloc;
      append_row(out, t, -1, "allocation_drift",
                 (alloc - alloc0).lpNorm<Eigen::Infinity>());
    }
  }
  return out;
}

void merge_outputs(const RunConfig& c, const Instance& inst) {
  std::string instance_path = c.out_dir + "/instance.bin";
  if (c.experiment == "microgrid")
    write_microgrid_instance(instance_path, inst.microgrid);
  else
    write_classification_instance(instance_path, inst.classification);
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(read_file_bytes(instance_path))));
  write_file_bytes(c.out_dir + "/manifest.txt", manifest_text(c, hash));

  std::vector<History> hs;
  hs.reserve(static_cast<size_t>(c.n));
  for (int i = 0; i < c.n; ++i)
    hs.push_back(read_history_shard(shard_path(c.out_dir, i)));
  for (int i = 1; i < c.n; ++i)
    if (hs[static_cast<size_t>(i)].size() != hs[0].size())
      throw std::runtime_error("agents recorded different history lengths");

  std::string csv;
  if (c.experiment == "logistic")
    csv = logistic_metrics(c, inst, hs);
  else if (c.experiment == "svm")
    csv = svm_metrics(c, inst, hs);
  else
    csv = microgrid_metrics(c, inst, hs);
  write_file_bytes(c.out_dir + "/metrics.csv", csv);
}

// ----------------------------------------------------------------- drivers

std::chrono::milliseconds config_timeout(const RunConfig& c) {
  return std::chrono::milliseconds(
      static_cast<long long>(c.timeout_seconds * 1000.0));
}

void run_inproc(const RunConfig& c, const Graph& g,
                const std::optional<Eigen::MatrixXd>& w,
                const Instance& inst) {
  InProcHub hub(c.n, config_timeout(c));
  StepSize step = parse_step(c.step_text);
  std::vector<std::exception_ptr> errors(static_cast<size_t>(c.n));
  std::vector<History> hs(static_cast<size_t>(c.n));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(c.n));
  for (int i = 0; i < c.n; ++i) {
    threads.emplace_back([&, i] {
      try {
        Agent agent(i, g.in_neighbors(i), g.out_neighbors(i),
                    w ? weight_row(*w, g, i) : std::map<int, double>{},
                    agent_local_data(c, inst, i), hub.transport(i), c.seed);
        std::unique_ptr<Algorithm> algo = make_algorithm(c.algorithm);
        hs[static_cast<size_t>(i)] =
            run(*algo, agent, static_cast<uint64_t>(c.iterations), step);
      } catch (...) {
        errors[static_cast<size_t>(i)] = std::current_exception();
      }
    });
  }
  for (std::thread& t : threads) t.join();

  // Prefer a root-cause error over the timeouts it cascades into.
  std::exception_ptr timeout, other;
  for (const std::exception_ptr& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const TimeoutError&) {
      if (!timeout) timeout = e;
    } catch (...) {
      if (!other) other = e;
    }
  }
  if (other) std::rethrow_exception(other);
  if (timeout) std::rethrow_exception(timeout);

  for (int i = 0; i < c.n; ++i)
    write_history_shard(shard_path(c.out_dir, i), hs[static_cast<size_t>(i)]);
}

void wait_for_shards(const RunConfig& c) {
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration<double>(
                      std::max(60.0, c.timeout_seconds));
  for (;;) {
    bool all = true;
    for (int i = 0; i < c.n && all; ++i)
      if (!fs::exists(shard_path(c.out_dir, i))) all = false;
    if (all) return;
    if (std::chrono::steady_clock::now() >= deadline)
      throw TimeoutError("timed out waiting for agent history shards");
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

void run_tcp(const RunConfig& c, const Graph& g,
             const std::optional<Eigen::MatrixXd>& w, const Instance& inst) {
  std::vector<PeerAddress> roster;
  if (c.roster.empty()) {
    for (int i = 0; i < c.n; ++i)
      roster.push_back(PeerAddress{i, "127.0.0.1", c.base_port + i});
  } else {
    roster = read_roster_file(c.roster);
  }
  std::vector<bool> seen(static_cast<size_t>(c.n), false);
  for (const PeerAddress& p : roster) {
    if (p.id < 0 || p.id >= c.n)
      throw ConfigError("roster id " + std::to_string(p.id) +
                        " is outside 0.." + std::to_string(c.n - 1));
    seen[static_cast<size_t>(p.id)] = true;
  }
  for (int i = 0; i < c.n; ++i)
    if (!seen[static_cast<size_t>(i)])
      throw ConfigError("roster is missing agent " + std::to_string(i));

  int id = c.agent_id;
  auto transport =
      std::make_shared<TcpTransport>(id, roster, config_timeout(c));
  Agent agent(id, g.in_neighbors(id), g.out_neighbors(id),
              w ? weight_row(*w, g, id) : std::map<int, double>{},
              agent_local_data(c, inst, id), transport, c.seed);
  std::unique_ptr<Algorithm> algo = make_algorithm(c.algorithm);
  History h = run(*algo, agent, static_cast<uint64_t>(c.iterations),
                  parse_step(c.step_text));
  write_history_shard(shard_path(c.out_dir, id), h);
  transport->shutdown();
  if (id == 0) wait_for_shards(c);
}

}  // namespace

// ----------------------------------------------------------------- parsing

StepSize parse_step(const std::string& text) {
  size_t colon = text.find(':');
  if (colon == std::string::npos)
    throw ConfigError(
        "step must look like constant:<alpha> or diminishing:<exponent>, "
        "got '" +
        text + "'");
  std::string rule = text.substr(0, colon);
  double value = parse_dbl("step", text.substr(colon + 1));
  try {
    if (rule == "constant") return StepSize::constant(value);
    if (rule == "diminishing") return StepSize::diminishing(value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown step rule: " + rule);
}

void apply_config_entry(RunConfig& c, const std::string& key,
                        const std::string& value) {
  if (key == "experiment")
    c.experiment = value;
  else if (key == "algorithm")
    c.algorithm = value;
  else if (key == "n")
    c.n = static_cast<int>(parse_int(key, value));
  else if (key == "iterations")
    c.iterations = static_cast<int>(parse_int(key, value));
  else if (key == "step")
    c.step_text = value;
  else if (key == "graph-p")
    c.graph_p = parse_dbl(key, value);
  else if (key == "graph-seed")
    c.graph_seed = parse_u64(key, value);
  else if (key == "undirected")
    c.undirected = parse_bool(key, value);
  else if (key == "transport")
    c.transport = value;
  else if (key == "roster")
    c.roster = value;
  else if (key == "base-port")
    c.base_port = static_cast<int>(parse_int(key, value));
  else if (key == "agent-id")
    c.agent_id = static_cast<int>(parse_int(key, value));
  else if (key == "seed")
    c.seed = parse_u64(key, value);
  else if (key == "out")
    c.out_dir = value;
  else if (key == "horizon")
    c.horizon = static_cast<int>(parse_int(key, value));
  else if (key == "c-reg")
    c.c_reg = parse_dbl(key, value);
  else if (key == "timeout")
    c.timeout_seconds = parse_dbl(key, value);
  else if (key == "microgrid-a-min")
    c.microgrid.a_min = parse_dbl(key, value);
  else if (key == "microgrid-a-max")
    c.microgrid.a_max = parse_dbl(key, value);
  else if (key == "microgrid-u-min")
    c.microgrid.u_min = parse_dbl(key, value);
  else if (key == "microgrid-u-max")
    c.microgrid.u_max = parse_dbl(key, value);
  else if (key == "microgrid-cost-min")
    c.microgrid.cost_min = parse_dbl(key, value);
  else if (key == "microgrid-cost-max")
    c.microgrid.cost_max = parse_dbl(key, value);
  else if (key == "microgrid-budget-fraction")
    c.microgrid.budget_fraction = parse_dbl(key, value);
  else if (key == "instance-hash")
    ;  // echoed into manifests; accepted so manifests re-ingest cleanly
  else
    throw ConfigError("unknown config key: " + key);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  RunConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    apply_config_entry(c, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return c;
}

void apply_seed_env(RunConfig& c) {
  const char* env = std::getenv("DOPT_SEED");
  if (env == nullptr) return;
  c.seed = parse_u64("DOPT_SEED", env);
}

void validate_config(const RunConfig& c) {
  if (c.experiment != "logistic" && c.experiment != "svm" &&
      c.experiment != "microgrid")
    throw ConfigError("unknown experiment: '" + c.experiment + "'");
  static const std::map<std::string, std::vector<std::string>> compatible = {
      {"logistic", {"subgradient", "gradient_tracking"}},
      {"svm", {"constraints_consensus"}},
      {"microgrid", {"dual_subgradient", "primal_decomposition"}},
  };
  const std::vector<std::string>& allowed = compatible.at(c.experiment);
  if (std::find(allowed.begin(), allowed.end(), c.algorithm) == allowed.end()) {
    std::string names;
    for (const std::string& a : allowed)
      names += (names.empty() ? "" : ", ") + a;
    throw ConfigError("algorithm '" + c.algorithm +
                      "' does not match the " + c.experiment +
                      " set-up (expected one of: " + names + ")");
  }
  if (c.n < 1) throw ConfigError("n must be at least 1");
  if (c.iterations < 1) throw ConfigError("iterations must be at least 1");
  if (!(c.graph_p > 0.0 && c.graph_p <= 1.0))
    throw ConfigError("graph-p must be in (0, 1]");
  if (c.horizon < 1) throw ConfigError("horizon must be at least 1");
  if (c.c_reg < 0) throw ConfigError("c-reg must be nonnegative");
  if (!(c.timeout_seconds > 0)) throw ConfigError("timeout must be positive");
  StepSize step = parse_step(c.step_text);
  if (c.algorithm == "gradient_tracking") {
    if (step.rule != StepSize::Rule::constant)
      throw ConfigError("gradient_tracking needs a constant step");
    if (!c.undirected)
      throw ConfigError(
          "gradient_tracking needs an undirected graph (doubly stochastic "
          "weights)");
  }
  if (c.algorithm == "primal_decomposition" && !c.undirected)
    throw ConfigError("primal_decomposition needs an undirected graph");
  if (c.transport != "inproc" && c.transport != "tcp")
    throw ConfigError("unknown transport: '" + c.transport + "'");
  if (c.transport == "tcp") {
    if (c.agent_id < 0 || c.agent_id >= c.n)
      throw ConfigError("tcp runs need --agent-id in 0.." +
                        std::to_string(c.n - 1));
    if (c.roster.empty() &&
        (c.base_port < 1 || c.base_port + c.n - 1 > 65535))
      throw ConfigError("base-port leaves no room for " +
                        std::to_string(c.n) + " agents");
  }
  if (c.microgrid.u_min > c.microgrid.u_max)
    throw ConfigError("microgrid input box is empty");
  if (c.microgrid.a_min > c.microgrid.a_max)
    throw ConfigError("microgrid-a-min exceeds microgrid-a-max");
  if (c.microgrid.cost_min > c.microgrid.cost_max)
    throw ConfigError("microgrid-cost-min exceeds microgrid-cost-max");
  if (c.out_dir.empty()) throw ConfigError("out must not be empty");
}

std::string manifest_text(const RunConfig& c,
                          const std::string& instance_hash) {
  std::ostringstream o;
  o << "experiment=" << c.experiment << "\n";
  o << "algorithm=" << c.algorithm << "\n";
  o << "n=" << c.n << "\n";
  o << "iterations=" << c.iterations << "\n";
  o << "step=" << c.step_text << "\n";
  o << "graph-p=" << fmt(c.graph_p) << "\n";
  o << "graph-seed=" << c.graph_seed << "\n";
  o << "undirected=" << (c.undirected ? "true" : "false") << "\n";
  o << "transport=" << c.transport << "\n";
  if (!c.roster.empty()) o << "roster=" << c.roster << "\n";
  if (c.transport == "tcp") o << "base-port=" << c.base_port << "\n";
  o << "seed=" << c.seed << "\n";
  o << "out=" << c.out_dir << "\n";
  o << "timeout=" << fmt(c.timeout_seconds) << "\n";
  if (c.experiment == "logistic") o << "c-reg=" << fmt(c.c_reg) << "\n";
  if (c.experiment == "microgrid") {
    o << "horizon=" << c.horizon << "\n";
    o << "microgrid-a-min=" << fmt(c.microgrid.a_min) << "\n";
    o << "microgrid-a-max=" << fmt(c.microgrid.a_max) << "\n";
    o << "microgrid-u-min=" << fmt(c.microgrid.u_min) << "\n";
    o << "microgrid-u-max=" << fmt(c.microgrid.u_max) << "\n";
    o << "microgrid-cost-min=" << fmt(c.microgrid.cost_min) << "\n";
    o << "microgrid-cost-max=" << fmt(c.microgrid.cost_max) << "\n";
    o << "microgrid-budget-fraction=" << fmt(c.microgrid.budget_fraction)
      << "\n";
  }
  o << "instance-hash=" << instance_hash << "\n";
  return o.str();
}

// --------------------------------------------------------------- commands

int cmd_run(const RunConfig& c) {
  validate_config(c);
  fs::create_directories(c.out_dir);
  Graph g = Graph::random_binomial(c.n, c.graph_p, c.graph_seed, c.undirected);
  std::optional<Eigen::MatrixXd> w;
  if (uses_weights(c.algorithm))
    w = c.undirected ? metropolis_weights(g) : uniform_row_weights(g);
  Instance inst = make_instance(c);

  if (c.transport == "inproc") {
    run_inproc(c, g, w, inst);
    merge_outputs(c, inst);
  } else {
    run_tcp(c, g, w, inst);
    if (c.agent_id == 0) merge_outputs(c, inst);
  }
  return 0;
}

int cmd_report(const std::string& metrics_path) {
  std::ifstream f(metrics_path);
  if (!f) throw std::runtime_error("cannot open metrics file " + metrics_path);
  std::string line;
  int lineno = 0;
  if (!std::getline(f, line)) {
    throw std::runtime_error(metrics_path + ":1: metrics file is empty");
  }
  ++lineno;
  if (trim(line) != "round,agent,metric,value")
    throw std::runtime_error(metrics_path +
                             ":1: expected header round,agent,metric,value");

  // metric -> round -> value (network rows) / max over agents.
  std::map<std::string, std::map<long long, double>> network;
  std::map<std::string, std::map<long long, double>> per_agent_max;
  long long rows = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    std::istringstream ss(t);
    std::string round_s, agent_s, metric, value_s;
    if (!std::getline(ss, round_s, ',') || !std::getline(ss, agent_s, ',') ||
        !std::getline(ss, metric, ',') || !std::getline(ss, value_s))
      throw std::runtime_error(metrics_path + ":" + std::to_string(lineno) +
                               ": malformed row");
    long long round = 0;
    long long agent = 0;
    double value = 0;
    try {
      size_t p1 = 0, p2 = 0, p3 = 0;
      round = std::stoll(round_s, &p1);
      agent = std::stoll(agent_s, &p2);
      value = std::stod(value_s, &p3);
      if (p1 != round_s.size() || p2 != agent_s.size() || p3 != value_s.size())
        throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::runtime_error(metrics_path + ":" + std::to_string(lineno) +
                               ": malformed row");
    }
    ++rows;
    if (agent < 0) {
      network[metric][round] = value;
    } else {
      auto [it, fresh] = per_agent_max[metric].try_emplace(round, value);
      if (!fresh) it->second = std::max(it->second, value);
    }
  }
  if (rows == 0)
    throw std::runtime_error(metrics_path + ":" + std::to_string(lineno + 1) +
                             ": no data rows");

  for (const auto& [metric, series] : network)
    std::printf("final %s = %.9g (round %lld)\n", metric.c_str(),
                series.rbegin()->second, series.rbegin()->first);
  for (const auto& [metric, series] : per_agent_max)
    std::printf("final max %s over agents = %.9g (round %lld)\n",
                metric.c_str(), series.rbegin()->second,
                series.rbegin()->first);

  struct Threshold {
    const char* metric;
    double bound;
    bool network;
    const char* label;
  };
  static const Threshold thresholds[] = {
      {"cost_error", 1e-2, true, "cost_error <= 1e-2"},
      {"cost_error", 1e-4, true, "cost_error <= 1e-4"},
      {"solution_error", 1e-3, true, "solution_error <= 1e-3"},
      {"coupling_value", 1e-3, true, "feasible (coupling_value <= 1e-3)"},
      {"violation", 1e-9, false, "all violations <= 1e-9"},
  };
  for (const Threshold& th : thresholds) {
    const auto& table = th.network ? network : per_agent_max;
    auto it = table.find(th.metric);
    if (it == table.end()) continue;
    long long first = -1;
    for (const auto& [round, value] : it->second)
      if (value <= th.bound) {
        first = round;
        break;
      }
    if (first >= 0)
      std::printf("first round %s: %lld\n", th.label, first);
    else
      std::printf("first round %s: never\n", th.label);
  }
  auto agree = network.find("bases_agree");
  if (agree != network.end()) {
    long long first = -1;
    for (const auto& [round, value] : agree->second)
      if (value >= 0.5) {
        first = round;
        break;
      }
    if (first >= 0)
      std::printf("agreement round: %lld\n", first);
    else
      std::printf("agreement round: never\n");
  }
  return 0;
}

}  // namespace dopt

#include "hyper/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hyper/error.hpp"
#include "hyper/nn.hpp"

namespace hyper {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Shortest text that parses back to the same double.
std::string fmt_real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

long long parse_int(const std::string& s) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw InvalidArgument("'" + s + "' is not an integer");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw InvalidArgument("'" + s + "' is not an unsigned integer");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InvalidArgument("'" + s + "' is not a boolean");
}

std::vector<NoiseWindow> parse_windows(const std::string& s) {
  std::vector<NoiseWindow> out;
  for (const auto& item : split_list(s)) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw InvalidArgument("window '" + item + "' must look like start-end");
    out.push_back({static_cast<int>(parse_int(trim(item.substr(0, dash)))),
                   static_cast<int>(parse_int(trim(item.substr(dash + 1))))});
  }
  return out;
}

std::string windows_text(const std::vector<NoiseWindow>& ws) {
  std::string s;
  for (const auto& w : ws) s += (s.empty() ? "" : ",") + std::to_string(w.start) + "-" + std::to_string(w.end);
  return s;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

struct Key {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
std::string opt_text(const std::optional<T>& v) {
  return v ? std::to_string(*v) : "auto";
}

std::optional<std::uint64_t> parse_opt_seed(const std::string& s) {
  if (s == "auto") return std::nullopt;
  return parse_u64(s);
}

nn::OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return nn::OptimizerKind::adam;
  if (s == "sgd") return nn::OptimizerKind::sgd;
  throw InvalidArgument("unknown optimizer '" + s + "' (expected adam or sgd)");
}

std::string optimizer_name(nn::OptimizerKind k) { return k == nn::OptimizerKind::adam ? "adam" : "sgd"; }

const char* edge_key(Edge e) {
  switch (e) {
    case Edge::bottom: return "bottom";
    case Edge::top: return "top";
    case Edge::left: return "left";
    case Edge::right: return "right";
  }
  return "?";
}

// Ordered registry: the resolved config is written in this order.
const std::vector<std::pair<std::string, Key>>& registry() {
  static const std::vector<std::pair<std::string, Key>> keys = [] {
    std::vector<std::pair<std::string, Key>> k;
    auto add = [&](std::string name, Key key) { k.emplace_back(std::move(name), std::move(key)); };
    auto real = [&](std::string name, auto member) {
      add(name, {[member](RunConfig& c, const std::string& v) { member(c) = parse_real(v); },
                 [member](const RunConfig& c) { return fmt_real(member(const_cast<RunConfig&>(c))); }});
    };
    auto integer = [&](std::string name, auto member) {
      add(name, {[member](RunConfig& c, const std::string& v) { member(c) = static_cast<int>(parse_int(v)); },
                 [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }});
    };
    auto seed = [&](std::string name, auto member) {
      add(name, {[member](RunConfig& c, const std::string& v) { member(c) = parse_opt_seed(v); },
                 [member](const RunConfig& c) { return opt_text(member(const_cast<RunConfig&>(c))); }});
    };

    add("seed", {[](RunConfig& c, const std::string& v) { c.seed = parse_u64(v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    add("out", {[](RunConfig& c, const std::string& v) { c.out = v; }, [](const RunConfig& c) { return c.out.string(); }});
    integer("jobs", [](RunConfig& c) -> int& { return c.jobs; });

    add("sim.kind", {[](RunConfig& c, const std::string& v) {
                       if (v == "ns") c.simulator = SimulatorKind::navier_stokes;
                       else if (v == "heat") c.simulator = SimulatorKind::heat;
                       else throw InvalidArgument("expected ns or heat");
                     },
                     [](const RunConfig& c) { return simulator_kind_name(c.simulator); }});
    add("sim.width", {[](RunConfig& c, const std::string& v) { c.ns.width = c.heat.width = static_cast<int>(parse_int(v)); },
                      [](const RunConfig& c) { return std::to_string(c.ns.width); }});
    add("sim.height", {[](RunConfig& c, const std::string& v) { c.ns.height = c.heat.height = static_cast<int>(parse_int(v)); },
                       [](const RunConfig& c) { return std::to_string(c.ns.height); }});
    add("sim.dt", {[](RunConfig& c, const std::string& v) { c.ns.dt = c.heat.dt = parse_real(v); },
                   [](const RunConfig& c) { return fmt_real(c.ns.dt); }});
    real("sim.cell_size", [](RunConfig& c) -> double& { return c.ns.cell_size; });
    real("sim.mu", [](RunConfig& c) -> double& { return c.ns.mu; });
    real("sim.buoyancy", [](RunConfig& c) -> double& { return c.ns.buoyancy_coeff; });
    add("sim.concentration_neumann",
        {[](RunConfig& c, const std::string& v) { c.ns.concentration_neumann = parse_bool(v); },
         [](const RunConfig& c) { return std::string(c.ns.concentration_neumann ? "true" : "false"); }});
    add("sim.pressure_solver", {[](RunConfig& c, const std::string& v) {
                                  if (v == "jacobi") c.ns.pressure_solver = PressureSolver::jacobi;
                                  else if (v == "cg") c.ns.pressure_solver = PressureSolver::conjugate_gradient;
                                  else throw InvalidArgument("expected jacobi or cg");
                                },
                                [](const RunConfig& c) {
                                  return std::string(c.ns.pressure_solver == PressureSolver::jacobi ? "jacobi" : "cg");
                                }});
    real("sim.pressure_tol", [](RunConfig& c) -> double& { return c.ns.pressure_solver_tol; });
    integer("sim.pressure_max_iters", [](RunConfig& c) -> int& { return c.ns.pressure_solver_max_iters; });
    real("sim.jacobi_omega", [](RunConfig& c) -> double& { return c.ns.jacobi_omega; });
    for (Edge e : {Edge::bottom, Edge::top, Edge::left, Edge::right}) {
      for (int comp = 0; comp < 2; ++comp) {
        const std::string name = std::string("sim.bc.") + edge_key(e) + (comp == 0 ? ".u" : ".v");
        real(name, [e, comp](RunConfig& c) -> double& { return c.ns.velocity_bc[static_cast<int>(e)][comp]; });
      }
    }
    real("heat.diffusivity", [](RunConfig& c) -> double& { return c.heat.diffusivity; });
    add("heat.mode", {[](RunConfig& c, const std::string& v) {
                        if (v == "explicit") c.heat.mode = DiffusionMode::explicit_euler;
                        else if (v == "implicit") c.heat.mode = DiffusionMode::implicit_jacobi;
                        else throw InvalidArgument("expected explicit or implicit");
                      },
                      [](const RunConfig& c) {
                        return std::string(c.heat.mode == DiffusionMode::explicit_euler ? "explicit" : "implicit");
                      }});
    real("heat.velocity_u", [](RunConfig& c) -> double& { return c.heat_velocity_u; });
    real("heat.velocity_v", [](RunConfig& c) -> double& { return c.heat_velocity_v; });

    integer("data.n_trajectories", [](RunConfig& c) -> int& { return c.n_trajectories; });
    integer("data.horizon", [](RunConfig& c) -> int& { return c.horizon; });
    seed("data.seed", [](RunConfig& c) -> std::optional<std::uint64_t>& { return c.data_seed; });
    real("data.split.surrogate", [](RunConfig& c) -> double& { return c.split[0]; });
    real("data.split.rl", [](RunConfig& c) -> double& { return c.split[1]; });
    real("data.split.test", [](RunConfig& c) -> double& { return c.split[2]; });

    add("surrogate.fields",
        {[](RunConfig& c, const std::string& v) { c.surrogate.fields = parse_surrogate_fields(v); },
         [](const RunConfig& c) { return to_string(c.surrogate.fields); }});
    integer("surrogate.hidden", [](RunConfig& c) -> int& { return c.surrogate.hidden; });
    add("surrogate.optimizer",
        {[](RunConfig& c, const std::string& v) { c.surrogate.optimizer.kind = parse_optimizer(v); },
         [](const RunConfig& c) { return optimizer_name(c.surrogate.optimizer.kind); }});
    real("surrogate.lr", [](RunConfig& c) -> double& { return c.surrogate.optimizer.learning_rate; });
    real("surrogate.beta1", [](RunConfig& c) -> double& { return c.surrogate.optimizer.beta1; });
    real("surrogate.beta2", [](RunConfig& c) -> double& { return c.surrogate.optimizer.beta2; });
    real("surrogate.epsilon", [](RunConfig& c) -> double& { return c.surrogate.optimizer.epsilon; });
    integer("surrogate.epochs", [](RunConfig& c) -> int& { return c.surrogate.epochs; });
    integer("surrogate.batch_size", [](RunConfig& c) -> int& { return c.surrogate.batch_size; });
    seed("surrogate.seed", [](RunConfig& c) -> std::optional<std::uint64_t>& { return c.surrogate_seed; });

    real("policy.lambda", [](RunConfig& c) -> double& { return c.policy.lambda; });
    integer("policy.chunk_size", [](RunConfig& c) -> int& { return c.policy.chunk_size; });
    add("policy.optimizer", {[](RunConfig& c, const std::string& v) { c.policy.optimizer.kind = parse_optimizer(v); },
                             [](const RunConfig& c) { return optimizer_name(c.policy.optimizer.kind); }});
    real("policy.lr", [](RunConfig& c) -> double& { return c.policy.optimizer.learning_rate; });
    real("policy.beta1", [](RunConfig& c) -> double& { return c.policy.optimizer.beta1; });
    real("policy.beta2", [](RunConfig& c) -> double& { return c.policy.optimizer.beta2; });
    real("policy.epsilon", [](RunConfig& c) -> double& { return c.policy.optimizer.epsilon; });
    integer("policy.epochs", [](RunConfig& c) -> int& { return c.policy.epochs; });
    real("policy.cost_weight", [](RunConfig& c) -> double& { return c.policy.cost_weight; });
    add("policy.initial_prob", {[](RunConfig& c, const std::string& v) {
                                  if (v == "auto") c.policy.initial_prob.reset();
                                  else c.policy.initial_prob = parse_real(v);
                                },
                                [](const RunConfig& c) {
                                  return c.policy.initial_prob ? fmt_real(*c.policy.initial_prob) : std::string("auto");
                                }});
    seed("policy.seed", [](RunConfig& c) -> std::optional<std::uint64_t>& { return c.policy_seed; });
    add("policy.scenarios", {[](RunConfig& c, const std::string& v) { c.policy_scenarios = split_list(v); },
                             [](const RunConfig& c) { return join(c.policy_scenarios); }});

    add("eval.scenarios", {[](RunConfig& c, const std::string& v) { c.eval_scenarios = split_list(v); },
                           [](const RunConfig& c) { return join(c.eval_scenarios); }});
    add("eval.sigma2", {[](RunConfig& c, const std::string& v) {
                          c.eval_sigma2.clear();
                          for (const auto& s : split_list(v)) c.eval_sigma2.push_back(parse_real(s));
                        },
                        [](const RunConfig& c) {
                          std::string s;
                          for (double x : c.eval_sigma2) s += (s.empty() ? "" : ",") + fmt_real(x);
                          return s;
                        }});
    add("eval.policy_mode", {[](RunConfig& c, const std::string& v) { c.eval_policy_mode = parse_policy_mode(v); },
                             [](const RunConfig& c) {
                               return std::string(c.eval_policy_mode == PolicyMode::sample ? "sample" : "greedy");
                             }});
    seed("eval.seed", [](RunConfig& c) -> std::optional<std::uint64_t>& { return c.eval_seed; });
    add("noise.unimodal.windows", {[](RunConfig& c, const std::string& v) { c.unimodal_windows = parse_windows(v); },
                                   [](const RunConfig& c) { return windows_text(c.unimodal_windows); }});
    add("noise.bimodal.windows", {[](RunConfig& c, const std::string& v) { c.bimodal_windows = parse_windows(v); },
                                  [](const RunConfig& c) { return windows_text(c.bimodal_windows); }});
    add("noise.seed", {[](RunConfig& c, const std::string& v) { c.noise_seed = parse_u64(v); },
                       [](const RunConfig& c) { return std::to_string(c.noise_seed); }});

    add("boundary.edge", {[](RunConfig& c, const std::string& v) { c.boundary.edge = parse_edge(v); },
                          [](const RunConfig& c) { return std::string(edge_key(c.boundary.edge)); }});
    add("boundary.field", {[](RunConfig& c, const std::string& v) { c.boundary.field = parse_velocity_component(v); },
                           [](const RunConfig& c) {
                             return std::string(c.boundary.field == VelocityComponent::u ? "u" : "v");
                           }});
    real("boundary.value", [](RunConfig& c) -> double& { return c.boundary.value; });
    integer("boundary.start", [](RunConfig& c) -> int& { return c.boundary.step_start; });
    integer("boundary.end", [](RunConfig& c) -> int& { return c.boundary.step_end; });
    return k;
  }();
  return keys;
}

const Key* find_key(const std::string& name) {
  for (const auto& [n, k] : registry())
    if (n == name) return &k;
  return nullptr;
}

}  // namespace

double parse_real(const std::string& text) {
  const std::string s = trim(text);
  auto one = [](const std::string& t) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &pos);
    } catch (const std::exception&) {
      throw InvalidArgument("'" + t + "' is not a number");
    }
    if (pos != t.size()) throw InvalidArgument("'" + t + "' is not a number");
    return v;
  };
  const auto slash = s.find('/');
  if (slash == std::string::npos) return one(s);
  const double den = one(trim(s.substr(slash + 1)));
  if (den == 0.0) throw InvalidArgument("'" + s + "' divides by zero");
  return one(trim(s.substr(0, slash))) / den;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Key* k = find_key(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  try {
    k->set(cfg, trim(value));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_text(const RunConfig& cfg) {
  std::string s;
  for (const auto& [name, key] : registry()) s += name + " = " + key.get(cfg) + "\n";
  return s;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [name, key] : registry()) out.push_back(name);
  return out;
}

std::uint64_t RunConfig::data_seed_value() const { return data_seed.value_or(nn::derive_seed(seed, 0, "data")); }
std::uint64_t RunConfig::surrogate_seed_value() const {
  return surrogate_seed.value_or(nn::derive_seed(seed, 0, "surrogate"));
}
std::uint64_t RunConfig::policy_seed_value() const { return policy_seed.value_or(nn::derive_seed(seed, 0, "policy")); }
std::uint64_t RunConfig::eval_seed_value() const { return eval_seed.value_or(nn::derive_seed(seed, 0, "eval")); }

void RunConfig::validate() const {
  auto wrap = [](const char* key, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  };
  if (jobs < 1) throw ConfigError("config key 'jobs': must be >= 1");
  wrap("sim.*", [&] { simulator == SimulatorKind::navier_stokes ? ns.validate() : heat.validate(); });
  if (n_trajectories < 1) throw ConfigError("config key 'data.n_trajectories': must be >= 1");
  if (horizon < 1) throw ConfigError("config key 'data.horizon': must be >= 1");
  double sum = 0.0;
  for (double f : split) {
    if (!(f >= 0.0)) throw ConfigError("config key 'data.split': fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("config key 'data.split': data.split.surrogate + data.split.rl + data.split.test = " +
                      fmt_real(sum) + ", expected 1");
  wrap("surrogate.*", [&] { surrogate.validate(); });
  if (!(policy.lambda >= 0.0 && policy.lambda <= 1.0))
    throw ConfigError("config key 'policy.lambda': must be in [0, 1], got " + fmt_real(policy.lambda));
  wrap("policy.*", [&] { policy.validate(); });
  for (double s2 : eval_sigma2)
    if (!(s2 >= 0.0)) throw ConfigError("config key 'eval.sigma2': variances must be >= 0");
  wrap("noise.unimodal.windows", [&] { NoiseSpec{1.0, unimodal_windows, 0}.validate(); });
  wrap("noise.bimodal.windows", [&] { NoiseSpec{1.0, bimodal_windows, 0}.validate(); });
  wrap("boundary.*", [&] { boundary.validate(); });
}

std::string simulator_kind_name(SimulatorKind k) { return k == SimulatorKind::navier_stokes ? "ns" : "heat"; }

std::unique_ptr<Simulator> make_simulator(const RunConfig& cfg, const std::vector<BoundaryOverride>& overrides) {
  if (cfg.simulator == SimulatorKind::heat) {
    HeatConfig h = cfg.heat;
    if (cfg.heat_velocity_u != 0.0 || cfg.heat_velocity_v != 0.0) {
      VectorField v(h.width, h.height);
      for (double& x : v.u.values()) x = cfg.heat_velocity_u;
      for (double& x : v.v.values()) x = cfg.heat_velocity_v;
      h.advecting_velocity = std::move(v);
    }
    return std::make_unique<HeatSimulator>(h);
  }
  return std::make_unique<NavierStokesSimulator>(cfg.ns, overrides);
}

}  // namespace hyper

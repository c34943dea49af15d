#include "hyper/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <spdlog/spdlog.h>

#include "hyper/data.hpp"
#include "hyper/error.hpp"
#include "hyper/io.hpp"

namespace hyper {

namespace {

/// Missing inputs for a verb; reported with exit code 2.
class MissingArtifact : public Error {
 public:
  using Error::Error;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  io::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_resolved(const RunConfig& cfg, const std::filesystem::path& dir, const std::string& verb) {
  write_text(dir / (verb + ".config"), config_to_text(cfg));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

DatasetManifest require_manifest(const RunConfig& cfg) {
  const auto path = cfg.data_dir() / "manifest.json";
  if (!std::filesystem::exists(path))
    throw MissingArtifact("no dataset at " + cfg.data_dir().string() + " (run gen-data first)");
  auto m = load_manifest(path);
  if (m.splits.empty()) throw MissingArtifact("dataset at " + cfg.data_dir().string() + " has no split");
  return m;
}

std::vector<Trajectory> require_split(const RunConfig& cfg, const DatasetManifest& m, Split s) {
  if (m.ids(s).empty()) throw MissingArtifact("dataset split '" + to_string(s) + "' is empty");
  return load_split(cfg.data_dir(), m, s);
}

SurrogateParams require_surrogate(const RunConfig& cfg) {
  const auto path = cfg.model_dir() / "surrogate.hysg";
  if (!std::filesystem::exists(path)) throw MissingArtifact("no surrogate at " + path.string() + " (run train-surrogate)");
  return load_surrogate_params(path);
}

std::filesystem::path policy_path(const RunConfig& cfg, const std::string& name) {
  return cfg.model_dir() / ("policy_" + name + ".hypo");
}

struct ScenarioSpec {
  std::string name;  // e.g. unimodal-0.25
  std::string kind;  // clean, unimodal, bimodal, boundary
  double sigma2 = 0.0;
};

ScenarioSpec parse_policy_scenario(const std::string& name) {
  if (name == "clean" || name == "boundary") return {name, name, 0.0};
  for (const std::string kind : {"unimodal", "bimodal"}) {
    if (name.rfind(kind + "-", 0) == 0) {
      const double s2 = parse_real(name.substr(kind.size() + 1));
      return {policy_scenario_name(kind, s2), kind, s2};
    }
  }
  throw ConfigError("config key 'policy.scenarios': unknown scenario '" + name + "'");
}

std::optional<NoiseSpec> noise_for(const RunConfig& cfg, const ScenarioSpec& s) {
  if (s.kind == "unimodal") return NoiseSpec{s.sigma2, cfg.unimodal_windows, cfg.noise_seed};
  if (s.kind == "bimodal") return NoiseSpec{s.sigma2, cfg.bimodal_windows, cfg.noise_seed};
  return std::nullopt;
}

std::vector<SimState> initial_states(const std::vector<Trajectory>& trajs) {
  std::vector<SimState> out;
  for (const auto& t : trajs) out.push_back(t.states.front());
  return out;
}

void require_ns(const RunConfig& cfg) {
  if (cfg.simulator != SimulatorKind::navier_stokes)
    throw ConfigError("the boundary scenario needs sim.kind = ns");
}

/// Falls back from the exact noise level to any policy of the same kind, then to clean.
std::filesystem::path find_policy(const RunConfig& cfg, const ScenarioSpec& s) {
  std::vector<std::string> candidates{s.name};
  if (s.kind == "unimodal" || s.kind == "bimodal") {
    for (const auto& p : cfg.policy_scenarios)
      if (p.rfind(s.kind + "-", 0) == 0) candidates.push_back(parse_policy_scenario(p).name);
    candidates.push_back("clean");
  }
  for (const auto& c : candidates) {
    const auto path = policy_path(cfg, c);
    if (std::filesystem::exists(path)) {
      if (c != s.name) spdlog::info("scenario {}: using policy '{}'", s.name, c);
      return path;
    }
  }
  throw MissingArtifact("no trained policy for scenario '" + s.name + "' in " + cfg.model_dir().string() +
                        " (run train-policy)");
}

}  // namespace

std::string policy_scenario_name(const std::string& kind, double sigma2) {
  if (kind == "clean" || kind == "boundary") return kind;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", sigma2);
  return kind + "-" + buf;
}

void configure_logging() {
  const char* env = std::getenv("HYPER_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
}

int run_guarded(const std::string& verb, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    spdlog::error("{}: {}", verb, e.what());
    return kExitUsage;
  } catch (const MissingArtifact& e) {
    spdlog::error("{}: {}", verb, e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", verb, e.what());
    return kExitRuntime;
  }
}

int cmd_gen_data(const RunConfig& cfg) {
  return run_guarded("gen-data", [&] {
    cfg.validate();
    auto sim = make_simulator(cfg);
    auto m = generate_dataset(*sim, simulator_kind_name(cfg.simulator), cfg.n_trajectories, cfg.horizon,
                              cfg.data_seed_value(), cfg.data_dir(), sample_plumes, cfg.jobs);
    m = split_dataset(std::move(m), cfg.split, cfg.data_seed_value());
    save_manifest(m, cfg.data_dir() / "manifest.json");
    write_resolved(cfg, cfg.data_dir(), "gen-data");
    std::printf("dataset %s: %d trajectories, T = %d, %dx%d, split surrogate/rl/test = %zu/%zu/%zu\n",
                m.dataset_id.c_str(), m.n_trajectories, m.horizon, m.width, m.height, m.ids(Split::surrogate).size(),
                m.ids(Split::rl).size(), m.ids(Split::test).size());
    return kExitOk;
  });
}

int cmd_train_surrogate(const RunConfig& cfg) {
  return run_guarded("train-surrogate", [&] {
    cfg.validate();
    const auto m = require_manifest(cfg);
    const auto train = require_split(cfg, m, Split::surrogate);
    SurrogateTrainConfig sc = cfg.surrogate;
    sc.seed = cfg.surrogate_seed_value();
    spdlog::info("training surrogate on {} trajectories for {} epochs", train.size(), sc.epochs);
    const auto r = train_surrogate(train, sc);
    std::filesystem::create_directories(cfg.model_dir());
    save_params(r.params, cfg.model_dir() / "surrogate.hysg");
    std::string csv = "epoch,loss\n0," + fmt(r.initial_loss) + "\n";
    for (std::size_t e = 0; e < r.loss_curve.size(); ++e) csv += std::to_string(e + 1) + "," + fmt(r.loss_curve[e]) + "\n";
    write_text(cfg.model_dir() / "surrogate_loss.csv", csv);
    write_resolved(cfg, cfg.model_dir(), "train-surrogate");
    std::printf("surrogate: %zu parameters, loss %.6g -> %.6g\n", r.params.values.size(), r.initial_loss,
                r.final_loss);
    return kExitOk;
  });
}

int cmd_train_policy(const RunConfig& cfg) {
  return run_guarded("train-policy", [&] {
    cfg.validate();
    const auto m = require_manifest(cfg);
    const ConvSurrogate surrogate(require_surrogate(cfg));
    const auto rl = require_split(cfg, m, Split::rl);
    const auto s_ids = m.ids(Split::surrogate);
    const auto r_ids = m.ids(Split::rl);
    check_disjoint_splits(s_ids, r_ids);
    std::vector<ScenarioSpec> scenarios;
    for (const auto& name : cfg.policy_scenarios) scenarios.push_back(parse_policy_scenario(name));
    for (const auto& s : scenarios) {
      PolicyTrainConfig pc = cfg.policy;
      pc.seed = nn::derive_seed(cfg.policy_seed_value(), 0, s.name);
      std::unique_ptr<Simulator> sim;
      std::vector<Trajectory> truth;
      if (s.kind == "boundary") {
        require_ns(cfg);
        auto scenario = changing_boundary_scenario(cfg.ns, cfg.boundary, initial_states(rl), m.horizon);
        for (auto& t : scenario.truth) truth.push_back(stored_trajectory(std::move(t)));
        sim = std::move(scenario.aware_simulator);
      } else {
        sim = make_simulator(cfg);
        truth = rl;
      }
      const auto noise = noise_for(cfg, s);
      spdlog::info("training policy '{}' on {} trajectories for {} epochs", s.name, truth.size(), pc.epochs);
      const auto r = train_policy(truth, surrogate, *sim, pc, noise ? &*noise : nullptr);
      std::filesystem::create_directories(cfg.model_dir());
      save_params(r.params, policy_path(cfg, s.name));
      std::string csv = "epoch,mean_reward,mean_advantage,sim_call_fraction\n";
      for (std::size_t e = 0; e < r.reward_curve.size(); ++e)
        csv += std::to_string(e + 1) + "," + fmt(r.reward_curve[e]) + "," + fmt(r.advantage_curve[e]) + "," +
               fmt(r.sim_fraction_curve[e]) + "\n";
      write_text(cfg.model_dir() / ("policy_" + s.name + "_reward.csv"), csv);
      std::printf("policy %s: final sim-call fraction %.3f, skipped %d\n", s.name.c_str(),
                  r.sim_fraction_curve.back(), r.skipped);
    }
    write_resolved(cfg, cfg.model_dir(), "train-policy");
    return kExitOk;
  });
}

int cmd_eval(const RunConfig& cfg) {
  return run_guarded("eval", [&] {
    cfg.validate();
    const auto m = require_manifest(cfg);
    const ConvSurrogate surrogate(require_surrogate(cfg));
    const auto test = require_split(cfg, m, Split::test);
    const auto ids = m.ids(Split::test);

    std::vector<ScenarioSpec> scenarios;
    for (const auto& kind : cfg.eval_scenarios) {
      if (kind == "clean" || kind == "boundary") {
        scenarios.push_back({kind, kind, 0.0});
      } else if (kind == "unimodal" || kind == "bimodal") {
        for (double s2 : cfg.eval_sigma2) scenarios.push_back({policy_scenario_name(kind, s2), kind, s2});
      } else {
        throw ConfigError("config key 'eval.scenarios': unknown scenario '" + kind + "'");
      }
    }
    // Resolve every artifact before spending time on rollouts.
    std::vector<PolicyParams> policies;
    for (const auto& s : scenarios) policies.push_back(load_policy_params(find_policy(cfg, s)));

    std::string rows = "scenario,method,traj_id,final_mse,cumulative_mse,sim_calls,wall_time_s\n";
    std::string agg =
        "scenario,method,n,mean_final_mse,mean_cumulative_mse,mean_sim_call_fraction,mean_wall_time_s,"
        "mean_error_per_unit_time,hyper_win_pct\n";
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      const auto& s = scenarios[i];
      CompareOptions co;
      co.seed = nn::derive_seed(cfg.eval_seed_value(), 0, s.name);
      co.mode = cfg.eval_policy_mode;
      co.noise = noise_for(cfg, s);
      co.jobs = cfg.jobs;
      ComparisonTable table;
      if (s.kind == "boundary") {
        require_ns(cfg);
        auto scenario = changing_boundary_scenario(cfg.ns, cfg.boundary, initial_states(test), m.horizon);
        std::vector<Trajectory> truth;
        for (auto& t : scenario.truth) truth.push_back(stored_trajectory(std::move(t)));
        table = compare_policies(truth, policies[i], surrogate, *scenario.aware_simulator, co, ids);
      } else {
        auto sim = make_simulator(cfg);
        table = compare_policies(test, policies[i], surrogate, *sim, co, ids);
      }
      std::sort(table.rows.begin(), table.rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        return std::tie(a.traj_id, a.method) < std::tie(b.traj_id, b.method);
      });
      for (const auto& r : table.rows)
        rows += s.name + "," + to_string(r.method) + "," + std::to_string(r.traj_id) + "," + fmt(r.report.final_mse) +
                "," + fmt(r.report.cumulative_mse) + "," + std::to_string(r.report.sim_calls) + "," +
                fmt(r.report.wall_time_total) + "\n";
      for (const auto& sm : table.summaries)
        agg += s.name + "," + to_string(sm.method) + "," + std::to_string(test.size()) + "," + fmt(sm.mean_final_mse) +
               "," + fmt(sm.mean_cumulative_mse) + "," + fmt(sm.mean_sim_call_fraction) + "," +
               fmt(sm.mean_wall_time) + "," + fmt(sm.mean_error_per_unit_time) + "," +
               (sm.method == Method::hyper ? fmt(table.hyper_win_pct) : std::string()) + "\n";
      const auto& h = table.summary(Method::hyper);
      const auto& so = table.summary(Method::surrogate_only);
      std::printf("%-16s hyper cum %.4g (surrogate-only %.4g), sim fraction %.3f, win %.1f%%\n", s.name.c_str(),
                  h.mean_cumulative_mse, so.mean_cumulative_mse, h.mean_sim_call_fraction, table.hyper_win_pct);
    }
    std::filesystem::create_directories(cfg.eval_dir());
    write_text(cfg.eval_dir() / "per_trajectory.csv", rows);
    write_text(cfg.eval_dir() / "aggregate.csv", agg);
    write_resolved(cfg, cfg.eval_dir(), "eval");
    return kExitOk;
  });
}

std::vector<std::uint8_t> field_to_pgm(const ScalarField& field) {
  const double lo = std::min(0.0, field.min());
  const double hi = std::max(0.0, field.max());
  const std::string header =
      "P5\n" + std::to_string(field.width()) + " " + std::to_string(field.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (int y = field.height() - 1; y >= 0; --y) {
    for (int x = 0; x < field.width(); ++x) {
      const double v = field.at(x, y);
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0)));
    }
  }
  return out;
}

int cmd_snapshot(const SnapshotArgs& args) {
  return run_guarded("snapshot", [&] {
    if (!std::filesystem::exists(args.trajectory))
      throw MissingArtifact("no trajectory file " + args.trajectory.string());
    const Trajectory traj = load_trajectory(args.trajectory);
    std::optional<Trajectory> other;
    if (args.compare) {
      if (!std::filesystem::exists(*args.compare)) throw MissingArtifact("no trajectory file " + args.compare->string());
      other = load_trajectory(*args.compare);
      if (other->states.size() != traj.states.size() ||
          !other->states.front().concentration.same_shape(traj.states.front().concentration))
        throw ConfigError("compared trajectories differ in length or grid");
    }
    std::vector<int> steps = args.steps;
    if (steps.empty())
      for (int t = 0; t <= traj.horizon(); ++t) steps.push_back(t);
    for (int t : steps)
      if (t < 0 || t > traj.horizon())
        throw ConfigError("step " + std::to_string(t) + " outside [0, " + std::to_string(traj.horizon()) +
                          "]");
    std::filesystem::create_directories(args.out_dir);
    int written = 0;
    for (int t : steps) {
      for (FieldSelector f : args.fields) {
        const ScalarField& a = select_field(traj.states[t], f);
        char name[64];
        std::snprintf(name, sizeof name, "%s_%03d.pgm", to_string(f).c_str(), t);
        io::write_file_atomic(args.out_dir / name, field_to_pgm(a));
        ++written;
        if (other) {
          const ScalarField& b = select_field(other->states[t], f);
          std::vector<double> err(a.values().size());
          for (std::size_t k = 0; k < err.size(); ++k) err[k] = std::abs(a.values()[k] - b.values()[k]);
          std::snprintf(name, sizeof name, "%s_abserr_%03d.pgm", to_string(f).c_str(), t);
          io::write_file_atomic(args.out_dir / name, field_to_pgm(ScalarField(a.width(), a.height(), std::move(err))));
          ++written;
        }
      }
    }
    std::printf("wrote %d images to %s\n", written, args.out_dir.string().c_str());
    return kExitOk;
  });
}

}  // namespace hyper

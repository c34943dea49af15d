#include "hyper/rollout.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace hyper {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

NoiseSpec NoiseSpec::unimodal(double sigma2, std::uint64_t seed) { return {sigma2, {{12, 16}}, seed}; }

NoiseSpec NoiseSpec::bimodal(double sigma2, std::uint64_t seed) { return {sigma2, {{2, 4}, {15, 16}}, seed}; }

bool NoiseSpec::active(int t) const {
  for (const auto& w : windows)
    if (t >= w.start && t < w.end) return true;
  return false;
}

void NoiseSpec::validate() const {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw InvalidArgument("noise: sigma2 must be >= 0");
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].start < 0 || windows[i].start >= windows[i].end)
      throw InvalidArgument("noise: window must satisfy 0 <= start < end");
    for (std::size_t j = 0; j < i; ++j)
      if (windows[i].start < windows[j].end && windows[j].start < windows[i].end)
        throw InvalidArgument("noise: windows overlap");
  }
}

NoiseSpec NoiseSpec::for_trajectory(std::uint64_t traj_id) const {
  NoiseSpec copy = *this;
  copy.seed = nn::derive_seed(seed, traj_id, "noise");
  return copy;
}

FixedActions::FixedActions(std::vector<int> actions) : actions_(std::move(actions)) {
  for (int a : actions_)
    if (a != 0 && a != 1) throw InvalidArgument("actions must be 0 or 1");
}

int FixedActions::next(const ScalarField&, int t, int horizon) {
  if (actions_.size() != static_cast<std::size_t>(horizon))
    throw DimensionError("fixed actions: " + std::to_string(actions_.size()) + " actions for horizon " +
                         std::to_string(horizon));
  return actions_[static_cast<std::size_t>(t)];
}

PolicyMode parse_policy_mode(const std::string& name) {
  if (name == "sample") return PolicyMode::sample;
  if (name == "greedy") return PolicyMode::greedy;
  throw InvalidArgument("unknown policy mode '" + name + "' (expected sample or greedy)");
}

PolicyActions::PolicyActions(const PolicyParams& params, std::uint64_t seed, PolicyMode mode)
    : params_(params), rng_(seed), mode_(mode) {}

int PolicyActions::next(const ScalarField& policy_input, int t, int horizon) {
  if (cursor_ == sequence_.records.size()) {
    const int length = std::min(params_.chunk_size, horizon - t);
    std::vector<ActionRecord> chunk;
    if (mode_ == PolicyMode::greedy) {
      chunk = sample_action_chunk(params_, policy_input, t, length, [] { return 0.5; });
    } else {
      chunk = sample_action_chunk(params_, policy_input, t, length, rng_);
    }
    sequence_.chunks.push_back({t, policy_input, length});
    sequence_.records.insert(sequence_.records.end(), chunk.begin(), chunk.end());
  }
  return sequence_.records[cursor_++].action;
}

RolloutResult hybrid_rollout(const SimState& initial, int horizon, const Surrogate& surrogate,
                             const Simulator& simulator, ActionSource& actions, const NoiseSpec* noise) {
  if (horizon < 1) throw InvalidArgument("hybrid_rollout: horizon must be >= 1");
  if (noise) noise->validate();
  RolloutResult result;
  result.predicted.states.reserve(static_cast<std::size_t>(horizon) + 1);
  result.predicted.states.push_back(initial);
  std::mt19937_64 noise_rng(noise ? noise->seed : 0);
  std::normal_distribution<double> gauss(0.0, noise ? std::sqrt(noise->sigma2) : 0.0);

  for (int t = 0; t < horizon; ++t) {
    const SimState& state = result.predicted.states.back();
    ScalarField input = state.concentration;
    if (noise && noise->active(t)) {
      for (double& v : input.values()) v += gauss(noise_rng);
    }

    auto start = Clock::now();
    const int a = actions.next(input, t, horizon);
    result.wall_time_policy += seconds_since(start);
    result.actions.push_back(a);

    SimState next;
    if (a == 1) {
      ++result.sim_calls;
      start = Clock::now();
      try {
        next = simulator.step(state);
      } catch (const Error& e) {
        result.wall_time_simulator += seconds_since(start);
        throw RolloutError(std::string("hybrid_rollout: simulator failed at step ") + std::to_string(t) + ": " +
                               e.what(),
                           result.predicted);
      }
      result.wall_time_simulator += seconds_since(start);
    } else {
      SimState query = state;
      query.concentration = std::move(input);
      start = Clock::now();
      next = surrogate.predict(query);
      result.wall_time_surrogate += seconds_since(start);
      next.step_index = state.step_index + 1;
      next.sim_time = next.step_index * simulator.dt();
    }
    result.predicted.states.push_back(std::move(next));
  }
  result.predicted.config_id = simulator.describe();
  return result;
}

std::vector<int> random_policy_actions(int horizon, int k, std::mt19937_64& rng) {
  if (horizon < 1) throw InvalidArgument("random_policy_actions: horizon must be >= 1");
  if (k < 0 || k > horizon)
    throw InvalidArgument("random_policy_actions: k = " + std::to_string(k) + " outside [0, " +
                          std::to_string(horizon) + "]");
  // Partial Fisher-Yates: the first k slots of a uniform permutation.
  std::vector<int> slots(static_cast<std::size_t>(horizon));
  std::iota(slots.begin(), slots.end(), 0);
  std::vector<int> actions(static_cast<std::size_t>(horizon), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, horizon - 1);
    std::swap(slots[i], slots[pick(rng)]);
    actions[static_cast<std::size_t>(slots[i])] = 1;
  }
  return actions;
}

EvalReport evaluate_rollout(const RolloutResult& result, const Trajectory& truth, FieldSelector selector) {
  const auto& pred = result.predicted;
  if (pred.states.size() != truth.states.size())
    throw DimensionError("evaluate_rollout: prediction has " + std::to_string(pred.states.size()) +
                         " states, truth " + std::to_string(truth.states.size()));
  EvalReport r;
  for (std::size_t t = 1; t < truth.states.size(); ++t) {
    const ScalarField a = round_to_storage(select_field(pred.states[t], selector));
    const ScalarField b = round_to_storage(select_field(truth.states[t], selector));
    r.per_step_mse.push_back(mse(a, b));
  }
  for (double m : r.per_step_mse) r.cumulative_mse += m;
  r.final_mse = r.per_step_mse.back();
  r.sim_calls = result.sim_calls;
  r.sim_call_fraction = static_cast<double>(result.sim_calls) / static_cast<double>(r.per_step_mse.size());
  r.wall_time_total = result.wall_time_surrogate + result.wall_time_simulator + result.wall_time_policy;
  r.error_per_unit_time = r.wall_time_total > 0.0 ? r.cumulative_mse / r.wall_time_total : 0.0;
  return r;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::surrogate_only: return "surrogate-only";
    case Method::random_policy: return "random-policy";
    case Method::hyper: return "hyper";
    case Method::simulator_only: return "simulator-only";
  }
  return "unknown";
}

const MethodSummary& ComparisonTable::summary(Method m) const {
  for (const auto& s : summaries)
    if (s.method == m) return s;
  throw InvalidArgument("comparison: method " + to_string(m) + " was not evaluated");
}

std::vector<ComparisonRow> ComparisonTable::rows_for(Method m) const {
  std::vector<ComparisonRow> out;
  for (const auto& r : rows)
    if (r.method == m) out.push_back(r);
  return out;
}

ComparisonTable compare_policies(const std::vector<Trajectory>& test_set, const PolicyParams& policy,
                                 const Surrogate& surrogate, const Simulator& simulator,
                                 const CompareOptions& options, std::vector<std::uint64_t> ids) {
  if (test_set.empty()) throw InvalidArgument("compare_policies: empty test set");
  if (ids.empty()) {
    ids.resize(test_set.size());
    std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  }
  if (ids.size() != test_set.size()) throw DimensionError("compare_policies: one id per trajectory required");
  auto wants = [&](Method m) {
    return std::find(options.methods.begin(), options.methods.end(), m) != options.methods.end();
  };
  const bool need_hyper = wants(Method::hyper) || wants(Method::random_policy);

  const int n = static_cast<int>(test_set.size());
  std::vector<std::vector<ComparisonRow>> per_traj(test_set.size());
  std::vector<std::string> failures(test_set.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, options.jobs))
  for (int i = 0; i < n; ++i) {
    try {
      const Trajectory& truth = test_set[i];
      const int horizon = truth.horizon();
      const std::uint64_t id = ids[i];
      std::optional<NoiseSpec> noise;
      if (options.noise) noise = options.noise->for_trajectory(id);
      const NoiseSpec* np = noise ? &*noise : nullptr;
      auto run = [&](Method m, ActionSource& src) {
        auto res = hybrid_rollout(truth.states.front(), horizon, surrogate, simulator, src, np);
        per_traj[i].push_back({id, m, evaluate_rollout(res, truth, options.selector)});
        return res;
      };
      if (wants(Method::surrogate_only)) {
        FixedActions zeros(std::vector<int>(horizon, 0));
        run(Method::surrogate_only, zeros);
      }
      int k = 0;
      if (need_hyper) {
        PolicyActions src(policy, nn::derive_seed(options.seed, id, "policy"), options.mode);
        auto res = hybrid_rollout(truth.states.front(), horizon, surrogate, simulator, src, np);
        k = res.sim_calls;
        if (wants(Method::hyper)) per_traj[i].push_back({id, Method::hyper, evaluate_rollout(res, truth, options.selector)});
      }
      if (wants(Method::random_policy)) {
        std::mt19937_64 rng(nn::derive_seed(options.seed, id, "random"));
        FixedActions random(random_policy_actions(horizon, k, rng));
        auto res = run(Method::random_policy, random);
        if (res.sim_calls != k) throw Error("compare_policies: random policy budget differs from HyPER's");
      }
      if (wants(Method::simulator_only)) {
        FixedActions ones(std::vector<int>(horizon, 1));
        run(Method::simulator_only, ones);
      }
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }
  for (const auto& f : failures)
    if (!f.empty()) throw Error(f);

  ComparisonTable table;
  for (auto& rows : per_traj) table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
    return a.traj_id != b.traj_id ? a.traj_id < b.traj_id : a.method < b.method;
  });
  for (Method m : {Method::surrogate_only, Method::random_policy, Method::hyper, Method::simulator_only}) {
    if (!wants(m)) continue;
    MethodSummary s;
    s.method = m;
    const auto rows = table.rows_for(m);
    for (const auto& r : rows) {
      s.mean_final_mse += r.report.final_mse;
      s.mean_cumulative_mse += r.report.cumulative_mse;
      s.mean_sim_call_fraction += r.report.sim_call_fraction;
      s.mean_wall_time += r.report.wall_time_total;
      s.mean_error_per_unit_time += r.report.error_per_unit_time;
    }
    const double cnt = static_cast<double>(rows.size());
    s.mean_final_mse /= cnt;
    s.mean_cumulative_mse /= cnt;
    s.mean_sim_call_fraction /= cnt;
    s.mean_wall_time /= cnt;
    s.mean_error_per_unit_time /= cnt;
    table.summaries.push_back(s);
  }
  if (wants(Method::hyper) && wants(Method::random_policy)) {
    const auto h = table.rows_for(Method::hyper);
    const auto r = table.rows_for(Method::random_policy);
    int wins = 0;
    for (std::size_t i = 0; i < h.size(); ++i)
      if (h[i].report.cumulative_mse < r[i].report.cumulative_mse) ++wins;
    table.hyper_win_pct = 100.0 * wins / static_cast<double>(h.size());
  }
  return table;
}

BoundaryOverride default_boundary_override() { return {Edge::top, VelocityComponent::v, 0.5, 12, 16}; }

BoundaryScenario changing_boundary_scenario(const NavierStokesConfig& base_cfg, const BoundaryOverride& override_spec,
                                            const std::vector<SimState>& initial_states, int horizon) {
  override_spec.validate();
  if (override_spec.step_end > horizon)
    throw InvalidArgument("changing boundary: override window ends after the horizon");
  BoundaryScenario s;
  s.aware_simulator = std::make_unique<NavierStokesSimulator>(base_cfg, std::vector<BoundaryOverride>{override_spec});
  for (const auto& init : initial_states) s.truth.push_back(simulate(*s.aware_simulator, init, horizon));
  return s;
}

BoundaryScenario changing_boundary_scenario(const NavierStokesConfig& base_cfg, const BoundaryOverride& override_spec,
                                            int n_traj, int horizon, std::uint64_t seed) {
  if (n_traj < 1) throw InvalidArgument("changing boundary: n_traj must be >= 1");
  std::vector<SimState> inits;
  for (int i = 0; i < n_traj; ++i) {
    std::mt19937_64 rng(nn::derive_seed(seed, static_cast<std::uint64_t>(i)));
    inits.push_back(SimState::from_concentration(sample_plumes(base_cfg.width, base_cfg.height, rng), 0, base_cfg.dt));
  }
  auto s = changing_boundary_scenario(base_cfg, override_spec, inits, horizon);
  for (int i = 0; i < n_traj; ++i) s.truth[i].seed = nn::derive_seed(seed, static_cast<std::uint64_t>(i));
  return s;
}

}  // namespace hyper

#pragma once

// Hybrid surrogate/simulator rollouts, baselines and evaluation metrics.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hyper/error.hpp"
#include "hyper/grid.hpp"
#include "hyper/policy.hpp"
#include "hyper/sim.hpp"
#include "hyper/surrogate.hpp"

namespace hyper {

struct NoiseWindow {
  int start = 0;
  int end = 0;  ///< exclusive
};

/// Zero-mean Gaussian noise added to the policy and surrogate input inside the windows.
struct NoiseSpec {
  double sigma2 = 0.0;
  std::vector<NoiseWindow> windows;
  std::uint64_t seed = 0;

  static NoiseSpec unimodal(double sigma2, std::uint64_t seed = 0);
  static NoiseSpec bimodal(double sigma2, std::uint64_t seed = 0);

  bool active(int t) const;
  void validate() const;
  /// Copy with an independent seed for one trajectory.
  NoiseSpec for_trajectory(std::uint64_t traj_id) const;
};

/// Supplies a_t given the (possibly noisy) current prediction.
class ActionSource {
 public:
  virtual ~ActionSource() = default;
  virtual int next(const ScalarField& policy_input, int t, int horizon) = 0;
};

class FixedActions final : public ActionSource {
 public:
  explicit FixedActions(std::vector<int> actions);
  int next(const ScalarField& policy_input, int t, int horizon) override;

 private:
  std::vector<int> actions_;
};

enum class PolicyMode { sample, greedy };
PolicyMode parse_policy_mode(const std::string& name);

/// Queries the policy once per chunk and records everything REINFORCE needs.
class PolicyActions final : public ActionSource {
 public:
  PolicyActions(const PolicyParams& params, std::uint64_t seed, PolicyMode mode = PolicyMode::sample);
  int next(const ScalarField& policy_input, int t, int horizon) override;
  const ActionSequence& sequence() const { return sequence_; }

 private:
  const PolicyParams& params_;
  std::mt19937_64 rng_;
  PolicyMode mode_;
  ActionSequence sequence_;
  std::size_t cursor_ = 0;
};

struct RolloutResult {
  Trajectory predicted;
  std::vector<int> actions;
  int sim_calls = 0;
  double wall_time_surrogate = 0.0;
  double wall_time_simulator = 0.0;
  double wall_time_policy = 0.0;
};

/// Simulator failure during a rollout; carries the states produced so far.
class RolloutError : public Error {
 public:
  RolloutError(const std::string& what, Trajectory partial) : Error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

/// a_t = 0 replaces the concentration with the surrogate prediction and freezes
/// velocity and pressure; a_t = 1 advances the full carried state with the simulator.
RolloutResult hybrid_rollout(const SimState& initial, int horizon, const Surrogate& surrogate,
                             const Simulator& simulator, ActionSource& actions, const NoiseSpec* noise = nullptr);

/// Exactly k ones placed uniformly without replacement.
std::vector<int> random_policy_actions(int horizon, int k, std::mt19937_64& rng);

struct EvalReport {
  double final_mse = 0.0;
  double cumulative_mse = 0.0;
  std::vector<double> per_step_mse;
  double sim_call_fraction = 0.0;
  int sim_calls = 0;
  double wall_time_total = 0.0;
  double error_per_unit_time = 0.0;
};

/// Step errors compare fields at storage precision.
EvalReport evaluate_rollout(const RolloutResult& result, const Trajectory& truth,
                            FieldSelector selector = FieldSelector::concentration);

enum class Method { surrogate_only, random_policy, hyper, simulator_only };
std::string to_string(Method m);

struct ComparisonRow {
  std::uint64_t traj_id = 0;
  Method method = Method::hyper;
  EvalReport report;
};

struct MethodSummary {
  Method method = Method::hyper;
  double mean_final_mse = 0.0;
  double mean_cumulative_mse = 0.0;
  double mean_sim_call_fraction = 0.0;
  double mean_wall_time = 0.0;
  double mean_error_per_unit_time = 0.0;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;  ///< sorted by (traj_id, method)
  std::vector<MethodSummary> summaries;
  /// Percentage of trajectories where HyPER's cumulative MSE is strictly below the random policy's.
  double hyper_win_pct = 0.0;

  const MethodSummary& summary(Method m) const;
  std::vector<ComparisonRow> rows_for(Method m) const;
};

struct CompareOptions {
  std::uint64_t seed = 0;
  PolicyMode mode = PolicyMode::sample;
  std::optional<NoiseSpec> noise;
  FieldSelector selector = FieldSelector::concentration;
  std::vector<Method> methods{Method::surrogate_only, Method::random_policy, Method::hyper, Method::simulator_only};
  int jobs = 1;
};

/// Per trajectory: HyPER rollout, then the random policy with HyPER's k.
/// `ids` defaults to 0..n-1.
ComparisonTable compare_policies(const std::vector<Trajectory>& test_set, const PolicyParams& policy,
                                 const Surrogate& surrogate, const Simulator& simulator,
                                 const CompareOptions& options, std::vector<std::uint64_t> ids = {});

/// Ground truth generated with the override active, plus the override-aware simulator.
struct BoundaryScenario {
  std::vector<Trajectory> truth;
  std::unique_ptr<NavierStokesSimulator> aware_simulator;
};

BoundaryScenario changing_boundary_scenario(const NavierStokesConfig& base_cfg, const BoundaryOverride& override_spec,
                                            int n_traj, int horizon, std::uint64_t seed);
/// Same, starting from given initial states (e.g. the test split).
BoundaryScenario changing_boundary_scenario(const NavierStokesConfig& base_cfg, const BoundaryOverride& override_spec,
                                            const std::vector<SimState>& initial_states, int horizon);

/// The top-edge outflow of 0.5 over steps [12, 16).
BoundaryOverride default_boundary_override();

}  // namespace hyper

#pragma once

// Decision model choosing surrogate (0) or simulator (1) per step, trained with REINFORCE.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hyper/grid.hpp"
#include "hyper/nn.hpp"

namespace hyper {

class Surrogate;
class Simulator;
struct NoiseSpec;

struct PolicyParams {
  int width = 0;
  int height = 0;
  int chunk_size = 4;
  std::uint64_t seed = 0;
  std::vector<double> values;

  /// Random encoder and MLP weights; head bias at logit(initial_prob).
  static PolicyParams initialize(int width, int height, int chunk_size, std::uint64_t seed,
                                 double initial_prob = 0.5);
  static PolicyParams zeros(int width, int height, int chunk_size);
  static std::size_t parameter_count(int chunk_size);

  std::string architecture() const;
  std::uint64_t architecture_hash() const;
  void validate() const;
};

/// Logits are clamped to this magnitude so probabilities stay strictly inside (0, 1).
inline constexpr double kMaxLogit = 30.0;
inline constexpr int kTimeEmbeddingDim = 16;

/// One logit per head for the chunk starting at step t.
std::vector<double> policy_logits(const PolicyParams& params, const ScalarField& field, int t);
std::vector<double> policy_probabilities(const PolicyParams& params, const ScalarField& field, int t);
/// Probability of calling the simulator at step t (first head).
double policy_forward(const PolicyParams& params, const SimState& state, int t);

struct ActionRecord {
  int t = 0;
  int action = 0;  ///< 0 = surrogate, 1 = simulator
  double prob = 0.5;  ///< probability of action 1
  double log_prob = 0.0;  ///< log-probability of the taken action
};

/// log p(action) from a logit, computed without cancellation.
double action_log_prob(double logit, int action);

/// The policy input seen at the start of a chunk, kept for the gradient.
struct ChunkInput {
  int t = 0;
  ScalarField field;
  int length = 0;
};

struct ActionSequence {
  std::vector<ActionRecord> records;
  std::vector<ChunkInput> chunks;

  std::vector<int> actions() const;
  int sim_calls() const;
  double total_log_prob() const;
};

/// Uniform [0, 1) source; action 1 is taken when u < p.
using UniformSource = std::function<double()>;

std::vector<ActionRecord> sample_action_chunk(const PolicyParams& params, const ScalarField& field, int t,
                                              int chunk_size, const UniformSource& uniform);
std::vector<ActionRecord> sample_action_chunk(const PolicyParams& params, const ScalarField& field, int t,
                                              int chunk_size, std::mt19937_64& rng);

/// | k / T - lambda |
double cost(std::span<const int> actions, double lambda, int horizon);

struct RewardBreakdown {
  double error_term = 0.0;     ///< -sum of policy rollout step MSEs
  double baseline_term = 0.0;  ///< -sum of baseline rollout step MSEs
  double cost_term = 0.0;      ///< -cost, shared by both totals
  double total_policy_reward = 0.0;
  double total_baseline_reward = 0.0;

  double advantage() const { return total_policy_reward - total_baseline_reward; }
};

RewardBreakdown compute_rewards(const Trajectory& policy_traj, const Trajectory& baseline_traj,
                                const Trajectory& truth, std::span<const int> actions,
                                std::span<const int> baseline_actions, double lambda,
                                FieldSelector selector = FieldSelector::concentration);

/// Sum of log-probabilities of the recorded actions and its gradient.
struct LogProbGrad {
  double log_prob = 0.0;
  std::vector<double> grads;
};
LogProbGrad policy_log_prob_grad(const PolicyParams& params, const ActionSequence& sequence);

/// One REINFORCE step on -signal * sum(log pi). A zero signal leaves params untouched.
PolicyParams reinforce_update(const PolicyParams& params, const ActionSequence& sequence, double signal,
                              nn::Optimizer& optimizer);
/// Plain gradient step with learning rate lr.
PolicyParams reinforce_update(const PolicyParams& params, const ActionSequence& sequence, double signal, double lr);

struct PolicyTrainConfig {
  double lambda = 0.3;
  int chunk_size = 4;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::adam, 1e-3};
  int epochs = 15;
  std::uint64_t seed = 0;
  /// Weight of the budget cost added to the learning signal; 0 trains on the advantage alone.
  double cost_weight = 1.0;
  /// Initial simulator probability; defaults to lambda.
  std::optional<double> initial_prob;
  FieldSelector selector = FieldSelector::concentration;

  void validate() const;
};

struct PolicyTrainResult {
  PolicyParams params;
  std::vector<double> reward_curve;    ///< mean R_d per epoch
  std::vector<double> advantage_curve; ///< mean R_d - R_b per epoch
  std::vector<double> sim_fraction_curve;
  int skipped = 0;
};

/// Surrogate and RL training ids must be disjoint; callers pass them to enforce it.
void check_disjoint_splits(std::span<const std::uint64_t> surrogate_ids, std::span<const std::uint64_t> rl_ids);

PolicyTrainResult train_policy(const std::vector<Trajectory>& rl_dataset, const Surrogate& surrogate,
                               const Simulator& simulator, const PolicyTrainConfig& cfg,
                               const NoiseSpec* noise = nullptr, const PolicyParams* init = nullptr);

void save_params(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_policy_params(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_policy(const PolicyParams& params);
PolicyParams decode_policy(std::span<const std::uint8_t> bytes);

}  // namespace hyper

#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "hyper/policy.hpp"
#include "hyper/rollout.hpp"

namespace hyper {

PolicyTrainResult train_policy(const std::vector<Trajectory>& rl_dataset, const Surrogate& surrogate,
                               const Simulator& simulator, const PolicyTrainConfig& cfg, const NoiseSpec* noise,
                               const PolicyParams* init) {
  cfg.validate();
  if (rl_dataset.empty()) throw InvalidArgument("train_policy: empty RL dataset");
  const int w = simulator.width();
  const int h = simulator.height();
  PolicyTrainResult result;
  result.params = init ? *init
                       : PolicyParams::initialize(w, h, cfg.chunk_size, cfg.seed, cfg.initial_prob.value_or(cfg.lambda));
  result.params.validate();
  if (result.params.chunk_size != cfg.chunk_size) throw InvalidArgument("train_policy: chunk_size differs from init");
  auto opt = nn::make_optimizer(cfg.optimizer, result.params.values.size());

  std::mt19937_64 order_rng(nn::derive_seed(cfg.seed, 0, "order"));
  std::vector<std::size_t> order(rl_dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  int attempted = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double reward_sum = 0.0;
    double adv_sum = 0.0;
    double frac_sum = 0.0;
    int used = 0;
    for (std::size_t idx : order) {
      const Trajectory& truth = rl_dataset[idx];
      const int horizon = truth.horizon();
      const std::uint64_t episode = static_cast<std::uint64_t>(epoch) * rl_dataset.size() + idx;
      std::optional<NoiseSpec> ep_noise;
      if (noise) ep_noise = noise->for_trajectory(nn::derive_seed(cfg.seed, episode, "train-noise"));
      const NoiseSpec* np = ep_noise ? &*ep_noise : nullptr;
      ++attempted;
      try {
        PolicyActions src(result.params, nn::derive_seed(cfg.seed, episode, "actions"));
        RolloutResult run = hybrid_rollout(truth.states.front(), horizon, surrogate, simulator, src, np);

        std::mt19937_64 base_rng(nn::derive_seed(cfg.seed, episode, "baseline"));
        const auto base_actions = random_policy_actions(horizon, run.sim_calls, base_rng);
        FixedActions base_src(base_actions);
        RolloutResult base = hybrid_rollout(truth.states.front(), horizon, surrogate, simulator, base_src, np);

        const RewardBreakdown r = compute_rewards(run.predicted, base.predicted, truth, run.actions, base_actions,
                                                  cfg.lambda, cfg.selector);
        // The shared cost cancels in R_d - R_b; add it once so the budget is still learned.
        const double signal = r.advantage() + cfg.cost_weight * r.cost_term;
        result.params = reinforce_update(result.params, src.sequence(), signal, *opt);

        reward_sum += r.total_policy_reward;
        adv_sum += r.advantage();
        frac_sum += static_cast<double>(run.sim_calls) / horizon;
        ++used;
      } catch (const RolloutError& e) {
        ++result.skipped;
        spdlog::warn("train_policy: skipping trajectory {} in epoch {}: {}", idx, epoch + 1, e.what());
        if (result.skipped * 10 > attempted && attempted >= 10)
          throw TrainingDivergence("train_policy: more than 10% of trajectories skipped (" +
                                   std::to_string(result.skipped) + " of " + std::to_string(attempted) + ")");
      }
    }
    const double denom = used > 0 ? used : 1;
    result.reward_curve.push_back(reward_sum / denom);
    result.advantage_curve.push_back(adv_sum / denom);
    result.sim_fraction_curve.push_back(frac_sum / denom);
    spdlog::debug("policy epoch {}: reward {:.5f} advantage {:.5f} sim fraction {:.3f}", epoch + 1,
                  result.reward_curve.back(), result.advantage_curve.back(), result.sim_fraction_curve.back());
  }
  if (result.skipped * 10 > attempted)
    throw TrainingDivergence("train_policy: more than 10% of trajectories skipped (" + std::to_string(result.skipped) +
                             " of " + std::to_string(attempted) + ")");
  return result;
}

}  // namespace hyper

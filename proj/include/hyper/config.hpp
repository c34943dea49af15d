#pragma once

// Flat `key = value` run configuration shared by every CLI verb.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hyper/policy.hpp"
#include "hyper/rollout.hpp"
#include "hyper/sim.hpp"
#include "hyper/surrogate.hpp"

namespace hyper {

enum class SimulatorKind { navier_stokes, heat };

/// Every tunable of a pipeline run. Seeds left unset derive from `seed`.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  int jobs = 1;

  SimulatorKind simulator = SimulatorKind::navier_stokes;
  NavierStokesConfig ns{};
  HeatConfig heat{};
  double heat_velocity_u = 0.0;
  double heat_velocity_v = 0.0;

  int n_trajectories = 120;
  int horizon = 20;
  std::optional<std::uint64_t> data_seed;
  std::array<double, 3> split{5.0 / 12.0, 5.0 / 12.0, 1.0 / 6.0};

  SurrogateTrainConfig surrogate{};
  std::optional<std::uint64_t> surrogate_seed;

  PolicyTrainConfig policy{};
  std::optional<std::uint64_t> policy_seed;
  /// Policies to train: clean, boundary, unimodal-<sigma2>, bimodal-<sigma2>.
  std::vector<std::string> policy_scenarios{"clean", "unimodal-1", "bimodal-1", "boundary"};

  /// Scenarios to evaluate: clean, unimodal, bimodal, boundary.
  std::vector<std::string> eval_scenarios{"clean", "unimodal", "bimodal", "boundary"};
  std::vector<double> eval_sigma2{0.25, 0.5, 0.75, 1.0};
  PolicyMode eval_policy_mode = PolicyMode::sample;
  std::optional<std::uint64_t> eval_seed;
  std::vector<NoiseWindow> unimodal_windows{{12, 16}};
  std::vector<NoiseWindow> bimodal_windows{{2, 4}, {15, 16}};
  std::uint64_t noise_seed = 0;

  BoundaryOverride boundary = default_boundary_override();

  std::uint64_t data_seed_value() const;
  std::uint64_t surrogate_seed_value() const;
  std::uint64_t policy_seed_value() const;
  std::uint64_t eval_seed_value() const;

  std::filesystem::path data_dir() const { return out / "data"; }
  std::filesystem::path model_dir() const { return out / "models"; }
  std::filesystem::path eval_dir() const { return out / "eval"; }

  void validate() const;
};

/// Applies one `key = value` assignment; unknown keys and bad values throw ConfigError.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);
/// Every key with its current value, one per line, in a stable order.
std::string config_to_text(const RunConfig& cfg);
std::vector<std::string> config_keys();

/// Accepts decimals and fractions such as "5/12".
double parse_real(const std::string& text);

std::unique_ptr<Simulator> make_simulator(const RunConfig& cfg,
                                          const std::vector<BoundaryOverride>& overrides = {});
std::string simulator_kind_name(SimulatorKind k);

}  // namespace hyper

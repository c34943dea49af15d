#pragma once

// Pipeline commands behind the `hyper` executable. Each returns an exit status:
// 0 success, 2 usage or configuration error, 1 runtime failure.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hyper/config.hpp"

namespace hyper {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

int cmd_gen_data(const RunConfig& cfg);
int cmd_train_surrogate(const RunConfig& cfg);
int cmd_train_policy(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);

struct SnapshotArgs {
  std::filesystem::path trajectory;
  std::optional<std::filesystem::path> compare;  ///< writes absolute-error maps against this file
  std::vector<int> steps;
  std::vector<FieldSelector> fields{FieldSelector::concentration};
  std::filesystem::path out_dir = "snapshots";
};
int cmd_snapshot(const SnapshotArgs& args);

/// Runs a command body, mapping exceptions to exit codes and printing the message.
int run_guarded(const std::string& verb, const std::function<int()>& body);

/// Sets the global log level from HYPER_LOG (error, info, debug).
void configure_logging();

/// Binary greyscale image (P5) of a field, row 0 of the grid at the bottom.
/// Values map linearly from [min(0, lo), max(0, hi)] to [0, 255]; an all-zero field is black.
std::vector<std::uint8_t> field_to_pgm(const ScalarField& field);

/// Name used for a trained policy file: clean, boundary, unimodal-<s2>, bimodal-<s2>.
std::string policy_scenario_name(const std::string& kind, double sigma2);

}  // namespace hyper

#pragma once

// Trajectory files, dataset generation and the surrogate / RL / test split.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hyper/grid.hpp"
#include "hyper/sim.hpp"

namespace hyper {

inline constexpr std::uint16_t kTrajectoryVersion = 1;

/// "HYTJ", u16 version, u32 width, u32 height, u32 state count, f64 dt,
/// u8 field count (4: c, u, v, p), f32 payloads, u32 CRC32 of everything after the magic.
std::vector<std::uint8_t> encode_trajectory(const Trajectory& traj, double dt);
Trajectory decode_trajectory(std::span<const std::uint8_t> bytes, double* dt = nullptr);
void save_trajectory(const Trajectory& traj, double dt, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path, double* dt = nullptr);

enum class Split { surrogate, rl, test };
std::string to_string(Split s);
Split parse_split(const std::string& name);

struct DatasetManifest {
  std::string dataset_id;
  std::string simulator_kind;
  std::string simulator_config;
  std::uint64_t config_hash = 0;
  int n_trajectories = 0;
  int horizon = 0;
  int width = 0;
  int height = 0;
  double dt = 0.0;
  std::uint64_t master_seed = 0;
  std::vector<std::string> files;  ///< relative to the dataset directory, indexed by id
  std::vector<std::uint64_t> seeds;
  /// Split per trajectory id; empty until split_dataset runs.
  std::vector<Split> splits;
  std::array<double, 3> fractions{0.0, 0.0, 0.0};
  std::uint64_t split_seed = 0;

  std::vector<std::uint64_t> ids(Split s) const;
  void validate() const;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

using InitialConditionSampler = std::function<ScalarField(int width, int height, std::mt19937_64& rng)>;

std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t traj_id);

/// Simulates n trajectories of `horizon` steps into `dir`; existing valid files are kept.
/// The manifest (dir/manifest.json) is written last.
DatasetManifest generate_dataset(const Simulator& sim, const std::string& simulator_kind, int n, int horizon,
                                 std::uint64_t master_seed, const std::filesystem::path& dir,
                                 const InitialConditionSampler& sampler = sample_plumes, int jobs = 1);

/// Largest-remainder sizes for (surrogate, rl, test), assigned over a seeded shuffle of ids.
DatasetManifest split_dataset(DatasetManifest manifest, std::array<double, 3> fractions, std::uint64_t seed);
std::array<int, 3> split_sizes(int n, std::array<double, 3> fractions);

/// Loads every trajectory of one split, in id order.
std::vector<Trajectory> load_split(const std::filesystem::path& dir, const DatasetManifest& m, Split s);

/// Truth trajectory as it would be stored: every state rounded to f32.
Trajectory stored_trajectory(Trajectory traj);

}  // namespace hyper

#pragma once

// Residual convolutional surrogate predicting the next concentration field.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hyper/grid.hpp"
#include "hyper/nn.hpp"

namespace hyper {

/// Anything that predicts the next state from the current one. Fields the
/// model does not predict are returned unchanged; step bookkeeping is the caller's.
class Surrogate {
 public:
  virtual ~Surrogate() = default;
  virtual SimState predict(const SimState& state) const = 0;
};

/// Fields the network reads and predicts: concentration alone (1 channel) or
/// concentration plus both velocity components (3 channels, order c, u, v).
enum class SurrogateFields { concentration = 1, concentration_velocity = 3 };
SurrogateFields parse_surrogate_fields(const std::string& name);
std::string to_string(SurrogateFields f);

struct SurrogateParams {
  int width = 0;
  int height = 0;
  int hidden = 16;
  int channels = 1;
  std::uint64_t seed = 0;
  std::vector<double> values;

  /// Uniform fan-in initialisation of weights, zero biases.
  static SurrogateParams initialize(int width, int height, std::uint64_t seed, int hidden = 16, int channels = 1);
  static SurrogateParams zeros(int width, int height, int hidden = 16, int channels = 1);
  static std::size_t parameter_count(int hidden = 16, int channels = 1);

  std::string architecture() const;
  std::uint64_t architecture_hash() const;
  void validate() const;
};

/// Network output for a stacked CHW input of `channels` fields.
std::vector<double> surrogate_apply(const SurrogateParams& params, std::span<const double> input);
/// Predicted concentration at t+1.
ScalarField surrogate_forward(const SurrogateParams& params, const SimState& state);
/// Single-channel networks only.
ScalarField surrogate_forward(const SurrogateParams& params, const ScalarField& concentration);
/// `state` with every predicted field replaced.
SimState surrogate_predict_state(const SurrogateParams& params, const SimState& state);

/// Stacked network input (or target) of a state.
std::vector<double> stack_fields(const SimState& state, int channels);

struct SurrogateSample {
  std::vector<double> input;
  std::vector<double> target;

  static SurrogateSample from_fields(const ScalarField& input, const ScalarField& target);
  static SurrogateSample from_states(const SimState& current, const SimState& next, int channels);
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grads;
};

/// Mean one-step MSE over the batch and its exact gradient.
LossGrad surrogate_loss_grad(const SurrogateParams& params, std::span<const SurrogateSample> batch);
/// Loss only; cheaper than loss_grad.
double surrogate_loss(const SurrogateParams& params, std::span<const SurrogateSample> batch);

struct SurrogateTrainConfig {
  nn::OptimizerConfig optimizer{nn::OptimizerKind::adam, 3e-3};
  int epochs = 30;
  int batch_size = 16;
  int hidden = 16;
  SurrogateFields fields = SurrogateFields::concentration_velocity;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SurrogateTrainResult {
  SurrogateParams params;
  double initial_loss = 0.0;
  /// Mean training loss of each epoch, measured during the epoch.
  std::vector<double> loss_curve;
  /// Loss of the final parameters over the whole training set.
  double final_loss = 0.0;
};

/// All adjacent (state_t, state_{t+1}) pairs of the dataset.
std::vector<SurrogateSample> make_pairs(const std::vector<Trajectory>& dataset, int channels = 1);

SurrogateTrainResult train_surrogate(const std::vector<Trajectory>& dataset, const SurrogateTrainConfig& cfg);
/// Trains from an explicit sample list, optionally continuing from `init`.
SurrogateTrainResult train_surrogate(std::span<const SurrogateSample> samples, int width, int height,
                                     const SurrogateTrainConfig& cfg, const SurrogateParams* init = nullptr);

void save_params(const SurrogateParams& params, const std::filesystem::path& path);
SurrogateParams load_surrogate_params(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_surrogate(const SurrogateParams& params);
SurrogateParams decode_surrogate(std::span<const std::uint8_t> bytes);

class ConvSurrogate final : public Surrogate {
 public:
  explicit ConvSurrogate(SurrogateParams params);
  SimState predict(const SimState& state) const override;
  const SurrogateParams& params() const { return params_; }

 private:
  SurrogateParams params_;
};

}  // namespace hyper

#pragma once

// Minimal reverse-mode building blocks for the surrogate and policy networks.
// Parameters of a network live in one flat vector; layers address slices of it.

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hyper/kernels.hpp"

namespace hyper::nn {

double gelu(double x);
double gelu_grad(double x);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// In-place GELU over a buffer, keeping the pre-activation in `pre`.
void gelu_forward(std::span<const double> pre, std::span<double> out);
/// grad *= gelu'(pre), elementwise.
void gelu_backward(std::span<const double> pre, std::span<double> grad);

/// Named slices of a flat parameter vector, in declaration order.
class ParamLayout {
 public:
  std::size_t add(const std::string& name, std::size_t size);
  std::size_t total() const { return total_; }

  struct Slot {
    std::string name;
    std::size_t offset;
    std::size_t size;
  };
  const std::vector<Slot>& slots() const { return slots_; }

 private:
  std::vector<Slot> slots_;
  std::size_t total_ = 0;
};

/// A 3x3 replicate-padded convolution whose weights live in a flat vector.
struct ConvLayer {
  kernels::ConvShape shape;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;

  static ConvLayer declare(ParamLayout& layout, const std::string& name, kernels::ConvShape shape);
  std::span<const double> weight(std::span<const double> params) const {
    return params.subspan(weight_offset, shape.weight_count());
  }
  std::span<const double> bias(std::span<const double> params) const {
    return params.subspan(bias_offset, static_cast<std::size_t>(shape.out_channels));
  }
  void forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const;
  /// Writes this layer's slice of `grads`; grad_in may be empty.
  void backward(std::span<const double> params, std::span<const double> in, std::span<const double> grad_out,
                std::span<double> grads, std::span<double> grad_in) const;
};

/// Fully connected layer, weights stored row-major (out x in).
struct DenseLayer {
  int in = 1;
  int out = 1;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;

  static DenseLayer declare(ParamLayout& layout, const std::string& name, int in, int out);
  void forward(std::span<const double> params, std::span<const double> x, std::span<double> y) const;
  void backward(std::span<const double> params, std::span<const double> x, std::span<const double> grad_y,
                std::span<double> grads, std::span<double> grad_x) const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
void init_conv(const ConvLayer& layer, std::span<double> params, std::mt19937_64& rng);
void init_dense(const DenseLayer& layer, std::span<double> params, std::mt19937_64& rng);

/// Sinusoidal embedding [sin(t w_0), cos(t w_0), ...], w_i = 10000^(-2i/dim).
std::vector<double> sinusoidal_embedding(double t, int dim);

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Descends along `grads`.
  virtual void step(std::span<double> params, std::span<const double> grads) = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg, std::size_t parameter_count);

/// 64-bit FNV-1a, used for architecture fingerprints and seed derivation.
std::uint64_t fnv1a(std::string_view text);

/// Independent stream seed for (master, id, stream name), mixed with splitmix64.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id, std::string_view stream = {});

}  // namespace hyper::nn

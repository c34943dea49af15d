#include "hyper/nn.hpp"

#include <cmath>
#include <numbers>

#include "hyper/error.hpp"

namespace hyper::nn {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void gelu_forward(std::span<const double> pre, std::span<double> out) {
  for (std::size_t i = 0; i < pre.size(); ++i) out[i] = gelu(pre[i]);
}

void gelu_backward(std::span<const double> pre, std::span<double> grad) {
  for (std::size_t i = 0; i < pre.size(); ++i) grad[i] *= gelu_grad(pre[i]);
}

std::size_t ParamLayout::add(const std::string& name, std::size_t size) {
  const std::size_t offset = total_;
  slots_.push_back({name, offset, size});
  total_ += size;
  return offset;
}

ConvLayer ConvLayer::declare(ParamLayout& layout, const std::string& name, kernels::ConvShape shape) {
  ConvLayer layer;
  layer.shape = shape;
  layer.weight_offset = layout.add(name + ".weight", shape.weight_count());
  layer.bias_offset = layout.add(name + ".bias", static_cast<std::size_t>(shape.out_channels));
  return layer;
}

void ConvLayer::forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const {
  kernels::omp::conv_forward(shape, in, weight(params), bias(params), out);
}

void ConvLayer::backward(std::span<const double> params, std::span<const double> in,
                         std::span<const double> grad_out, std::span<double> grads,
                         std::span<double> grad_in) const {
  kernels::omp::conv_backward(shape, in, weight(params), grad_out, grads.subspan(weight_offset, shape.weight_count()),
                              grads.subspan(bias_offset, static_cast<std::size_t>(shape.out_channels)), grad_in);
}

DenseLayer DenseLayer::declare(ParamLayout& layout, const std::string& name, int in, int out) {
  DenseLayer layer;
  layer.in = in;
  layer.out = out;
  layer.weight_offset = layout.add(name + ".weight", static_cast<std::size_t>(in) * out);
  layer.bias_offset = layout.add(name + ".bias", static_cast<std::size_t>(out));
  return layer;
}

void DenseLayer::forward(std::span<const double> params, std::span<const double> x, std::span<double> y) const {
  if (x.size() != static_cast<std::size_t>(in) || y.size() != static_cast<std::size_t>(out))
    throw DimensionError("dense: buffer sizes do not match the layer");
  const double* w = params.data() + weight_offset;
  const double* b = params.data() + bias_offset;
  for (int o = 0; o < out; ++o) {
    double acc = b[o];
    for (int i = 0; i < in; ++i) acc += w[o * in + i] * x[i];
    y[o] = acc;
  }
}

void DenseLayer::backward(std::span<const double> params, std::span<const double> x, std::span<const double> grad_y,
                          std::span<double> grads, std::span<double> grad_x) const {
  const double* w = params.data() + weight_offset;
  double* gw = grads.data() + weight_offset;
  double* gb = grads.data() + bias_offset;
  for (int o = 0; o < out; ++o) {
    gb[o] = grad_y[o];
    for (int i = 0; i < in; ++i) gw[o * in + i] = grad_y[o] * x[i];
  }
  if (grad_x.empty()) return;
  for (int i = 0; i < in; ++i) {
    double acc = 0.0;
    for (int o = 0; o < out; ++o) acc += w[o * in + i] * grad_y[o];
    grad_x[i] = acc;
  }
}

void init_conv(const ConvLayer& layer, std::span<double> params, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(9.0 * layer.shape.in_channels);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::size_t i = 0; i < layer.shape.weight_count(); ++i) params[layer.weight_offset + i] = dist(rng);
  for (int i = 0; i < layer.shape.out_channels; ++i) params[layer.bias_offset + i] = 0.0;
}

void init_dense(const DenseLayer& layer, std::span<double> params, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::size_t i = 0; i < static_cast<std::size_t>(layer.in) * layer.out; ++i)
    params[layer.weight_offset + i] = dist(rng);
  for (int i = 0; i < layer.out; ++i) params[layer.bias_offset + i] = 0.0;
}

std::vector<double> sinusoidal_embedding(double t, int dim) {
  std::vector<double> e(static_cast<std::size_t>(dim));
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
    e[2 * i] = std::sin(t * freq);
    e[2 * i + 1] = std::cos(t * freq);
  }
  return e;
}

namespace {

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(std::span<double> params, std::span<const double> grads) override {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grads[i];
  }

 private:
  double lr_;
};

class Adam final : public Optimizer {
 public:
  Adam(const OptimizerConfig& cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}
  void step(std::span<double> params, std::span<const double> grads) override {
    if (params.size() != m_.size()) throw DimensionError("adam: parameter count changed");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  int t_ = 0;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg, std::size_t parameter_count) {
  if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("optimizer: learning_rate must be > 0");
  if (cfg.kind == OptimizerKind::sgd) return std::make_unique<Sgd>(cfg.learning_rate);
  return std::make_unique<Adam>(cfg, parameter_count);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id, std::string_view stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(master) ^ mix(id + 0x632be59bd9b4e019ULL) ^ (stream.empty() ? 0 : fnv1a(stream)));
}

}  // namespace hyper::nn

#include "hyper/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hyper/error.hpp"
#include "hyper/io.hpp"

namespace hyper {

namespace {

constexpr std::uint16_t kSurrogateVersion = 1;

struct Net {
  std::vector<nn::ConvLayer> layers;
  std::size_t total = 0;

  Net(int width, int height, int hidden, int io) {
    nn::ParamLayout layout;
    const int channels[5] = {io, hidden, hidden, hidden, io};
    for (int i = 0; i < 4; ++i) {
      kernels::ConvShape s{channels[i], channels[i + 1], height, width, 1};
      layers.push_back(nn::ConvLayer::declare(layout, "conv" + std::to_string(i + 1), s));
    }
    total = layout.total();
  }
};

// Activations kept for the backward pass: pre[i] is the output of conv i,
// post[i] its GELU (absent for the last layer).
struct Cache {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
  std::vector<double> output;
};

void check_grid(const SurrogateParams& p, int width, int height) {
  if (width != p.width || height != p.height)
    throw DimensionError("surrogate: input is " + std::to_string(width) + "x" + std::to_string(height) +
                         ", network expects " + std::to_string(p.width) + "x" + std::to_string(p.height));
}

void check_size(const SurrogateParams& p, std::size_t n, const char* what) {
  const std::size_t want = static_cast<std::size_t>(p.channels) * p.width * p.height;
  if (n != want)
    throw DimensionError(std::string("surrogate: ") + what + " has " + std::to_string(n) + " values, expected " +
                         std::to_string(want));
}

Net make_net(const SurrogateParams& p) { return Net(p.width, p.height, p.hidden, p.channels); }

Cache forward_cached(const Net& net, std::span<const double> params, std::span<const double> input) {
  Cache cache;
  std::span<const double> x = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    cache.pre.emplace_back(layer.shape.out_size());
    layer.forward(params, x, cache.pre.back());
    if (i + 1 < net.layers.size()) {
      cache.post.emplace_back(cache.pre.back().size());
      nn::gelu_forward(cache.pre.back(), cache.post.back());
      x = cache.post.back();
    }
  }
  cache.output = cache.pre.back();
  for (std::size_t k = 0; k < input.size(); ++k) cache.output[k] += input[k];
  return cache;
}

// Accumulates d(loss)/d(params) into grads given d(loss)/d(output).
void backward(const Net& net, std::span<const double> params, std::span<const double> input, const Cache& cache,
              std::vector<double> grad, std::span<double> grads, std::vector<double>& scratch) {
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& layer = net.layers[i];
    std::span<const double> in = i == 0 ? input : std::span<const double>(cache.post[i - 1]);
    std::vector<double> grad_in(i == 0 ? 0 : layer.shape.in_size());
    std::fill(scratch.begin(), scratch.end(), 0.0);
    layer.backward(params, in, grad, scratch, grad_in);
    for (std::size_t k = layer.weight_offset; k < layer.bias_offset + layer.shape.out_channels; ++k)
      grads[k] += scratch[k];
    if (i > 0) {
      nn::gelu_backward(cache.pre[i - 1], grad_in);
      grad = std::move(grad_in);
    }
  }
}

}  // namespace

SurrogateFields parse_surrogate_fields(const std::string& name) {
  if (name == "c") return SurrogateFields::concentration;
  if (name == "cuv") return SurrogateFields::concentration_velocity;
  throw InvalidArgument("unknown surrogate fields '" + name + "' (expected c or cuv)");
}

std::string to_string(SurrogateFields f) { return f == SurrogateFields::concentration ? "c" : "cuv"; }

std::size_t SurrogateParams::parameter_count(int hidden, int channels) {
  const std::size_t h = static_cast<std::size_t>(hidden);
  const std::size_t c = static_cast<std::size_t>(channels);
  return (9 * c * h + h) + 2 * (9 * h * h + h) + (9 * h * c + c);
}

SurrogateParams SurrogateParams::zeros(int width, int height, int hidden, int channels) {
  if (width < 1 || height < 1 || hidden < 1) throw InvalidArgument("surrogate: grid and hidden width must be >= 1");
  if (channels != 1 && channels != 3) throw InvalidArgument("surrogate: channels must be 1 or 3");
  SurrogateParams p;
  p.width = width;
  p.height = height;
  p.hidden = hidden;
  p.channels = channels;
  p.values.assign(parameter_count(hidden, channels), 0.0);
  return p;
}

SurrogateParams SurrogateParams::initialize(int width, int height, std::uint64_t seed, int hidden, int channels) {
  SurrogateParams p = zeros(width, height, hidden, channels);
  p.seed = seed;
  std::mt19937_64 rng(seed);
  Net net = make_net(p);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    nn::init_conv(net.layers[i], p.values, rng);
  }
  // Start close to the identity map: the last layer predicts a small delta.
  const auto& last = net.layers.back();
  for (std::size_t k = 0; k < last.shape.weight_count(); ++k) p.values[last.weight_offset + k] *= 0.1;
  return p;
}

std::string SurrogateParams::architecture() const {
  const std::string io = std::to_string(channels);
  const std::string h = std::to_string(hidden);
  return "residual-conv3x3 replicate gelu channels=" + io + "," + h + "," + h + "," + h + "," + io +
         " grid=" + std::to_string(width) + "x" + std::to_string(height);
}

std::uint64_t SurrogateParams::architecture_hash() const { return nn::fnv1a(architecture()); }

void SurrogateParams::validate() const {
  if (values.size() != parameter_count(hidden, channels))
    throw DimensionError("surrogate: expected " + std::to_string(parameter_count(hidden, channels)) + " parameters, got " +
                         std::to_string(values.size()));
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("surrogate: non-finite parameter");
}

std::vector<double> stack_fields(const SimState& state, int channels) {
  const auto c = state.concentration.values();
  std::vector<double> out(c.begin(), c.end());
  if (channels == 3) {
    const auto u = state.velocity.u.values();
    const auto v = state.velocity.v.values();
    out.insert(out.end(), u.begin(), u.end());
    out.insert(out.end(), v.begin(), v.end());
  } else if (channels != 1) {
    throw InvalidArgument("surrogate: channels must be 1 or 3");
  }
  return out;
}

SurrogateSample SurrogateSample::from_fields(const ScalarField& input, const ScalarField& target) {
  if (!input.same_shape(target)) throw DimensionError("surrogate sample: input and target shapes differ");
  const auto a = input.values();
  const auto b = target.values();
  return {std::vector<double>(a.begin(), a.end()), std::vector<double>(b.begin(), b.end())};
}

SurrogateSample SurrogateSample::from_states(const SimState& current, const SimState& next, int channels) {
  return {stack_fields(current, channels), stack_fields(next, channels)};
}

std::vector<double> surrogate_apply(const SurrogateParams& params, std::span<const double> input) {
  check_size(params, input.size(), "input");
  Net net = make_net(params);
  return forward_cached(net, params.values, input).output;
}

SimState surrogate_predict_state(const SurrogateParams& params, const SimState& state) {
  check_grid(params, state.concentration.width(), state.concentration.height());
  const auto out = surrogate_apply(params, stack_fields(state, params.channels));
  const std::size_t n = static_cast<std::size_t>(params.width) * params.height;
  SimState next = state;
  auto take = [&](std::size_t ch) {
    return ScalarField(params.width, params.height,
                       std::vector<double>(out.begin() + static_cast<std::ptrdiff_t>(ch * n),
                                           out.begin() + static_cast<std::ptrdiff_t>((ch + 1) * n)));
  };
  next.concentration = take(0);
  if (params.channels == 3) {
    next.velocity.u = take(1);
    next.velocity.v = take(2);
  }
  return next;
}

ScalarField surrogate_forward(const SurrogateParams& params, const SimState& state) {
  return surrogate_predict_state(params, state).concentration;
}

ScalarField surrogate_forward(const SurrogateParams& params, const ScalarField& concentration) {
  if (params.channels != 1) throw DimensionError("surrogate: this network needs velocity input as well");
  check_grid(params, concentration.width(), concentration.height());
  return ScalarField(params.width, params.height, surrogate_apply(params, concentration.values()));
}

LossGrad surrogate_loss_grad(const SurrogateParams& params, std::span<const SurrogateSample> batch) {
  if (batch.empty()) throw InvalidArgument("surrogate_loss_grad: empty batch");
  Net net = make_net(params);
  LossGrad out;
  out.grads.assign(net.total, 0.0);
  std::vector<double> scratch(net.total);
  const double n = static_cast<double>(params.channels) * params.width * params.height;
  const double scale = 1.0 / (n * static_cast<double>(batch.size()));
  for (const auto& sample : batch) {
    check_size(params, sample.input.size(), "input");
    check_size(params, sample.target.size(), "target");
    Cache cache = forward_cached(net, params.values, sample.input);
    const auto& t = sample.target;
    std::vector<double> grad(cache.output.size());
    double sq = 0.0;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      const double d = cache.output[k] - t[k];
      sq += d * d;
      grad[k] = 2.0 * d * scale;
    }
    out.loss += sq * scale;
    backward(net, params.values, sample.input, cache, std::move(grad), out.grads, scratch);
  }
  return out;
}

double surrogate_loss(const SurrogateParams& params, std::span<const SurrogateSample> batch) {
  if (batch.empty()) throw InvalidArgument("surrogate_loss: empty batch");
  Net net = make_net(params);
  double total = 0.0;
  for (const auto& sample : batch) {
    check_size(params, sample.input.size(), "input");
    check_size(params, sample.target.size(), "target");
    const auto out = forward_cached(net, params.values, sample.input).output;
    double sq = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) sq += (out[k] - sample.target[k]) * (out[k] - sample.target[k]);
    total += sq / static_cast<double>(out.size());
  }
  return total / static_cast<double>(batch.size());
}

void SurrogateTrainConfig::validate() const {
  if (!(optimizer.learning_rate > 0.0)) throw InvalidArgument("surrogate training: learning_rate must be > 0");
  if (epochs < 1) throw InvalidArgument("surrogate training: epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("surrogate training: batch_size must be >= 1");
  if (hidden < 1) throw InvalidArgument("surrogate training: hidden must be >= 1");
}

std::vector<SurrogateSample> make_pairs(const std::vector<Trajectory>& dataset, int channels) {
  std::vector<SurrogateSample> samples;
  for (const auto& traj : dataset)
    for (std::size_t t = 0; t + 1 < traj.states.size(); ++t)
      samples.push_back(SurrogateSample::from_states(traj.states[t], traj.states[t + 1], channels));
  return samples;
}

SurrogateTrainResult train_surrogate(const std::vector<Trajectory>& dataset, const SurrogateTrainConfig& cfg) {
  if (dataset.empty()) throw InvalidArgument("train_surrogate: empty dataset");
  const int w = dataset.front().states.front().concentration.width();
  const int h = dataset.front().states.front().concentration.height();
  for (const auto& traj : dataset) {
    traj.validate();
    if (traj.states.front().concentration.width() != w || traj.states.front().concentration.height() != h)
      throw DimensionError("train_surrogate: trajectories have different grids");
  }
  const auto samples = make_pairs(dataset, static_cast<int>(cfg.fields));
  return train_surrogate(samples, w, h, cfg);
}

SurrogateTrainResult train_surrogate(std::span<const SurrogateSample> samples, int width, int height,
                                     const SurrogateTrainConfig& cfg, const SurrogateParams* init) {
  cfg.validate();
  if (samples.empty()) throw InvalidArgument("train_surrogate: no training pairs");
  SurrogateTrainResult result;
  result.params =
      init ? *init : SurrogateParams::initialize(width, height, cfg.seed, cfg.hidden, static_cast<int>(cfg.fields));
  result.params.validate();
  SurrogateParams& p = result.params;
  result.initial_loss = surrogate_loss(p, samples);

  auto opt = nn::make_optimizer(cfg.optimizer, p.values.size());
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<SurrogateSample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]]);
      LossGrad lg = surrogate_loss_grad(p, batch);
      if (!std::isfinite(lg.loss))
        throw TrainingDivergence("train_surrogate: non-finite loss in epoch " + std::to_string(epoch + 1));
      epoch_loss += lg.loss * static_cast<double>(end - start);
      opt->step(p.values, lg.grads);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  for (double v : p.values)
    if (!std::isfinite(v)) throw TrainingDivergence("train_surrogate: non-finite parameters after training");
  result.final_loss = surrogate_loss(p, samples);
  return result;
}

std::vector<std::uint8_t> encode_surrogate(const SurrogateParams& params) {
  params.validate();
  io::ParamHeader header{"HYSG", kSurrogateVersion, params.architecture_hash(), static_cast<std::uint32_t>(params.width),
                         static_cast<std::uint32_t>(params.height),
                         static_cast<std::uint32_t>(params.hidden) | (static_cast<std::uint32_t>(params.channels) << 16)};
  return io::encode_params(header, params.values);
}

SurrogateParams decode_surrogate(std::span<const std::uint8_t> bytes) {
  auto d = io::decode_params(bytes, "HYSG", kSurrogateVersion, "surrogate parameters");
  SurrogateParams p;
  p.width = static_cast<int>(d.header.width);
  p.height = static_cast<int>(d.header.height);
  p.hidden = static_cast<int>(d.header.aux & 0xffffu);
  p.channels = static_cast<int>(d.header.aux >> 16);
  if (p.width < 1 || p.height < 1 || p.hidden < 1 || d.header.architecture_hash != p.architecture_hash() ||
      d.values.size() != SurrogateParams::parameter_count(p.hidden, p.channels))
    throw FormatError(FormatError::Kind::architecture, "surrogate parameters: architecture does not match");
  p.values = std::move(d.values);
  return p;
}

void save_params(const SurrogateParams& params, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_surrogate(params));
}

SurrogateParams load_surrogate_params(const std::filesystem::path& path) { return decode_surrogate(io::read_file(path)); }

ConvSurrogate::ConvSurrogate(SurrogateParams params) : params_(std::move(params)) { params_.validate(); }

SimState ConvSurrogate::predict(const SimState& state) const { return surrogate_predict_state(params_, state); }

}  // namespace hyper

#include "hyper/policy.hpp"

#include <algorithm>
#include <cmath>

#include "hyper/error.hpp"
#include "hyper/io.hpp"

namespace hyper {

namespace {

constexpr std::uint16_t kPolicyVersion = 1;
constexpr int kEncoderChannels = 8;
constexpr int kMlpWidth = 32;

struct Net {
  nn::ConvLayer conv[3];
  nn::DenseLayer fc1;
  nn::DenseLayer head;
  std::size_t total = 0;

  Net(int width, int height, int chunk) {
    nn::ParamLayout layout;
    int w = width;
    int h = height;
    int in = 1;
    for (int i = 0; i < 3; ++i) {
      kernels::ConvShape s{in, kEncoderChannels, h, w, 2};
      conv[i] = nn::ConvLayer::declare(layout, "enc" + std::to_string(i + 1), s);
      w = s.out_width();
      h = s.out_height();
      in = kEncoderChannels;
    }
    fc1 = nn::DenseLayer::declare(layout, "fc1", kEncoderChannels + kTimeEmbeddingDim, kMlpWidth);
    head = nn::DenseLayer::declare(layout, "head", kMlpWidth, chunk);
    total = layout.total();
  }
};

struct Cache {
  std::vector<double> pre[3];
  std::vector<double> post[3];
  std::vector<double> features;  // pooled encoder output + time embedding
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  std::vector<double> raw_logits;
  std::vector<double> logits;
};

void check_grid(const PolicyParams& p, const ScalarField& f) {
  if (f.width() != p.width || f.height() != p.height)
    throw DimensionError("policy: input is " + std::to_string(f.width()) + "x" + std::to_string(f.height()) +
                         ", network expects " + std::to_string(p.width) + "x" + std::to_string(p.height));
}

Cache forward_cached(const Net& net, std::span<const double> params, std::span<const double> input, int t) {
  Cache c;
  std::span<const double> x = input;
  for (int i = 0; i < 3; ++i) {
    c.pre[i].resize(net.conv[i].shape.out_size());
    net.conv[i].forward(params, x, c.pre[i]);
    c.post[i].resize(c.pre[i].size());
    nn::gelu_forward(c.pre[i], c.post[i]);
    x = c.post[i];
  }
  const auto& last = net.conv[2].shape;
  const int cells = last.out_height() * last.out_width();
  c.features.assign(kEncoderChannels + kTimeEmbeddingDim, 0.0);
  for (int ch = 0; ch < kEncoderChannels; ++ch) {
    double s = 0.0;
    for (int k = 0; k < cells; ++k) s += c.post[2][static_cast<std::size_t>(ch) * cells + k];
    c.features[ch] = s / cells;
  }
  const auto emb = nn::sinusoidal_embedding(static_cast<double>(t), kTimeEmbeddingDim);
  std::copy(emb.begin(), emb.end(), c.features.begin() + kEncoderChannels);
  c.hidden_pre.resize(kMlpWidth);
  net.fc1.forward(params, c.features, c.hidden_pre);
  c.hidden.resize(kMlpWidth);
  nn::gelu_forward(c.hidden_pre, c.hidden);
  c.raw_logits.resize(static_cast<std::size_t>(net.head.out));
  net.head.forward(params, c.hidden, c.raw_logits);
  c.logits = c.raw_logits;
  for (double& z : c.logits) z = std::clamp(z, -kMaxLogit, kMaxLogit);
  return c;
}

// Accumulates into grads the gradient of sum_h grad_logits[h] * logit_h.
void backward(const Net& net, std::span<const double> params, std::span<const double> input, const Cache& c,
              std::vector<double> grad_logits, std::span<double> grads) {
  std::vector<double> scratch(net.total, 0.0);
  auto flush = [&](std::size_t from, std::size_t to) {
    for (std::size_t k = from; k < to; ++k) grads[k] += scratch[k];
  };
  for (std::size_t h = 0; h < grad_logits.size(); ++h)
    if (std::abs(c.raw_logits[h]) > kMaxLogit) grad_logits[h] = 0.0;

  std::vector<double> g_hidden(kMlpWidth);
  net.head.backward(params, c.hidden, grad_logits, scratch, g_hidden);
  flush(net.head.weight_offset, net.head.bias_offset + net.head.out);
  nn::gelu_backward(c.hidden_pre, g_hidden);
  std::vector<double> g_features(c.features.size());
  net.fc1.backward(params, c.features, g_hidden, scratch, g_features);
  flush(net.fc1.weight_offset, net.fc1.bias_offset + net.fc1.out);

  const auto& last = net.conv[2].shape;
  const int cells = last.out_height() * last.out_width();
  std::vector<double> g(c.post[2].size());
  for (int ch = 0; ch < kEncoderChannels; ++ch)
    for (int k = 0; k < cells; ++k) g[static_cast<std::size_t>(ch) * cells + k] = g_features[ch] / cells;
  for (int i = 2; i >= 0; --i) {
    nn::gelu_backward(c.pre[i], g);
    std::span<const double> in = i == 0 ? input : std::span<const double>(c.post[i - 1]);
    std::vector<double> g_in(i == 0 ? 0 : net.conv[i].shape.in_size());
    net.conv[i].backward(params, in, g, scratch, g_in);
    flush(net.conv[i].weight_offset, net.conv[i].bias_offset + net.conv[i].shape.out_channels);
    g = std::move(g_in);
  }
}

}  // namespace

std::size_t PolicyParams::parameter_count(int chunk_size) {
  const std::size_t e = kEncoderChannels;
  const std::size_t encoder = (9 * e + e) + 2 * (9 * e * e + e);
  const std::size_t mlp = (e + kTimeEmbeddingDim) * kMlpWidth + kMlpWidth;
  const std::size_t head = static_cast<std::size_t>(kMlpWidth) * chunk_size + chunk_size;
  return encoder + mlp + head;
}

PolicyParams PolicyParams::zeros(int width, int height, int chunk_size) {
  if (width < 1 || height < 1) throw InvalidArgument("policy: grid must be at least 1x1");
  if (chunk_size < 1) throw InvalidArgument("policy: chunk_size must be >= 1");
  PolicyParams p;
  p.width = width;
  p.height = height;
  p.chunk_size = chunk_size;
  p.values.assign(parameter_count(chunk_size), 0.0);
  return p;
}

PolicyParams PolicyParams::initialize(int width, int height, int chunk_size, std::uint64_t seed, double initial_prob) {
  if (!(initial_prob > 0.0 && initial_prob < 1.0)) initial_prob = std::clamp(initial_prob, 1e-3, 1.0 - 1e-3);
  PolicyParams p = zeros(width, height, chunk_size);
  p.seed = seed;
  std::mt19937_64 rng(seed);
  Net net(width, height, chunk_size);
  for (const auto& c : net.conv) nn::init_conv(c, p.values, rng);
  nn::init_dense(net.fc1, p.values, rng);
  nn::init_dense(net.head, p.values, rng);
  const double logit = std::log(initial_prob / (1.0 - initial_prob));
  for (int h = 0; h < chunk_size; ++h) p.values[net.head.bias_offset + h] = logit;
  return p;
}

std::string PolicyParams::architecture() const {
  return "policy conv3x3s2 replicate gelu channels=1,8,8,8 gap time=" + std::to_string(kTimeEmbeddingDim) +
         " mlp=" + std::to_string(kMlpWidth) + " heads=" + std::to_string(chunk_size) + " grid=" +
         std::to_string(width) + "x" + std::to_string(height);
}

std::uint64_t PolicyParams::architecture_hash() const { return nn::fnv1a(architecture()); }

void PolicyParams::validate() const {
  if (values.size() != parameter_count(chunk_size))
    throw DimensionError("policy: expected " + std::to_string(parameter_count(chunk_size)) + " parameters, got " +
                         std::to_string(values.size()));
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("policy: non-finite parameter");
}

std::vector<double> policy_logits(const PolicyParams& params, const ScalarField& field, int t) {
  check_grid(params, field);
  Net net(params.width, params.height, params.chunk_size);
  return forward_cached(net, params.values, field.values(), t).logits;
}

std::vector<double> policy_probabilities(const PolicyParams& params, const ScalarField& field, int t) {
  auto z = policy_logits(params, field, t);
  for (double& v : z) v = nn::sigmoid(v);
  return z;
}

double policy_forward(const PolicyParams& params, const SimState& state, int t) {
  return policy_probabilities(params, state.concentration, t).front();
}

double action_log_prob(double logit, int action) {
  // log sigmoid(z) = -softplus(-z); log(1 - sigmoid(z)) = -softplus(z)
  const double z = action == 1 ? logit : -logit;
  return -(std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z))));
}

std::vector<int> ActionSequence::actions() const {
  std::vector<int> a;
  a.reserve(records.size());
  for (const auto& r : records) a.push_back(r.action);
  return a;
}

int ActionSequence::sim_calls() const {
  int k = 0;
  for (const auto& r : records) k += r.action;
  return k;
}

double ActionSequence::total_log_prob() const {
  double s = 0.0;
  for (const auto& r : records) s += r.log_prob;
  return s;
}

std::vector<ActionRecord> sample_action_chunk(const PolicyParams& params, const ScalarField& field, int t,
                                              int chunk_size, const UniformSource& uniform) {
  if (chunk_size < 1) throw InvalidArgument("sample_action_chunk: chunk_size must be >= 1");
  if (chunk_size > params.chunk_size)
    throw InvalidArgument("sample_action_chunk: chunk of " + std::to_string(chunk_size) + " exceeds the " +
                          std::to_string(params.chunk_size) + " policy heads");
  const auto logits = policy_logits(params, field, t);
  std::vector<ActionRecord> out;
  for (int h = 0; h < chunk_size; ++h) {
    ActionRecord r;
    r.t = t + h;
    r.prob = nn::sigmoid(logits[h]);
    r.action = uniform() < r.prob ? 1 : 0;
    r.log_prob = action_log_prob(logits[h], r.action);
    out.push_back(r);
  }
  return out;
}

std::vector<ActionRecord> sample_action_chunk(const PolicyParams& params, const ScalarField& field, int t,
                                              int chunk_size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return sample_action_chunk(params, field, t, chunk_size, [&] { return u(rng); });
}

double cost(std::span<const int> actions, double lambda, int horizon) {
  if (horizon < 1) throw InvalidArgument("cost: horizon must be >= 1");
  if (actions.size() != static_cast<std::size_t>(horizon))
    throw DimensionError("cost: " + std::to_string(actions.size()) + " actions for horizon " +
                         std::to_string(horizon));
  int k = 0;
  for (int a : actions) k += a;
  return std::abs(static_cast<double>(k) / horizon - lambda);
}

RewardBreakdown compute_rewards(const Trajectory& policy_traj, const Trajectory& baseline_traj,
                                const Trajectory& truth, std::span<const int> actions,
                                std::span<const int> baseline_actions, double lambda, FieldSelector selector) {
  const int horizon = truth.horizon();
  if (policy_traj.horizon() != horizon || baseline_traj.horizon() != horizon)
    throw DimensionError("compute_rewards: trajectories have different lengths");
  int k = 0;
  int kb = 0;
  for (int a : actions) k += a;
  for (int a : baseline_actions) kb += a;
  if (k != kb)
    throw InvalidArgument("compute_rewards: baseline uses " + std::to_string(kb) + " simulator calls, policy " +
                          std::to_string(k));
  // Errors are measured at storage precision, like every evaluation metric.
  auto summed = [&](const Trajectory& pred) {
    double s = 0.0;
    for (std::size_t t = 1; t < truth.states.size(); ++t)
      s += mse(round_to_storage(select_field(pred.states[t], selector)),
               round_to_storage(select_field(truth.states[t], selector)));
    return s;
  };
  RewardBreakdown r;
  r.error_term = -summed(policy_traj);
  r.baseline_term = -summed(baseline_traj);
  r.cost_term = -cost(actions, lambda, horizon);
  r.total_policy_reward = r.error_term + r.cost_term;
  r.total_baseline_reward = r.baseline_term + r.cost_term;
  return r;
}

LogProbGrad policy_log_prob_grad(const PolicyParams& params, const ActionSequence& sequence) {
  Net net(params.width, params.height, params.chunk_size);
  LogProbGrad out;
  out.grads.assign(net.total, 0.0);
  std::size_t next = 0;
  for (const auto& chunk : sequence.chunks) {
    check_grid(params, chunk.field);
    if (chunk.length < 1 || chunk.length > params.chunk_size || next + chunk.length > sequence.records.size())
      throw DimensionError("policy_log_prob_grad: chunk bookkeeping does not match the action records");
    const Cache c = forward_cached(net, params.values, chunk.field.values(), chunk.t);
    std::vector<double> g(static_cast<std::size_t>(params.chunk_size), 0.0);
    for (int h = 0; h < chunk.length; ++h) {
      const auto& r = sequence.records[next + h];
      const double p = nn::sigmoid(c.logits[h]);
      out.log_prob += action_log_prob(c.logits[h], r.action);
      g[h] = r.action - p;
    }
    backward(net, params.values, chunk.field.values(), c, std::move(g), out.grads);
    next += static_cast<std::size_t>(chunk.length);
  }
  if (next != sequence.records.size())
    throw DimensionError("policy_log_prob_grad: records not covered by chunks");
  return out;
}

namespace {

std::vector<double> reinforce_grads(const PolicyParams& params, const ActionSequence& sequence, double signal) {
  if (!std::isfinite(signal)) throw InvalidArgument("reinforce_update: non-finite advantage");
  if (sequence.records.empty()) throw InvalidArgument("reinforce_update: no action records");
  auto lg = policy_log_prob_grad(params, sequence);
  // Loss is -signal * sum log pi; signal carries no gradient.
  for (double& g : lg.grads) {
    g *= -signal;
    if (!std::isfinite(g)) throw TrainingDivergence("reinforce_update: non-finite gradient");
  }
  return lg.grads;
}

}  // namespace

PolicyParams reinforce_update(const PolicyParams& params, const ActionSequence& sequence, double signal,
                              nn::Optimizer& optimizer) {
  const auto grads = reinforce_grads(params, sequence, signal);
  PolicyParams next = params;
  if (signal == 0.0) return next;
  optimizer.step(next.values, grads);
  return next;
}

PolicyParams reinforce_update(const PolicyParams& params, const ActionSequence& sequence, double signal, double lr) {
  auto opt = nn::make_optimizer({nn::OptimizerKind::sgd, lr}, params.values.size());
  return reinforce_update(params, sequence, signal, *opt);
}

void PolicyTrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("policy training: lambda must be in [0, 1]");
  if (chunk_size < 1) throw InvalidArgument("policy training: chunk_size must be >= 1");
  if (!(optimizer.learning_rate > 0.0)) throw InvalidArgument("policy training: learning_rate must be > 0");
  if (epochs < 1) throw InvalidArgument("policy training: epochs must be >= 1");
  if (!(cost_weight >= 0.0)) throw InvalidArgument("policy training: cost_weight must be >= 0");
}

void check_disjoint_splits(std::span<const std::uint64_t> surrogate_ids, std::span<const std::uint64_t> rl_ids) {
  for (auto a : surrogate_ids)
    for (auto b : rl_ids)
      if (a == b)
        throw InvalidArgument("trajectory " + std::to_string(a) + " is in both the surrogate and RL training sets");
}

std::vector<std::uint8_t> encode_policy(const PolicyParams& params) {
  params.validate();
  io::ParamHeader header{"HYPO", kPolicyVersion, params.architecture_hash(), static_cast<std::uint32_t>(params.width),
                         static_cast<std::uint32_t>(params.height), static_cast<std::uint32_t>(params.chunk_size)};
  return io::encode_params(header, params.values);
}

PolicyParams decode_policy(std::span<const std::uint8_t> bytes) {
  auto d = io::decode_params(bytes, "HYPO", kPolicyVersion, "policy parameters");
  PolicyParams p;
  p.width = static_cast<int>(d.header.width);
  p.height = static_cast<int>(d.header.height);
  p.chunk_size = static_cast<int>(d.header.aux);
  if (p.width < 1 || p.height < 1 || p.chunk_size < 1 || d.header.architecture_hash != p.architecture_hash() ||
      d.values.size() != PolicyParams::parameter_count(p.chunk_size))
    throw FormatError(FormatError::Kind::architecture, "policy parameters: architecture does not match");
  p.values = std::move(d.values);
  return p;
}

void save_params(const PolicyParams& params, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_policy(params));
}

PolicyParams load_policy_params(const std::filesystem::path& path) { return decode_policy(io::read_file(path)); }

}  // namespace hyper

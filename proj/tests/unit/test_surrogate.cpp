#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "hyper/error.hpp"
#include "hyper/io.hpp"
#include "hyper/sim.hpp"
#include "hyper/surrogate.hpp"

using namespace hyper;

namespace {

SurrogateParams perturbed(int w, int h, std::uint64_t seed, int hidden, int channels) {
  auto p = SurrogateParams::initialize(w, h, seed, hidden, channels);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (double& v : p.values) v += u(rng);
  return p;
}

std::vector<SurrogateSample> random_samples(int n, int w, int h, int channels, std::mt19937_64& rng) {
  std::vector<SurrogateSample> out;
  for (int i = 0; i < n; ++i) {
    SimState a = SimState::from_concentration(test::random_field(w, h, rng));
    SimState b = SimState::from_concentration(test::random_field(w, h, rng));
    a.velocity = test::random_velocity(w, h, rng, 0.5);
    b.velocity = test::random_velocity(w, h, rng, 0.5);
    out.push_back(SurrogateSample::from_states(a, b, channels));
  }
  return out;
}

std::vector<Trajectory> toy_dataset(int n, int w, int horizon, std::uint64_t seed) {
  NavierStokesConfig cfg;
  cfg.width = cfg.height = w;
  NavierStokesSimulator sim(cfg);
  std::vector<Trajectory> out;
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(seed + i);
    auto t = simulate(sim, SimState::from_concentration(sample_plumes(w, w, rng)), horizon);
    for (auto& s : t.states) s = round_to_storage(s);
    out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("zero parameters give the identity map") {
  std::mt19937_64 rng(40);
  const auto c = test::random_field(10, 8, rng);
  CHECK(surrogate_forward(SurrogateParams::zeros(10, 8), c) == c);
  auto s = SimState::from_concentration(c);
  s.velocity = test::random_velocity(10, 8, rng, 1.0);
  const auto next = surrogate_predict_state(SurrogateParams::zeros(10, 8, 16, 3), s);
  CHECK(next.concentration == s.concentration);
  CHECK(next.velocity == s.velocity);
}

TEST_CASE("forward is deterministic") {
  std::mt19937_64 rng(41);
  const auto c = test::random_field(12, 12, rng);
  const auto a = SurrogateParams::initialize(12, 12, 5);
  const auto b = SurrogateParams::initialize(12, 12, 5);
  CHECK(a.values == b.values);
  CHECK(test::bit_equal(surrogate_forward(a, c), surrogate_forward(b, c)));
  CHECK(SurrogateParams::parameter_count() == a.values.size());
  CHECK(SurrogateParams::parameter_count(16, 1) == 4945);
}

TEST_CASE("loss is zero at the network's own outputs") {
  std::mt19937_64 rng(42);
  const auto p = perturbed(8, 8, 3, 4, 1);
  auto batch = random_samples(3, 8, 8, 1, rng);
  for (auto& s : batch) s.target = surrogate_apply(p, s.input);
  const auto lg = surrogate_loss_grad(p, batch);
  CHECK(lg.loss == 0.0);
  for (double g : lg.grads) CHECK(g == 0.0);
}

TEST_CASE("duplicating the batch leaves loss and gradient unchanged") {
  std::mt19937_64 rng(43);
  const auto p = perturbed(8, 8, 4, 4, 3);
  auto batch = random_samples(3, 8, 8, 3, rng);
  const auto once = surrogate_loss_grad(p, batch);
  auto twice = batch;
  twice.insert(twice.end(), batch.begin(), batch.end());
  const auto doubled = surrogate_loss_grad(p, twice);
  CHECK(test::rel_err(once.loss, doubled.loss, 1e-300) <= 1e-12);
  for (std::size_t i = 0; i < once.grads.size(); ++i)
    CHECK(std::abs(once.grads[i] - doubled.grads[i]) <= 1e-12 * std::max(1.0, std::abs(once.grads[i])));
}

TEST_CASE("surrogate gradient matches finite differences") {
  for (int channels : {1, 3}) {
    CAPTURE(channels);
    std::mt19937_64 rng(44 + channels);
    auto p = perturbed(8, 7, 6, 4, channels);
    const auto batch = random_samples(2, 8, 7, channels, rng);
    const auto lg = surrogate_loss_grad(p, batch);
    std::uniform_int_distribution<std::size_t> pick(0, p.values.size() - 1);
    const double h = 1e-5;
    for (int probe = 0; probe < 100; ++probe) {
      const std::size_t i = pick(rng);
      const double keep = p.values[i];
      p.values[i] = keep + h;
      const double up = surrogate_loss(p, batch);
      p.values[i] = keep - h;
      const double down = surrogate_loss(p, batch);
      p.values[i] = keep;
      CHECK(test::rel_err((up - down) / (2 * h), lg.grads[i]) <= 1e-4);
    }
  }
}

TEST_CASE("convolutional core is translation consistent") {
  std::mt19937_64 rng(45);
  const int w = 20, h = 18;
  const auto p = perturbed(w, h, 7, 6, 1);
  const auto c = test::random_field(w, h, rng);
  ScalarField shifted(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) shifted.at(x, y) = c.at(std::max(x - 1, 0), y);
  const auto a = surrogate_forward(p, c);
  const auto b = surrogate_forward(p, shifted);
  // three 3x3 layers see three cells; padding influence stays within that margin
  for (int y = 4; y < h - 4; ++y)
    for (int x = 5; x < w - 4; ++x) CHECK(std::abs(b.at(x, y) - a.at(x - 1, y)) <= 1e-10);
}

TEST_CASE("one epoch on one pair is one optimizer step") {
  std::mt19937_64 rng(46);
  const auto init = perturbed(8, 8, 8, 4, 1);
  const auto samples = random_samples(1, 8, 8, 1, rng);
  SurrogateTrainConfig cfg;
  cfg.epochs = 1;
  cfg.hidden = 4;
  const auto r = train_surrogate(samples, 8, 8, cfg, &init);

  auto expected = init.values;
  auto opt = nn::make_optimizer(cfg.optimizer, expected.size());
  opt->step(expected, surrogate_loss_grad(init, samples).grads);
  CHECK(r.params.values == expected);

  cfg.epochs = 0;
  CHECK_THROWS_AS(train_surrogate(samples, 8, 8, cfg, &init), InvalidArgument);
}

TEST_CASE("identity toy task") {
  std::mt19937_64 rng(47);
  std::vector<SurrogateSample> samples;
  for (int i = 0; i < 8; ++i) {
    const auto f = test::random_field(16, 16, rng, 0.0, 1.0);
    samples.push_back(SurrogateSample::from_fields(f, f));
  }
  SurrogateTrainConfig cfg;
  cfg.fields = SurrogateFields::concentration;
  cfg.optimizer.learning_rate = 1e-3;
  cfg.epochs = 200;
  cfg.hidden = 4;
  cfg.seed = 3;
  const auto r = train_surrogate(samples, 16, 16, cfg);
  CHECK(r.final_loss < 1e-3);
  CHECK(r.final_loss < r.initial_loss);
}

TEST_CASE("training improves held-out one-step error and is deterministic") {
  const auto data = toy_dataset(20, 16, 4, 100);
  const auto held = toy_dataset(1, 16, 4, 900).front();
  SurrogateTrainConfig cfg;
  cfg.epochs = 8;
  cfg.hidden = 8;
  cfg.seed = 11;
  cfg.optimizer.learning_rate = 3e-3;
  for (auto fields : {SurrogateFields::concentration, SurrogateFields::concentration_velocity}) {
    cfg.fields = fields;
    const auto r = train_surrogate(data, cfg);
    CHECK(r.final_loss < r.initial_loss);
    const auto untrained = SurrogateParams::initialize(16, 16, cfg.seed, cfg.hidden, static_cast<int>(fields));
    double before = 0.0, after = 0.0;
    for (int t = 0; t < held.horizon(); ++t) {
      before += mse(surrogate_forward(untrained, held.states[t]), held.states[t + 1].concentration);
      after += mse(surrogate_forward(r.params, held.states[t]), held.states[t + 1].concentration);
    }
    CHECK(after < before);
    CHECK(train_surrogate(data, cfg).params.values == r.params.values);
  }
}

TEST_CASE("surrogate persistence") {
  const auto dir = std::filesystem::temp_directory_path() / "hyper_sg_test";
  std::filesystem::create_directories(dir);
  const auto p = perturbed(12, 10, 9, 6, 3);
  save_params(p, dir / "s.hysg");
  const auto q = load_surrogate_params(dir / "s.hysg");
  REQUIRE(q.values.size() == p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i) CHECK(q.values[i] == static_cast<double>(static_cast<float>(p.values[i])));
  CHECK(encode_surrogate(q) == encode_surrogate(p));
  CHECK(encode_surrogate(decode_surrogate(encode_surrogate(q))) == encode_surrogate(q));
  CHECK(q.channels == 3);
  CHECK(q.hidden == 6);

  auto bytes = encode_surrogate(p);
  auto truncated = std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 9);
  try {
    decode_surrogate(truncated);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::truncated);
  }
  auto versioned = bytes;
  versioned[4] = 7;
  try {
    decode_surrogate(versioned);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::version);
    CHECK(std::string(e.what()).find('7') != std::string::npos);
    CHECK(std::string(e.what()).find('1') != std::string::npos);
  }
  auto flipped = bytes;
  flipped[40] ^= 0x10;
  try {
    decode_surrogate(flipped);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::checksum);
  }
  std::filesystem::remove_all(dir);
}

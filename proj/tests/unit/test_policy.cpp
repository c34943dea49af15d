#include <doctest.h>

#include <filesystem>

#include "../common/stubs.hpp"
#include "helpers.hpp"
#include "hyper/error.hpp"
#include "hyper/policy.hpp"

using namespace hyper;

namespace {

ActionSequence one_chunk(const PolicyParams& p, const ScalarField& field, int t, std::mt19937_64& rng) {
  ActionSequence seq;
  seq.records = sample_action_chunk(p, field, t, p.chunk_size, rng);
  seq.chunks.push_back({t, field, p.chunk_size});
  return seq;
}

PolicyParams perturbed_policy(int w, int h, int chunk, std::uint64_t seed) {
  auto p = PolicyParams::initialize(w, h, chunk, seed, 0.4);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (double& v : p.values) v += u(rng);
  return p;
}

Trajectory flat_traj(const std::vector<double>& values) {
  Trajectory t;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto s = SimState::from_concentration(ScalarField(1, 1, values[i]));
    s.step_index = static_cast<int>(i);
    t.states.push_back(s);
  }
  return t;
}

}  // namespace

TEST_CASE("policy forward") {
  std::mt19937_64 rng(50);
  const auto field = test::random_field(16, 16, rng, 0.0, 1.0);
  CHECK(policy_forward(PolicyParams::zeros(16, 16, 4), SimState::from_concentration(field), 3) == 0.5);
  for (double p : policy_probabilities(PolicyParams::zeros(16, 16, 4), field, 7)) CHECK(p == 0.5);

  const auto p = PolicyParams::initialize(16, 16, 4, 9, 0.3);
  CHECK(policy_probabilities(p, field, 5) == policy_probabilities(p, field, 5));
  CHECK(PolicyParams::parameter_count(4) == p.values.size());

  // large weights: probabilities stay strictly inside (0, 1)
  auto big = p;
  for (double& v : big.values) v *= 50.0;
  for (int i = 0; i < 1000; ++i) {
    const auto f = test::random_field(16, 16, rng, -5.0, 5.0);
    for (double q : policy_probabilities(big, f, i % 20)) {
      CHECK(q > 0.0);
      CHECK(q < 1.0);
    }
  }
}

TEST_CASE("action sampling") {
  std::mt19937_64 rng(51);
  const auto field = test::random_field(8, 8, rng);
  const auto p = PolicyParams::initialize(8, 8, 4, 2, 0.2);
  const auto at_zero = sample_action_chunk(p, field, 0, 4, [] { return 0.0; });
  for (const auto& r : at_zero) CHECK(r.action == 1);
  const auto at_one = sample_action_chunk(p, field, 0, 4, [] { return 0.999999999; });
  for (const auto& r : at_one) CHECK(r.action == 0);

  const auto single = PolicyParams::initialize(8, 8, 1, 2, 0.2);
  const auto one = sample_action_chunk(single, field, 3, 1, rng);
  REQUIRE(one.size() == 1);
  CHECK(one[0].t == 3);
  CHECK(one[0].prob == doctest::Approx(policy_forward(single, SimState::from_concentration(field), 3)).epsilon(1e-15));

  // Monte Carlo frequency at fixed p
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double target = 0.3;
  auto source = [&] { return u(rng); };
  int ones = 0;
  const int n = 100000;
  ActionRecord probe;
  for (int i = 0; i < n; ++i) {
    probe.action = source() < target ? 1 : 0;
    ones += probe.action;
  }
  CHECK(std::abs(static_cast<double>(ones) / n - target) <= 0.01);

  const auto fixed = PolicyParams::initialize(4, 4, 1, 3, target);
  const auto f0 = ScalarField(4, 4, 0.0);
  const double pf = policy_probabilities(fixed, f0, 0)[0];
  ones = 0;
  for (int i = 0; i < n; ++i) ones += sample_action_chunk(fixed, f0, 0, 1, rng)[0].action;
  CHECK(std::abs(static_cast<double>(ones) / n - pf) <= 0.01);
}

TEST_CASE("cost") {
  std::vector<int> a(20, 0);
  for (int i = 0; i < 6; ++i) a[i] = 1;
  CHECK(cost(a, 0.3, 20) == doctest::Approx(0.0).epsilon(1e-15));
  std::vector<int> ones(20, 1);
  CHECK(cost(ones, 0.0, 20) == 1.0);
  for (int i = 6; i < 10; ++i) a[i] = 1;
  CHECK(cost(a, 0.3, 20) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_THROWS_AS(cost(a, 0.3, 19), DimensionError);
}

TEST_CASE("cost property and cancellation") {
  std::mt19937_64 rng(52);
  std::uniform_int_distribution<int> horizon(1, 64);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const int T = horizon(rng);
    const double lambda = unit(rng);
    std::vector<int> acts(T);
    int k = 0;
    for (int& x : acts) k += (x = unit(rng) < 0.5 ? 1 : 0);
    CHECK(cost(acts, lambda, T) == std::abs(static_cast<double>(k) / T - lambda));

    std::vector<int> base(T, 0);
    std::mt19937_64 r2(i);
    base = random_policy_actions(T, k, r2);
    std::vector<double> pv(T + 1), bv(T + 1), tv(T + 1, 0.0);
    for (int t = 0; t <= T; ++t) {
      pv[t] = t == 0 ? 0.0 : unit(rng);
      bv[t] = t == 0 ? 0.0 : unit(rng);
    }
    const auto rw = compute_rewards(flat_traj(pv), flat_traj(bv), flat_traj(tv), acts, base, lambda);
    CHECK(std::abs(rw.advantage() - (rw.error_term - rw.baseline_term)) <= 1e-12);
    CHECK(rw.cost_term == -cost(acts, lambda, T));
  }
}

TEST_CASE("rewards on hand-set errors") {
  const auto truth = flat_traj({0.0, 0.0, 0.0, 0.0});
  CHECK(compute_rewards(truth, truth, truth, std::vector<int>{1, 0, 0}, std::vector<int>{0, 0, 1}, 1.0 / 3.0)
            .total_policy_reward == doctest::Approx(0.0).epsilon(1e-15));

  const auto pol = flat_traj({0.0, std::sqrt(0.1), std::sqrt(0.2), std::sqrt(0.3)});
  const auto base = flat_traj({0.0, std::sqrt(0.2), std::sqrt(0.2), std::sqrt(0.2)});
  const std::vector<int> a{1, 0, 0}, b{0, 1, 0};
  const auto r = compute_rewards(pol, base, truth, a, b, 1.0 / 3.0);
  CHECK(r.error_term == doctest::Approx(-0.6).epsilon(1e-6));
  CHECK(r.baseline_term == doctest::Approx(-0.6).epsilon(1e-6));
  CHECK(std::abs(r.advantage()) < 1e-6);
  CHECK(std::abs(r.cost_term) < 1e-15);

  const auto better = flat_traj({0.0, std::sqrt(0.1), std::sqrt(0.2), std::sqrt(0.1)});
  CHECK(compute_rewards(better, base, truth, a, b, 1.0 / 3.0).advantage() == doctest::Approx(0.2).epsilon(1e-6));

  const auto same = compute_rewards(base, base, truth, a, b, 1.0 / 3.0);
  CHECK(same.advantage() == 0.0);
  CHECK_THROWS(compute_rewards(pol, base, truth, a, std::vector<int>{1, 1, 0}, 1.0 / 3.0));
}

TEST_CASE("log-prob consistency") {
  std::mt19937_64 rng(53);
  const auto p = perturbed_policy(8, 8, 4, 4);
  ActionSequence seq;
  for (int t = 0; t < 20; t += 4) {
    const auto f = test::random_field(8, 8, rng);
    const auto recs = sample_action_chunk(p, f, t, 4, rng);
    seq.records.insert(seq.records.end(), recs.begin(), recs.end());
    seq.chunks.push_back({t, f, 4});
  }
  double prod = 1.0;
  for (const auto& r : seq.records) prod *= r.action ? r.prob : 1.0 - r.prob;
  CHECK(std::abs(std::exp(seq.total_log_prob()) - prod) <= 1e-10);
  CHECK(policy_log_prob_grad(p, seq).log_prob == doctest::Approx(seq.total_log_prob()).epsilon(1e-12));
  CHECK(action_log_prob(0.0, 1) == doctest::Approx(std::log(0.5)));
  CHECK(std::isfinite(action_log_prob(-800.0, 1)));
}

TEST_CASE("policy gradient matches finite differences") {
  std::mt19937_64 rng(54);
  auto p = perturbed_policy(16, 16, 4, 5);
  ActionSequence seq;
  for (int t = 0; t < 12; t += 4) {
    const auto f = test::random_field(16, 16, rng, 0.0, 1.0);
    const auto recs = sample_action_chunk(p, f, t, 4, rng);
    seq.records.insert(seq.records.end(), recs.begin(), recs.end());
    seq.chunks.push_back({t, f, t == 8 ? 3 : 4});
  }
  seq.records.pop_back();
  auto terms = [&] {
    std::vector<double> out;
    std::size_t next = 0;
    for (const auto& c : seq.chunks) {
      const auto logits = policy_logits(p, c.field, c.t);
      for (int h = 0; h < c.length; ++h) out.push_back(action_log_prob(logits[h], seq.records[next++].action));
    }
    return out;
  };
  const auto lg = policy_log_prob_grad(p, seq);
  double total = 0.0;
  for (double v : terms()) total += v;
  CHECK(lg.log_prob == doctest::Approx(total).epsilon(1e-12));
  std::uniform_int_distribution<std::size_t> pick(0, p.values.size() - 1);
  const double h = 1e-5;
  for (int probe = 0; probe < 150; ++probe) {
    const std::size_t i = pick(rng);
    const double keep = p.values[i];
    p.values[i] = keep + h;
    const auto up = terms();
    p.values[i] = keep - h;
    const auto down = terms();
    p.values[i] = keep;
    double diff = 0.0;
    for (std::size_t k = 0; k < up.size(); ++k) diff += up[k] - down[k];
    CHECK(test::rel_err(diff / (2 * h), lg.grads[i]) <= 1e-4);
  }
}

TEST_CASE("reinforce direction") {
  std::mt19937_64 rng(55);
  const auto field = test::random_field(8, 8, rng);
  const auto p = PolicyParams::initialize(8, 8, 1, 6, 0.4);
  const double before = policy_logits(p, field, 2)[0];
  for (int action : {0, 1}) {
    for (double adv : {1.0, -1.0, 0.0}) {
      ActionSequence seq;
      ActionRecord r;
      r.t = 2;
      r.action = action;
      r.prob = nn::sigmoid(before);
      r.log_prob = action_log_prob(before, action);
      seq.records.push_back(r);
      seq.chunks.push_back({2, field, 1});
      const auto q = reinforce_update(p, seq, adv, 1e-3);
      const double after = policy_logits(q, field, 2)[0];
      const double expected_sign = adv * (action - r.prob);
      if (expected_sign > 0) CHECK(after > before);
      else if (expected_sign < 0) CHECK(after < before);
      else CHECK(q.values == p.values);
    }
  }
}

TEST_CASE("update uses the advantage value only") {
  std::mt19937_64 rng(56);
  const auto p = perturbed_policy(8, 8, 4, 7);
  const auto seq = one_chunk(p, test::random_field(8, 8, rng), 0, rng);
  const double a = 0.1 + 0.2;
  const double b = 0.3;
  // same value computed two ways
  CHECK(reinforce_update(p, seq, a, 1e-2).values == reinforce_update(p, seq, a, 1e-2).values);
  if (a == b) CHECK(reinforce_update(p, seq, b, 1e-2).values == reinforce_update(p, seq, a, 1e-2).values);
  auto opt = nn::make_optimizer({nn::OptimizerKind::adam, 1e-3}, p.values.size());
  CHECK(reinforce_update(p, seq, 0.0, *opt).values == p.values);
}

TEST_CASE("policy persistence") {
  const auto dir = std::filesystem::temp_directory_path() / "hyper_po_test";
  std::filesystem::create_directories(dir);
  const auto p = perturbed_policy(16, 16, 4, 8);
  save_params(p, dir / "p.hypo");
  const auto q = load_policy_params(dir / "p.hypo");
  CHECK(encode_policy(q) == encode_policy(p));
  CHECK(q.chunk_size == 4);
  auto bytes = encode_policy(p);
  bytes[0] = 'X';
  try {
    decode_policy(bytes);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::bad_magic);
  }
  // a surrogate file is not a policy
  try {
    decode_policy(encode_surrogate(SurrogateParams::zeros(16, 16)));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::bad_magic);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("disjoint splits are enforced") {
  const std::vector<std::uint64_t> a{1, 2, 3}, b{4, 5}, c{3, 9};
  CHECK_NOTHROW(check_disjoint_splits(a, b));
  CHECK_THROWS_AS(check_disjoint_splits(a, c), InvalidArgument);
  PolicyTrainConfig cfg;
  cfg.lambda = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("exact surrogate: training drives the call fraction to the budget") {
  const int T = 20;
  const auto data = test::scripted_dataset(40, 8, 8, T, 60);
  test::ScriptedSimulator sim(8, 8);
  test::BadStepSurrogate exact(-1, 0.0);
  PolicyTrainConfig cfg;
  cfg.lambda = 0.3;
  cfg.initial_prob = 0.7;
  cfg.epochs = 20;
  cfg.seed = 4;
  cfg.optimizer.learning_rate = 1e-2;
  const auto r = train_policy(data, exact, sim, cfg);
  CHECK(r.sim_fraction_curve.front() > 0.5);
  double tail = 0.0;
  for (int e = cfg.epochs - 5; e < cfg.epochs; ++e) tail += r.sim_fraction_curve[e] / 5.0;
  CHECK(std::abs(tail - cfg.lambda) <= 0.05);
  CHECK(train_policy(data, exact, sim, cfg).params.values == r.params.values);
}

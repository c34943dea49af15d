#include <doctest.h>

#include "helpers.hpp"
#include "hyper/error.hpp"

using namespace hyper;

TEST_CASE("mse on small grids") {
  std::mt19937_64 rng(1);
  const auto a = test::random_field(5, 4, rng);
  CHECK(mse(a, a) == 0.0);
  CHECK(mse(ScalarField(3, 7, 1.0), ScalarField(3, 7, 0.0)) == 1.0);
  CHECK(mse(ScalarField(1, 2, std::vector<double>{0.0, 2.0}), ScalarField(1, 2, 0.0)) == 2.0);
  CHECK_THROWS_AS(mse(ScalarField(2, 2), ScalarField(2, 3)), DimensionError);
}

TEST_CASE("mse is symmetric") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto a = test::random_field(6, 5, rng);
    const auto b = test::random_field(6, 5, rng);
    CHECK(mse(a, b) == mse(b, a));
  }
}

TEST_CASE("bilinear sampling") {
  std::mt19937_64 rng(3);
  const auto f = test::random_field(7, 5, rng);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) CHECK(bilinear_sample(f, x, y) == f.at(x, y));
  CHECK(bilinear_sample(ScalarField(4, 4, 2.5), 1.3, 2.7) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(bilinear_sample(ScalarField(2, 1, std::vector<double>{0.0, 1.0}), 0.5, 0.0) == 0.5);

  // affine field: interpolation is exact away from clamping
  ScalarField g(8, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) g.at(x, y) = 0.3 + 1.7 * x - 0.9 * y;
  std::uniform_real_distribution<double> ux(0.0, 7.0), uy(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double x = ux(rng), y = uy(rng);
    CHECK(std::abs(bilinear_sample(g, x, y) - (0.3 + 1.7 * x - 0.9 * y)) < 1e-10);
  }
}

namespace {
Trajectory constant_traj(int horizon, double value) {
  Trajectory t;
  for (int i = 0; i <= horizon; ++i) {
    auto s = SimState::from_concentration(ScalarField(3, 3, value), i, 0.0);
    s.step_index = i;
    t.states.push_back(s);
  }
  return t;
}
}  // namespace

TEST_CASE("cumulative mse") {
  const auto truth = constant_traj(20, 0.0);
  CHECK(cumulative_mse(truth, truth) == 0.0);

  auto pred = truth;
  for (int i = 1; i <= 20; ++i) pred.states[i].concentration = ScalarField(3, 3, std::sqrt(0.1));
  CHECK(cumulative_mse(pred, truth) == doctest::Approx(2.0).epsilon(1e-12));

  // 3 steps with squared errors 1, 4, 9 in one of four cells
  auto t3 = constant_traj(3, 0.0);
  for (auto& s : t3.states) s.concentration = ScalarField(2, 2, 0.0);
  auto p3 = t3;
  p3.states[1].concentration.at(0, 0) = 1.0;
  p3.states[2].concentration.at(1, 0) = 2.0;
  p3.states[3].concentration.at(1, 1) = -3.0;
  const auto steps = per_step_mse(p3, t3);
  REQUIRE(steps.size() == 3);
  CHECK(steps[0] == 0.25);
  CHECK(steps[1] == 1.0);
  CHECK(steps[2] == 2.25);
  CHECK(cumulative_mse(p3, t3) == 3.5);
}

TEST_CASE("cumulative mse equals the sum of step errors") {
  std::mt19937_64 rng(4);
  Trajectory a, b;
  for (int i = 0; i <= 12; ++i) {
    auto sa = SimState::from_concentration(test::random_field(9, 9, rng), i);
    auto sb = SimState::from_concentration(test::random_field(9, 9, rng), i);
    sa.step_index = sb.step_index = i;
    a.states.push_back(sa);
    b.states.push_back(sb);
  }
  double sum = 0.0;
  for (double e : per_step_mse(a, b)) sum += e;
  CHECK(test::rel_err(cumulative_mse(a, b), sum, 1e-300) <= 1e-12);
}

TEST_CASE("trajectory validation") {
  Trajectory t = constant_traj(2, 0.0);
  CHECK_NOTHROW(t.validate());
  t.states[2].step_index = 5;
  CHECK_THROWS_AS(t.validate(), DimensionError);
  CHECK_THROWS_AS(constant_traj(0, 0.0).validate(), DimensionError);
}

TEST_CASE("storage rounding is idempotent") {
  std::mt19937_64 rng(5);
  const auto f = round_to_storage(test::random_field(4, 4, rng));
  CHECK(round_to_storage(f) == f);
  for (double v : f.values()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
}

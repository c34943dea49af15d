#include <doctest.h>

#include "helpers.hpp"
#include "hyper/error.hpp"
#include "hyper/kernels.hpp"
#include "hyper/sim.hpp"

using namespace hyper;

TEST_CASE("advection") {
  std::mt19937_64 rng(10);
  const auto f = test::random_field(8, 6, rng);
  CHECK(advect(f, VectorField(8, 6), 0.7) == f);

  const ScalarField strip(4, 1, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  const VectorField right(ScalarField(4, 1, 1.0), ScalarField(4, 1, 0.0));
  const auto moved = advect(strip, right, 1.0);
  CHECK(moved.at(1, 0) == 1.0);
  CHECK(moved.at(2, 0) == 2.0);

  const auto vel = test::random_velocity(8, 6, rng, 3.0);
  const auto flat = advect(ScalarField(8, 6, 0.25), vel, 1.3);
  for (double v : flat.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-13));
}

TEST_CASE("advection creates no new extrema") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const auto f = test::random_field(12, 10, rng, -2.0, 3.0);
    const auto out = advect(f, test::random_velocity(12, 10, rng, 4.0), 1.5);
    CHECK(out.min() >= f.min());
    CHECK(out.max() <= f.max());
  }
}

TEST_CASE("diffusion") {
  std::mt19937_64 rng(12);
  const auto f = test::random_field(6, 6, rng);
  CHECK(diffuse(f, 0.0, 1.0) == f);
  const auto flat = diffuse(ScalarField(5, 4, 0.7), 0.2, 1.0);
  for (double v : flat.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-13));

  ScalarField hot(3, 3, 0.0);
  hot.at(1, 1) = 1.0;
  const auto out = diffuse(hot, 0.1, 1.0);
  CHECK(out.at(1, 1) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(out.at(0, 1) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(out.at(1, 2) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(out.at(0, 0) == 0.0);

  CHECK_THROWS_AS(diffuse(f, 0.3, 1.0), StabilityError);
  CHECK_NOTHROW(diffuse(f, 0.3, 1.0, DiffusionMode::implicit_jacobi));
}

TEST_CASE("diffusion conserves the mean") {
  ScalarField bump(20, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 20; ++x) bump.at(x, y) = std::exp(-((x - 6.0) * (x - 6.0) + (y - 4.0) * (y - 4.0)) / 8.0);
  for (auto mode : {DiffusionMode::explicit_euler, DiffusionMode::implicit_jacobi}) {
    auto f = bump;
    for (int i = 0; i < 10; ++i) f = diffuse(f, 0.2, 1.0, mode);
    CHECK(test::rel_err(f.sum(), bump.sum()) <= 1e-8);
  }
}

TEST_CASE("pressure projection") {
  const double tol = 1e-6;
  auto zero = pressure_project(VectorField(10, 10), tol, 2000);
  CHECK(zero.velocity == VectorField(10, 10));
  CHECK(test::max_abs(zero.pressure) == 0.0);

  // vortex from a compact stream function; central differences commute, so it is discretely solenoidal
  ScalarField psi(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const double r2 = ((x - 7.5) * (x - 7.5) + (y - 7.5) * (y - 7.5)) / 16.0;
      psi.at(x, y) = r2 < 1.0 ? std::pow(1.0 - r2, 3) : 0.0;
    }
  VectorField rot(16, 16);
  for (int y = 1; y < 15; ++y)
    for (int x = 1; x < 15; ++x) {
      rot.u.at(x, y) = 0.5 * (psi.at(x, y + 1) - psi.at(x, y - 1));
      rot.v.at(x, y) = -0.5 * (psi.at(x + 1, y) - psi.at(x - 1, y));
    }
  REQUIRE(test::max_abs(kernels::divergence(rot)) < 1e-15);
  const auto r = pressure_project(rot, tol, 2000);
  CHECK(test::max_abs(kernels::divergence(r.velocity)) <= tol);
  for (std::size_t i = 0; i < rot.u.size(); ++i) {
    CHECK(std::abs(r.velocity.u.values()[i] - rot.u.values()[i]) <= 10 * tol);
    CHECK(std::abs(r.velocity.v.values()[i] - rot.v.values()[i]) <= 10 * tol);
  }

  // uniform interior push in a closed box is a pure gradient
  VectorField push(12, 12);
  for (int y = 1; y < 11; ++y)
    for (int x = 1; x < 11; ++x) push.v.at(x, y) = 0.3;
  const auto p = pressure_project(push, tol, 5000);
  CHECK(p.velocity.max_abs() < 10 * tol);
}

TEST_CASE("projection reports non-convergence") {
  std::mt19937_64 rng(13);
  VectorField v = test::random_velocity(16, 16, rng, 1.0);
  try {
    pressure_project(v, 1e-12, 3);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.iterations() == 3);
    CHECK(e.residual() > 1e-12);
  }
}

namespace {
SimState random_state(int w, int h, std::mt19937_64& rng) {
  SimState s = SimState::from_concentration(sample_plumes(w, h, rng));
  s.velocity = test::random_velocity(w, h, rng, 0.5);
  return s;
}
}  // namespace

TEST_CASE("ns_step trivial states") {
  NavierStokesConfig cfg;
  cfg.width = cfg.height = 16;
  const auto zero = SimState::from_concentration(ScalarField(16, 16, 0.0));
  const auto next = ns_step(zero, cfg);
  CHECK(next.concentration == zero.concentration);
  CHECK(next.velocity == zero.velocity);
  CHECK(next.step_index == 1);

  const auto uniform = SimState::from_concentration(ScalarField(16, 16, 0.5));
  const auto u1 = ns_step(uniform, cfg);
  CHECK(u1.velocity.max_abs() < 10 * cfg.pressure_solver_tol);
  for (double v : u1.concentration.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ns_step is divergence free and deterministic") {
  NavierStokesConfig cfg;
  std::mt19937_64 rng(14);
  for (int i = 0; i < 10; ++i) {
    const auto s = random_state(32, 32, rng);
    const auto a = ns_step(s, cfg);
    CHECK(test::max_abs(kernels::divergence(a.velocity)) / cfg.cell_size <= cfg.pressure_solver_tol);
    const auto b = ns_step(s, cfg);
    CHECK(test::bit_equal(a.concentration, b.concentration));
    CHECK(test::bit_equal(a.velocity.u, b.velocity.u));
    CHECK(test::bit_equal(a.velocity.v, b.velocity.v));
    CHECK(test::bit_equal(a.pressure, b.pressure));
  }
}

TEST_CASE("conjugate gradient solver also projects") {
  NavierStokesConfig cfg;
  cfg.pressure_solver = PressureSolver::conjugate_gradient;
  std::mt19937_64 rng(15);
  const auto a = ns_step(random_state(32, 32, rng), cfg);
  CHECK(test::max_abs(kernels::divergence(a.velocity)) / cfg.cell_size <= cfg.pressure_solver_tol);
}

TEST_CASE("boundary override activation") {
  NavierStokesConfig cfg;
  const BoundaryOverride ov{Edge::top, VelocityComponent::v, 0.5, 2, 4};
  NavierStokesSimulator sim(cfg, {ov});
  std::mt19937_64 rng(16);
  SimState s = SimState::from_concentration(sample_plumes(32, 32, rng));
  for (int t = 0; t < 6; ++t) {
    s = sim.step(s);
    // the step leaving state t applies the BC of step t
    const double expected = ov.active(t) ? 0.5 : 0.0;
    for (int x = 0; x < 32; ++x) CHECK(s.velocity.v.at(x, 31) == expected);
  }

  const BoundaryOverride zero{Edge::top, VelocityComponent::v, 0.0, 0, 20};
  const auto init = SimState::from_concentration(sample_plumes(32, 32, rng));
  CHECK(simulate(NavierStokesSimulator(cfg, {zero}), init, 5) == simulate(NavierStokesSimulator(cfg), init, 5));
}

TEST_CASE("heat simulator") {
  HeatConfig cfg;
  cfg.width = cfg.height = 12;
  std::mt19937_64 rng(17);
  const auto c = test::random_field(12, 12, rng);
  auto s = SimState::from_concentration(c);

  HeatConfig still = cfg;
  still.diffusivity = 0.0;
  const auto s1 = heat_step(s, still);
  CHECK(s1.concentration == c);
  CHECK(s1.step_index == 1);

  const auto flat = heat_step(SimState::from_concentration(ScalarField(12, 12, 0.4)), cfg);
  for (double v : flat.concentration.values()) CHECK(v == doctest::Approx(0.4).epsilon(1e-14));

  HeatSimulator sim(cfg);
  auto t = simulate(sim, s, 10);
  CHECK(test::rel_err(t.states.back().concentration.sum(), c.sum()) <= 1e-8);
  CHECK(simulate(sim, s, 10) == t);
}

TEST_CASE("plume sampler") {
  std::mt19937_64 a(18), b(18);
  const auto f = sample_plumes(32, 32, a);
  CHECK(f == sample_plumes(32, 32, b));
  CHECK(f.min() >= 0.0);
  CHECK(f.max() <= 3.0);
  CHECK(round_to_storage(f) == f);
  double lower = 0.0, upper = 0.0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) (y < 16 ? lower : upper) += f.at(x, y);
  CHECK(lower > upper);
}

TEST_CASE("config validation") {
  NavierStokesConfig cfg;
  cfg.dt = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  CHECK_THROWS(parse_edge("middle"));
  CHECK(parse_edge("top") == Edge::top);
}

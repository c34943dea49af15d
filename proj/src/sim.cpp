#include "hyper/sim.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "hyper/error.hpp"
#include "hyper/kernels.hpp"

namespace hyper {

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const char* edge_name(Edge e) {
  switch (e) {
    case Edge::bottom: return "bottom";
    case Edge::top: return "top";
    case Edge::left: return "left";
    case Edge::right: return "right";
  }
  return "?";
}

void set_edge(VectorField& vel, Edge edge, VelocityComponent comp, double value) {
  ScalarField& f = comp == VelocityComponent::u ? vel.u : vel.v;
  const int w = f.width();
  const int h = f.height();
  switch (edge) {
    case Edge::bottom: for (int x = 0; x < w; ++x) f.at(x, 0) = value; break;
    case Edge::top: for (int x = 0; x < w; ++x) f.at(x, h - 1) = value; break;
    case Edge::left: for (int y = 0; y < h; ++y) f.at(0, y) = value; break;
    case Edge::right: for (int y = 0; y < h; ++y) f.at(w - 1, y) = value; break;
  }
}

// Concentration leaves through edge cells whose wall velocity points outward.
void drain_outflow(ScalarField& c, const VectorField& vel, double dt) {
  const int w = c.width();
  const int h = c.height();
  auto drain = [&](int x, int y, double outward) {
    if (outward > 0.0) c.at(x, y) *= std::max(0.0, 1.0 - outward * dt);
  };
  for (int x = 0; x < w; ++x) {
    drain(x, h - 1, vel.v.at(x, h - 1));
    drain(x, 0, -vel.v.at(x, 0));
  }
  for (int y = 0; y < h; ++y) {
    drain(w - 1, y, vel.u.at(w - 1, y));
    drain(0, y, -vel.u.at(0, y));
  }
}

double dot(const ScalarField& a, const ScalarField& b) {
  double acc = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return acc;
}

// Net wall flux makes the closed-box Poisson problem incompatible. The target
// divergence becomes the wall flux minus its mean over each parity class of the
// (decoupled) central-difference stencil; returns null when walls carry no flux.
std::optional<ScalarField> wall_source(const VectorField& vel, const ScalarField& diag, double& dilatation) {
  const ScalarField flux = kernels::wall_flux_divergence(vel);
  dilatation = 0.0;
  if (std::all_of(flux.values().begin(), flux.values().end(), [](double v) { return v == 0.0; })) return std::nullopt;
  const int w = vel.width();
  const int h = vel.height();
  std::array<double, 4> sum{};
  std::array<int, 4> count{};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (diag.at(x, y) > 0.0) {
        const int cls = (x % 2) + 2 * (y % 2);
        sum[cls] += flux.at(x, y);
        ++count[cls];
      }
  ScalarField source(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (diag.at(x, y) > 0.0) {
        const int cls = (x % 2) + 2 * (y % 2);
        const double mean = sum[cls] / count[cls];
        dilatation = std::max(dilatation, std::abs(mean));
        source.at(x, y) = mean - flux.at(x, y);
      }
  return source;
}

ProjectionResult project_jacobi(const VectorField& vel, double tol, int max_iters, ScalarField p, double omega) {
  const int w = vel.width();
  const int h = vel.height();
  const ScalarField diag = kernels::projection_diagonal(w, h);
  double dilatation = 0.0;
  const auto source = wall_source(vel, diag, dilatation);
  const ScalarField* src = source ? &*source : nullptr;
  VectorField scratch(w, h);
  ScalarField r(w, h);
  double res = 0.0;
  for (int it = 0; it <= max_iters; ++it) {
    res = kernels::omp::projection_residual(vel, p, src, scratch, r);
    if (res <= tol) {
      ProjectionResult out;
      out.velocity = VectorField(w, h);
      kernels::omp::subtract_gradient(vel, p, out.velocity);
      out.pressure = std::move(p);
      out.iterations = it;
      out.divergence = res;
      out.dilatation = dilatation;
      return out;
    }
    if (it < max_iters) kernels::omp::jacobi_update(p, r, diag, omega);
  }
  throw ConvergenceError("pressure_project: Jacobi did not converge in " + std::to_string(max_iters) +
                             " sweeps (divergence " + fmt_double(res) + ", tol " + fmt_double(tol) + ")",
                         res, max_iters);
}

ProjectionResult project_cg(const VectorField& vel, double tol, int max_iters, ScalarField p) {
  const int w = vel.width();
  const int h = vel.height();
  const ScalarField diag = kernels::projection_diagonal(w, h);
  double dilatation = 0.0;
  const auto source = wall_source(vel, diag, dilatation);
  const ScalarField* src = source ? &*source : nullptr;
  const VectorField zero(w, h);
  VectorField scratch(w, h);
  ScalarField r(w, h), z(w, h), d(w, h), q(w, h);

  auto precondition = [&](const ScalarField& in, ScalarField& out) {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double dg = diag.values()[i];
      out.values()[i] = dg > 0.0 ? in.values()[i] / dg : 0.0;
    }
  };

  double res = kernels::omp::projection_residual(vel, p, src, scratch, r);
  precondition(r, z);
  d = z;
  double rz = dot(r, z);
  int it = 0;
  for (; it < max_iters && res > tol; ++it) {
    kernels::omp::projection_residual(zero, d, nullptr, scratch, q);  // q = -A d
    for (double& v : q.values()) v = -v;
    const double dq = dot(d, q);
    if (!(dq > 0.0)) break;
    const double alpha = rz / dq;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p.values()[i] += alpha * d.values()[i];
      r.values()[i] -= alpha * q.values()[i];
    }
    // Replace the recurrence residual periodically to stop drift.
    if ((it + 1) % 50 == 0) {
      res = kernels::omp::projection_residual(vel, p, src, scratch, r);
    } else {
      res = 0.0;
      for (double v : r.values()) res = std::max(res, std::abs(v));
    }
    precondition(r, z);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < d.size(); ++i) d.values()[i] = z.values()[i] + beta * d.values()[i];
  }
  res = kernels::omp::projection_residual(vel, p, src, scratch, r);
  if (res > tol)
    throw ConvergenceError("pressure_project: CG did not converge in " + std::to_string(max_iters) +
                               " iterations (divergence " + fmt_double(res) + ", tol " + fmt_double(tol) + ")",
                           res, it);
  ProjectionResult out;
  out.velocity = VectorField(w, h);
  kernels::omp::subtract_gradient(vel, p, out.velocity);
  out.pressure = std::move(p);
  out.iterations = it;
  out.divergence = res;
  out.dilatation = dilatation;
  return out;
}

void check_dims(const SimState& state, int width, int height, const char* who) {
  state.check_consistent();
  if (state.width() != width || state.height() != height)
    throw DimensionError(std::string(who) + ": state is " + std::to_string(state.width()) + "x" +
                         std::to_string(state.height()) + ", config expects " + std::to_string(width) + "x" +
                         std::to_string(height));
}

}  // namespace

Edge parse_edge(const std::string& name) {
  if (name == "bottom") return Edge::bottom;
  if (name == "top") return Edge::top;
  if (name == "left") return Edge::left;
  if (name == "right") return Edge::right;
  throw InvalidArgument("unknown edge '" + name + "'");
}

VelocityComponent parse_velocity_component(const std::string& name) {
  if (name == "u" || name == "velocity_u") return VelocityComponent::u;
  if (name == "v" || name == "velocity_v") return VelocityComponent::v;
  throw InvalidArgument("unknown velocity component '" + name + "'");
}

void BoundaryOverride::validate() const {
  if (step_start >= step_end) throw InvalidArgument("BoundaryOverride: step_start must be < step_end");
  if (!std::isfinite(value)) throw InvalidArgument("BoundaryOverride: value must be finite");
}

void NavierStokesConfig::validate() const {
  if (width < 3 || height < 3) throw InvalidArgument("NavierStokesConfig: grid must be at least 3x3");
  if (!(dt > 0.0)) throw InvalidArgument("NavierStokesConfig: dt must be > 0");
  if (!(mu >= 0.0)) throw InvalidArgument("NavierStokesConfig: mu must be >= 0");
  if (!(cell_size > 0.0)) throw InvalidArgument("NavierStokesConfig: cell_size must be > 0");
  if (!(pressure_solver_tol > 0.0)) throw InvalidArgument("NavierStokesConfig: pressure_solver_tol must be > 0");
  if (pressure_solver_max_iters < 1) throw InvalidArgument("NavierStokesConfig: pressure_solver_max_iters must be >= 1");
  if (!(jacobi_omega > 0.0 && jacobi_omega < 1.0 + 1e-12))
    throw InvalidArgument("NavierStokesConfig: jacobi_omega must be in (0, 1]");
}

std::string NavierStokesConfig::describe() const {
  std::ostringstream os;
  os << "navier_stokes w=" << width << " h=" << height << " dt=" << fmt_double(dt) << " dx=" << fmt_double(cell_size) << " mu=" << fmt_double(mu)
     << " buoyancy=" << fmt_double(buoyancy_coeff) << " neumann_c=" << concentration_neumann
     << " solver=" << (pressure_solver == PressureSolver::jacobi ? "jacobi" : "cg")
     << " tol=" << fmt_double(pressure_solver_tol) << " max_iters=" << pressure_solver_max_iters
     << " omega=" << fmt_double(jacobi_omega) << " bc=";
  for (const auto& e : velocity_bc) os << fmt_double(e[0]) << "," << fmt_double(e[1]) << ";";
  return os.str();
}

void HeatConfig::validate() const {
  if (width < 1 || height < 1) throw InvalidArgument("HeatConfig: grid must be non-empty");
  if (!(dt > 0.0)) throw InvalidArgument("HeatConfig: dt must be > 0");
  if (!(diffusivity >= 0.0)) throw InvalidArgument("HeatConfig: diffusivity must be >= 0");
  if (advecting_velocity && (advecting_velocity->width() != width || advecting_velocity->height() != height))
    throw DimensionError("HeatConfig: advecting velocity shape differs from the grid");
}

std::string HeatConfig::describe() const {
  std::ostringstream os;
  os << "heat w=" << width << " h=" << height << " dt=" << fmt_double(dt)
     << " diffusivity=" << fmt_double(diffusivity)
     << " mode=" << (mode == DiffusionMode::explicit_euler ? "explicit" : "implicit");
  if (advecting_velocity)
    os << " advect=" << fmt_double(advecting_velocity->u.values()[0]) << ","
       << fmt_double(advecting_velocity->v.values()[0]);
  return os.str();
}

ScalarField advect(const ScalarField& field, const VectorField& vel, double dt) {
  if (!field.same_shape(vel.u) || !field.same_shape(vel.v)) throw DimensionError("advect: field/velocity shape mismatch");
  ScalarField out(field.width(), field.height());
  kernels::omp::advect(field, vel, dt, out);
  return out;
}

ScalarField diffuse(const ScalarField& field, double coeff, double dt, DiffusionMode mode) {
  if (!(coeff >= 0.0)) throw InvalidArgument("diffuse: coefficient must be >= 0");
  if (coeff == 0.0) return field;
  const double alpha = coeff * dt;
  if (mode == DiffusionMode::explicit_euler) {
    if (alpha > 0.25)
      throw StabilityError("diffuse: explicit step unstable, coeff*dt/dx^2 = " + fmt_double(alpha) +
                           " exceeds the limit 0.25");
    ScalarField out(field.width(), field.height());
    kernels::omp::diffuse_explicit(field, alpha, out);
    return out;
  }
  ScalarField x = field;
  ScalarField next(field.width(), field.height());
  const double scale = std::max(1.0, std::max(std::abs(field.min()), std::abs(field.max())));
  for (int it = 0; it < 1000; ++it) {
    const double change = kernels::omp::diffuse_implicit_sweep(field, x, alpha, next);
    std::swap(x, next);
    if (change <= 1e-13 * scale) return x;
  }
  throw ConvergenceError("diffuse: implicit Jacobi did not converge in 1000 sweeps", 0.0, 1000);
}

ProjectionResult pressure_project(const VectorField& vel, double tol, int max_iters, PressureSolver solver,
                                  const ScalarField* warm_start, double omega) {
  if (!(tol > 0.0)) throw InvalidArgument("pressure_project: tol must be > 0");
  if (max_iters < 1) throw InvalidArgument("pressure_project: max_iters must be >= 1");
  if (!vel.u.same_shape(vel.v)) throw DimensionError("pressure_project: u/v shape mismatch");
  ScalarField p(vel.width(), vel.height());
  if (warm_start) {
    if (!warm_start->same_shape(p)) throw DimensionError("pressure_project: warm start shape mismatch");
    p = *warm_start;
  }
  if (solver == PressureSolver::jacobi) return project_jacobi(vel, tol, max_iters, std::move(p), omega);
  return project_cg(vel, tol, max_iters, std::move(p));
}

void apply_velocity_bc(VectorField& vel, const NavierStokesConfig& cfg,
                       const std::vector<BoundaryOverride>& overrides, int step_index) {
  for (Edge e : {Edge::bottom, Edge::top, Edge::left, Edge::right}) {
    const auto& bc = cfg.velocity_bc[static_cast<std::size_t>(e)];
    set_edge(vel, e, VelocityComponent::u, bc[0]);
    set_edge(vel, e, VelocityComponent::v, bc[1]);
  }
  for (const auto& o : overrides)
    if (o.active(step_index)) set_edge(vel, o.edge, o.field, o.value);
}

SimState ns_step(const SimState& state, const NavierStokesConfig& cfg, const std::vector<BoundaryOverride>& overrides) {
  check_dims(state, cfg.width, cfg.height, "ns_step");
  const double dt = cfg.dt;
  const double dx = cfg.cell_size;
  // Kernels work in cell units; a physical step dt moves dt/dx cells per unit velocity.
  const double dt_cells = dt / dx;
  const VectorField& vel = state.velocity;

  VectorField next(advect(vel.u, vel, dt_cells), advect(vel.v, vel, dt_cells));
  next.u = diffuse(next.u, cfg.mu / (dx * dx), dt);
  next.v = diffuse(next.v, cfg.mu / (dx * dx), dt);
  const auto c = state.concentration.values();
  auto nv = next.v.values();
  for (std::size_t i = 0; i < nv.size(); ++i) nv[i] += cfg.buoyancy_coeff * c[i] * dt;
  apply_velocity_bc(next, cfg, overrides, state.step_index);

  // Pressure is solved in cell-scaled units (p / dx) and stored in physical units.
  ScalarField warm = state.pressure;
  for (double& v : warm.values()) v /= dx;
  ProjectionResult proj = pressure_project(next, cfg.pressure_solver_tol * dx, cfg.pressure_solver_max_iters,
                                           cfg.pressure_solver, &warm, cfg.jacobi_omega);
  for (double& v : proj.pressure.values()) v *= dx;

  SimState out;
  out.concentration = advect(state.concentration, proj.velocity, dt_cells);
  // Semi-Lagrangian interpolation does not conserve mass; restore the
  // pre-advection total before wall outflow removes any.
  const double before = state.concentration.sum();
  const double after = out.concentration.sum();
  if (after > 0.0 && before > 0.0) {
    const double scale = before / after;
    for (double& v : out.concentration.values()) v *= scale;
  }
  if (cfg.concentration_neumann) {
    drain_outflow(out.concentration, proj.velocity, dt_cells);
  } else {
    const int w = cfg.width;
    const int h = cfg.height;
    for (int x = 0; x < w; ++x) out.concentration.at(x, 0) = out.concentration.at(x, h - 1) = 0.0;
    for (int y = 0; y < h; ++y) out.concentration.at(0, y) = out.concentration.at(w - 1, y) = 0.0;
  }
  out.velocity = std::move(proj.velocity);
  out.pressure = std::move(proj.pressure);
  out.step_index = state.step_index + 1;
  out.sim_time = out.step_index * dt;
  if (!out.all_finite()) throw Error("ns_step: non-finite values at step " + std::to_string(out.step_index));
  return out;
}

SimState heat_step(const SimState& state, const HeatConfig& cfg) {
  check_dims(state, cfg.width, cfg.height, "heat_step");
  SimState out = state;
  out.concentration = diffuse(state.concentration, cfg.diffusivity, cfg.dt, cfg.mode);
  if (cfg.advecting_velocity) out.concentration = advect(out.concentration, *cfg.advecting_velocity, cfg.dt);
  out.step_index = state.step_index + 1;
  out.sim_time = out.step_index * cfg.dt;
  if (!out.all_finite()) throw Error("heat_step: non-finite values at step " + std::to_string(out.step_index));
  return out;
}

NavierStokesSimulator::NavierStokesSimulator(NavierStokesConfig cfg, std::vector<BoundaryOverride> overrides)
    : cfg_(std::move(cfg)), overrides_(std::move(overrides)) {
  cfg_.validate();
  for (const auto& o : overrides_) o.validate();
}

SimState NavierStokesSimulator::step(const SimState& state) const { return ns_step(state, cfg_, overrides_); }

std::string NavierStokesSimulator::describe() const {
  std::string d = cfg_.describe();
  for (const auto& o : overrides_)
    d += " override=" + std::string(edge_name(o.edge)) + ":" + (o.field == VelocityComponent::u ? "u" : "v") + ":" +
         fmt_double(o.value) + ":" + std::to_string(o.step_start) + "-" + std::to_string(o.step_end);
  return d;
}

HeatSimulator::HeatSimulator(HeatConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

SimState HeatSimulator::step(const SimState& state) const { return heat_step(state, cfg_); }

Trajectory simulate(const Simulator& sim, const SimState& initial, int horizon) {
  if (horizon < 1) throw InvalidArgument("simulate: horizon must be >= 1");
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.states.push_back(initial);
  for (int t = 0; t < horizon; ++t) traj.states.push_back(sim.step(traj.states.back()));
  return traj;
}

ScalarField sample_plumes(int width, int height, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count_dist(1, 3);
  std::uniform_real_distribution<double> cx_dist(0.15 * (width - 1), 0.85 * (width - 1));
  std::uniform_real_distribution<double> cy_dist(0.1 * (height - 1), 0.5 * (height - 1));
  std::uniform_real_distribution<double> width_dist(2.0, 6.0);
  std::uniform_real_distribution<double> amp_dist(0.5, 1.0);
  ScalarField c(width, height);
  const int n = count_dist(rng);
  for (int k = 0; k < n; ++k) {
    const double cx = cx_dist(rng);
    const double cy = cy_dist(rng);
    const double sigma = width_dist(rng);
    const double amp = amp_dist(rng);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        c.at(x, y) += amp * std::exp(-r2 / (2.0 * sigma * sigma));
      }
  }
  return round_to_storage(c);
}

}  // namespace hyper

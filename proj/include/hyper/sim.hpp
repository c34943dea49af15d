#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hyper/grid.hpp"

namespace hyper {

enum class Edge { bottom, top, left, right };
enum class VelocityComponent { u, v };

Edge parse_edge(const std::string& name);
VelocityComponent parse_velocity_component(const std::string& name);

/// Replaces one velocity component along a whole edge while
/// step_start <= step_index < step_end.
struct BoundaryOverride {
  Edge edge = Edge::top;
  VelocityComponent field = VelocityComponent::v;
  double value = 0.0;
  int step_start = 0;
  int step_end = 1;

  bool active(int step_index) const { return step_index >= step_start && step_index < step_end; }
  void validate() const;
};

enum class PressureSolver { jacobi, conjugate_gradient };

struct NavierStokesConfig {
  int width = 32;
  int height = 32;
  double dt = 1.5;
  /// Physical width of one cell (code units).
  double cell_size = 0.5;
  double mu = 0.01;
  double buoyancy_coeff = 0.5;
  /// Dirichlet velocity per edge, indexed by Edge; (u, v) pairs.
  std::array<std::array<double, 2>, 4> velocity_bc{};
  /// Zero-gradient concentration at the walls. Outflow edges still drain.
  bool concentration_neumann = true;
  PressureSolver pressure_solver = PressureSolver::jacobi;
  double pressure_solver_tol = 1e-5;
  int pressure_solver_max_iters = 2000;
  double jacobi_omega = 0.9;

  void validate() const;
  /// Stable textual identity used for dataset manifests.
  std::string describe() const;
};

enum class DiffusionMode { explicit_euler, implicit_jacobi };

struct HeatConfig {
  int width = 32;
  int height = 32;
  double dt = 1.0;
  double diffusivity = 0.1;
  DiffusionMode mode = DiffusionMode::explicit_euler;
  std::optional<VectorField> advecting_velocity;

  void validate() const;
  std::string describe() const;
};

/// Semi-Lagrangian advection, unit cell size.
ScalarField advect(const ScalarField& field, const VectorField& vel, double dt);

/// One diffusion step with zero-gradient edges. Explicit mode checks
/// coeff*dt <= 0.25 and throws StabilityError otherwise.
ScalarField diffuse(const ScalarField& field, double coeff, double dt,
                    DiffusionMode mode = DiffusionMode::explicit_euler);

struct ProjectionResult {
  VectorField velocity;
  ScalarField pressure;
  int iterations = 0;
  /// Max-norm of the output's divergence, measured against the target below.
  double divergence = 0.0;
  /// Uniform divergence the interior must carry to balance net wall flux
  /// (zero for closed walls).
  double dilatation = 0.0;
};

/// Removes the divergent part of the interior velocity by solving the
/// pressure normal equations G^T G p = G^T v. The boundary ring is left
/// untouched. With closed walls the output divergence is <= tol; when the
/// walls carry net flux it equals the compatible uniform dilatation within tol. `warm_start` seeds the pressure iteration.
/// Throws ConvergenceError (carrying the residual) after max_iters.
ProjectionResult pressure_project(const VectorField& vel, double tol, int max_iters,
                                  PressureSolver solver = PressureSolver::jacobi,
                                  const ScalarField* warm_start = nullptr, double omega = 0.9);

/// Overwrites the boundary ring with the configured Dirichlet values and any
/// overrides active at `step_index`. Overrides are applied last.
void apply_velocity_bc(VectorField& vel, const NavierStokesConfig& cfg,
                       const std::vector<BoundaryOverride>& overrides, int step_index);

/// One operator-split step of the buoyant incompressible flow.
SimState ns_step(const SimState& state, const NavierStokesConfig& cfg,
                 const std::vector<BoundaryOverride>& overrides = {});

/// Diffuses, then optionally advects, the concentration.
SimState heat_step(const SimState& state, const HeatConfig& cfg);

/// Ground-truth stepper used by rollouts and dataset generation.
/// Implementations expose no gradients.
class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual SimState step(const SimState& state) const = 0;
  virtual double dt() const = 0;
  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual std::string describe() const = 0;
};

class NavierStokesSimulator : public Simulator {
 public:
  explicit NavierStokesSimulator(NavierStokesConfig cfg, std::vector<BoundaryOverride> overrides = {});
  SimState step(const SimState& state) const override;
  double dt() const override { return cfg_.dt; }
  int width() const override { return cfg_.width; }
  int height() const override { return cfg_.height; }
  std::string describe() const override;
  const NavierStokesConfig& config() const { return cfg_; }
  const std::vector<BoundaryOverride>& overrides() const { return overrides_; }

 private:
  NavierStokesConfig cfg_;
  std::vector<BoundaryOverride> overrides_;
};

class HeatSimulator : public Simulator {
 public:
  explicit HeatSimulator(HeatConfig cfg);
  SimState step(const SimState& state) const override;
  double dt() const override { return cfg_.dt; }
  int width() const override { return cfg_.width; }
  int height() const override { return cfg_.height; }
  std::string describe() const override { return cfg_.describe(); }

 private:
  HeatConfig cfg_;
};

/// Runs `horizon` simulator steps from `initial`.
Trajectory simulate(const Simulator& sim, const SimState& initial, int horizon);

/// Initial-condition sampler: zero velocity, 1-3 Gaussian plumes centred in
/// the lower half, widths 2-6 cells, amplitudes 0.5-1.0. Values are rounded
/// to storage precision so stored initial states reproduce exactly.
ScalarField sample_plumes(int width, int height, std::mt19937_64& rng);

}  // namespace hyper

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hyper {

/// Dense 2D cell-centred scalar grid, row-major, row 0 at the bottom.
/// Cell (x, y) has its centre at coordinate (x, y) in cell units.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(int width, int height, double fill = 0.0);
  ScalarField(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double at(int x, int y) const { return values_[index(x, y)]; }
  double& at(int x, int y) { return values_[index(x, y)]; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool same_shape(const ScalarField& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool all_finite() const;
  double sum() const;
  double min() const;
  double max() const;

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

/// Collocated velocity: both components live at cell centres.
struct VectorField {
  ScalarField u;
  ScalarField v;

  VectorField() = default;
  VectorField(int width, int height) : u(width, height), v(width, height) {}
  VectorField(ScalarField u_, ScalarField v_);

  int width() const { return u.width(); }
  int height() const { return u.height(); }
  bool all_finite() const { return u.all_finite() && v.all_finite(); }
  double max_abs() const;

  friend bool operator==(const VectorField&, const VectorField&) = default;
};

/// Full PDE state at one timestep.
struct SimState {
  VectorField velocity;
  ScalarField pressure;
  ScalarField concentration;
  int step_index = 0;
  double sim_time = 0.0;

  /// Zero velocity and pressure around the given concentration.
  static SimState from_concentration(ScalarField concentration, int step_index = 0, double dt = 0.0);

  int width() const { return concentration.width(); }
  int height() const { return concentration.height(); }
  /// Throws DimensionError when member fields disagree in shape.
  void check_consistent() const;
  bool all_finite() const;

  friend bool operator==(const SimState&, const SimState&) = default;
};

/// Ordered states of one rollout; states[i].step_index == i.
struct Trajectory {
  std::vector<SimState> states;
  std::string config_id;
  std::uint64_t seed = 0;

  /// Number of steps T (states.size() - 1).
  int horizon() const { return static_cast<int>(states.size()) - 1; }
  /// Throws DimensionError on broken indexing or fewer than two states.
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class FieldSelector { concentration, pressure, velocity_u, velocity_v };

const ScalarField& select_field(const SimState& state, FieldSelector selector);
FieldSelector parse_field_selector(const std::string& name);
std::string to_string(FieldSelector selector);

/// Mean over cells of the squared difference. Throws DimensionError on shape mismatch.
double mse(const ScalarField& a, const ScalarField& b);

/// Bilinear interpolation between the four surrounding cell centres.
/// Coordinates outside the grid are clamped to the boundary cell centres.
double bilinear_sample(const ScalarField& field, double x, double y);

/// Per-step MSE for steps 1..T (the shared initial state is excluded).
std::vector<double> per_step_mse(const Trajectory& pred, const Trajectory& truth,
                                 FieldSelector selector = FieldSelector::concentration);

/// Sum of per_step_mse.
double cumulative_mse(const Trajectory& pred, const Trajectory& truth,
                      FieldSelector selector = FieldSelector::concentration);

/// Rounds every value to the nearest 32-bit float (storage precision).
ScalarField round_to_storage(const ScalarField& field);
SimState round_to_storage(const SimState& state);

}  // namespace hyper

#include "hyper/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyper/error.hpp"

namespace hyper {

ScalarField::ScalarField(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) throw DimensionError("ScalarField: width and height must be >= 1");
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

ScalarField::ScalarField(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width < 1 || height < 1) throw DimensionError("ScalarField: width and height must be >= 1");
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw DimensionError("ScalarField: values.size() != width * height");
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ScalarField::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }

double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

VectorField::VectorField(ScalarField u_, ScalarField v_) : u(std::move(u_)), v(std::move(v_)) {
  if (!u.same_shape(v)) throw DimensionError("VectorField: u and v differ in shape");
}

double VectorField::max_abs() const {
  double m = 0.0;
  for (double x : u.values()) m = std::max(m, std::abs(x));
  for (double x : v.values()) m = std::max(m, std::abs(x));
  return m;
}

SimState SimState::from_concentration(ScalarField concentration, int step_index, double dt) {
  SimState s;
  const int w = concentration.width();
  const int h = concentration.height();
  s.velocity = VectorField(w, h);
  s.pressure = ScalarField(w, h);
  s.concentration = std::move(concentration);
  s.step_index = step_index;
  s.sim_time = step_index * dt;
  return s;
}

void SimState::check_consistent() const {
  if (!concentration.same_shape(pressure) || !concentration.same_shape(velocity.u) ||
      !concentration.same_shape(velocity.v))
    throw DimensionError("SimState: member fields differ in shape");
}

bool SimState::all_finite() const {
  return velocity.all_finite() && pressure.all_finite() && concentration.all_finite();
}

void Trajectory::validate() const {
  if (states.size() < 2) throw DimensionError("Trajectory: needs at least two states");
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].step_index != static_cast<int>(i))
      throw DimensionError("Trajectory: states[" + std::to_string(i) + "] has step_index " +
                           std::to_string(states[i].step_index));
    if (!states[i].concentration.same_shape(states[0].concentration))
      throw DimensionError("Trajectory: states differ in grid shape");
  }
}

const ScalarField& select_field(const SimState& state, FieldSelector selector) {
  switch (selector) {
    case FieldSelector::concentration: return state.concentration;
    case FieldSelector::pressure: return state.pressure;
    case FieldSelector::velocity_u: return state.velocity.u;
    case FieldSelector::velocity_v: return state.velocity.v;
  }
  return state.concentration;
}

FieldSelector parse_field_selector(const std::string& name) {
  if (name == "c" || name == "concentration") return FieldSelector::concentration;
  if (name == "p" || name == "pressure") return FieldSelector::pressure;
  if (name == "u" || name == "velocity_u") return FieldSelector::velocity_u;
  if (name == "v" || name == "velocity_v") return FieldSelector::velocity_v;
  throw InvalidArgument("unknown field '" + name + "' (expected c, p, u or v)");
}

std::string to_string(FieldSelector selector) {
  switch (selector) {
    case FieldSelector::concentration: return "c";
    case FieldSelector::pressure: return "p";
    case FieldSelector::velocity_u: return "u";
    case FieldSelector::velocity_v: return "v";
  }
  return "c";
}

double mse(const ScalarField& a, const ScalarField& b) {
  if (!a.same_shape(b))
    throw DimensionError("mse: shape " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                         " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
  const auto av = a.values();
  const auto bv = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  return acc / static_cast<double>(av.size());
}

double bilinear_sample(const ScalarField& field, double x, double y) {
  const int w = field.width();
  const int h = field.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  x0 = std::min(x0, std::max(w - 2, 0));
  y0 = std::min(y0, std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double bottom = (1.0 - fx) * field.at(x0, y0) + fx * field.at(x1, y0);
  const double top = (1.0 - fx) * field.at(x0, y1) + fx * field.at(x1, y1);
  return (1.0 - fy) * bottom + fy * top;
}

std::vector<double> per_step_mse(const Trajectory& pred, const Trajectory& truth, FieldSelector selector) {
  if (pred.states.size() != truth.states.size())
    throw DimensionError("per_step_mse: trajectory lengths " + std::to_string(pred.states.size()) + " vs " +
                         std::to_string(truth.states.size()));
  std::vector<double> out;
  out.reserve(pred.states.size());
  for (std::size_t t = 1; t < pred.states.size(); ++t)
    out.push_back(mse(select_field(pred.states[t], selector), select_field(truth.states[t], selector)));
  return out;
}

double cumulative_mse(const Trajectory& pred, const Trajectory& truth, FieldSelector selector) {
  const auto steps = per_step_mse(pred, truth, selector);
  return std::accumulate(steps.begin(), steps.end(), 0.0);
}

ScalarField round_to_storage(const ScalarField& field) {
  ScalarField out = field;
  for (double& v : out.values()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

SimState round_to_storage(const SimState& state) {
  SimState out = state;
  out.velocity.u = round_to_storage(state.velocity.u);
  out.velocity.v = round_to_storage(state.velocity.v);
  out.pressure = round_to_storage(state.pressure);
  out.concentration = round_to_storage(state.concentration);
  return out;
}

}  // namespace hyper

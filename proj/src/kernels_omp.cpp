#include <algorithm>

#include "hyper/kernels.hpp"
#include "kernels_rows.hpp"

namespace hyper::kernels {

namespace {
// Below this many cells the fork/join overhead outweighs the work.
constexpr std::size_t kMinParallelCells = 4096;
}  // namespace

namespace omp {

void advect(const ScalarField& src, const VectorField& vel, double dt, ScalarField& out) {
  const int h = src.height();
#pragma omp parallel for schedule(static) if (src.size() >= kMinParallelCells)
  for (int y = 0; y < h; ++y) detail::advect_row(src, vel, dt, out, y);
}

void diffuse_explicit(const ScalarField& src, double alpha, ScalarField& out) {
  const int h = src.height();
#pragma omp parallel for schedule(static) if (src.size() >= kMinParallelCells)
  for (int y = 0; y < h; ++y) detail::diffuse_explicit_row(src, alpha, out, y);
}

double diffuse_implicit_sweep(const ScalarField& rhs, const ScalarField& x, double alpha, ScalarField& out) {
  const int h = rhs.height();
  double change = 0.0;
#pragma omp parallel for schedule(static) reduction(max : change) if (rhs.size() >= kMinParallelCells)
  for (int y = 0; y < h; ++y) change = std::max(change, detail::diffuse_implicit_row(rhs, x, alpha, out, y));
  return change;
}

double projection_residual(const VectorField& vel, const ScalarField& p, const ScalarField* source,
                           VectorField& scratch, ScalarField& r) {
  const int h = p.height();
  double peak = 0.0;
#pragma omp parallel if (p.size() >= kMinParallelCells)
  {
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) detail::masked_velocity_row(vel, p, scratch, y);
#pragma omp for schedule(static) reduction(max : peak)
    for (int y = 0; y < h; ++y) peak = std::max(peak, detail::transpose_gradient_row(scratch, source, r, y));
  }
  return peak;
}

void jacobi_update(ScalarField& p, const ScalarField& r, const ScalarField& diag, double omega) {
  const int h = p.height();
#pragma omp parallel for schedule(static) if (p.size() >= kMinParallelCells)
  for (int y = 0; y < h; ++y) detail::jacobi_update_row(p, r, diag, omega, y);
}

void subtract_gradient(const VectorField& vel, const ScalarField& p, VectorField& out) {
  const int h = p.height();
#pragma omp parallel for schedule(static) if (p.size() >= kMinParallelCells)
  for (int y = 0; y < h; ++y) detail::subtract_gradient_row(vel, p, out, y);
}

void conv_forward(const ConvShape& shape, std::span<const double> in, std::span<const double> weight,
                  std::span<const double> bias, std::span<double> out) {
  detail::check_conv_spans(shape, in.size(), weight.size(), bias.size(), out.size());
  std::vector<double> pad(static_cast<std::size_t>(shape.in_channels) * (shape.height + 2) * (shape.width + 2));
  const bool par = shape.out_size() * shape.in_channels >= kMinParallelCells;
#pragma omp parallel if (par)
  {
#pragma omp for schedule(static)
    for (int c = 0; c < shape.in_channels; ++c) detail::pad_channel(shape, in, pad, c);
#pragma omp for schedule(static)
    for (int oc = 0; oc < shape.out_channels; ++oc) detail::conv_forward_channel(shape, pad, weight, bias, out, oc);
  }
}

void conv_backward(const ConvShape& shape, std::span<const double> in, std::span<const double> weight,
                   std::span<const double> grad_out, std::span<double> grad_weight, std::span<double> grad_bias,
                   std::span<double> grad_in) {
  detail::check_conv_spans(shape, in.size(), grad_weight.size(), grad_bias.size(), grad_out.size());
  if (!grad_in.empty() && grad_in.size() != shape.in_size())
    throw DimensionError("conv_backward: grad_in has the wrong size");
  std::vector<double> pad(static_cast<std::size_t>(shape.in_channels) * (shape.height + 2) * (shape.width + 2));
  const bool par = shape.out_size() * shape.in_channels >= kMinParallelCells;
#pragma omp parallel if (par)
  {
#pragma omp for schedule(static)
    for (int c = 0; c < shape.in_channels; ++c) detail::pad_channel(shape, in, pad, c);
#pragma omp for schedule(static)
    for (int oc = 0; oc < shape.out_channels; ++oc)
      detail::conv_weight_grad_channel(shape, pad, grad_out, grad_weight, grad_bias, oc);
    if (!grad_in.empty()) {
      std::vector<double> gpad(static_cast<std::size_t>(shape.height + 2) * (shape.width + 2));
#pragma omp for schedule(static)
      for (int ic = 0; ic < shape.in_channels; ++ic)
        detail::conv_input_grad_channel(shape, weight, grad_out, grad_in, gpad, ic);
    }
  }
}

}  // namespace omp

ScalarField divergence(const VectorField& vel) {
  const int w = vel.width();
  const int h = vel.height();
  VectorField masked(w, h);
  ScalarField zero_p(w, h);
  ScalarField r(w, h);
  omp::projection_residual(vel, zero_p, nullptr, masked, r);
  const ScalarField wall = wall_flux_divergence(vel);
  for (std::size_t i = 0; i < r.size(); ++i) r.values()[i] = wall.values()[i] - r.values()[i];
  return r;
}

ScalarField wall_flux_divergence(const VectorField& vel) {
  const int w = vel.width();
  const int h = vel.height();
  ScalarField s(w, h);
  auto ring = [&](int x, int y) { return !detail::interior(x, y, w, h); };
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      double flux = 0.0;
      if (ring(x + 1, y)) flux += vel.u.at(x + 1, y);
      if (ring(x - 1, y)) flux -= vel.u.at(x - 1, y);
      if (ring(x, y + 1)) flux += vel.v.at(x, y + 1);
      if (ring(x, y - 1)) flux -= vel.v.at(x, y - 1);
      s.at(x, y) = 0.5 * flux;
    }
  }
  return s;
}

ScalarField projection_diagonal(int width, int height) {
  ScalarField diag(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      int count = 0;
      if (detail::interior(x - 1, y, width, height)) ++count;
      if (detail::interior(x + 1, y, width, height)) ++count;
      if (detail::interior(x, y - 1, width, height)) ++count;
      if (detail::interior(x, y + 1, width, height)) ++count;
      diag.at(x, y) = 0.25 * count;
    }
  }
  return diag;
}

}  // namespace hyper::kernels

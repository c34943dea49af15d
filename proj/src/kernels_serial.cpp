#include <algorithm>

#include "hyper/kernels.hpp"
#include "kernels_rows.hpp"

namespace hyper::kernels::serial {

void advect(const ScalarField& src, const VectorField& vel, double dt, ScalarField& out) {
  for (int y = 0; y < src.height(); ++y) detail::advect_row(src, vel, dt, out, y);
}

void diffuse_explicit(const ScalarField& src, double alpha, ScalarField& out) {
  for (int y = 0; y < src.height(); ++y) detail::diffuse_explicit_row(src, alpha, out, y);
}

double diffuse_implicit_sweep(const ScalarField& rhs, const ScalarField& x, double alpha, ScalarField& out) {
  double change = 0.0;
  for (int y = 0; y < rhs.height(); ++y) change = std::max(change, detail::diffuse_implicit_row(rhs, x, alpha, out, y));
  return change;
}

double projection_residual(const VectorField& vel, const ScalarField& p, const ScalarField* source,
                           VectorField& scratch, ScalarField& r) {
  for (int y = 0; y < p.height(); ++y) detail::masked_velocity_row(vel, p, scratch, y);
  double peak = 0.0;
  for (int y = 0; y < p.height(); ++y) peak = std::max(peak, detail::transpose_gradient_row(scratch, source, r, y));
  return peak;
}

void jacobi_update(ScalarField& p, const ScalarField& r, const ScalarField& diag, double omega) {
  for (int y = 0; y < p.height(); ++y) detail::jacobi_update_row(p, r, diag, omega, y);
}

void subtract_gradient(const VectorField& vel, const ScalarField& p, VectorField& out) {
  for (int y = 0; y < p.height(); ++y) detail::subtract_gradient_row(vel, p, out, y);
}

void conv_forward(const ConvShape& shape, std::span<const double> in, std::span<const double> weight,
                  std::span<const double> bias, std::span<double> out) {
  detail::check_conv_spans(shape, in.size(), weight.size(), bias.size(), out.size());
  std::vector<double> pad(static_cast<std::size_t>(shape.in_channels) * (shape.height + 2) * (shape.width + 2));
  for (int c = 0; c < shape.in_channels; ++c) detail::pad_channel(shape, in, pad, c);
  for (int oc = 0; oc < shape.out_channels; ++oc) detail::conv_forward_channel(shape, pad, weight, bias, out, oc);
}

void conv_backward(const ConvShape& shape, std::span<const double> in, std::span<const double> weight,
                   std::span<const double> grad_out, std::span<double> grad_weight, std::span<double> grad_bias,
                   std::span<double> grad_in) {
  detail::check_conv_spans(shape, in.size(), grad_weight.size(), grad_bias.size(), grad_out.size());
  std::vector<double> pad(static_cast<std::size_t>(shape.in_channels) * (shape.height + 2) * (shape.width + 2));
  for (int c = 0; c < shape.in_channels; ++c) detail::pad_channel(shape, in, pad, c);
  for (int oc = 0; oc < shape.out_channels; ++oc)
    detail::conv_weight_grad_channel(shape, pad, grad_out, grad_weight, grad_bias, oc);
  if (grad_in.empty()) return;
  if (grad_in.size() != shape.in_size()) throw DimensionError("conv_backward: grad_in has the wrong size");
  std::vector<double> gpad(static_cast<std::size_t>(shape.height + 2) * (shape.width + 2));
  for (int ic = 0; ic < shape.in_channels; ++ic)
    detail::conv_input_grad_channel(shape, weight, grad_out, grad_in, gpad, ic);
}

}  // namespace hyper::kernels::serial

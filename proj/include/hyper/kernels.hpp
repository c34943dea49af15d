#pragma once

// Data-parallel inner loops of the simulator and the networks.
//
// Every kernel exists twice with identical signatures: `serial` is the
// reference implementation, `omp` distributes the outer loop with OpenMP.
// Each output element is computed by the same sequence of floating-point
// operations in both versions, so results are bit-identical regardless of
// thread count. Reductions are restricted to max-norms, which are exact.

#include <span>

#include "hyper/grid.hpp"

namespace hyper::kernels {

/// Geometry of a 3x3 convolution with replicate padding of one cell.
struct ConvShape {
  int in_channels = 1;
  int out_channels = 1;
  int height = 1;  ///< input height
  int width = 1;   ///< input width
  int stride = 1;

  int out_height() const { return (height - 1) / stride + 1; }
  int out_width() const { return (width - 1) / stride + 1; }
  std::size_t weight_count() const { return static_cast<std::size_t>(out_channels) * in_channels * 9; }
  std::size_t in_size() const { return static_cast<std::size_t>(in_channels) * height * width; }
  std::size_t out_size() const { return static_cast<std::size_t>(out_channels) * out_height() * out_width(); }
};

namespace serial {

/// Semi-Lagrangian backtrace of `src` through `vel` over `dt` (cell units).
void advect(const ScalarField& src, const VectorField& vel, double dt, ScalarField& out);
/// out = src + alpha * laplacian(src), zero-gradient (Neumann) edges.
void diffuse_explicit(const ScalarField& src, double alpha, ScalarField& out);
/// One Jacobi sweep of (I - alpha*laplacian) x = rhs, Neumann edges; returns max |x_new - x|.
double diffuse_implicit_sweep(const ScalarField& rhs, const ScalarField& x, double alpha,
                              ScalarField& out);
/// Residual r = G^T (vel - G p) + source of the projection normal equations;
/// returns max |r|. G is the central-difference gradient onto interior cells,
/// so without a source r = -div(vel - G p). `source` may be null.
double projection_residual(const VectorField& vel, const ScalarField& p, const ScalarField* source,
                           VectorField& scratch, ScalarField& r);
/// p += omega * r / diag wherever diag > 0.
void jacobi_update(ScalarField& p, const ScalarField& r, const ScalarField& diag, double omega);
/// Interior cells: vel - G p. Boundary ring copied unchanged.
void subtract_gradient(const VectorField& vel, const ScalarField& p, VectorField& out);
/// 3x3 convolution, replicate padding, CHW layout.
void conv_forward(const ConvShape& shape, std::span<const double> in, std::span<const double> weight,
                  std::span<const double> bias, std::span<double> out);
/// Gradients of conv_forward. grad_in may be empty to skip the input gradient.
/// grad_weight and grad_bias are overwritten, not accumulated.
void conv_backward(const ConvShape& shape, std::span<const double> in, std::span<const double> weight,
                   std::span<const double> grad_out, std::span<double> grad_weight,
                   std::span<double> grad_bias, std::span<double> grad_in);

}  // namespace serial

// Same contracts as the serial reference.
namespace omp {

void advect(const ScalarField& src, const VectorField& vel, double dt, ScalarField& out);
void diffuse_explicit(const ScalarField& src, double alpha, ScalarField& out);
double diffuse_implicit_sweep(const ScalarField& rhs, const ScalarField& x, double alpha,
                              ScalarField& out);
double projection_residual(const VectorField& vel, const ScalarField& p, const ScalarField* source,
                           VectorField& scratch, ScalarField& r);
void jacobi_update(ScalarField& p, const ScalarField& r, const ScalarField& diag, double omega);
void subtract_gradient(const VectorField& vel, const ScalarField& p, VectorField& out);
void conv_forward(const ConvShape& shape, std::span<const double> in, std::span<const double> weight,
                  std::span<const double> bias, std::span<double> out);
void conv_backward(const ConvShape& shape, std::span<const double> in, std::span<const double> weight,
                   std::span<const double> grad_out, std::span<double> grad_weight,
                   std::span<double> grad_bias, std::span<double> grad_in);

}  // namespace omp

/// Central-difference divergence evaluated on every cell. Interior velocities
/// enter through the masked operator -G^T; the boundary ring (wall values)
/// contributes its normal flux to the adjacent interior cells only.
ScalarField divergence(const VectorField& vel);

/// Divergence contributed by the wall ring alone (zero for closed no-slip walls).
ScalarField wall_flux_divergence(const VectorField& vel);

/// Diagonal of G^T G used by the Jacobi pressure iteration.
ScalarField projection_diagonal(int width, int height);

}  // namespace hyper::kernels

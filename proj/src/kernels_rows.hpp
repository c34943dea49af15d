#pragma once

// Row- and channel-granular building blocks shared by the serial and OpenMP
// kernels. The two variants differ only in how they distribute the outer loop.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hyper/error.hpp"
#include "hyper/grid.hpp"
#include "hyper/kernels.hpp"

namespace hyper::kernels::detail {

inline bool interior(int x, int y, int w, int h) { return x > 0 && y > 0 && x < w - 1 && y < h - 1; }

inline void advect_row(const ScalarField& src, const VectorField& vel, double dt, ScalarField& out, int y) {
  for (int x = 0; x < src.width(); ++x) {
    const std::size_t i = src.index(x, y);
    out.values()[i] = bilinear_sample(src, x - vel.u.values()[i] * dt, y - vel.v.values()[i] * dt);
  }
}

inline void diffuse_explicit_row(const ScalarField& src, double alpha, ScalarField& out, int y) {
  const int w = src.width();
  const int h = src.height();
  for (int x = 0; x < w; ++x) {
    const double c = src.at(x, y);
    double lap = 0.0;
    if (x > 0) lap += src.at(x - 1, y) - c;
    if (x < w - 1) lap += src.at(x + 1, y) - c;
    if (y > 0) lap += src.at(x, y - 1) - c;
    if (y < h - 1) lap += src.at(x, y + 1) - c;
    out.at(x, y) = c + alpha * lap;
  }
}

inline double diffuse_implicit_row(const ScalarField& rhs, const ScalarField& x_old, double alpha,
                                   ScalarField& out, int y) {
  const int w = rhs.width();
  const int h = rhs.height();
  double change = 0.0;
  for (int x = 0; x < w; ++x) {
    double nsum = 0.0;
    int n = 0;
    if (x > 0) { nsum += x_old.at(x - 1, y); ++n; }
    if (x < w - 1) { nsum += x_old.at(x + 1, y); ++n; }
    if (y > 0) { nsum += x_old.at(x, y - 1); ++n; }
    if (y < h - 1) { nsum += x_old.at(x, y + 1); ++n; }
    const double next = (rhs.at(x, y) + alpha * nsum) / (1.0 + alpha * n);
    change = std::max(change, std::abs(next - x_old.at(x, y)));
    out.at(x, y) = next;
  }
  return change;
}

// scratch = mask * (vel - G p)
inline void masked_velocity_row(const VectorField& vel, const ScalarField& p, VectorField& scratch, int y) {
  const int w = p.width();
  const int h = p.height();
  for (int x = 0; x < w; ++x) {
    if (interior(x, y, w, h)) {
      scratch.u.at(x, y) = vel.u.at(x, y) - 0.5 * (p.at(x + 1, y) - p.at(x - 1, y));
      scratch.v.at(x, y) = vel.v.at(x, y) - 0.5 * (p.at(x, y + 1) - p.at(x, y - 1));
    } else {
      scratch.u.at(x, y) = 0.0;
      scratch.v.at(x, y) = 0.0;
    }
  }
}

// r = G^T scratch + source, returns row max |r|
inline double transpose_gradient_row(const VectorField& m, const ScalarField* source, ScalarField& r, int y) {
  const int w = r.width();
  const int h = r.height();
  double peak = 0.0;
  for (int x = 0; x < w; ++x) {
    const double left = x > 0 ? m.u.at(x - 1, y) : 0.0;
    const double right = x < w - 1 ? m.u.at(x + 1, y) : 0.0;
    const double down = y > 0 ? m.v.at(x, y - 1) : 0.0;
    const double up = y < h - 1 ? m.v.at(x, y + 1) : 0.0;
    double value = 0.5 * ((left - right) + (down - up));
    if (source) value += source->at(x, y);
    r.at(x, y) = value;
    peak = std::max(peak, std::abs(value));
  }
  return peak;
}

inline void jacobi_update_row(ScalarField& p, const ScalarField& r, const ScalarField& diag, double omega, int y) {
  for (int x = 0; x < p.width(); ++x) {
    const double d = diag.at(x, y);
    if (d > 0.0) p.at(x, y) += omega * r.at(x, y) / d;
  }
}

inline void subtract_gradient_row(const VectorField& vel, const ScalarField& p, VectorField& out, int y) {
  const int w = p.width();
  const int h = p.height();
  for (int x = 0; x < w; ++x) {
    if (interior(x, y, w, h)) {
      out.u.at(x, y) = vel.u.at(x, y) - 0.5 * (p.at(x + 1, y) - p.at(x - 1, y));
      out.v.at(x, y) = vel.v.at(x, y) - 0.5 * (p.at(x, y + 1) - p.at(x, y - 1));
    } else {
      out.u.at(x, y) = vel.u.at(x, y);
      out.v.at(x, y) = vel.v.at(x, y);
    }
  }
}

// Replicate-padded copy of one input channel: (h+2) x (w+2).
inline void pad_channel(const ConvShape& s, std::span<const double> in, std::vector<double>& pad, int c) {
  const int pw = s.width + 2;
  const int ph = s.height + 2;
  const double* src = in.data() + static_cast<std::size_t>(c) * s.height * s.width;
  double* dst = pad.data() + static_cast<std::size_t>(c) * ph * pw;
  for (int py = 0; py < ph; ++py) {
    const int sy = std::clamp(py - 1, 0, s.height - 1);
    for (int px = 0; px < pw; ++px) {
      const int sx = std::clamp(px - 1, 0, s.width - 1);
      dst[py * pw + px] = src[sy * s.width + sx];
    }
  }
}

inline void conv_forward_channel(const ConvShape& s, const std::vector<double>& pad, std::span<const double> weight,
                                 std::span<const double> bias, std::span<double> out, int oc) {
  const int pw = s.width + 2;
  const int ph = s.height + 2;
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int st = s.stride;
  double* plane = out.data() + static_cast<std::size_t>(oc) * oh * ow;
  std::fill(plane, plane + oh * ow, bias[oc]);
  for (int ic = 0; ic < s.in_channels; ++ic) {
    const double* pc = pad.data() + static_cast<std::size_t>(ic) * ph * pw;
    const double* wk = weight.data() + (static_cast<std::size_t>(oc) * s.in_channels + ic) * 9;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double wv = wk[ky * 3 + kx];
        for (int oy = 0; oy < oh; ++oy) {
          const double* row = pc + (oy * st + ky) * pw + kx;
          double* orow = plane + oy * ow;
          if (st == 1) {
            for (int ox = 0; ox < ow; ++ox) orow[ox] += wv * row[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) orow[ox] += wv * row[ox * st];
          }
        }
      }
    }
  }
}

inline void conv_weight_grad_channel(const ConvShape& s, const std::vector<double>& pad,
                                     std::span<const double> grad_out, std::span<double> grad_weight,
                                     std::span<double> grad_bias, int oc) {
  const int pw = s.width + 2;
  const int ph = s.height + 2;
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int st = s.stride;
  const double* g = grad_out.data() + static_cast<std::size_t>(oc) * oh * ow;
  std::vector<double> lane(static_cast<std::size_t>(ow));
  double gb = 0.0;
  for (int i = 0; i < oh * ow; ++i) gb += g[i];
  grad_bias[oc] = gb;
  for (int ic = 0; ic < s.in_channels; ++ic) {
    const double* pc = pad.data() + static_cast<std::size_t>(ic) * ph * pw;
    double* gw = grad_weight.data() + (static_cast<std::size_t>(oc) * s.in_channels + ic) * 9;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        // Column-wise partial sums keep the inner loop free of a serial dependency.
        std::fill(lane.begin(), lane.end(), 0.0);
        for (int oy = 0; oy < oh; ++oy) {
          const double* row = pc + (oy * st + ky) * pw + kx;
          const double* grow = g + oy * ow;
          if (st == 1) {
            for (int ox = 0; ox < ow; ++ox) lane[ox] += grow[ox] * row[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) lane[ox] += grow[ox] * row[ox * st];
          }
        }
        double acc = 0.0;
        for (int ox = 0; ox < ow; ++ox) acc += lane[ox];
        gw[ky * 3 + kx] = acc;
      }
    }
  }
}

// Gradient w.r.t. input channel ic, folded back through the replicate padding.
// gpad is a per-call scratch plane of (h+2) x (w+2).
inline void conv_input_grad_channel(const ConvShape& s, std::span<const double> weight,
                                    std::span<const double> grad_out, std::span<double> grad_in,
                                    std::vector<double>& gpad, int ic) {
  const int pw = s.width + 2;
  const int ph = s.height + 2;
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int st = s.stride;
  std::fill(gpad.begin(), gpad.end(), 0.0);
  for (int oc = 0; oc < s.out_channels; ++oc) {
    const double* g = grad_out.data() + static_cast<std::size_t>(oc) * oh * ow;
    const double* wk = weight.data() + (static_cast<std::size_t>(oc) * s.in_channels + ic) * 9;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double wv = wk[ky * 3 + kx];
        for (int oy = 0; oy < oh; ++oy) {
          double* row = gpad.data() + (oy * st + ky) * pw + kx;
          const double* grow = g + oy * ow;
          if (st == 1) {
            for (int ox = 0; ox < ow; ++ox) row[ox] += wv * grow[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) row[ox * st] += wv * grow[ox];
          }
        }
      }
    }
  }
  double* gi = grad_in.data() + static_cast<std::size_t>(ic) * s.height * s.width;
  std::fill(gi, gi + s.height * s.width, 0.0);
  for (int py = 0; py < ph; ++py) {
    const int sy = std::clamp(py - 1, 0, s.height - 1);
    for (int px = 0; px < pw; ++px) {
      const int sx = std::clamp(px - 1, 0, s.width - 1);
      gi[sy * s.width + sx] += gpad[py * pw + px];
    }
  }
}

inline void check_conv_spans(const ConvShape& s, std::size_t in, std::size_t weight, std::size_t bias,
                             std::size_t out) {
  if (in != s.in_size() || weight != s.weight_count() || bias != static_cast<std::size_t>(s.out_channels) ||
      out != s.out_size())
    throw DimensionError("conv: buffer sizes do not match the convolution shape");
}

}  // namespace hyper::kernels::detail

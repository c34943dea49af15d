// Serial reference vs OpenMP kernels. Usage: bench_kernels [reps] [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <omp.h>

#include "hyper/kernels.hpp"

using namespace hyper;
namespace k = hyper::kernels;

namespace {

ScalarField random_field(int w, int h, std::mt19937_64& rng, double amp) {
  std::uniform_real_distribution<double> u(-amp, amp);
  ScalarField f(w, h);
  for (double& v : f.values()) v = u(rng);
  return f;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double time_ms(int reps, const std::function<void()>& f) {
  f();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
}

void row(const std::string& name, int n, double serial, double parallel) {
  std::printf("%-22s %5d %12.4f %12.4f %8.2fx\n", name.c_str(), n, serial, parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 50;
  if (argc > 2) omp_set_num_threads(std::atoi(argv[2]));
  std::printf("threads %d, reps %d\n", omp_get_max_threads(), reps);
  std::printf("%-22s %5s %12s %12s %9s\n", "kernel", "n", "serial_ms", "omp_ms", "speedup");
  std::mt19937_64 rng(1);
  for (int n : {32, 64, 128, 256}) {
    const auto f = random_field(n, n, rng, 1.0);
    const VectorField vel(random_field(n, n, rng, 2.0), random_field(n, n, rng, 2.0));
    const auto p = random_field(n, n, rng, 1.0);
    ScalarField out(n, n);
    VectorField scratch(n, n), vout(n, n);

    row("advect", n, time_ms(reps, [&] { k::serial::advect(f, vel, 1.0, out); }),
        time_ms(reps, [&] { k::omp::advect(f, vel, 1.0, out); }));
    row("diffuse_explicit", n, time_ms(reps, [&] { k::serial::diffuse_explicit(f, 0.2, out); }),
        time_ms(reps, [&] { k::omp::diffuse_explicit(f, 0.2, out); }));
    row("diffuse_implicit_sweep", n, time_ms(reps, [&] { k::serial::diffuse_implicit_sweep(f, p, 0.5, out); }),
        time_ms(reps, [&] { k::omp::diffuse_implicit_sweep(f, p, 0.5, out); }));
    row("projection_residual", n,
        time_ms(reps, [&] { k::serial::projection_residual(vel, p, nullptr, scratch, out); }),
        time_ms(reps, [&] { k::omp::projection_residual(vel, p, nullptr, scratch, out); }));
    row("subtract_gradient", n, time_ms(reps, [&] { k::serial::subtract_gradient(vel, p, vout); }),
        time_ms(reps, [&] { k::omp::subtract_gradient(vel, p, vout); }));

    const k::ConvShape s{16, 16, n, n, 1};
    const auto in = random_vec(s.in_size(), rng);
    const auto wt = random_vec(s.weight_count(), rng);
    const auto bias = random_vec(16, rng);
    const auto go = random_vec(s.out_size(), rng);
    std::vector<double> co(s.out_size()), gw(wt.size()), gb(16), gi(in.size());
    const int conv_reps = std::max(1, reps / 10);
    row("conv_forward 16->16", n, time_ms(conv_reps, [&] { k::serial::conv_forward(s, in, wt, bias, co); }),
        time_ms(conv_reps, [&] { k::omp::conv_forward(s, in, wt, bias, co); }));
    row("conv_backward 16->16", n,
        time_ms(conv_reps, [&] { k::serial::conv_backward(s, in, wt, go, gw, gb, gi); }),
        time_ms(conv_reps, [&] { k::omp::conv_backward(s, in, wt, go, gw, gb, gi); }));
  }
}

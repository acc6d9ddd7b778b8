#include <chrono>
#include <cstdio>
#include <random>

#include "lvopt/kernels.hpp"

// Compares the serial reference kernels against the OpenMP variants on the
// shapes that dominate training: square matmuls and a full dense layer
// (matmul + bias + relu). Each row reports the best-of-reps wall time per
// call and the max abs difference between the two results, which must be 0
// by the bit-identical contract.

namespace {

using lvopt::Tensor;
namespace k = lvopt::kernels;
using clock_type = std::chrono::steady_clock;

Tensor random_tensor(int rows, int cols, std::mt19937_64& rng) {
  Tensor t(rows, cols);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) t(r, c) = u(rng);
  return t;
}

template <typename F>
double best_seconds(F&& body, int reps) {
  body();  // warmup
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = clock_type::now();
    body();
    const std::chrono::duration<double> dt = clock_type::now() - t0;
    if (dt.count() < best) best = dt.count();
  }
  return best;
}

void report(const char* kernel, const char* size, double serial_s, double parallel_s,
            double diff) {
  std::printf("%-10s %-12s %10.3f %10.3f %8.2fx %12.3g\n", kernel, size, serial_s * 1e3,
              parallel_s * 1e3, serial_s / parallel_s, diff);
}

void bench_matmul(int n, std::mt19937_64& rng) {
  const Tensor A = random_tensor(n, n, rng);
  const Tensor B = random_tensor(n, n, rng);
  Tensor Cs(n, n), Cp(n, n);
  const int reps = n <= 128 ? 20 : 5;
  const double ts = best_seconds([&] { k::matmul(A, B, Cs, false, k::Exec::Serial); }, reps);
  const double tp = best_seconds([&] { k::matmul(A, B, Cp, false, k::Exec::Parallel); }, reps);
  char size[48];
  std::snprintf(size, sizeof size, "%dx%dx%d", n, n, n);
  report("matmul", size, ts, tp, max_abs_diff(Cs, Cp));
}

void bench_layer(int batch, int in, int out, std::mt19937_64& rng) {
  const Tensor X = random_tensor(batch, in, rng);
  const Tensor W = random_tensor(in, out, rng);
  const Tensor b = random_tensor(1, out, rng);
  Tensor Zs(batch, out), Zp(batch, out), Ys(batch, out), Yp(batch, out);
  auto layer = [&](Tensor& Z, Tensor& Y, k::Exec exec) {
    k::matmul(X, W, Z, false, exec);
    k::add_rowvec(Z, b, Z, exec);
    k::relu(Z, Y, exec);
  };
  const double ts = best_seconds([&] { layer(Zs, Ys, k::Exec::Serial); }, 10);
  const double tp = best_seconds([&] { layer(Zp, Yp, k::Exec::Parallel); }, 10);
  char size[48];
  std::snprintf(size, sizeof size, "%dx%d->%d", batch, in, out);
  report("layer", size, ts, tp, max_abs_diff(Ys, Yp));
}

}  // namespace

int main() {
  std::printf("kernel benchmark: %d threads, parallel %s\n", k::thread_count(),
              k::parallel_enabled() ? "enabled" : "disabled");
  std::printf("%-10s %-12s %10s %10s %9s %12s\n", "kernel", "size", "serial ms", "omp ms",
              "speedup", "max |diff|");
  std::mt19937_64 rng(7);
  for (int n : {64, 128, 256, 384}) bench_matmul(n, rng);
  bench_layer(2048, 49, 64, rng);
  bench_layer(2048, 64, 64, rng);
  bench_layer(8192, 64, 128, rng);
  return 0;
}

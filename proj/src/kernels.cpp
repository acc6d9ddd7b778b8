#include "lvopt/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lvopt::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Rough flop threshold below which forking threads costs more than it saves.
constexpr long kParallelThreshold = 64 * 1024;

bool go_parallel(Exec exec, long work) {
  switch (exec) {
    case Exec::Serial:
      return false;
    case Exec::Parallel:
      return true;
    case Exec::Auto:
    default:
      return g_parallel.load(std::memory_order_relaxed) && work >= kParallelThreshold;
  }
}

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel_enabled(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void matmul(const Tensor& A, const Tensor& B, Tensor& C, bool accumulate, Exec exec) {
  check(A.cols() == B.rows(),
        "matmul: inner dimensions differ, " + A.shape_str() + " * " + B.shape_str());
  check(C.rows() == A.rows() && C.cols() == B.cols(),
        "matmul: output shape " + C.shape_str() + " does not match " + A.shape_str() + " * " +
            B.shape_str());
  const int m = A.rows(), k = A.cols(), n = B.cols();
  const long work = static_cast<long>(m) * k * n;
  const bool par = go_parallel(exec, work);
  // Row i of C accumulates over t in ascending order in both branches, so the
  // parallel result is bit-identical to the serial reference.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int i = 0; i < m; ++i) {
    double* ci = C.row(i);
    if (!accumulate)
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = A.row(i);
    for (int t = 0; t < k; ++t) {
      const double a = ai[t];
      const double* bt = B.row(t);
      for (int j = 0; j < n; ++j) ci[j] += a * bt[j];
    }
  }
  (void)par;
}

void matmul_tn(const Tensor& A, const Tensor& B, Tensor& C, bool accumulate, Exec exec) {
  check(A.rows() == B.rows(),
        "matmul_tn: row counts differ, " + A.shape_str() + " vs " + B.shape_str());
  check(C.rows() == A.cols() && C.cols() == B.cols(),
        "matmul_tn: output shape " + C.shape_str() + " does not match");
  const int r = A.rows(), m = A.cols(), n = B.cols();
  const long work = static_cast<long>(r) * m * n;
  const bool par = go_parallel(exec, work);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int i = 0; i < m; ++i) {
    double* ci = C.row(i);
    if (!accumulate)
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    for (int t = 0; t < r; ++t) {
      const double a = A(t, i);
      const double* bt = B.row(t);
      for (int j = 0; j < n; ++j) ci[j] += a * bt[j];
    }
  }
  (void)par;
}

void matmul_nt(const Tensor& A, const Tensor& B, Tensor& C, bool accumulate, Exec exec) {
  check(A.cols() == B.cols(),
        "matmul_nt: column counts differ, " + A.shape_str() + " vs " + B.shape_str());
  check(C.rows() == A.rows() && C.cols() == B.rows(),
        "matmul_nt: output shape " + C.shape_str() + " does not match");
  const int m = A.rows(), k = A.cols(), n = B.rows();
  const long work = static_cast<long>(m) * k * n;
  const bool par = go_parallel(exec, work);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int i = 0; i < m; ++i) {
    double* ci = C.row(i);
    const double* ai = A.row(i);
    for (int j = 0; j < n; ++j) {
      const double* bj = B.row(j);
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += ai[t] * bj[t];
      if (accumulate)
        ci[j] += acc;
      else
        ci[j] = acc;
    }
  }
  (void)par;
}

namespace {

template <class F>
void rowwise(const Tensor& X, Tensor& Y, Exec exec, F&& f) {
  check(X.same_shape(Y), "elementwise kernel: shape mismatch");
  const int m = X.rows(), n = X.cols();
  const bool par = go_parallel(exec, static_cast<long>(m) * n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
  for (int i = 0; i < m; ++i) f(X.row(i), Y.row(i), n, i);
  (void)par;
}

}  // namespace

void add_rowvec(const Tensor& X, const Tensor& b, Tensor& Y, Exec exec) {
  check(b.rows() == 1 && b.cols() == X.cols(),
        "add_rowvec: bias must be 1 x " + std::to_string(X.cols()));
  const double* bp = b.data();
  rowwise(X, Y, exec, [bp](const double* x, double* y, int n, int) {
    for (int j = 0; j < n; ++j) y[j] = x[j] + bp[j];
  });
}

void relu(const Tensor& X, Tensor& Y, Exec exec) {
  rowwise(X, Y, exec, [](const double* x, double* y, int n, int) {
    for (int j = 0; j < n; ++j) y[j] = x[j] > 0.0 ? x[j] : 0.0;
  });
}

void shifted_relu(const Tensor& X, const Tensor& S, Tensor& Y, Exec exec) {
  check(X.same_shape(S), "shifted_relu: shift shape mismatch");
  const Tensor* sp = &S;
  rowwise(X, Y, exec, [sp](const double* x, double* y, int n, int i) {
    const double* s = sp->row(i);
    for (int j = 0; j < n; ++j) {
      const double d = x[j] - s[j];
      y[j] = d > 0.0 ? d : 0.0;
    }
  });
}

void square(const Tensor& X, Tensor& Y, Exec exec) {
  rowwise(X, Y, exec, [](const double* x, double* y, int n, int) {
    for (int j = 0; j < n; ++j) y[j] = x[j] * x[j];
  });
}

void scale(const Tensor& X, double c, Tensor& Y, Exec exec) {
  rowwise(X, Y, exec, [c](const double* x, double* y, int n, int) {
    for (int j = 0; j < n; ++j) y[j] = c * x[j];
  });
}

void add(const Tensor& X, const Tensor& Y, Tensor& Z, Exec exec) {
  check(X.same_shape(Y), "add: shape mismatch " + X.shape_str() + " vs " + Y.shape_str());
  const Tensor* yp = &Y;
  rowwise(X, Z, exec, [yp](const double* x, double* z, int n, int i) {
    const double* y = yp->row(i);
    for (int j = 0; j < n; ++j) z[j] = x[j] + y[j];
  });
}

double sum_all(const Tensor& X) {
  double acc = 0.0;
  const double* p = X.data();
  for (size_t i = 0; i < X.size(); ++i) acc += p[i];
  return acc;
}

void colsum_acc(const Tensor& G, Tensor& gb) {
  check(gb.rows() == 1 && gb.cols() == G.cols(), "colsum_acc: shape mismatch");
  double* b = gb.data();
  for (int i = 0; i < G.rows(); ++i) {
    const double* gi = G.row(i);
    for (int j = 0; j < G.cols(); ++j) b[j] += gi[j];
  }
}

}  // namespace lvopt::kernels

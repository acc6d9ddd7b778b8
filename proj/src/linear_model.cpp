#include "lvopt/linear_model.hpp"

#include <cmath>
#include <string>

#include "lvopt/kernels.hpp"

namespace lvopt {

Tensor LinearModel::predict(const Tensor& S, const Tensor& Act, const Tensor& D) const {
  check(S.cols() == zones && Act.cols() == actions && D.cols() == dists,
        "LinearModel::predict: input width mismatch");
  check(S.rows() == Act.rows() && S.rows() == D.rows(),
        "LinearModel::predict: row count mismatch");
  Tensor out(S.rows(), zones);
  kernels::matmul(S, A, out);
  kernels::matmul(Act, B, out, true);
  kernels::matmul(D, E, out, true);
  kernels::add_rowvec(out, c, out);
  return out;
}

Tensor LinearModel::rollout(const std::vector<double>& s0, const Tensor& actions_in,
                            const Tensor& dist_in) const {
  check(static_cast<int>(s0.size()) == zones, "LinearModel::rollout: s0 width mismatch");
  check(actions_in.rows() == dist_in.rows(), "LinearModel::rollout: horizon mismatch");
  const int T = actions_in.rows();
  Tensor states(T, zones);
  Tensor cur(1, zones), nxt(1, zones), a(1, actions), d(1, dists);
  for (int j = 0; j < zones; ++j) cur(0, j) = s0[j];
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < actions; ++j) a(0, j) = actions_in(t, j);
    for (int j = 0; j < dists; ++j) d(0, j) = dist_in(t, j);
    kernels::matmul(cur, A, nxt);
    kernels::matmul(a, B, nxt, true);
    kernels::matmul(d, E, nxt, true);
    kernels::add_rowvec(nxt, c, nxt);
    for (int j = 0; j < zones; ++j) states(t, j) = nxt(0, j);
    cur = nxt;
  }
  return states;
}

Tensor solve_spd(const Tensor& A, const Tensor& B) {
  check(A.rows() == A.cols(), "solve_spd: matrix must be square");
  check(A.rows() == B.rows(), "solve_spd: dimension mismatch");
  const int n = A.rows(), m = B.cols();

  // Lower-triangular Cholesky factor.
  Tensor L(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (!(s > 0))
          fail("solve_spd: pivot " + std::to_string(i) +
               " is not positive; matrix is rank-deficient beyond ridge rescue");
        L(i, i) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }

  // Forward then back substitution, one right-hand side column at a time.
  Tensor X(n, m);
  std::vector<double> y(n);
  for (int col = 0; col < m; ++col) {
    for (int i = 0; i < n; ++i) {
      double s = B(i, col);
      for (int k = 0; k < i; ++k) s -= L(i, k) * y[k];
      y[i] = s / L(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = y[i];
      for (int k = i + 1; k < n; ++k) s -= L(k, i) * X(k, col);
      X(i, col) = s / L(i, i);
    }
  }
  return X;
}

LinearModel oriiden_identify(const Trajectory& data) {
  const int N = data.steps();
  const int Z = data.zones(), A = data.action_dim(), D = data.dist_dim();
  const int p = Z + A + D + 1;
  check(N >= p, "oriiden_identify: needs at least " + std::to_string(p) + " samples, got " +
                    std::to_string(N));
  check(static_cast<int>(data.final_state.size()) == Z,
        "oriiden_identify: trajectory is missing its final state");
  check(data.states.all_finite() && data.actions.all_finite() && data.dist.all_finite(),
        "oriiden_identify: non-finite data");

  Tensor X(N, p), Y(N, Z);
  for (int t = 0; t < N; ++t) {
    int k = 0;
    for (int j = 0; j < Z; ++j) X(t, k++) = data.states(t, j);
    for (int j = 0; j < A; ++j) X(t, k++) = data.actions(t, j);
    for (int j = 0; j < D; ++j) X(t, k++) = data.dist(t, j);
    X(t, k) = 1.0;
    if (t + 1 < N)
      for (int j = 0; j < Z; ++j) Y(t, j) = data.states(t + 1, j);
  }
  Y.set_row(N - 1, data.final_state);

  Tensor G(p, p), R(p, Z);
  kernels::matmul_tn(X, X, G);
  kernels::matmul_tn(X, Y, R);
  const double ridge = 1e-8;
  for (int i = 0; i < p; ++i) G(i, i) += ridge;

  const Tensor W = solve_spd(G, R);

  LinearModel m;
  m.zones = Z;
  m.actions = A;
  m.dists = D;
  m.A.resize(Z, Z);
  m.B.resize(A, Z);
  m.E.resize(D, Z);
  m.c.resize(1, Z);
  for (int j = 0; j < Z; ++j) {
    int k = 0;
    for (int i = 0; i < Z; ++i) m.A(i, j) = W(k++, j);
    for (int i = 0; i < A; ++i) m.B(i, j) = W(k++, j);
    for (int i = 0; i < D; ++i) m.E(i, j) = W(k++, j);
    m.c(0, j) = W(k, j);
  }

  m.train_residuals = regression_metrics(m.predict(data.states, data.actions, data.dist), Y);
  return m;
}

}  // namespace lvopt

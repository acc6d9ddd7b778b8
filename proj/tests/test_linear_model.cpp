#include <doctest.h>

#include <random>

#include "lvopt/linear_model.hpp"
#include "test_util.hpp"

using namespace lvopt;
using test::random_tensor;

namespace {

Trajectory make_dataset(const BuildingModel& b, const DisturbanceProfile& p, int days,
                        std::uint64_t data_seed) {
  DatasetOptions opt;
  opt.seed = data_seed;
  return generate_dataset(b, p, days, opt);
}

Trajectory make_dataset(double kappa, int days, std::uint64_t seed) {
  BuildingModel b = BuildingModel::desk(4, kappa, seed);
  return make_dataset(b, DisturbanceProfile::desk(4, seed + 1), days, seed + 2);
}

}  // namespace

TEST_CASE("solve_spd matches a hand-solved system and rejects indefinite input") {
  // A = [[4, 2], [2, 3]], B = [[2], [1]] -> x = (1/2, 0) by Cramer.
  Tensor A(2, 2), B(2, 1);
  A(0, 0) = 4;
  A(0, 1) = 2;
  A(1, 0) = 2;
  A(1, 1) = 3;
  B(0, 0) = 2;
  B(1, 0) = 1;
  Tensor x = solve_spd(A, B);
  CHECK(x(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(x(1, 0) == doctest::Approx(0.0).epsilon(1e-14));

  Tensor bad(2, 2);
  bad(0, 0) = 1;
  bad(0, 1) = 2;
  bad(1, 0) = 2;
  bad(1, 1) = 1;
  CHECK_THROWS_WITH_AS(solve_spd(bad, B), doctest::Contains("rank-deficient"),
                       std::runtime_error);
}

TEST_CASE("solve_spd inverts a random SPD system") {
  std::mt19937_64 rng(17);
  const int n = 8;
  Tensor M = random_tensor(n, n, rng);
  Tensor A(n, n);
  // A = M M^T + I is SPD.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = i == j ? 1.0 : 0.0;
      for (int k = 0; k < n; ++k) s += M(i, k) * M(j, k);
      A(i, j) = s;
    }
  Tensor want = random_tensor(n, 3, rng);
  Tensor B(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < n; ++k) s += A(i, k) * want(k, j);
      B(i, j) = s;
    }
  CHECK(max_abs_diff(solve_spd(A, B), want) < 1e-10);
}

TEST_CASE("identification recovers an exactly linear building") {
  BuildingModel b = BuildingModel::desk(4, 0.0, 100);
  DisturbanceProfile p = DisturbanceProfile::desk(4, 101);
  Trajectory train = make_dataset(b, p, 4, 102);
  LinearModel m = oriiden_identify(train);

  CHECK(m.train_residuals.rmse_overall < 1e-6);

  // Held-out weather noise and excitation on the same building and profile.
  Trajectory test = make_dataset(b, p, 2, 555);
  ZoneMetrics zm = evaluate_model(
      [&m](const Tensor& S, const Tensor& A, const Tensor& D) { return m.predict(S, A, D); },
      test);
  CHECK(zm.rmse_overall < 1e-6);
}

TEST_CASE("constant trajectory is absorbed by the intercept") {
  const int N = 64, Z = 2;
  Trajectory t;
  t.states = Tensor::full(N, Z, 23.0);
  t.actions = Tensor::full(N, Z, 1.5);
  t.dist = Tensor::full(N, dist_dim(Z), 4.0);
  t.final_state.assign(Z, 23.0);

  LinearModel m = oriiden_identify(t);
  Tensor pred = m.predict(t.states, t.actions, t.dist);
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < Z; ++c) CHECK(pred(r, c) == doctest::Approx(23.0).epsilon(1e-6));
}

TEST_CASE("identification enforces the sample-count precondition") {
  Trajectory t = make_dataset(0.0, 1, 5);
  // 4 zones: p = 4 + 4 + 9 + 1 = 18 regressors.
  Trajectory small;
  small.states = Tensor(10, 4);
  small.actions = Tensor(10, 4);
  small.dist = Tensor(10, dist_dim(4));
  small.final_state.assign(4, 0.0);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 4; ++c) small.states(r, c) = t.states(r, c);
  CHECK_THROWS_WITH_AS(oriiden_identify(small), doctest::Contains("at least 18 samples"),
                       std::runtime_error);
}

TEST_CASE("identification rejects non-finite data") {
  Trajectory t = make_dataset(0.0, 1, 6);
  t.actions(7, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(oriiden_identify(t), doctest::Contains("non-finite"),
                       std::runtime_error);
}

TEST_CASE("rollout iterates the identified model") {
  Trajectory train = make_dataset(0.0, 4, 300);
  LinearModel m = oriiden_identify(train);

  std::mt19937_64 rng(9);
  const int T = 12;
  Tensor acts = random_tensor(T, 4, rng, 0, 5);
  Tensor dist = random_tensor(T, dist_dim(4), rng, 0, 10);
  std::vector<double> s0 = {24, 25, 23, 26};

  Tensor roll = m.rollout(s0, acts, dist);
  REQUIRE(roll.rows() == T);

  // Manual iteration through predict one row at a time.
  Tensor cur(1, 4), a(1, 4), d(1, dist_dim(4));
  for (int j = 0; j < 4; ++j) cur(0, j) = s0[j];
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < 4; ++j) a(0, j) = acts(t, j);
    for (int j = 0; j < dist_dim(4); ++j) d(0, j) = dist(t, j);
    cur = m.predict(cur, a, d);
    for (int j = 0; j < 4; ++j) CHECK(roll(t, j) == cur(0, j));
  }

  // On a linear building the rollout tracks the simulator closely.
  BuildingModel b = BuildingModel::desk(4, 0.0, 300);
  Tensor dist2 = generate_disturbances(DisturbanceProfile::desk(4, 301), 1, 302);
  Tensor acts2(dist2.rows(), 4);
  Tensor sim = simulate(b, s0, acts2, dist2);
  Tensor lin = m.rollout(s0, acts2, dist2);
  CHECK(max_abs_diff(sim, lin) < 1e-4);
}

TEST_CASE("nonlinear building leaves a measurable residual") {
  Trajectory lin_train = make_dataset(0.0, 4, 400);
  Trajectory non_train = make_dataset(0.6, 4, 400);
  LinearModel lin = oriiden_identify(lin_train);
  LinearModel non = oriiden_identify(non_train);
  CHECK(non.train_residuals.rmse_overall > 10.0 * lin.train_residuals.rmse_overall);
}

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lvopt/graph.hpp"
#include "lvopt/objective.hpp"
#include "test_util.hpp"

using namespace lvopt;

namespace {

OptProblem base_problem(int T, int Z, int A) {
  OptProblem p;
  p.horizon = T;
  p.zones = Z;
  p.actions = A;
  p.prices.assign(T, 0.1);
  p.lower = Tensor::full(T, Z, 22.0);
  p.upper = Tensor::full(T, Z, 24.0);
  p.s0.assign(Z, 23.0);
  p.dist = Tensor(T, 1);
  return p;
}

}  // namespace

TEST_CASE("cost: hand-worked two-step example") {
  OptProblem p = base_problem(2, 1, 1);
  p.prices = {0.1, 0.2};

  Tensor a(2, 1);
  a(0, 0) = 2.0;
  a(1, 0) = 4.0;
  Tensor s(2, 1);
  s(0, 0) = 25.0;  // 1 degree above the upper bound
  s(1, 0) = 21.5;  // 0.5 below the lower bound

  const CostBreakdown c = cost(a, s, p);
  CHECK(c.power == doctest::Approx(0.1 * 2.0 * 0.25 + 0.2 * 4.0 * 0.25).epsilon(1e-14));
  CHECK(c.temperature == doctest::Approx(0.0005 * (1.0 + 0.25)).epsilon(1e-14));
  CHECK(c.total == doctest::Approx(c.power + c.temperature).epsilon(1e-14));

  Tensor inside(2, 1);
  inside(0, 0) = 23.0;
  inside(1, 0) = 22.0;
  CHECK(cost(a, inside, p).temperature == 0.0);
}

TEST_CASE("bound penalty and projection") {
  OptProblem p = base_problem(3, 1, 1);
  Tensor a(3, 1);
  a(0, 0) = -1.0;
  a(1, 0) = 16.0;
  a(2, 0) = 7.0;

  CHECK(bound_penalty(a, p) == doctest::Approx(10.0 * (1.0 + 1.0)).epsilon(1e-14));

  const Tensor proj = project_actions(a, p);
  CHECK(proj(0, 0) == 0.0);
  CHECK(proj(1, 0) == 15.0);
  CHECK(proj(2, 0) == 7.0);
  CHECK(max_abs_diff(project_actions(proj, p), proj) == 0.0);
  CHECK(bound_penalty(proj, p) == 0.0);

  const Tensor s = Tensor::full(3, 1, 23.0);
  CHECK(penalty_objective(a, s, p) ==
        doctest::Approx(cost(a, s, p).total + bound_penalty(a, p)).epsilon(1e-14));
}

TEST_CASE("graph vocabulary covers the objective building blocks") {
  // y = w x as a matmul with a constant weight: 3 * 2 = 6.
  {
    Graph g;
    const int x = g.input("x", 1, 1);
    const int y = g.matmul(g.constant(Tensor::full(1, 1, 3.0)), x);
    g.bind(x, Tensor::full(1, 1, 2.0));
    CHECK(g.forward_scalar(g.sum(y)) == doctest::Approx(6.0).epsilon(1e-14));
  }
  // y = w x^2 via scale by sqrt(w) then square: 4 * 0.5^2 = 1.
  {
    Graph g;
    const int x = g.input("x", 1, 1);
    const int y = g.sum(g.square(g.scale(x, std::sqrt(4.0))));
    g.bind(x, Tensor::full(1, 1, 0.5));
    CHECK(g.forward_scalar(y) == doctest::Approx(1.0).epsilon(1e-14));
  }
  // y = w [x - x0]+^2 via shifted positive part: 2 * (3 - 1)^2 = 8.
  {
    Graph g;
    const int x = g.input("x", 1, 1);
    const int y = g.sum(
        g.square(g.scale(g.positive_part(x, Tensor::full(1, 1, 1.0)), std::sqrt(2.0))));
    g.bind(x, Tensor::full(1, 1, 3.0));
    CHECK(g.forward_scalar(y) == doctest::Approx(8.0).epsilon(1e-14));
    // Inactive side gives exactly zero.
    g.bind(x, Tensor::full(1, 1, 0.5));
    CHECK(g.forward_scalar(y) == 0.0);
  }
}

TEST_CASE("objective layer matches the arithmetic objective on random draws") {
  std::mt19937_64 rng(314);
  std::uniform_int_distribution<int> dims(1, 5);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  for (int draw = 0; draw < 100; ++draw) {
    const int T = dims(rng), Z = dims(rng), A = dims(rng);
    OptProblem p = base_problem(T, Z, A);
    for (int t = 0; t < T; ++t) p.prices[t] = 0.5 * uni(rng);
    p.temp_penalty = 0.01 * uni(rng);
    p.rho = 20.0 * uni(rng);
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < Z; ++i) {
        p.lower(t, i) = 20.0 + 4.0 * uni(rng);
        p.upper(t, i) = p.lower(t, i) + 0.5 + 3.0 * uni(rng);
      }

    // Draw actions beyond the box and states beyond the band to hit every hinge.
    Tensor a(T, A), s(T, Z);
    for (size_t i = 0; i < a.size(); ++i) a.data()[i] = -5.0 + 25.0 * uni(rng);
    for (size_t i = 0; i < s.size(); ++i) s.data()[i] = 15.0 + 15.0 * uni(rng);

    Graph g;
    const int an = g.input("a", T, A);
    const int sn = g.input("s", T, Z);
    const int root = build_objective_layer(g, an, sn, p);
    g.bind(an, a);
    g.bind(sn, s);
    const double got = g.forward_scalar(root);
    const double want = penalty_objective(a, s, p);
    CHECK(std::abs(got - want) <= 1e-9 * (1.0 + std::abs(want)));
  }
}

TEST_CASE("objective layer gradients match central differences") {
  const int T = 3, Z = 2, A = 2;
  OptProblem p = base_problem(T, Z, A);
  p.prices = {0.1, 0.3, 0.2};
  p.temp_penalty = 0.004;
  p.rho = 5.0;

  // Keep every entry at least 0.1 away from its nearest kink so the
  // finite-difference probe never crosses one.
  Tensor a(T, A), s(T, Z);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (size_t i = 0; i < a.size(); ++i) {
    const double u = uni(rng);
    a.data()[i] = u < 0.3 ? -2.0 - u : (u < 0.6 ? 17.0 + u : 3.0 + 8.0 * u);
  }
  for (size_t i = 0; i < s.size(); ++i) {
    const double u = uni(rng);
    s.data()[i] = u < 0.3 ? 26.0 + u : (u < 0.6 ? 19.0 - u : 23.0);
  }

  Graph g;
  const int an = g.input("a", T, A);
  const int sn = g.input("s", T, Z);
  g.mark_differentiable(an);
  g.mark_differentiable(sn);
  const int root = build_objective_layer(g, an, sn, p);
  g.bind(an, a);
  g.bind(sn, s);
  g.forward(root);
  g.backward(root);

  const Tensor ga = test::central_diff_grad(
      [&](const Tensor& ap) { return penalty_objective(ap, s, p); }, a);
  const Tensor gs = test::central_diff_grad(
      [&](const Tensor& sp) { return penalty_objective(a, sp, p); }, s);
  CHECK(test::rel_err(g.grad(an), ga) < 1e-6);
  CHECK(test::rel_err(g.grad(sn), gs) < 1e-6);
}

TEST_CASE("negative squared-term weights are rejected") {
  OptProblem p = base_problem(2, 1, 1);
  Graph g;
  const int an = g.input("a", 2, 1);
  const int sn = g.input("s", 2, 1);

  p.rho = -1.0;
  CHECK_THROWS_WITH_AS(build_objective_layer(g, an, sn, p),
                       doctest::Contains("negative weight for a squared term"),
                       std::runtime_error);
  p.rho = 10.0;
  p.temp_penalty = -0.1;
  CHECK_THROWS_WITH_AS(build_objective_layer(g, an, sn, p),
                       doctest::Contains("negative weight for a squared term"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("nonnegative"), std::runtime_error);
}

TEST_CASE("problem validation rejects malformed setups") {
  {
    OptProblem p = base_problem(2, 1, 1);
    p.horizon = 0;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("horizon"), std::runtime_error);
  }
  {
    OptProblem p = base_problem(2, 1, 1);
    p.prices.pop_back();
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("price count"), std::runtime_error);
  }
  {
    OptProblem p = base_problem(2, 1, 1);
    p.lower(1, 0) = 30.0;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("lower bound above upper"),
                         std::runtime_error);
  }
  {
    OptProblem p = base_problem(2, 1, 1);
    p.action_lo = 20.0;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("action bounds"), std::runtime_error);
  }
  {
    OptProblem p = base_problem(2, 1, 1);
    p.s0.push_back(1.0);
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("s0"), std::runtime_error);
  }
  {
    OptProblem p = base_problem(2, 1, 1);
    p.dist = Tensor(3, 1);
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("disturbance rows"),
                         std::runtime_error);
  }
  {
    OptProblem p = base_problem(2, 1, 1);
    p.upper(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("non-finite"), std::runtime_error);
  }
  CHECK_NOTHROW(base_problem(2, 1, 1).validate());
}

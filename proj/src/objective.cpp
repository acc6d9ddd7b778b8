#include "lvopt/objective.hpp"

#include <algorithm>
#include <cmath>

namespace lvopt {

void OptProblem::validate() const {
  check(horizon >= 1, "problem: horizon must be >= 1");
  check(zones >= 1 && actions >= 1, "problem: zones and actions must be >= 1");
  check(dt > 0, "problem: dt must be positive");
  check(static_cast<int>(prices.size()) == horizon, "problem: price count != horizon");
  check(lower.rows() == horizon && lower.cols() == zones, "problem: lower bound shape");
  check(upper.rows() == horizon && upper.cols() == zones, "problem: upper bound shape");
  for (int t = 0; t < horizon; ++t)
    for (int i = 0; i < zones; ++i)
      check(lower(t, i) <= upper(t, i), "problem: lower bound above upper bound");
  check(action_lo <= action_hi, "problem: action bounds inverted");
  check(static_cast<int>(s0.size()) == zones, "problem: s0 size != zones");
  check(dist.rows() == horizon, "problem: disturbance rows != horizon");
  check(temp_penalty >= 0 && rho >= 0, "problem: penalty weights must be nonnegative");
  check(dist.all_finite() && lower.all_finite() && upper.all_finite(),
        "problem: non-finite data");
}

namespace {
inline double pos(double x) { return x > 0 ? x : 0.0; }
}

CostBreakdown cost(const Tensor& actions, const Tensor& states, const OptProblem& p) {
  check(actions.rows() == p.horizon && actions.cols() == p.actions,
        "cost: action shape mismatch");
  check(states.rows() == p.horizon && states.cols() == p.zones, "cost: state shape mismatch");
  CostBreakdown c;
  for (int t = 0; t < p.horizon; ++t) {
    for (int i = 0; i < p.actions; ++i) c.power += p.prices[t] * actions(t, i) * p.dt;
    for (int i = 0; i < p.zones; ++i) {
      const double over = pos(states(t, i) - p.upper(t, i));
      const double under = pos(p.lower(t, i) - states(t, i));
      c.temperature += p.temp_penalty * (over * over + under * under);
    }
  }
  c.total = c.power + c.temperature;
  return c;
}

double bound_penalty(const Tensor& actions, const OptProblem& p) {
  check(actions.rows() == p.horizon && actions.cols() == p.actions,
        "bound_penalty: action shape mismatch");
  double s = 0;
  for (int t = 0; t < p.horizon; ++t)
    for (int i = 0; i < p.actions; ++i) {
      const double over = pos(actions(t, i) - p.action_hi);
      const double under = pos(p.action_lo - actions(t, i));
      s += over * over + under * under;
    }
  return p.rho * s;
}

double penalty_objective(const Tensor& actions, const Tensor& states, const OptProblem& p) {
  return cost(actions, states, p).total + bound_penalty(actions, p);
}

Tensor project_actions(const Tensor& a, const OptProblem& p) {
  Tensor out = a;
  for (size_t i = 0; i < out.size(); ++i)
    out.data()[i] = std::clamp(out.data()[i], p.action_lo, p.action_hi);
  return out;
}

int build_objective_layer(Graph& g, int actions_node, int states_node, const OptProblem& p) {
  check(g.rows(actions_node) == p.horizon && g.cols(actions_node) == p.actions,
        "objective layer: action node shape mismatch");
  check(g.rows(states_node) == p.horizon && g.cols(states_node) == p.zones,
        "objective layer: state node shape mismatch");
  check(p.temp_penalty >= 0, "objective layer: negative weight for a squared term");
  check(p.rho >= 0, "objective layer: negative weight for a squared term");

  // Power term: sum_t sum_i lambda_t dt a_it as one linear node.
  Tensor price_row(1, p.horizon);
  for (int t = 0; t < p.horizon; ++t) price_row(0, t) = p.prices[t] * p.dt;
  const int power = g.sum(g.matmul(g.constant(price_row, "prices_dt"), actions_node));

  // w [x - x0]+^2 as shift, ReLU, sqrt(w) scale, square, sum.
  auto hinge_sq = [&g](int x, Tensor shift, double w) {
    return g.sum(g.square(g.scale(g.positive_part(x, std::move(shift)), std::sqrt(w))));
  };

  const int over_t = hinge_sq(states_node, p.upper, p.temp_penalty);
  Tensor neg_lower(p.horizon, p.zones);
  for (int t = 0; t < p.horizon; ++t)
    for (int i = 0; i < p.zones; ++i) neg_lower(t, i) = -p.lower(t, i);
  const int under_t = hinge_sq(g.scale(states_node, -1.0), neg_lower, p.temp_penalty);

  const int over_a =
      hinge_sq(actions_node, Tensor::full(p.horizon, p.actions, p.action_hi), p.rho);
  const int under_a = hinge_sq(g.scale(actions_node, -1.0),
                               Tensor::full(p.horizon, p.actions, -p.action_lo), p.rho);

  return g.add(g.add(power, g.add(over_t, under_t)), g.add(over_a, under_a));
}

}  // namespace lvopt

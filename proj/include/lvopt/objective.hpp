#pragma once

#include <vector>

#include "lvopt/graph.hpp"
#include "lvopt/tensor.hpp"

namespace lvopt {

// Day-ahead scheduling instance. Row t of every T-row field refers to the
// step over [t, t+1): `dist` and `prices` to the inputs applied during it,
// `lower`/`upper` to the comfort band for the state it produces.
struct OptProblem {
  int horizon = 0;  // T
  int zones = 0;
  int actions = 0;
  double dt = 0.25;
  std::vector<double> prices;   // $/kWh, one per step
  double temp_penalty = 0.0005; // $/(degC^2 per step)
  double rho = 10.0;            // action-bound penalty weight
  double action_lo = 0.0;
  double action_hi = 15.0;      // kW
  Tensor lower, upper;          // T x zones comfort bounds
  std::vector<double> s0;
  Tensor dist;                  // T x D forecast

  void validate() const;
};

struct CostBreakdown {
  double power = 0;
  double temperature = 0;
  double total = 0;
};

// Power cost plus soft comfort penalty over the rolled-out states:
// sum_t sum_i lambda_t a_it dt + P ([s - upper]+^2 + [lower - s]+^2).
CostBreakdown cost(const Tensor& actions, const Tensor& states, const OptProblem& p);

// rho * sum([a - hi]+^2 + [lo - a]+^2).
double bound_penalty(const Tensor& actions, const OptProblem& p);

// cost(...).total + bound_penalty(...): the penalty objective every solver
// minimizes.
double penalty_objective(const Tensor& actions, const Tensor& states, const OptProblem& p);

// Elementwise clamp to [action_lo, action_hi].
Tensor project_actions(const Tensor& a, const OptProblem& p);

// Appends the objective layer to a graph: a scalar root computing the penalty
// objective from an actions node (T x A) and a states node (T x Z), composed
// from linear, squared, and shifted-ReLU-squared primitives. Throws if a
// squared term carries a negative weight.
int build_objective_layer(Graph& g, int actions_node, int states_node, const OptProblem& p);

}  // namespace lvopt

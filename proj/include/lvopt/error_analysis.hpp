#pragma once

#include <string>
#include <vector>

#include "lvopt/latent.hpp"
#include "lvopt/objective.hpp"
#include "lvopt/solvers.hpp"

namespace lvopt {

// Reconstruction and model errors over a trajectory's transitions. All arrays
// share the transition dimension: row t covers the step from states row t to
// its successor, with the stored final state closing the last row. The state
// reconstruction error is taken at the successor so that
// model - state == D_s(target latent) - D_s(target latent - latent_model)
// holds per sample.
struct LatentErrorReport {
  Tensor state;         // e^s: successor state minus its own reconstruction
  Tensor action;        // e^a: action minus its reconstruction
  Tensor dist;          // e^d: disturbance minus its reconstruction
  Tensor model;         // e^m: successor state minus decoded model prediction
  Tensor latent_model;  // latent learning error: encoded successor minus prediction
};

LatentErrorReport latent_errors(const LatentModelSet& m, const Trajectory& data);

// Solved-versus-actual gaps of one optimization result.
struct DecisionErrorReport {
  std::string method;
  Tensor action;         // a'' - a'; zero wherever a' already sat within bounds
  Tensor state;          // s'' - s'
  double objective = 0;  // C(a'', s'') - C(a', s')
};

DecisionErrorReport decision_errors(const OptResult& r, const OptProblem& p);

// Same report, but also replays the ground-truth rollout: the stored actual
// states must match sim(a'') bit for bit, and an optsim result's predicted
// states must likewise match sim(a'), which makes the state gap exactly
// F(a' + e_a, d) - F(a', d).
DecisionErrorReport decision_errors(const OptResult& r, const OptProblem& p,
                                    const Simulator& sim);

// Per-zone temperature-violation penalty u_i = sum_t P ([s-upper]+^2 +
// [lower-s]+^2); sums to cost().temperature over zones.
std::vector<double> zone_penalties(const Tensor& states, const OptProblem& p);

struct ZoneFlag {
  int zone = 0;
  std::string method;
  double penalty = 0;  // u_{i,x} on the method's actual states
  bool abnormal = false;
};

// Compares each method's realized per-zone penalty with the reference
// (ground-truth) result: zone i of method x is abnormal when
// |u_{i,x} - u_{i,0}| / (u_{i,0} + sigma) > threshold.
std::vector<ZoneFlag> classify_zones(const std::vector<const OptResult*>& methods,
                                     const OptResult& reference, const OptProblem& p,
                                     double threshold = 12.0, double sigma = 1e-6);

void save_latent_errors_json(const LatentErrorReport& r, const std::string& path);
void save_decision_errors_json(const DecisionErrorReport& r, const std::string& path);
// CSV with header: zone,method,penalty,flag
void save_zone_flags_csv(const std::vector<ZoneFlag>& flags, const std::string& path);

}  // namespace lvopt

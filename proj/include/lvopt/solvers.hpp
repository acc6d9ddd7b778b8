#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lvopt/latent.hpp"
#include "lvopt/linear_model.hpp"
#include "lvopt/objective.hpp"
#include "lvopt/thermal.hpp"

namespace lvopt {

struct SolverConfig {
  int max_iters = 2000;   // K
  double eta = 0.05;      // initial step size
  int k1 = 5;             // consecutive increases before halving eta
  int k2 = 50;            // consecutive flat objectives before early stop
  double stop_delta = 0.01;
  double radius = 0.01;   // zeroth-order perturbation radius / GT difference step
  double momentum = 0.9;  // sim solvers only
  std::uint64_t seed = 0;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0;
  double step_size = 0;
};

struct OptResult {
  std::string method;
  Tensor latent_actions;     // final latent iterate, empty for original-space solvers
  Tensor decoded_actions;    // a' (T x A)
  Tensor projected_actions;  // a'' clamped to the action bounds
  Tensor predicted_states;   // s' from the solver's own dynamics
  Tensor actual_states;      // s'' from the ground-truth rollout of a''
  CostBreakdown dec, act;
  std::vector<IterationRecord> log;
  int iterations = 0;
  bool early_stopped = false;
  long long objective_evals = 0;  // dynamics evaluations inside the solve loop
  double wall_seconds = 0;
  double per_iter_seconds = 0;
};

// Ground-truth dynamics as a closed-over rollout: T x A actions -> T x Z
// states, using the problem's s0 and disturbance forecast.
using Simulator = std::function<Tensor(const Tensor& actions)>;
Simulator building_simulator(const BuildingModel& b, const OptProblem& p);

// Two-point zeroth-order estimate at x with objective value fx already known:
// xi = (f(x + r u) - fx) / r * u with u ~ U[-1,1]^dim. Exposed for the
// estimator consistency test.
Tensor two_point_estimate(const std::function<double(const Tensor&)>& f, const Tensor& x,
                          double fx, double r, std::mt19937_64& rng);

// Differentiable decoded-rollout objective for OptIden. latent_storage is the
// solver iterate (T x n_a) and must outlive the graph.
struct OptIdenGraph {
  int root = -1;
  int latent_actions = -1;
  int decoded_actions = -1;
  int predicted_states = -1;
};
OptIdenGraph build_optiden_graph(Graph& g, const OptProblem& p, const LatentModelSet& m,
                                 Tensor* latent_storage);

// Analytic gradient of the penalty objective through the affine rollout.
double oriiden_objective(const Tensor& a, const OptProblem& p, const LinearModel& m);
Tensor oriiden_gradient(const Tensor& a, const OptProblem& p, const LinearModel& m);

// The five solvers. All share the adaptive step rule (halve eta after k1
// consecutive objective increases, reset the streak on each halving) and the
// early stop (k2 consecutive |delta| <= stop_delta), log one record per
// iteration with the post-halving eta, and finish with projection and a
// ground-truth rollout of the projected actions.
OptResult groundtruth_solve(const OptProblem& p, const Simulator& sim, const SolverConfig& cfg);
OptResult orisim_solve(const OptProblem& p, const Simulator& sim, const SolverConfig& cfg);
OptResult oriiden_solve(const OptProblem& p, const LinearModel& m, const Simulator& sim,
                        const SolverConfig& cfg);
OptResult optsim_solve(const OptProblem& p, const LatentModelSet& m, const Simulator& sim,
                       const SolverConfig& cfg);
OptResult optiden_solve(const OptProblem& p, const LatentModelSet& m, const Simulator& sim,
                        const SolverConfig& cfg);

// Result persistence: costs and actions as JSON, the iteration log as a CSV
// sidecar `iter, objective, step_size`, and timing as its own sidecar so the
// main report stays byte-identical across reruns.
void save_result_json(const OptResult& r, const std::string& path);
void save_iteration_log_csv(const OptResult& r, const std::string& path);
void save_timing_json(const OptResult& r, const std::string& path);

}  // namespace lvopt

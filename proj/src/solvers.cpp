#include "lvopt/solvers.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "lvopt/kernels.hpp"

namespace lvopt {

void SolverConfig::validate() const {
  check(max_iters >= 1, "solver config: max_iters must be >= 1");
  check(eta > 0, "solver config: eta must be positive");
  check(k1 >= 1 && k2 >= 1, "solver config: k1 and k2 must be >= 1");
  check(stop_delta >= 0, "solver config: stop_delta must be nonnegative");
  check(radius > 0, "solver config: radius must be positive");
  check(momentum >= 0 && momentum < 1, "solver config: momentum must lie in [0, 1)");
}

Simulator building_simulator(const BuildingModel& b, const OptProblem& p) {
  BuildingModel model = b;
  std::vector<double> s0 = p.s0;
  Tensor dist = p.dist;
  return [model, s0, dist](const Tensor& actions) { return simulate(model, s0, actions, dist); };
}

Tensor two_point_estimate(const std::function<double(const Tensor&)>& f, const Tensor& x,
                          double fx, double r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Tensor u(x.rows(), x.cols());
  for (size_t i = 0; i < u.size(); ++i) u.data()[i] = uni(rng);
  Tensor probe = x;
  for (size_t i = 0; i < probe.size(); ++i) probe.data()[i] += r * u.data()[i];
  const double scale = (f(probe) - fx) / r;
  for (size_t i = 0; i < u.size(); ++i) u.data()[i] *= scale;
  return u;
}

namespace {

struct LoopOutcome {
  std::vector<IterationRecord> log;
  bool early_stopped = false;
  int iterations = 0;
};

// One record per iteration: the objective at the current iterate and the step
// size after any halving this iteration. Halve after >= k1 consecutive
// increases (streak resets on halving); stop after >= k2 consecutive
// |delta| <= stop_delta, before the update.
LoopOutcome run_adaptive_loop(const SolverConfig& cfg, const std::string& method,
                              const std::function<double()>& measure,
                              const std::function<void(double eta, double fx)>& advance) {
  LoopOutcome out;
  double eta = cfg.eta;
  double prev = 0;
  int inc_streak = 0, flat_streak = 0;
  for (int k = 0; k < cfg.max_iters; ++k) {
    const double fx = measure();
    if (!std::isfinite(fx))
      fail(method + ": objective became non-finite at iteration " + std::to_string(k));
    if (k > 0) {
      if (fx > prev) {
        if (++inc_streak >= cfg.k1) {
          eta *= 0.5;
          inc_streak = 0;
        }
      } else {
        inc_streak = 0;
      }
      if (std::abs(fx - prev) <= cfg.stop_delta)
        ++flat_streak;
      else
        flat_streak = 0;
    }
    out.log.push_back({k, fx, eta});
    prev = fx;
    if (flat_streak >= cfg.k2) {
      out.early_stopped = true;
      out.iterations = k + 1;
      return out;
    }
    advance(eta, fx);
  }
  out.iterations = cfg.max_iters;
  return out;
}

Tensor mid_power_actions(const OptProblem& p) {
  return Tensor::full(p.horizon, p.actions, 0.5 * p.action_hi);
}

// A simulator failure while measuring or probing counts as a non-finite
// objective, which the adaptive loop reports with the method and iteration.
double simulated_objective(const Tensor& actions, const Simulator& sim, const OptProblem& p) {
  try {
    return penalty_objective(actions, sim(actions), p);
  } catch (const std::runtime_error&) {
    return std::numeric_limits<double>::infinity();
  }
}

void finalize(OptResult& r, const OptProblem& p, const Simulator& sim) {
  r.projected_actions = project_actions(r.decoded_actions, p);
  r.actual_states = sim(r.projected_actions);
  r.dec = cost(r.decoded_actions, r.predicted_states, p);
  r.act = cost(r.projected_actions, r.actual_states, p);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Shared skeleton for solvers whose iterate is a raw or latent action tensor
// evaluated through a black-box objective.
struct LoopTimer {
  Clock::time_point total_start = Clock::now();
  Clock::time_point loop_start;
  void begin_loop() { loop_start = Clock::now(); }
  void finish(OptResult& r, int iterations) {
    r.per_iter_seconds = iterations > 0 ? seconds_since(loop_start) / iterations : 0.0;
    r.wall_seconds = seconds_since(total_start);
  }
};

}  // namespace

OptResult groundtruth_solve(const OptProblem& p, const Simulator& sim, const SolverConfig& cfg) {
  p.validate();
  cfg.validate();
  OptResult r;
  r.method = "groundtruth";
  LoopTimer timer;

  Tensor a = mid_power_actions(p);
  auto objective = [&](const Tensor& act) {
    ++r.objective_evals;
    return simulated_objective(act, sim, p);
  };

  Tensor grad(p.horizon, p.actions);
  timer.begin_loop();
  LoopOutcome out = run_adaptive_loop(
      cfg, r.method, [&] { return objective(a); },
      [&](double eta, double fx) {
        // Forward difference per coordinate: one rollout each.
        for (int t = 0; t < p.horizon; ++t)
          for (int i = 0; i < p.actions; ++i) {
            const double saved = a(t, i);
            a(t, i) = saved + cfg.radius;
            grad(t, i) = (objective(a) - fx) / cfg.radius;
            a(t, i) = saved;
          }
        for (size_t i = 0; i < a.size(); ++i) a.data()[i] -= eta * grad.data()[i];
      });
  r.log = std::move(out.log);
  r.iterations = out.iterations;
  r.early_stopped = out.early_stopped;
  timer.finish(r, r.iterations);

  r.decoded_actions = a;
  r.predicted_states = sim(a);
  finalize(r, p, sim);
  r.wall_seconds = seconds_since(timer.total_start);
  return r;
}

OptResult orisim_solve(const OptProblem& p, const Simulator& sim, const SolverConfig& cfg) {
  p.validate();
  cfg.validate();
  OptResult r;
  r.method = "orisim";
  LoopTimer timer;

  Tensor a = mid_power_actions(p);
  Tensor a_prev = a;
  std::mt19937_64 rng(cfg.seed);
  auto objective = [&](const Tensor& act) {
    ++r.objective_evals;
    return simulated_objective(act, sim, p);
  };

  timer.begin_loop();
  LoopOutcome out = run_adaptive_loop(
      cfg, r.method, [&] { return objective(a); },
      [&](double eta, double fx) {
        const Tensor xi = two_point_estimate(objective, a, fx, cfg.radius, rng);
        Tensor next = a;
        for (size_t i = 0; i < a.size(); ++i)
          next.data()[i] +=
              -eta * xi.data()[i] + cfg.momentum * (a.data()[i] - a_prev.data()[i]);
        a_prev = a;
        a = next;
      });
  r.log = std::move(out.log);
  r.iterations = out.iterations;
  r.early_stopped = out.early_stopped;
  timer.finish(r, r.iterations);

  r.decoded_actions = a;
  r.predicted_states = sim(a);
  finalize(r, p, sim);
  r.wall_seconds = seconds_since(timer.total_start);
  return r;
}

OptResult optsim_solve(const OptProblem& p, const LatentModelSet& m, const Simulator& sim,
                       const SolverConfig& cfg) {
  p.validate();
  cfg.validate();
  check(m.zones == p.zones && m.actions == p.actions, "optsim: model dims mismatch");
  OptResult r;
  r.method = "optsim";
  LoopTimer timer;

  Tensor mid(1, p.actions);
  mid.fill(0.5 * p.action_hi);
  const Tensor z0 = m.encode_action(mid);
  Tensor x(p.horizon, m.dims.action);
  for (int t = 0; t < p.horizon; ++t)
    for (int j = 0; j < m.dims.action; ++j) x(t, j) = z0(0, j);
  Tensor x_prev = x;

  std::mt19937_64 rng(cfg.seed);
  auto objective = [&](const Tensor& lat) {
    ++r.objective_evals;
    return simulated_objective(m.decode_action(lat), sim, p);
  };

  timer.begin_loop();
  LoopOutcome out = run_adaptive_loop(
      cfg, r.method, [&] { return objective(x); },
      [&](double eta, double fx) {
        const Tensor xi = two_point_estimate(objective, x, fx, cfg.radius, rng);
        Tensor next = x;
        for (size_t i = 0; i < x.size(); ++i)
          next.data()[i] +=
              -eta * xi.data()[i] + cfg.momentum * (x.data()[i] - x_prev.data()[i]);
        x_prev = x;
        x = next;
      });
  r.log = std::move(out.log);
  r.iterations = out.iterations;
  r.early_stopped = out.early_stopped;
  timer.finish(r, r.iterations);

  r.latent_actions = x;
  r.decoded_actions = m.decode_action(x);
  r.predicted_states = sim(r.decoded_actions);
  finalize(r, p, sim);
  r.wall_seconds = seconds_since(timer.total_start);
  return r;
}

double oriiden_objective(const Tensor& a, const OptProblem& p, const LinearModel& m) {
  return penalty_objective(a, m.rollout(p.s0, a, p.dist), p);
}

Tensor oriiden_gradient(const Tensor& a, const OptProblem& p, const LinearModel& m) {
  check(a.rows() == p.horizon && a.cols() == p.actions, "oriiden_gradient: shape mismatch");
  const Tensor states = m.rollout(p.s0, a, p.dist);
  const int T = p.horizon, Z = p.zones, A = p.actions;

  auto pos = [](double v) { return v > 0 ? v : 0.0; };
  Tensor grad(T, A);
  Tensor gs(1, Z), back(1, Z), gb(1, A);
  for (int t = T - 1; t >= 0; --t) {
    // gs currently holds dC/d(states row t+1); pull it back through A.
    if (t == T - 1)
      back.fill(0.0);
    else
      kernels::matmul_nt(gs, m.A, back);
    for (int i = 0; i < Z; ++i) {
      const double over = pos(states(t, i) - p.upper(t, i));
      const double under = pos(p.lower(t, i) - states(t, i));
      gs(0, i) = 2.0 * p.temp_penalty * (over - under) + back(0, i);
    }
    kernels::matmul_nt(gs, m.B, gb);
    for (int i = 0; i < A; ++i) {
      const double over = pos(a(t, i) - p.action_hi);
      const double under = pos(p.action_lo - a(t, i));
      grad(t, i) = p.prices[t] * p.dt + 2.0 * p.rho * (over - under) + gb(0, i);
    }
  }
  return grad;
}

OptResult oriiden_solve(const OptProblem& p, const LinearModel& m, const Simulator& sim,
                        const SolverConfig& cfg) {
  p.validate();
  cfg.validate();
  check(m.zones == p.zones && m.actions == p.actions && m.dists == p.dist.cols(),
        "oriiden: model dims mismatch");
  OptResult r;
  r.method = "oriiden";
  LoopTimer timer;

  Tensor a = mid_power_actions(p);
  timer.begin_loop();
  LoopOutcome out = run_adaptive_loop(
      cfg, r.method,
      [&] {
        ++r.objective_evals;
        return oriiden_objective(a, p, m);
      },
      [&](double eta, double) {
        const Tensor grad = oriiden_gradient(a, p, m);
        for (size_t i = 0; i < a.size(); ++i) a.data()[i] -= eta * grad.data()[i];
      });
  r.log = std::move(out.log);
  r.iterations = out.iterations;
  r.early_stopped = out.early_stopped;
  timer.finish(r, r.iterations);

  r.decoded_actions = a;
  r.predicted_states = m.rollout(p.s0, a, p.dist);
  finalize(r, p, sim);
  r.wall_seconds = seconds_since(timer.total_start);
  return r;
}

OptIdenGraph build_optiden_graph(Graph& g, const OptProblem& p, const LatentModelSet& m,
                                 Tensor* latent_storage) {
  p.validate();
  check(m.zones == p.zones && m.actions == p.actions && m.dists == p.dist.cols(),
        "optiden: model/problem dims mismatch");
  check(m.s_stats.fitted() && m.a_stats.fitted() && m.d_stats.fitted(),
        "optiden: model stats not fitted");
  check(latent_storage != nullptr && latent_storage->rows() == p.horizon &&
            latent_storage->cols() == m.dims.action,
        "optiden: latent iterate must be horizon x latent-action-dim");

  OptIdenGraph og;
  og.latent_actions = g.param("latent_actions", latent_storage);

  Tensor s0row(1, p.zones);
  for (int i = 0; i < p.zones; ++i) s0row(0, i) = p.s0[i];
  const int wd = g.constant(m.encode_dist(p.dist), "latent_dist");

  const MlpNodes dyn_nodes = m.dyn.make_const_nodes(g, "dyn");
  const MlpNodes dec_a_nodes = m.dec_a.make_const_nodes(g, "dec_a");
  const MlpNodes dec_s_nodes = m.dec_s.make_const_nodes(g, "dec_s");

  auto denorm = [&g](int node, const NormStats& st, const std::string& tag) {
    const Tensor rg = st.range();
    Tensor diag(st.dim(), st.dim());
    for (int i = 0; i < st.dim(); ++i) diag(i, i) = rg(0, i);
    return g.add(g.matmul(node, g.constant(diag, tag + "_range")),
                 g.constant(st.lo, tag + "_lo"));
  };

  og.decoded_actions =
      denorm(m.dec_a.apply_nodes(g, og.latent_actions, dec_a_nodes), m.a_stats, "a");

  int x = g.constant(m.encode_state(s0row), "x0");
  std::vector<int> latent_states;
  latent_states.reserve(p.horizon);
  for (int t = 0; t < p.horizon; ++t) {
    const int z = g.concat_cols(
        {x, g.slice_rows(og.latent_actions, t, t + 1), g.slice_rows(wd, t, t + 1)});
    x = m.dyn.apply_nodes(g, z, dyn_nodes);
    latent_states.push_back(x);
  }
  og.predicted_states =
      denorm(m.dec_s.apply_nodes(g, g.concat_rows(latent_states), dec_s_nodes), m.s_stats, "s");

  og.root = build_objective_layer(g, og.decoded_actions, og.predicted_states, p);
  return og;
}

OptResult optiden_solve(const OptProblem& p, const LatentModelSet& m, const Simulator& sim,
                        const SolverConfig& cfg) {
  cfg.validate();
  OptResult r;
  r.method = "optiden";
  LoopTimer timer;

  Tensor mid(1, p.actions);
  mid.fill(0.5 * p.action_hi);
  const Tensor z0 = m.encode_action(mid);
  Tensor latent(p.horizon, m.dims.action);
  for (int t = 0; t < p.horizon; ++t)
    for (int j = 0; j < m.dims.action; ++j) latent(t, j) = z0(0, j);

  Graph g;
  const OptIdenGraph og = build_optiden_graph(g, p, m, &latent);

  timer.begin_loop();
  LoopOutcome out = run_adaptive_loop(
      cfg, r.method,
      [&] {
        ++r.objective_evals;
        g.forward(og.root);
        return g.value(og.root)(0, 0);
      },
      [&](double eta, double) {
        g.backward(og.root);
        const Tensor& grad = g.grad(og.latent_actions);
        for (size_t i = 0; i < latent.size(); ++i) latent.data()[i] -= eta * grad.data()[i];
      });
  r.log = std::move(out.log);
  r.iterations = out.iterations;
  r.early_stopped = out.early_stopped;
  timer.finish(r, r.iterations);

  // Refresh the graph at the final iterate to read decoded values.
  ++r.objective_evals;
  g.forward(og.root);
  r.latent_actions = latent;
  r.decoded_actions = g.value(og.decoded_actions);
  r.predicted_states = g.value(og.predicted_states);
  finalize(r, p, sim);
  r.wall_seconds = seconds_since(timer.total_start);
  return r;
}

namespace {

using nlohmann::json;

json tensor_rows(const Tensor& t) {
  json rows = json::array();
  for (int r = 0; r < t.rows(); ++r) rows.push_back(t.row_vec(r));
  return rows;
}

json cost_json(const CostBreakdown& c) {
  return json{{"power", c.power}, {"temperature", c.temperature}, {"total", c.total}};
}

}  // namespace

void save_result_json(const OptResult& r, const std::string& path) {
  json j;
  j["method"] = r.method;
  j["iterations"] = r.iterations;
  j["early_stopped"] = r.early_stopped;
  j["objective_evals"] = r.objective_evals;
  j["final_objective"] = r.log.empty() ? 0.0 : r.log.back().objective;
  j["cost"] = {{"dec", cost_json(r.dec)}, {"act", cost_json(r.act)}};
  if (!r.latent_actions.empty()) j["latent_actions"] = tensor_rows(r.latent_actions);
  j["decoded_actions"] = tensor_rows(r.decoded_actions);
  j["projected_actions"] = tensor_rows(r.projected_actions);
  j["predicted_states"] = tensor_rows(r.predicted_states);
  j["actual_states"] = tensor_rows(r.actual_states);

  std::ofstream f(path);
  check(f.good(), "save_result_json: cannot open " + path);
  f << j.dump(1) << "\n";
  check(f.good(), "save_result_json: write failed for " + path);
}

void save_iteration_log_csv(const OptResult& r, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "save_iteration_log_csv: cannot open " + path);
  f << "iter,objective,step_size\n";
  char buf[80];
  for (const IterationRecord& rec : r.log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", rec.iter, rec.objective, rec.step_size);
    f << buf;
  }
  check(f.good(), "save_iteration_log_csv: write failed for " + path);
}

void save_timing_json(const OptResult& r, const std::string& path) {
  json j;
  j["method"] = r.method;
  j["wall_seconds"] = r.wall_seconds;
  j["per_iter_seconds"] = r.per_iter_seconds;
  j["iterations"] = r.iterations;
  j["objective_evals"] = r.objective_evals;

  std::ofstream f(path);
  check(f.good(), "save_timing_json: cannot open " + path);
  f << j.dump(1) << "\n";
}

}  // namespace lvopt

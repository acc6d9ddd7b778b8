#include "lvopt/error_analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace lvopt {

namespace {

Tensor diff(const Tensor& a, const Tensor& b) {
  check(a.same_shape(b),
        "error_analysis: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

// State reached after each step: rows 1.. of `states` closed by final_state.
Tensor successor_states(const Trajectory& data) {
  const int n = data.steps();
  Tensor s1(n, data.zones());
  for (int t = 0; t + 1 < n; ++t) s1.set_row(t, data.states.row_vec(t + 1));
  s1.set_row(n - 1, data.final_state);
  return s1;
}

}  // namespace

LatentErrorReport latent_errors(const LatentModelSet& m, const Trajectory& data) {
  check(data.steps() > 0, "latent_errors: empty trajectory");
  check(m.zones == data.zones() && m.actions == data.action_dim() && m.dists == data.dist_dim(),
        "latent_errors: model dims mismatch");
  const Tensor s1 = successor_states(data);
  const Tensor lat_a = m.encode_action(data.actions);
  const Tensor lat_d = m.encode_dist(data.dist);
  const Tensor target_lat = m.encode_state(s1);
  const Tensor pred_lat = m.latent_step(m.encode_state(data.states), lat_a, lat_d);

  LatentErrorReport rep;
  rep.state = diff(s1, m.decode_state(target_lat));
  rep.action = diff(data.actions, m.decode_action(lat_a));
  rep.dist = diff(data.dist, m.decode_dist(lat_d));
  rep.model = diff(s1, m.decode_state(pred_lat));
  rep.latent_model = diff(target_lat, pred_lat);
  return rep;
}

DecisionErrorReport decision_errors(const OptResult& r, const OptProblem& p) {
  check(!r.decoded_actions.empty(), "decision_errors: result carries no actions");
  DecisionErrorReport rep;
  rep.method = r.method;
  rep.action = diff(r.projected_actions, r.decoded_actions);
  rep.state = diff(r.actual_states, r.predicted_states);
  rep.objective = cost(r.projected_actions, r.actual_states, p).total -
                  cost(r.decoded_actions, r.predicted_states, p).total;
  return rep;
}

DecisionErrorReport decision_errors(const OptResult& r, const OptProblem& p,
                                    const Simulator& sim) {
  DecisionErrorReport rep = decision_errors(r, p);
  check(max_abs_diff(sim(r.projected_actions), r.actual_states) == 0,
        "decision_errors: stored actual states disagree with a fresh rollout");
  if (r.method == "optsim")
    check(max_abs_diff(sim(r.decoded_actions), r.predicted_states) == 0,
          "decision_errors: optsim predicted states disagree with a fresh rollout");
  return rep;
}

std::vector<double> zone_penalties(const Tensor& states, const OptProblem& p) {
  check(states.rows() == p.horizon && states.cols() == p.zones,
        "zone_penalties: state shape mismatch");
  std::vector<double> u(static_cast<size_t>(p.zones), 0.0);
  for (int t = 0; t < p.horizon; ++t)
    for (int i = 0; i < p.zones; ++i) {
      const double over = std::max(0.0, states(t, i) - p.upper(t, i));
      const double under = std::max(0.0, p.lower(t, i) - states(t, i));
      u[i] += p.temp_penalty * (over * over + under * under);
    }
  return u;
}

std::vector<ZoneFlag> classify_zones(const std::vector<const OptResult*>& methods,
                                     const OptResult& reference, const OptProblem& p,
                                     double threshold, double sigma) {
  check(threshold > 0, "classify_zones: threshold must be positive");
  check(sigma > 0, "classify_zones: sigma must be positive");
  const std::vector<double> u0 = zone_penalties(reference.actual_states, p);
  std::vector<ZoneFlag> flags;
  flags.reserve(methods.size() * u0.size());
  for (const OptResult* r : methods) {
    check(r != nullptr, "classify_zones: null result");
    const std::vector<double> ux = zone_penalties(r->actual_states, p);
    for (int i = 0; i < p.zones; ++i) {
      ZoneFlag z;
      z.zone = i;
      z.method = r->method;
      z.penalty = ux[i];
      z.abnormal = std::abs((ux[i] - u0[i]) / (u0[i] + sigma)) > threshold;
      flags.push_back(z);
    }
  }
  return flags;
}

namespace {

using nlohmann::json;

json tensor_rows(const Tensor& t) {
  json rows = json::array();
  for (int r = 0; r < t.rows(); ++r) rows.push_back(t.row_vec(r));
  return rows;
}

}  // namespace

void save_latent_errors_json(const LatentErrorReport& r, const std::string& path) {
  json j;
  j["state"] = tensor_rows(r.state);
  j["action"] = tensor_rows(r.action);
  j["dist"] = tensor_rows(r.dist);
  j["model"] = tensor_rows(r.model);
  j["latent_model"] = tensor_rows(r.latent_model);

  std::ofstream f(path);
  check(f.good(), "save_latent_errors_json: cannot open " + path);
  f << j.dump(1) << "\n";
  check(f.good(), "save_latent_errors_json: write failed for " + path);
}

void save_decision_errors_json(const DecisionErrorReport& r, const std::string& path) {
  json j;
  j["method"] = r.method;
  j["objective"] = r.objective;
  j["action"] = tensor_rows(r.action);
  j["state"] = tensor_rows(r.state);

  std::ofstream f(path);
  check(f.good(), "save_decision_errors_json: cannot open " + path);
  f << j.dump(1) << "\n";
  check(f.good(), "save_decision_errors_json: write failed for " + path);
}

void save_zone_flags_csv(const std::vector<ZoneFlag>& flags, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "save_zone_flags_csv: cannot open " + path);
  f << "zone,method,penalty,flag\n";
  char buf[40];
  for (const ZoneFlag& z : flags) {
    std::snprintf(buf, sizeof(buf), "%.17g", z.penalty);
    f << z.zone << ',' << z.method << ',' << buf << ',' << (z.abnormal ? 1 : 0) << "\n";
  }
  check(f.good(), "save_zone_flags_csv: write failed for " + path);
}

}  // namespace lvopt

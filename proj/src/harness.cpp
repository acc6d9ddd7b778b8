#include "lvopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lvopt/error_analysis.hpp"
#include "lvopt/objective.hpp"

namespace lvopt {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int to_int(const std::string& v, const std::string& key) {
  size_t pos = 0;
  long out = 0;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  check(pos == v.size() && !v.empty(), "config: invalid integer '" + v + "' for " + key);
  return static_cast<int>(out);
}

double to_double(const std::string& v, const std::string& key) {
  size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  check(pos == v.size() && !v.empty(), "config: invalid number '" + v + "' for " + key);
  return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
  size_t pos = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  check(pos == v.size() && !v.empty(), "config: invalid seed '" + v + "' for " + key);
  return out;
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail("config: invalid flag '" + v + "' for " + key);
}

std::vector<int> to_int_list(const std::string& v, const std::string& key) {
  std::vector<int> out;
  for (const std::string& item : split_list(v)) out.push_back(to_int(item, key));
  return out;
}

SolverConfig& solver_slot(ExperimentConfig& cfg, const std::string& canonical) {
  if (canonical == "groundtruth") return cfg.gt;
  if (canonical == "oriiden") return cfg.oriiden;
  if (canonical == "orisim") return cfg.orisim;
  if (canonical == "optiden") return cfg.optiden;
  return cfg.optsim;
}

void set_experiment_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "zones")
    cfg.zones = to_int(value, key);
  else if (key == "kappa")
    cfg.kappa = to_double(value, key);
  else if (key == "seed")
    cfg.seed = to_u64(value, key);
  else if (key == "train_days")
    cfg.train_days = to_int(value, key);
  else if (key == "test_days")
    cfg.test_days = to_int(value, key);
  else if (key == "price_file")
    cfg.price_file = value;
  else if (key == "out_dir")
    cfg.out_dir = value;
  else if (key == "band_day")
    cfg.band_day = to_double(value, key);
  else if (key == "band_night")
    cfg.band_night = to_double(value, key);
  else if (key == "freerun_baseline")
    cfg.freerun_baseline = to_bool(value, key);
  else if (key == "temp_penalty")
    cfg.temp_penalty = to_double(value, key);
  else if (key == "rho")
    cfg.rho = to_double(value, key);
  else if (key == "action_hi")
    cfg.action_hi = to_double(value, key);
  else if (key == "zone_threshold")
    cfg.zone_threshold = to_double(value, key);
  else if (key == "zone_sigma")
    cfg.zone_sigma = to_double(value, key);
  else if (key == "methods") {
    std::vector<std::string> out;
    for (const std::string& m : split_list(value)) out.push_back(canonical_method(m));
    cfg.methods = out;
  } else
    fail("config: unknown key '" + key + "' in [experiment]");
}

void set_train_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  TrainConfig& t = cfg.train;
  if (key == "omega")
    t.omega = to_double(value, key);
  else if (key == "lr")
    t.lr = to_double(value, key);
  else if (key == "epochs")
    t.epochs = to_int(value, key);
  else if (key == "batch")
    t.batch = to_int(value, key);
  else if (key == "seed")
    t.seed = to_u64(value, key);
  else if (key == "state_dim")
    t.dims.state = to_int(value, key);
  else if (key == "action_dim")
    t.dims.action = to_int(value, key);
  else if (key == "dist_dim")
    t.dims.dist = to_int(value, key);
  else if (key == "state_hidden")
    t.arch.state_hidden = to_int_list(value, key);
  else if (key == "action_hidden")
    t.arch.action_hidden = to_int_list(value, key);
  else if (key == "dist_hidden")
    t.arch.dist_hidden = to_int_list(value, key);
  else if (key == "dyn_hidden")
    t.arch.dyn_hidden = to_int_list(value, key);
  else
    fail("config: unknown key '" + key + "' in [train]");
}

void set_solver_key(SolverConfig& s, const std::string& key, const std::string& value,
                    const std::string& section) {
  if (key == "max_iters")
    s.max_iters = to_int(value, key);
  else if (key == "eta")
    s.eta = to_double(value, key);
  else if (key == "k1")
    s.k1 = to_int(value, key);
  else if (key == "k2")
    s.k2 = to_int(value, key);
  else if (key == "stop_delta")
    s.stop_delta = to_double(value, key);
  else if (key == "radius")
    s.radius = to_double(value, key);
  else if (key == "momentum")
    s.momentum = to_double(value, key);
  else if (key == "seed")
    s.seed = to_u64(value, key);
  else
    fail("config: unknown key '" + key + "' in [" + section + "]");
}

void set_key(ExperimentConfig& cfg, const std::string& section, const std::string& key,
             const std::string& value) {
  if (section == "experiment")
    set_experiment_key(cfg, key, value);
  else if (section == "train")
    set_train_key(cfg, key, value);
  else if (section.rfind("solver.", 0) == 0)
    set_solver_key(solver_slot(cfg, canonical_method(section.substr(7))), key, value, section);
  else
    fail("config: unknown section '[" + section + "]'");
}

int steps_per_day(const BuildingModel& b) {
  return static_cast<int>(std::lround(24.0 / b.dt));
}

std::string day_tag(int day) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "day%02d", day);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  return s;
}

nlohmann::json cost_json(const CostBreakdown& c) {
  return {{"power", c.power}, {"temperature", c.temperature}, {"total", c.total}};
}

nlohmann::json metrics_json(const ZoneMetrics& m) {
  return {{"rmse_overall", m.rmse_overall}, {"rmse_mean", m.rmse_mean},
          {"rmse_std", m.rmse_std},         {"mae_mean", m.mae_mean},
          {"mae_std", m.mae_std},           {"r2_mean", m.r2_mean},
          {"r2_std", m.r2_std}};
}

void write_json(const nlohmann::json& j, const std::string& path, const std::string& op) {
  std::ofstream f(path);
  check(f.good(), op + ": cannot open " + path);
  f << j.dump(1) << "\n";
}

struct Stats {
  int n = 0;
  double mean = 0, stddev = 0;
};

Stats population_stats(const std::vector<double>& xs) {
  Stats st;
  st.n = static_cast<int>(xs.size());
  if (st.n == 0) return st;
  for (double x : xs) st.mean += x;
  st.mean /= st.n;
  double var = 0;
  for (double x : xs) var += (x - st.mean) * (x - st.mean);
  st.stddev = std::sqrt(var / st.n);
  return st;
}

}  // namespace

std::string canonical_method(const std::string& name) {
  const std::string m = trim(name);
  if (m == "gt" || m == "groundtruth") return "groundtruth";
  if (m == "oriiden" || m == "orisim" || m == "optiden" || m == "optsim") return m;
  fail("config: unknown method '" + m + "'");
}

const SolverConfig& ExperimentConfig::solver_for(const std::string& method) const {
  const std::string m = canonical_method(method);
  if (m == "groundtruth") return gt;
  if (m == "oriiden") return oriiden;
  if (m == "orisim") return orisim;
  if (m == "optiden") return optiden;
  return optsim;
}

void ExperimentConfig::validate() const {
  check(zones >= 2, "config: zones must be at least 2");
  check(std::isfinite(kappa) && kappa >= 0, "config: kappa must be nonnegative");
  check(train_days >= 1, "config: train_days must be positive");
  check(test_days >= 1, "config: test_days must be positive");
  check(band_day > 0 && band_night > 0, "config: comfort bands must be positive");
  check(std::isfinite(temp_penalty) && temp_penalty >= 0,
        "config: temp_penalty must be nonnegative");
  check(std::isfinite(rho) && rho >= 0, "config: rho must be nonnegative");
  check(action_hi > 0, "config: action_hi must be positive");
  check(zone_threshold > 0, "config: zone_threshold must be positive");
  check(zone_sigma > 0, "config: zone_sigma must be positive");
  check(!methods.empty(), "config: no methods selected");
  std::set<std::string> seen;
  for (const std::string& m : methods)
    check(seen.insert(canonical_method(m)).second, "config: duplicate method '" + m + "'");
  check(train.epochs >= 1 && train.batch >= 1, "config: train epochs and batch must be positive");
  check(train.lr > 0, "config: train lr must be positive");
  check(train.omega >= 0 && train.omega <= 1, "config: omega must lie in [0, 1]");
  // Latent rollouts only stay on the manifold under genuine compression, so
  // every trained configuration must shrink each variable group.
  check(train.dims.state >= 1 && train.dims.state < zones,
        "config: state_dim must compress (" + std::to_string(train.dims.state) + " vs " +
            std::to_string(zones) + " zones)");
  check(train.dims.action >= 1 && train.dims.action < zones,
        "config: action_dim must compress (" + std::to_string(train.dims.action) + " vs " +
            std::to_string(zones) + " actions)");
  check(train.dims.dist >= 1 && train.dims.dist < dist_dim(zones),
        "config: dist_dim must compress (" + std::to_string(train.dims.dist) + " vs " +
            std::to_string(dist_dim(zones)) + " disturbances)");
  gt.validate();
  oriiden.validate();
  orisim.validate();
  optiden.validate();
  optsim.validate();
  if (!price_file.empty())
    check(std::filesystem::exists(price_file), "config: price file does not exist: " + price_file);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s[0] == '[') {
      check(s.back() == ']', "config: bad section header at line " + std::to_string(lineno));
      section = trim(s.substr(1, s.size() - 2));
      check(section == "experiment" || section == "train" || section.rfind("solver.", 0) == 0,
            "config: unknown section '[" + section + "]' at line " + std::to_string(lineno));
      if (section.rfind("solver.", 0) == 0) canonical_method(section.substr(7));
      continue;
    }
    const size_t eq = s.find('=');
    check(eq != std::string::npos,
          "config: expected key = value at line " + std::to_string(lineno));
    check(!section.empty(), "config: key outside any section at line " + std::to_string(lineno));
    set_key(cfg, section, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  const char* env = std::getenv("LVOPT_OUT_DIR");
  if (env && *env) cfg.out_dir = env;
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "config: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  check(eq != std::string::npos,
        "config: override must be section.key=value, got '" + assignment + "'");
  const std::string left = trim(assignment.substr(0, eq));
  const size_t dot = left.rfind('.');
  check(dot != std::string::npos && dot > 0 && dot + 1 < left.size(),
        "config: override must be section.key=value, got '" + assignment + "'");
  set_key(cfg, left.substr(0, dot), left.substr(dot + 1), trim(assignment.substr(eq + 1)));
}

LatentDims scaled_dims(int zones, int actions, int dists) {
  check(zones >= 1 && actions >= 1 && dists >= 1, "scaled_dims: dimensions must be positive");
  auto rule = [](int n) {
    return std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)) / 2.0)));
  };
  LatentDims d;
  d.state = rule(zones);
  d.action = rule(actions);
  d.dist = rule(dists);
  return d;
}

DataBundle prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  DataBundle db;
  db.building = BuildingModel::desk(cfg.zones, cfg.kappa, cfg.seed);
  db.profile = DisturbanceProfile::desk(cfg.zones, cfg.seed + 1);
  DatasetOptions dopt;
  dopt.seed = cfg.seed + 2;
  db.train_data = generate_dataset(db.building, db.profile, cfg.train_days, dopt);
  dopt.seed = cfg.seed + 3;
  db.test_data = generate_dataset(db.building, db.profile, cfg.test_days, dopt);
  return db;
}

Scenario prepare_scenario(const ExperimentConfig& cfg) {
  DataBundle db = prepare_data(cfg);
  Scenario sc;
  sc.building = std::move(db.building);
  sc.profile = std::move(db.profile);
  sc.train_data = std::move(db.train_data);
  sc.test_data = std::move(db.test_data);

  sc.model = LatentModelSet::make(cfg.zones, sc.building.conditioned, dist_dim(cfg.zones),
                                  cfg.train.dims, cfg.train.arch, cfg.train.seed);
  sc.train_report = train_latent(sc.model, sc.train_data, cfg.train);
  sc.linear = oriiden_identify(sc.train_data);
  sc.latent_test = evaluate_model(sc.model, sc.test_data);
  const LinearModel& lm = sc.linear;
  sc.linear_test = evaluate_model(
      [&lm](const Tensor& S, const Tensor& A, const Tensor& D) { return lm.predict(S, A, D); },
      sc.test_data);

  sc.prices = cfg.price_file.empty() ? synthetic_prices(cfg.test_days)
                                     : ingest_prices(cfg.price_file);
  const size_t need =
      static_cast<size_t>(cfg.test_days) * static_cast<size_t>(steps_per_day(sc.building));
  check(sc.prices.steps.size() >= need,
        "prepare_scenario: price series covers " + std::to_string(sc.prices.steps.size()) +
            " steps but the test period needs " + std::to_string(need));
  return sc;
}

OptProblem day_problem(const Scenario& sc, const ExperimentConfig& cfg, int day) {
  check(day >= 0 && day < cfg.test_days,
        "day_problem: day " + std::to_string(day) + " outside the test period");
  const Trajectory& t = sc.test_data;
  const int T = steps_per_day(sc.building);
  const int start = day * T;
  check(start + T <= t.steps(), "day_problem: test trajectory ends before day " +
                                    std::to_string(day));
  const int Z = t.zones();

  OptProblem p;
  p.horizon = T;
  p.zones = Z;
  p.actions = t.action_dim();
  p.dt = sc.building.dt;
  p.prices = sc.prices.day_slice(day, T);
  p.temp_penalty = cfg.temp_penalty;
  p.rho = cfg.rho;
  p.action_lo = 0.0;
  p.action_hi = cfg.action_hi;
  p.s0 = t.states.row_vec(start);
  p.dist = Tensor(T, t.dist_dim());
  for (int i = 0; i < T; ++i) p.dist.set_row(i, t.dist.row_vec(start + i));

  // Bounds bracket the state each step produces: row i of the baseline is the
  // reference temperature after step start + i.
  Tensor base(T, Z);
  if (cfg.freerun_baseline) {
    base = simulate(sc.building, p.s0, Tensor(T, p.actions), p.dist);
  } else {
    for (int i = 0; i < T; ++i)
      base.set_row(i, start + i + 1 < t.steps() ? t.states.row_vec(start + i + 1)
                                                : t.final_state);
  }
  p.lower = Tensor(T, Z);
  p.upper = Tensor(T, Z);
  for (int i = 0; i < T; ++i) {
    const int hour = static_cast<int>(i * sc.building.dt);
    const double band = hour >= 8 && hour < 20 ? cfg.band_day : cfg.band_night;
    for (int z = 0; z < Z; ++z) {
      p.lower(i, z) = base(i, z) - band;
      p.upper(i, z) = base(i, z) + band;
    }
  }
  p.validate();
  return p;
}

OptResult run_method(const std::string& method, const OptProblem& p, const Scenario& sc,
                     const ExperimentConfig& cfg) {
  const std::string m = canonical_method(method);
  const SolverConfig& scfg = cfg.solver_for(m);
  const Simulator sim = building_simulator(sc.building, p);
  if (m == "groundtruth") return groundtruth_solve(p, sim, scfg);
  if (m == "oriiden") return oriiden_solve(p, sc.linear, sim, scfg);
  if (m == "orisim") return orisim_solve(p, sim, scfg);
  if (m == "optiden") return optiden_solve(p, sc.model, sim, scfg);
  return optsim_solve(p, sc.model, sim, scfg);
}

SuiteReport run_suite(const Scenario& sc, const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::string> methods;
  for (const std::string& m : cfg.methods) methods.push_back(canonical_method(m));
  const int M = static_cast<int>(methods.size());
  const int D = cfg.test_days;

  std::vector<OptProblem> problems;
  problems.reserve(D);
  for (int d = 0; d < D; ++d) problems.push_back(day_problem(sc, cfg, d));

  const bool artifacts = !cfg.out_dir.empty();
  if (artifacts) std::filesystem::create_directories(cfg.out_dir);

  SuiteReport rep;
  rep.zones = sc.building.zones;
  rep.test_days = D;
  rep.train_final_loss = sc.train_report.final_loss;
  rep.latent_test = sc.latent_test;
  rep.linear_test = sc.linear_test;
  rep.runs.resize(static_cast<size_t>(D) * M);
  std::vector<std::vector<OptResult>> results(D);
  std::vector<std::vector<char>> ok(D);

#pragma omp parallel for schedule(dynamic)
  for (int d = 0; d < D; ++d) {
    results[d].resize(M);
    ok[d].assign(M, 0);
    for (int mi = 0; mi < M; ++mi) {
      RunRecord rec;
      rec.day = d;
      rec.method = methods[mi];
      try {
        results[d][mi] = run_method(methods[mi], problems[d], sc, cfg);
        ok[d][mi] = 1;
        const OptResult& r = results[d][mi];
        rec.dec = r.dec;
        rec.act = r.act;
        rec.iterations = r.iterations;
        rec.early_stopped = r.early_stopped;
        rec.objective_evals = r.objective_evals;
        rec.wall_seconds = r.wall_seconds;
        rec.per_iter_seconds = r.per_iter_seconds;
        if (artifacts) {
          const std::string stem = cfg.out_dir + "/" + day_tag(d) + "_" + methods[mi];
          save_result_json(r, stem + ".json");
          save_iteration_log_csv(r, stem + "_log.csv");
          save_timing_json(r, stem + "_timing.json");
        }
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      rep.runs[static_cast<size_t>(d) * M + mi] = std::move(rec);
    }
  }

  for (int d = 0; d < D; ++d) {
    int gt_i = -1;
    for (int mi = 0; mi < M; ++mi)
      if (methods[mi] == "groundtruth" && ok[d][mi]) gt_i = mi;
    if (gt_i < 0) continue;
    std::vector<const OptResult*> ptrs;
    std::vector<int> idx;
    for (int mi = 0; mi < M; ++mi)
      if (ok[d][mi]) {
        ptrs.push_back(&results[d][mi]);
        idx.push_back(mi);
      }
    const std::vector<ZoneFlag> flags = classify_zones(ptrs, results[d][gt_i], problems[d],
                                                       cfg.zone_threshold, cfg.zone_sigma);
    const int Z = sc.building.zones;
    for (size_t k = 0; k < idx.size(); ++k) {
      int count = 0;
      for (int z = 0; z < Z; ++z)
        if (flags[k * Z + z].abnormal) ++count;
      rep.runs[static_cast<size_t>(d) * M + idx[k]].abnormal_zones = count;
    }
    if (artifacts) save_zone_flags_csv(flags, cfg.out_dir + "/" + day_tag(d) + "_zones.csv");
  }

  for (const RunRecord& rec : rep.runs) {
    if (!rec.error.empty()) continue;
    check(std::abs(rec.dec.power + rec.dec.temperature - rec.dec.total) <= 1e-9,
          "run_suite: decision cost breakdown mismatch on day " + std::to_string(rec.day));
    check(std::abs(rec.act.power + rec.act.temperature - rec.act.total) <= 1e-9,
          "run_suite: actual cost breakdown mismatch on day " + std::to_string(rec.day));
  }

  for (int mi = 0; mi < M; ++mi) {
    MethodSummary ms;
    ms.method = methods[mi];
    std::vector<double> act, dec;
    double gap = 0, wall = 0, per_iter = 0;
    int flagged_days = 0, flagged_total = 0;
    for (int d = 0; d < D; ++d) {
      const RunRecord& rec = rep.runs[static_cast<size_t>(d) * M + mi];
      if (!rec.error.empty()) continue;
      act.push_back(rec.act.total);
      dec.push_back(rec.dec.total);
      gap += std::abs(rec.dec.total - rec.act.total);
      wall += rec.wall_seconds;
      per_iter += rec.per_iter_seconds;
      if (rec.abnormal_zones >= 0) {
        ++flagged_days;
        flagged_total += rec.abnormal_zones;
      }
    }
    const Stats act_st = population_stats(act);
    const Stats dec_st = population_stats(dec);
    ms.days_ok = act_st.n;
    ms.act_mean = act_st.mean;
    ms.act_std = act_st.stddev;
    ms.dec_mean = dec_st.mean;
    ms.dec_std = dec_st.stddev;
    ms.gap_mean = act_st.n > 0 ? gap / act_st.n : 0;
    ms.abnormal_zones = flagged_days > 0 ? flagged_total : -1;
    ms.total_wall = wall;
    ms.per_iter_mean = act_st.n > 0 ? per_iter / act_st.n : 0;
    rep.methods.push_back(ms);
  }

  if (artifacts) {
    save_suite_report_json(rep, cfg.out_dir + "/suite_report.json");
    save_suite_costs_csv(rep, cfg.out_dir + "/suite_costs.csv");
    save_suite_timing_csv(rep, cfg.out_dir + "/suite_timing.csv");
  }
  return rep;
}

SuiteReport run_suite(const ExperimentConfig& cfg) {
  const Scenario sc = prepare_scenario(cfg);
  return run_suite(sc, cfg);
}

NoiseReport run_noise_sweep(const Scenario& sc, const ExperimentConfig& cfg,
                            const std::vector<double>& sigmas) {
  cfg.validate();
  check(!sigmas.empty(), "run_noise_sweep: empty sigma grid");
  for (double s : sigmas)
    check(std::isfinite(s) && s >= 0, "run_noise_sweep: sigma must be nonnegative");
  std::vector<std::string> methods;
  for (const std::string& m : cfg.methods) methods.push_back(canonical_method(m));
  const int M = static_cast<int>(methods.size());
  const int S = static_cast<int>(sigmas.size());
  const OptProblem clean = day_problem(sc, cfg, 0);

  NoiseReport rep;
  rep.sigmas = sigmas;
  rep.points.resize(static_cast<size_t>(S) * M);

#pragma omp parallel for schedule(dynamic)
  for (int si = 0; si < S; ++si) {
    // One draw per noise level, shared by every method so the comparison
    // is paired.
    OptProblem noisy = clean;
    noisy.dist = add_noise(clean.dist, sigmas[si], cfg.seed + 101 + static_cast<unsigned>(si));
    for (int mi = 0; mi < M; ++mi) {
      NoisePoint pt;
      pt.sigma = sigmas[si];
      pt.method = methods[mi];
      try {
        const OptResult r = run_method(methods[mi], noisy, sc, cfg);
        pt.sum_dec = r.dec.total;
        // The solver planned against the noisy forecast; score its schedule
        // on the true disturbances.
        const Tensor actual = simulate(sc.building, clean.s0, r.projected_actions, clean.dist);
        pt.sum_act = cost(r.projected_actions, actual, clean).total;
      } catch (const std::exception& e) {
        pt.error = e.what();
      }
      rep.points[static_cast<size_t>(si) * M + mi] = std::move(pt);
    }
  }

  for (int mi = 0; mi < M; ++mi) {
    NoiseSummary ns;
    ns.method = methods[mi];
    std::vector<double> act;
    for (int si = 0; si < S; ++si) {
      const NoisePoint& pt = rep.points[static_cast<size_t>(si) * M + mi];
      if (pt.error.empty()) act.push_back(pt.sum_act);
    }
    const Stats st = population_stats(act);
    ns.points_ok = st.n;
    ns.act_mean = st.mean;
    ns.act_std = st.stddev;
    rep.methods.push_back(ns);
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    save_noise_report_json(rep, cfg.out_dir + "/noise_report.json");
    save_noise_csv(rep, cfg.out_dir + "/noise_costs.csv");
  }
  return rep;
}

ScalingReport run_scaling(const ExperimentConfig& base, const std::vector<int>& zone_counts) {
  check(!zone_counts.empty(), "run_scaling: empty zone list");
  ScalingReport rep;
  rep.references = {{90, 351, 13}, {1080, 4201, 15}};
  for (int Z : zone_counts) {
    check(Z >= 2, "run_scaling: zone counts must be at least 2");
    ScalingEntry e;
    e.zones = Z;
    e.actions = Z;
    e.dists = dist_dim(Z);
    ExperimentConfig cfg = base;
    cfg.zones = Z;
    cfg.out_dir.clear();
    cfg.train.dims = scaled_dims(Z, Z, e.dists);
    e.dims = cfg.train.dims;
    e.original_total = Z + Z + e.dists;
    e.reduced_total = e.dims.state + e.dims.action + e.dims.dist;
    e.ratio = static_cast<double>(e.reduced_total) / e.original_total;
    try {
      const Scenario sc = prepare_scenario(cfg);
      e.linear_rmse = sc.linear_test.rmse_overall;
      e.latent_rmse = sc.latent_test.rmse_overall;
      const OptProblem p = day_problem(sc, cfg, 0);
      e.gt_per_iter = run_method("groundtruth", p, sc, cfg).per_iter_seconds;
      e.optiden_per_iter = run_method("optiden", p, sc, cfg).per_iter_seconds;
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    rep.entries.push_back(e);
  }
  if (!base.out_dir.empty()) {
    std::filesystem::create_directories(base.out_dir);
    save_scaling_report_json(rep, base.out_dir + "/scaling_report.json");
    save_scaling_csv(rep, base.out_dir + "/scaling.csv");
  }
  return rep;
}

void save_suite_report_json(const SuiteReport& r, const std::string& path) {
  nlohmann::json j;
  j["zones"] = r.zones;
  j["test_days"] = r.test_days;
  j["train_final_loss"] = r.train_final_loss;
  j["latent_test"] = metrics_json(r.latent_test);
  j["linear_test"] = metrics_json(r.linear_test);
  j["runs"] = nlohmann::json::array();
  for (const RunRecord& rec : r.runs)
    j["runs"].push_back({{"day", rec.day},
                         {"method", rec.method},
                         {"dec", cost_json(rec.dec)},
                         {"act", cost_json(rec.act)},
                         {"iterations", rec.iterations},
                         {"early_stopped", rec.early_stopped},
                         {"objective_evals", rec.objective_evals},
                         {"abnormal_zones", rec.abnormal_zones},
                         {"error", rec.error}});
  j["methods"] = nlohmann::json::array();
  for (const MethodSummary& ms : r.methods)
    j["methods"].push_back({{"method", ms.method},
                            {"days_ok", ms.days_ok},
                            {"act_mean", ms.act_mean},
                            {"act_std", ms.act_std},
                            {"dec_mean", ms.dec_mean},
                            {"dec_std", ms.dec_std},
                            {"gap_mean", ms.gap_mean},
                            {"abnormal_zones", ms.abnormal_zones}});
  write_json(j, path, "save_suite_report_json");
}

void save_suite_costs_csv(const SuiteReport& r, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "save_suite_costs_csv: cannot open " + path);
  f << "day,method,pow_dec,tem_dec,sum_dec,pow_act,tem_act,sum_act,error\n";
  for (const RunRecord& rec : r.runs)
    f << rec.day << ',' << rec.method << ',' << num(rec.dec.power) << ',' << num(rec.dec.temperature)
      << ',' << num(rec.dec.total) << ',' << num(rec.act.power) << ','
      << num(rec.act.temperature) << ',' << num(rec.act.total) << ',' << csv_safe(rec.error)
      << '\n';
}

void save_suite_timing_csv(const SuiteReport& r, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "save_suite_timing_csv: cannot open " + path);
  f << "day,method,iterations,wall_seconds,per_iter_seconds\n";
  for (const RunRecord& rec : r.runs)
    f << rec.day << ',' << rec.method << ',' << rec.iterations << ',' << num(rec.wall_seconds)
      << ',' << num(rec.per_iter_seconds) << '\n';
}

void save_noise_report_json(const NoiseReport& r, const std::string& path) {
  nlohmann::json j;
  j["sigmas"] = r.sigmas;
  j["points"] = nlohmann::json::array();
  for (const NoisePoint& pt : r.points)
    j["points"].push_back({{"sigma", pt.sigma},
                           {"method", pt.method},
                           {"sum_act", pt.sum_act},
                           {"sum_dec", pt.sum_dec},
                           {"error", pt.error}});
  j["methods"] = nlohmann::json::array();
  for (const NoiseSummary& ns : r.methods)
    j["methods"].push_back({{"method", ns.method},
                            {"points_ok", ns.points_ok},
                            {"act_mean", ns.act_mean},
                            {"act_std", ns.act_std}});
  write_json(j, path, "save_noise_report_json");
}

void save_noise_csv(const NoiseReport& r, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "save_noise_csv: cannot open " + path);
  f << "sigma,method,sum_act,sum_dec,error\n";
  for (const NoisePoint& pt : r.points)
    f << num(pt.sigma) << ',' << pt.method << ',' << num(pt.sum_act) << ',' << num(pt.sum_dec)
      << ',' << csv_safe(pt.error) << '\n';
}

void save_scaling_report_json(const ScalingReport& r, const std::string& path) {
  nlohmann::json j;
  j["entries"] = nlohmann::json::array();
  for (const ScalingEntry& e : r.entries)
    j["entries"].push_back({{"zones", e.zones},
                            {"actions", e.actions},
                            {"dists", e.dists},
                            {"state_dim", e.dims.state},
                            {"action_dim", e.dims.action},
                            {"dist_dim", e.dims.dist},
                            {"original_total", e.original_total},
                            {"reduced_total", e.reduced_total},
                            {"ratio", e.ratio},
                            {"linear_rmse", e.linear_rmse},
                            {"latent_rmse", e.latent_rmse},
                            {"error", e.error}});
  j["references"] = nlohmann::json::array();
  for (const ScalingReference& ref : r.references)
    j["references"].push_back({{"zones", ref.zones},
                               {"original_total", ref.original_total},
                               {"reduced_total", ref.reduced_total}});
  write_json(j, path, "save_scaling_report_json");
}

void save_scaling_csv(const ScalingReport& r, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "save_scaling_csv: cannot open " + path);
  f << "zones,actions,dists,reduced_total,ratio,linear_rmse,latent_rmse,gt_per_iter,"
       "optiden_per_iter,error\n";
  for (const ScalingEntry& e : r.entries)
    f << e.zones << ',' << e.actions << ',' << e.dists << ',' << e.reduced_total << ','
      << num(e.ratio) << ',' << num(e.linear_rmse) << ',' << num(e.latent_rmse) << ','
      << num(e.gt_per_iter) << ',' << num(e.optiden_per_iter) << ',' << csv_safe(e.error)
      << '\n';
}

}  // namespace lvopt

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lvopt/latent.hpp"
#include "lvopt/linear_model.hpp"
#include "lvopt/prices.hpp"
#include "lvopt/solvers.hpp"
#include "lvopt/thermal.hpp"

namespace lvopt {

// Experiment settings: one synthetic building, a training period for model
// fitting, and a test period solved day by day. Parsed from an INI-style
// config (sections [experiment], [train], [solver.<method>]) with
// `section.key=value` overrides layered on top.
struct ExperimentConfig {
  int zones = 12;
  double kappa = 0.3;      // inter-zone coupling scale
  std::uint64_t seed = 1;  // building, profile, and both datasets derive from this
  int train_days = 61;
  int test_days = 31;
  std::string price_file;       // empty: built-in sinusoidal shape
  std::string out_dir = "out";  // empty: keep reports in memory, write no files
  double band_day = 1.5;        // comfort half-width around the baseline, 08:00-20:00
  double band_night = 2.5;
  // Comfort bounds center on the measured thermostat trajectory by default;
  // true centers them on the free-running (zero-action) curve instead, which
  // makes doing nothing feasible and is kept only as a reference variant.
  bool freerun_baseline = false;
  double temp_penalty = 0.0005;
  double rho = 10.0;
  double action_hi = 15.0;
  double zone_threshold = 12.0;  // abnormal-zone classifier threshold U
  double zone_sigma = 1e-6;
  std::vector<std::string> methods = {"groundtruth", "oriiden", "orisim", "optiden", "optsim"};
  TrainConfig train;
  SolverConfig gt, oriiden, orisim, optiden, optsim;

  const SolverConfig& solver_for(const std::string& method) const;
  void validate() const;
};

// Canonical method name ("gt" -> "groundtruth"); throws on unknown tokens.
std::string canonical_method(const std::string& name);

// Config parsing. Both honor the LVOPT_OUT_DIR environment variable on top of
// the file's out_dir; CLI overrides are applied afterwards and win.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Latent widths used by the scaling study: ceil(sqrt(n) / 2) per variable
// group, so the reduced total grows sublinearly with the zone count.
LatentDims scaled_dims(int zones, int actions, int dists);

// Building, disturbance profile, and both datasets: the data stage of
// prepare_scenario, exposed for callers that need no fitted models.
struct DataBundle {
  BuildingModel building;
  DisturbanceProfile profile;
  Trajectory train_data, test_data;
};

DataBundle prepare_data(const ExperimentConfig& cfg);

// Everything a day's solve needs, derived deterministically from the config:
// the building and its disturbance profile, train/test trajectories, the
// trained latent set, the identified affine model, and step prices.
struct Scenario {
  BuildingModel building;
  DisturbanceProfile profile;
  Trajectory train_data, test_data;
  LatentModelSet model;
  LinearModel linear;
  TrainReport train_report;
  ZoneMetrics latent_test, linear_test;  // one-step quality on the test split
  PriceSeries prices;
};

Scenario prepare_scenario(const ExperimentConfig& cfg);

// Day-ahead instance for one test day: 96 quarter-hour steps, comfort bounds
// banded around the day's baseline curve, prices from the series slice.
OptProblem day_problem(const Scenario& sc, const ExperimentConfig& cfg, int day);

// Dispatches one method on one problem using the scenario's models and the
// method's solver config.
OptResult run_method(const std::string& method, const OptProblem& p, const Scenario& sc,
                     const ExperimentConfig& cfg);

// One (day, method) summary row; `error` is empty on success. abnormal_zones
// is -1 when no ground-truth reference run was available for the day.
struct RunRecord {
  int day = 0;
  std::string method;
  CostBreakdown dec, act;
  int iterations = 0;
  bool early_stopped = false;
  long long objective_evals = 0;
  int abnormal_zones = -1;
  double wall_seconds = 0;
  double per_iter_seconds = 0;
  std::string error;
};

// Per-method aggregates over the successful days. Means and population
// standard deviations are over Sum_act / Sum_dec totals; gap_mean averages
// |Sum_dec - Sum_act|. abnormal_zones sums the per-day counts (-1 when no
// reference existed on any day).
struct MethodSummary {
  std::string method;
  int days_ok = 0;
  double act_mean = 0, act_std = 0;
  double dec_mean = 0, dec_std = 0;
  double gap_mean = 0;
  int abnormal_zones = -1;
  double total_wall = 0;
  double per_iter_mean = 0;
};

struct SuiteReport {
  int zones = 0;
  int test_days = 0;
  double train_final_loss = 0;
  ZoneMetrics latent_test, linear_test;
  std::vector<RunRecord> runs;          // day-major, methods in configured order
  std::vector<MethodSummary> methods;   // configured order
};

// Solves every (test day, method) pair. Days run in parallel; the report is
// merged sequentially and is order-stable by (day, method). Solver failures
// are recorded per run without aborting the suite. When out_dir is set, each
// run's result/log/timing files, per-day zone-flag CSVs, and the suite
// report (JSON plus cost and timing CSV sidecars) are written there.
SuiteReport run_suite(const Scenario& sc, const ExperimentConfig& cfg);
SuiteReport run_suite(const ExperimentConfig& cfg);  // prepare_scenario + run

// Disturbance-noise robustness sweep on the first test day. At each sigma one
// multiplicative noise draw perturbs the forecast and every method sees the
// same noisy forecast (paired design); sum_act is scored on the true
// disturbances, sum_dec is the solver's own belief. sigma = 0 reproduces the
// noiseless day exactly.
struct NoisePoint {
  double sigma = 0;
  std::string method;
  double sum_act = 0, sum_dec = 0;
  std::string error;
};

struct NoiseSummary {
  std::string method;
  int points_ok = 0;
  double act_mean = 0, act_std = 0;  // over the sigma grid, population std
};

struct NoiseReport {
  std::vector<double> sigmas;
  std::vector<NoisePoint> points;  // sigma-major, methods in configured order
  std::vector<NoiseSummary> methods;
};

NoiseReport run_noise_sweep(const Scenario& sc, const ExperimentConfig& cfg,
                            const std::vector<double>& sigmas);

// Dimension-scaling study: per zone count, train with scaled_dims, record the
// reduction ratio and test RMSE of the affine vs latent model, and time one
// ground-truth and one optiden day solve. Entries that fail carry the error.
struct ScalingEntry {
  int zones = 0, actions = 0, dists = 0;
  LatentDims dims;
  int original_total = 0, reduced_total = 0;
  double ratio = 0;
  double linear_rmse = 0, latent_rmse = 0;
  double gt_per_iter = 0, optiden_per_iter = 0;
  std::string error;
};

// Published full-scale configurations, recorded as documentation alongside
// the measured entries.
struct ScalingReference {
  int zones = 0;
  int original_total = 0, reduced_total = 0;
};

struct ScalingReport {
  std::vector<ScalingEntry> entries;
  std::vector<ScalingReference> references;
};

ScalingReport run_scaling(const ExperimentConfig& base, const std::vector<int>& zone_counts);

// Report persistence. The JSON reports hold only deterministic fields so
// reruns are byte-identical; wall-clock numbers go to the CSV sidecars.
void save_suite_report_json(const SuiteReport& r, const std::string& path);
void save_suite_costs_csv(const SuiteReport& r, const std::string& path);
void save_suite_timing_csv(const SuiteReport& r, const std::string& path);
void save_noise_report_json(const NoiseReport& r, const std::string& path);
void save_noise_csv(const NoiseReport& r, const std::string& path);
void save_scaling_report_json(const ScalingReport& r, const std::string& path);
void save_scaling_csv(const ScalingReport& r, const std::string& path);

}  // namespace lvopt

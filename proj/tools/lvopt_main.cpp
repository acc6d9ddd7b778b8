#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvopt/harness.hpp"
#include "lvopt/objective.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("-c,--config", c.config,
                  "INI config file: sections [experiment], [train], [solver.<method>]");
  cmd->add_option("-s,--set", c.sets, "Config override, section.key=value (repeatable)");
  cmd->add_option("-o,--out", c.out, "Output directory");
}

lvopt::ExperimentConfig load_config(const CommonOpts& c) {
  lvopt::ExperimentConfig cfg =
      c.config.empty() ? lvopt::parse_config_text("") : lvopt::parse_config_file(c.config);
  for (const std::string& s : c.sets) lvopt::apply_override(cfg, s);
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (cfg.price_file.empty()) {
    const std::string bundled = std::string(LVOPT_SOURCE_DIR) + "/data/default_prices.csv";
    if (std::filesystem::exists(bundled)) cfg.price_file = bundled;
  }
  return cfg;
}

void ensure_out(const lvopt::ExperimentConfig& cfg) {
  lvopt::check(!cfg.out_dir.empty(), "lvopt: out_dir must not be empty");
  std::filesystem::create_directories(cfg.out_dir);
}

void attach_progress(lvopt::ExperimentConfig& cfg) {
  const int total = cfg.train.epochs;
  const int every = std::max(1, total / 10);
  cfg.train.on_epoch = [total, every](int epoch, double loss) {
    if ((epoch + 1) % every == 0 || epoch + 1 == total)
      std::printf("  epoch %d/%d  loss %.6g\n", epoch + 1, total, loss);
  };
}

std::vector<std::vector<double>> tensor_rows(const lvopt::Tensor& t) {
  std::vector<std::vector<double>> rows(t.rows());
  for (int r = 0; r < t.rows(); ++r) rows[r] = t.row_vec(r);
  return rows;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream f(path);
  lvopt::check(f.good(), "lvopt: cannot open " + path);
  f << j.dump(1) << "\n";
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  lvopt::check(f.good(), "lvopt: cannot open " + path);
  nlohmann::json j;
  f >> j;
  return j;
}

int cmd_generate(const CommonOpts& c) {
  const lvopt::ExperimentConfig cfg = load_config(c);
  ensure_out(cfg);
  const lvopt::DataBundle db = lvopt::prepare_data(cfg);
  lvopt::write_csv(cfg.out_dir + "/train_data.csv", db.train_data);
  lvopt::write_csv(cfg.out_dir + "/test_data.csv", db.test_data);
  std::printf("generated %d-zone datasets: %d train steps, %d test steps -> %s\n",
              db.building.zones, db.train_data.steps(), db.test_data.steps(),
              cfg.out_dir.c_str());
  return 0;
}

int cmd_train(const CommonOpts& c) {
  lvopt::ExperimentConfig cfg = load_config(c);
  ensure_out(cfg);
  attach_progress(cfg);
  std::printf("training latent model (%d epochs, dims %d/%d/%d)\n", cfg.train.epochs,
              cfg.train.dims.state, cfg.train.dims.action, cfg.train.dims.dist);
  const lvopt::Scenario sc = lvopt::prepare_scenario(cfg);
  lvopt::save_model(sc.model, cfg.out_dir + "/model.json");
  nlohmann::json j;
  j["initial_loss"] = sc.train_report.initial_loss;
  j["final_loss"] = sc.train_report.final_loss;
  j["epoch_loss"] = sc.train_report.epoch_loss;
  j["latent_test_rmse"] = sc.latent_test.rmse_overall;
  j["linear_test_rmse"] = sc.linear_test.rmse_overall;
  j["reduction_ratio"] = sc.model.reduction_ratio();
  write_json(j, cfg.out_dir + "/train_report.json");
  std::printf("final loss %.6g; test one-step RMSE %.6g (latent) vs %.6g (linear); "
              "reduction %d -> %d\n",
              sc.train_report.final_loss, sc.latent_test.rmse_overall,
              sc.linear_test.rmse_overall, sc.model.original_dim(), sc.model.reduced_dim());
  std::printf("model written to %s/model.json\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_identify_linear(const CommonOpts& c) {
  const lvopt::ExperimentConfig cfg = load_config(c);
  ensure_out(cfg);
  const lvopt::DataBundle db = lvopt::prepare_data(cfg);
  const lvopt::LinearModel lm = lvopt::oriiden_identify(db.train_data);
  const lvopt::ZoneMetrics test = lvopt::evaluate_model(
      [&lm](const lvopt::Tensor& S, const lvopt::Tensor& A, const lvopt::Tensor& D) {
        return lm.predict(S, A, D);
      },
      db.test_data);
  nlohmann::json j;
  j["zones"] = lm.zones;
  j["actions"] = lm.actions;
  j["dists"] = lm.dists;
  j["A"] = tensor_rows(lm.A);
  j["B"] = tensor_rows(lm.B);
  j["E"] = tensor_rows(lm.E);
  j["c"] = lm.c.row_vec(0);
  j["train_rmse"] = lm.train_residuals.rmse_overall;
  j["test_rmse"] = test.rmse_overall;
  write_json(j, cfg.out_dir + "/linear_model.json");
  std::printf("affine model fitted: train RMSE %.6g, test one-step RMSE %.6g -> "
              "%s/linear_model.json\n",
              lm.train_residuals.rmse_overall, test.rmse_overall, cfg.out_dir.c_str());
  return 0;
}

int cmd_optimize(const CommonOpts& c, const std::string& method, int day) {
  lvopt::ExperimentConfig cfg = load_config(c);
  const std::string m = lvopt::canonical_method(method);
  ensure_out(cfg);
  attach_progress(cfg);
  const lvopt::Scenario sc = lvopt::prepare_scenario(cfg);
  const lvopt::OptProblem p = lvopt::day_problem(sc, cfg, day);
  const lvopt::OptResult r = lvopt::run_method(m, p, sc, cfg);
  char stem[64];
  std::snprintf(stem, sizeof stem, "day%02d_%s", day, m.c_str());
  const std::string base = cfg.out_dir + "/" + stem;
  lvopt::save_result_json(r, base + ".json");
  lvopt::save_iteration_log_csv(r, base + "_log.csv");
  lvopt::save_timing_json(r, base + "_timing.json");
  std::printf("%s day %d: Sum_dec %.6f, Sum_act %.6f, %d iterations%s, %.2fs\n", m.c_str(), day,
              r.dec.total, r.act.total, r.iterations, r.early_stopped ? " (early stop)" : "",
              r.wall_seconds);
  std::printf("artifacts written to %s*\n", base.c_str());
  return 0;
}

void print_suite(const lvopt::SuiteReport& rep) {
  std::printf("test one-step RMSE: latent %.6g, linear %.6g\n", rep.latent_test.rmse_overall,
              rep.linear_test.rmse_overall);
  std::printf("%-12s %5s %14s %12s %14s %12s %5s\n", "method", "days", "Sum_act mean", "act std",
              "Sum_dec mean", "gap mean", "abn");
  for (const lvopt::MethodSummary& ms : rep.methods)
    std::printf("%-12s %5d %14.6f %12.6f %14.6f %12.6g %5d\n", ms.method.c_str(), ms.days_ok,
                ms.act_mean, ms.act_std, ms.dec_mean, ms.gap_mean, ms.abnormal_zones);
}

int cmd_suite(const CommonOpts& c) {
  lvopt::ExperimentConfig cfg = load_config(c);
  ensure_out(cfg);
  attach_progress(cfg);
  std::printf("preparing scenario (%d zones, %d train days, %d epochs)\n", cfg.zones,
              cfg.train_days, cfg.train.epochs);
  const lvopt::Scenario sc = lvopt::prepare_scenario(cfg);
  std::printf("solving %d days x %zu methods\n", cfg.test_days, cfg.methods.size());
  const lvopt::SuiteReport rep = lvopt::run_suite(sc, cfg);
  print_suite(rep);
  int failures = 0;
  for (const lvopt::RunRecord& rec : rep.runs)
    if (!rec.error.empty()) {
      ++failures;
      std::printf("FAILED day %d %s: %s\n", rec.day, rec.method.c_str(), rec.error.c_str());
    }
  std::printf("reports written to %s\n", cfg.out_dir.c_str());
  return failures == 0 ? 0 : 1;
}

int cmd_noise_sweep(const CommonOpts& c, const std::vector<double>& sigmas) {
  lvopt::ExperimentConfig cfg = load_config(c);
  ensure_out(cfg);
  attach_progress(cfg);
  const lvopt::Scenario sc = lvopt::prepare_scenario(cfg);
  const lvopt::NoiseReport rep = lvopt::run_noise_sweep(sc, cfg, sigmas);
  std::printf("%-12s %8s %14s %12s\n", "method", "points", "Sum_act mean", "act std");
  for (const lvopt::NoiseSummary& ns : rep.methods)
    std::printf("%-12s %8d %14.6f %12.6f\n", ns.method.c_str(), ns.points_ok, ns.act_mean,
                ns.act_std);
  int failures = 0;
  for (const lvopt::NoisePoint& pt : rep.points)
    if (!pt.error.empty()) {
      ++failures;
      std::printf("FAILED sigma %.2f %s: %s\n", pt.sigma, pt.method.c_str(), pt.error.c_str());
    }
  std::printf("reports written to %s\n", cfg.out_dir.c_str());
  return failures == 0 ? 0 : 1;
}

int cmd_scaling(const CommonOpts& c, const std::vector<int>& zones) {
  lvopt::ExperimentConfig cfg = load_config(c);
  ensure_out(cfg);
  const lvopt::ScalingReport rep = lvopt::run_scaling(cfg, zones);
  std::printf("%6s %10s %8s %8s %12s %12s %12s %14s\n", "zones", "original", "reduced", "ratio",
              "linear rmse", "latent rmse", "gt s/iter", "optiden s/iter");
  for (const lvopt::ScalingEntry& e : rep.entries) {
    if (!e.error.empty()) {
      std::printf("%6d FAILED: %s\n", e.zones, e.error.c_str());
      continue;
    }
    std::printf("%6d %10d %8d %8.3f %12.6g %12.6g %12.6g %14.6g\n", e.zones, e.original_total,
                e.reduced_total, e.ratio, e.linear_rmse, e.latent_rmse, e.gt_per_iter,
                e.optiden_per_iter);
  }
  for (const lvopt::ScalingReference& ref : rep.references)
    std::printf("%6d %10d %8d (reference configuration, not run)\n", ref.zones,
                ref.original_total, ref.reduced_total);
  std::printf("reports written to %s\n", cfg.out_dir.c_str());
  for (const lvopt::ScalingEntry& e : rep.entries)
    if (!e.error.empty()) return 1;
  return 0;
}

int cmd_report(const CommonOpts& c) {
  const lvopt::ExperimentConfig cfg = load_config(c);
  const std::string dir = cfg.out_dir;
  bool any = false;
  if (std::filesystem::exists(dir + "/suite_report.json")) {
    any = true;
    const nlohmann::json j = read_json(dir + "/suite_report.json");
    std::printf("suite: %d zones, %d test days; test RMSE latent %.6g vs linear %.6g\n",
                j["zones"].get<int>(), j["test_days"].get<int>(),
                j["latent_test"]["rmse_overall"].get<double>(),
                j["linear_test"]["rmse_overall"].get<double>());
    std::printf("%-12s %5s %14s %12s %12s %5s\n", "method", "days", "Sum_act mean", "act std",
                "gap mean", "abn");
    for (const nlohmann::json& m : j["methods"])
      std::printf("%-12s %5d %14.6f %12.6f %12.6g %5d\n", m["method"].get<std::string>().c_str(),
                  m["days_ok"].get<int>(), m["act_mean"].get<double>(),
                  m["act_std"].get<double>(), m["gap_mean"].get<double>(),
                  m["abnormal_zones"].get<int>());
    for (const nlohmann::json& r : j["runs"])
      if (!r["error"].get<std::string>().empty())
        std::printf("FAILED day %d %s: %s\n", r["day"].get<int>(),
                    r["method"].get<std::string>().c_str(),
                    r["error"].get<std::string>().c_str());
  }
  if (std::filesystem::exists(dir + "/noise_report.json")) {
    any = true;
    const nlohmann::json j = read_json(dir + "/noise_report.json");
    std::printf("noise sweep over %zu levels\n", j["sigmas"].size());
    std::printf("%-12s %8s %14s %12s\n", "method", "points", "Sum_act mean", "act std");
    for (const nlohmann::json& m : j["methods"])
      std::printf("%-12s %8d %14.6f %12.6f\n", m["method"].get<std::string>().c_str(),
                  m["points_ok"].get<int>(), m["act_mean"].get<double>(),
                  m["act_std"].get<double>());
  }
  if (std::filesystem::exists(dir + "/scaling_report.json")) {
    any = true;
    const nlohmann::json j = read_json(dir + "/scaling_report.json");
    std::printf("scaling entries:\n");
    for (const nlohmann::json& e : j["entries"])
      std::printf("%6d zones: %d -> %d (ratio %.3f)\n", e["zones"].get<int>(),
                  e["original_total"].get<int>(), e["reduced_total"].get<int>(),
                  e["ratio"].get<double>());
    for (const nlohmann::json& r : j["references"])
      std::printf("%6d zones: %d -> %d (reference)\n", r["zones"].get<int>(),
                  r["original_total"].get<int>(), r["reduced_total"].get<int>());
  }
  lvopt::check(any, "report: no reports found in " + dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dimension-reduced day-ahead HVAC scheduling experiments"};
  app.require_subcommand(1);
  int rc = 0;

  CommonOpts gen_opts;
  CLI::App* gen = app.add_subcommand("generate", "Generate the synthetic building datasets");
  add_common(gen, gen_opts);
  gen->callback([&] { rc = cmd_generate(gen_opts); });

  CommonOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "Train the latent model set");
  add_common(train, train_opts);
  train->callback([&] { rc = cmd_train(train_opts); });

  CommonOpts ident_opts;
  CLI::App* ident =
      app.add_subcommand("identify-linear", "Fit the affine baseline model");
  add_common(ident, ident_opts);
  ident->callback([&] { rc = cmd_identify_linear(ident_opts); });

  CommonOpts opt_opts;
  std::string opt_method;
  int opt_day = 0;
  CLI::App* opt = app.add_subcommand("optimize", "Solve one test day with one method");
  add_common(opt, opt_opts);
  opt->add_option("--method", opt_method, "gt, oriiden, orisim, optiden, or optsim")->required();
  opt->add_option("--day", opt_day, "Test day index (0-based)")->required();
  opt->callback([&] { rc = cmd_optimize(opt_opts, opt_method, opt_day); });

  CommonOpts suite_opts;
  CLI::App* suite = app.add_subcommand("suite", "Run every (test day, method) pair");
  add_common(suite, suite_opts);
  suite->callback([&] { rc = cmd_suite(suite_opts); });

  CommonOpts noise_opts;
  std::vector<double> sigmas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  CLI::App* noise =
      app.add_subcommand("noise-sweep", "Disturbance-noise robustness sweep on day 0");
  add_common(noise, noise_opts);
  noise->add_option("--sigmas", sigmas, "Noise levels (comma separated)")->delimiter(',');
  noise->callback([&] { rc = cmd_noise_sweep(noise_opts, sigmas); });

  CommonOpts scale_opts;
  std::vector<int> zone_counts{12, 24, 48};
  CLI::App* scale = app.add_subcommand("scaling", "Dimension-scaling study");
  add_common(scale, scale_opts);
  scale->add_option("--zones", zone_counts, "Zone counts (comma separated)")->delimiter(',');
  scale->callback([&] { rc = cmd_scaling(scale_opts, zone_counts); });

  CommonOpts report_opts;
  CLI::App* report = app.add_subcommand("report", "Print summaries from stored reports");
  add_common(report, report_opts);
  report->callback([&] { rc = cmd_report(report_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lvopt: %s\n", e.what());
    return 1;
  }
  return rc;
}

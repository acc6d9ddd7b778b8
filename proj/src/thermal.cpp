#include "lvopt/thermal.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lvopt {

void BuildingModel::validate() const {
  check(zones > 0, "building: no zones");
  check(conditioned > 0 && conditioned <= zones, "building: conditioned count out of range");
  check(static_cast<int>(capacity.size()) == zones, "building: capacity size");
  check(static_cast<int>(env_u.size()) == zones, "building: env_u size");
  check(static_cast<int>(solar_gain.size()) == zones, "building: solar_gain size");
  check(static_cast<int>(adj.size()) == zones, "building: adjacency size");
  check(cop > 0 && dt > 0 && rated_power > 0, "building: nonpositive constants");
  for (int i = 0; i < zones; ++i) {
    check(capacity[i] > 0, "building: capacity must be positive, zone " + std::to_string(i));
    check(env_u[i] >= 0 && solar_gain[i] >= 0, "building: negative conductance or gain");
    double total_u = env_u[i];
    for (auto [j, u] : adj[i]) {
      check(j >= 0 && j < zones && j != i, "building: bad neighbour index");
      check(u >= 0, "building: negative coupling");
      total_u += u;
      bool mirrored = false;
      for (auto [k, uk] : adj[j])
        if (k == i && uk == u) mirrored = true;
      check(mirrored, "building: adjacency not symmetric between zones " + std::to_string(i) +
                          " and " + std::to_string(j));
    }
    // Explicit Euler stability margin for the linear part.
    check(dt * total_u / capacity[i] < 1.0,
          "building: unstable discretisation at zone " + std::to_string(i));
  }
}

BuildingModel BuildingModel::desk(int zones, double kappa, std::uint64_t seed) {
  check(zones > 0, "desk building: zones must be positive");
  BuildingModel b;
  b.zones = zones;
  b.conditioned = zones;
  b.kappa = kappa;
  std::mt19937_64 rng(seed);
  // Open-plan floor zones sized so the 15 kW rated stage is a realistic
  // equipment choice: peak summed gains land at 30-60% of rated power.
  std::uniform_real_distribution<double> cap(12.0, 20.0);
  std::uniform_real_distribution<double> wall(0.3, 0.8);
  std::uniform_real_distribution<double> env(0.8, 1.5);
  std::uniform_real_distribution<double> gain(1.5, 3.0);
  b.capacity.resize(zones);
  b.env_u.resize(zones);
  b.solar_gain.resize(zones);
  b.adj.assign(zones, {});
  for (int i = 0; i < zones; ++i) {
    b.capacity[i] = cap(rng);
    b.env_u[i] = env(rng);
    b.solar_gain[i] = gain(rng);
  }
  auto link = [&](int i, int j) {
    const double u = wall(rng);
    b.adj[i].push_back({j, u});
    b.adj[j].push_back({i, u});
  };
  constexpr int kPerFloor = 4;
  for (int i = 0; i < zones; ++i) {
    if ((i + 1) % kPerFloor != 0 && i + 1 < zones) link(i, i + 1);
    if (i + kPerFloor < zones) link(i, i + kPerFloor);
  }
  b.validate();
  return b;
}

void step(const BuildingModel& b, const double* s, const double* a, const double* d,
          double* out) {
  const int Z = b.zones;
  const double* sol = d + 1;
  const double* occ = d + 1 + Z;
  const double outdoor = d[0];
  for (int i = 0; i < Z; ++i) {
    check(std::isfinite(s[i]), "step: non-finite state at zone " + std::to_string(i));
    double flow = 0.0;
    for (auto [j, u] : b.adj[i]) flow += u * (s[j] - s[i]);
    const double gap = outdoor - s[i];
    flow += b.env_u[i] * gap;
    flow += b.solar_gain[i] * sol[i];
    flow += occ[i];
    if (i < b.conditioned) flow -= b.cop * a[i];
    flow += b.kappa * gap * std::abs(gap) / 20.0;
    out[i] = s[i] + b.dt / b.capacity[i] * flow;
  }
}

std::vector<double> step(const BuildingModel& b, const std::vector<double>& s,
                         const std::vector<double>& a, const std::vector<double>& d) {
  check(static_cast<int>(s.size()) == b.zones, "step: state size");
  check(static_cast<int>(a.size()) == b.conditioned, "step: action size");
  check(static_cast<int>(d.size()) == dist_dim(b.zones), "step: disturbance size");
  std::vector<double> out(b.zones);
  std::vector<double> tmp(s);  // the adjacency sum must read the pre-step state
  step(b, tmp.data(), a.data(), d.data(), out.data());
  return out;
}

Tensor simulate(const BuildingModel& b, const std::vector<double>& s0, const Tensor& actions,
                const Tensor& dist) {
  check(static_cast<int>(s0.size()) == b.zones, "simulate: s0 size");
  check(actions.cols() == b.conditioned, "simulate: action columns");
  check(dist.cols() == dist_dim(b.zones), "simulate: disturbance columns");
  check(actions.rows() == dist.rows(), "simulate: horizon mismatch");
  const int T = actions.rows();
  Tensor states(T, b.zones);
  std::vector<double> cur = s0;
  for (int t = 0; t < T; ++t) {
    step(b, cur.data(), actions.row(t), dist.row(t), states.row(t));
    for (int i = 0; i < b.zones; ++i) cur[i] = states(t, i);
  }
  return states;
}

void simulate_batch(const BuildingModel& b, const std::vector<double>& s0,
                    const std::vector<const Tensor*>& actions, const Tensor& dist,
                    std::vector<Tensor>& out, kernels::Exec exec) {
  const int n = static_cast<int>(actions.size());
  out.resize(n);
  const bool par = exec == kernels::Exec::Parallel ||
                   (exec == kernels::Exec::Auto && kernels::parallel_enabled() && n > 1);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (par)
#endif
  for (int i = 0; i < n; ++i) out[i] = simulate(b, s0, *actions[i], dist);
  (void)par;
}

DisturbanceProfile DisturbanceProfile::desk(int zones, std::uint64_t seed) {
  DisturbanceProfile p;
  p.zones = zones;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sol(5.0, 9.0);
  p.solar_amp.resize(zones);
  p.occ_amp.resize(zones);
  for (int i = 0; i < zones; ++i) {
    p.solar_amp[i] = sol(rng);
    // Occupancy tracks room size, which also drives the solar aperture, so the
    // two per-zone amplitude vectors stay proportional.
    p.occ_amp[i] = 0.55 * p.solar_amp[i];
  }
  return p;
}

Tensor generate_disturbances(const DisturbanceProfile& p, int days, std::uint64_t seed) {
  check(p.zones > 0, "disturbances: profile has no zones");
  check(static_cast<int>(p.solar_amp.size()) == p.zones, "disturbances: solar_amp size");
  check(static_cast<int>(p.occ_amp.size()) == p.zones, "disturbances: occ_amp size");
  check(days > 0, "disturbances: day count must be positive");
  const int steps_per_day = 96;
  const int T = days * steps_per_day;
  const int Z = p.zones;
  Tensor d(T, dist_dim(Z));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double innov = p.ar_sigma * std::sqrt(std::max(0.0, 1.0 - p.ar_phi * p.ar_phi));
  double noise = 0.0;
  for (int t = 0; t < T; ++t) {
    const int day = t / steps_per_day;
    const double hour = (t % steps_per_day) * 0.25;
    noise = p.ar_phi * noise + innov * gauss(rng);
    const double diurnal = p.out_amp * std::sin(2.0 * M_PI * (hour - 11.0) / 24.0);
    d(t, 0) = p.out_base + p.out_trend_per_day * day + diurnal + noise;
    double sun = 0.0;
    if (hour >= 6.0 && hour <= 18.0) {
      const double u = std::sin(M_PI * (hour - 6.0) / 12.0);
      sun = u * u;
    }
    const double sched = (hour >= 8.0 && hour < 20.0) ? 1.0 : p.occ_night;
    for (int i = 0; i < Z; ++i) {
      d(t, 1 + i) = p.solar_amp[i] * sun;
      d(t, 1 + Z + i) = p.occ_amp[i] * sched;
    }
  }
  return d;
}

Trajectory generate_dataset(const BuildingModel& b, const DisturbanceProfile& p, int days,
                            const DatasetOptions& opt) {
  b.validate();
  const Tensor dist = generate_disturbances(p, days, opt.seed);
  const int T = dist.rows();
  const int Z = b.zones;
  const int A = b.conditioned;
  std::vector<double> setpoints = opt.setpoints;
  if (setpoints.empty()) setpoints.assign(A, opt.setpoint);
  check(static_cast<int>(setpoints.size()) == A, "dataset: setpoint count");
  // Stage at 0.4x rated with dither up to 0.3x rated: the off cluster
  // [0, 0.3r] and the on cluster [0.4r, 0.7r] between them cover most of the
  // usable action range, which downstream models must represent.
  const double stage = opt.stage_power >= 0 ? opt.stage_power : 0.4 * b.rated_power;
  const double dither_max = opt.dither_max >= 0 ? opt.dither_max : 0.3 * b.rated_power;
  std::vector<double> s0 = opt.s0;
  if (s0.empty()) {
    s0.assign(Z, opt.setpoint);
    for (int i = 0; i < A; ++i) s0[i] = setpoints[i];
  }
  check(static_cast<int>(s0.size()) == Z, "dataset: initial state size");

  Trajectory traj;
  traj.states = Tensor(T, Z);
  traj.actions = Tensor(T, A);
  traj.dist = dist;
  traj.final_state.resize(Z);

  std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> dither(0.0, dither_max);
  std::vector<char> cooling(A, 0);
  std::vector<double> cur = s0;
  std::vector<double> next(Z);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < Z; ++i) traj.states(t, i) = cur[i];
    double shared = 0.0;
    if (opt.shared_dither && dither_max > 0) shared = dither(rng);
    for (int i = 0; i < A; ++i) {
      if (cur[i] > setpoints[i] + opt.deadband) cooling[i] = 1;
      else if (cur[i] < setpoints[i] - opt.deadband) cooling[i] = 0;
      double a = cooling[i] ? stage : 0.0;
      if (dither_max > 0) a += opt.shared_dither ? shared : dither(rng);
      traj.actions(t, i) = a;
    }
    step(b, cur.data(), traj.actions.row(t), dist.row(t), next.data());
    cur = next;
  }
  traj.final_state = cur;
  return traj;
}

Tensor add_noise(const Tensor& dist, double sigma, std::uint64_t seed) {
  check(sigma >= 0, "add_noise: sigma must be nonnegative");
  if (sigma == 0.0) return dist;
  Tensor out = dist;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= 1.0 + gauss(rng);
  return out;
}

void write_csv(const std::string& path, const Trajectory& t) {
  std::ofstream f(path);
  check(f.good(), "write_csv: cannot open " + path);
  const int Z = t.zones(), A = t.action_dim();
  check(t.dist.cols() == dist_dim(Z), "write_csv: disturbance layout");
  f << "time";
  for (int i = 1; i <= Z; ++i) f << ",s_" << i;
  for (int i = 1; i <= A; ++i) f << ",a_" << i;
  f << ",d_out";
  for (int i = 1; i <= Z; ++i) f << ",d_sol_" << i;
  for (int i = 1; i <= Z; ++i) f << ",d_occ_" << i;
  f << "\n";
  char buf[32];
  auto put = [&](double v) {
    snprintf(buf, sizeof buf, "%.17g", v);
    f << ',' << buf;
  };
  for (int r = 0; r < t.steps(); ++r) {
    f << r;
    for (int i = 0; i < Z; ++i) put(t.states(r, i));
    for (int i = 0; i < A; ++i) put(t.actions(r, i));
    for (int i = 0; i < t.dist.cols(); ++i) put(t.dist(r, i));
    f << "\n";
  }
  check(f.good(), "write_csv: write failed for " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    size_t a = s.find_first_not_of(" \t");
    size_t b = s.find_last_not_of(" \t");
    s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }
  return out;
}

}  // namespace

Trajectory read_csv(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "read_csv: cannot open " + path);
  std::string line;
  check(static_cast<bool>(std::getline(f, line)), "read_csv: empty file " + path);
  const auto header = split_csv_line(line);
  check(header.size() >= 4 && header[0] == "time", "read_csv: malformed header in " + path);
  int Z = 0, A = 0;
  size_t k = 1;
  while (k < header.size() && header[k] == "s_" + std::to_string(Z + 1)) ++Z, ++k;
  while (k < header.size() && header[k] == "a_" + std::to_string(A + 1)) ++A, ++k;
  check(Z > 0 && A > 0 && k < header.size() && header[k] == "d_out",
        "read_csv: header is not the dataset layout in " + path);
  check(header.size() == 1 + static_cast<size_t>(Z) + A + dist_dim(Z),
        "read_csv: column count mismatch in " + path);

  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    check(cells.size() == header.size(),
          "read_csv: row " + std::to_string(rows.size()) + " has " +
              std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
    std::vector<double> vals(cells.size() - 1);
    for (size_t i = 1; i < cells.size(); ++i) {
      try {
        vals[i - 1] = std::stod(cells[i]);
      } catch (const std::exception&) {
        fail("read_csv: bad number '" + cells[i] + "' in row " + std::to_string(rows.size()));
      }
    }
    rows.push_back(std::move(vals));
  }
  check(!rows.empty(), "read_csv: no data rows in " + path);
  Trajectory t;
  const int T = static_cast<int>(rows.size());
  t.states = Tensor(T, Z);
  t.actions = Tensor(T, A);
  t.dist = Tensor(T, dist_dim(Z));
  for (int r = 0; r < T; ++r) {
    int c = 0;
    for (int i = 0; i < Z; ++i) t.states(r, i) = rows[r][c++];
    for (int i = 0; i < A; ++i) t.actions(r, i) = rows[r][c++];
    for (int i = 0; i < dist_dim(Z); ++i) t.dist(r, i) = rows[r][c++];
  }
  return t;
}

}  // namespace lvopt

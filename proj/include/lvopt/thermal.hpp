#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lvopt/kernels.hpp"
#include "lvopt/tensor.hpp"

namespace lvopt {

// Multi-zone RC thermal network with a signed-quadratic envelope term that
// grows with the indoor/outdoor gap. Units: temperatures degC, powers kW,
// capacities kWh/degC, conductances kW/degC, time step in hours.
struct BuildingModel {
  int zones = 0;
  int conditioned = 0;  // first `conditioned` zones accept cooling actions
  std::vector<double> capacity;
  std::vector<double> env_u;       // conductance to outdoor per zone
  std::vector<double> solar_gain;  // dimensionless aperture factor g_i
  // Symmetric adjacency: adj[i] lists (j, u_ij).
  std::vector<std::vector<std::pair<int, double>>> adj;
  double cop = 3.6;
  double dt = 0.25;
  double kappa = 0.3;
  double rated_power = 15.0;

  void validate() const;

  // Seeded one-corridor layout: 4 rooms per floor, neighbours i+-1 within a
  // floor and i+-4 across floors.
  static BuildingModel desk(int zones, double kappa, std::uint64_t seed);
};

// Disturbance columns: [outdoor | solar x zones | occupancy x zones].
inline int dist_dim(int zones) { return 1 + 2 * zones; }

struct DisturbanceProfile {
  int zones = 0;
  double out_base = 26.0;
  double out_amp = 5.0;            // diurnal swing, degC
  double out_trend_per_day = 0.0;  // slow seasonal drift
  double ar_phi = 0.9;             // AR(1) pole of the weather noise
  double ar_sigma = 1.0;           // stationary std of the weather noise
  std::vector<double> solar_amp;   // per-zone peak solar, kW
  std::vector<double> occ_amp;     // per-zone occupancy peak, kW
  double occ_night = 0.6;          // off-hours fraction of the occupancy peak

  static DisturbanceProfile desk(int zones, std::uint64_t seed);
};

Tensor generate_disturbances(const DisturbanceProfile& p, int days, std::uint64_t seed);

// Row t holds the state at the start of step t plus the action/disturbance
// applied over [t, t+1); final_state is the state after the last step.
struct Trajectory {
  Tensor states;
  Tensor actions;
  Tensor dist;
  std::vector<double> final_state;

  int steps() const { return states.rows(); }
  int zones() const { return states.cols(); }
  int action_dim() const { return actions.cols(); }
  int dist_dim() const { return dist.cols(); }
};

struct DatasetOptions {
  std::vector<double> setpoints;  // per conditioned zone; empty = all `setpoint`
  double setpoint = 24.0;
  double deadband = 0.5;
  double stage_power = -1;  // cooling stage when the thermostat engages; -1 = 0.4 * rated
  double dither_max = -1;   // excitation ceiling; -1 = 0.3 * rated
  bool shared_dither = true;  // one dither draw per step applied to all zones
  std::uint64_t seed = 1;
  std::vector<double> s0;  // empty = setpoints
};

// One explicit-Euler step; `out` must not alias `s` (the coupling sum reads
// the whole pre-step state).
void step(const BuildingModel& b, const double* s, const double* a, const double* d, double* out);
std::vector<double> step(const BuildingModel& b, const std::vector<double>& s,
                         const std::vector<double>& a, const std::vector<double>& d);

// Rolls the building forward; returns the state after each step (T x Z).
Tensor simulate(const BuildingModel& b, const std::vector<double>& s0, const Tensor& actions,
                const Tensor& dist);

// Independent rollouts batched over the leading index; parallel over rollouts.
void simulate_batch(const BuildingModel& b, const std::vector<double>& s0,
                    const std::vector<const Tensor*>& actions, const Tensor& dist,
                    std::vector<Tensor>& out, kernels::Exec exec = kernels::Exec::Auto);

Trajectory generate_dataset(const BuildingModel& b, const DisturbanceProfile& p, int days,
                            const DatasetOptions& opt);

// Multiplicative measurement noise: x * (1 + e), e ~ N(0, sigma^2) iid.
Tensor add_noise(const Tensor& dist, double sigma, std::uint64_t seed);

void write_csv(const std::string& path, const Trajectory& t);
Trajectory read_csv(const std::string& path);

}  // namespace lvopt

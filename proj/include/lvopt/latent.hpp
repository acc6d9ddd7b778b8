#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lvopt/mlp.hpp"
#include "lvopt/tensor.hpp"
#include "lvopt/thermal.hpp"

namespace lvopt {

// Per-feature min-max scaling to [0, 1]. Features with zero range map to 0
// under normalize and back to their constant value under denormalize.
struct NormStats {
  Tensor lo, hi;  // 1 x n each

  static NormStats fit(const Tensor& X);

  bool fitted() const { return lo.cols() > 0; }
  int dim() const { return lo.cols(); }
  Tensor normalize(const Tensor& X) const;
  Tensor denormalize(const Tensor& Xn) const;
  // Row vectors for expressing the affine maps inside a graph:
  // normalize(x) = (x - lo) * diag(inv_range), denormalize(xn) = xn * diag(range) + lo.
  Tensor range() const;
  Tensor inv_range() const;
};

struct LatentDims {
  int state = 2;
  int action = 3;
  int dist = 4;
};

// Hidden widths for the encoder half of each autoencoder (decoders are
// mirrored) and for the latent dynamics network.
struct LatentArch {
  std::vector<int> state_hidden{32, 16};
  std::vector<int> action_hidden{32, 16};
  std::vector<int> dist_hidden{48, 24};
  std::vector<int> dyn_hidden{32, 32};
};

// Encoder/decoder pair per variable group plus the latent one-step dynamics
// network. The networks operate on normalized coordinates; the public
// encode/decode/predict methods accept and return raw values (rows = batch).
// A trained set is immutable for inference and safe to share across threads.
struct LatentModelSet {
  int zones = 0, actions = 0, dists = 0;
  LatentDims dims;
  LatentArch arch;
  NormStats s_stats, a_stats, d_stats;
  Mlp enc_s, dec_s, enc_a, dec_a, enc_d, dec_d, dyn;

  static LatentModelSet make(int zones, int actions, int dists, LatentDims dims,
                             const LatentArch& arch, std::uint64_t seed);
  static LatentModelSet make(int zones, int actions, int dists, LatentDims dims,
                             std::uint64_t seed) {
    return make(zones, actions, dists, dims, LatentArch{}, seed);
  }

  int reduced_dim() const { return dims.state + dims.action + dims.dist; }
  int original_dim() const { return zones + actions + dists; }
  double reduction_ratio() const {
    return static_cast<double>(reduced_dim()) / original_dim();
  }
  size_t param_count() const;

  Tensor encode_state(const Tensor& S) const;
  Tensor decode_state(const Tensor& X) const;
  Tensor encode_action(const Tensor& A) const;
  Tensor decode_action(const Tensor& X) const;
  Tensor encode_dist(const Tensor& D) const;
  Tensor decode_dist(const Tensor& X) const;

  // One latent transition x' = dyn([x, u, w]).
  Tensor latent_step(const Tensor& X, const Tensor& U, const Tensor& Wd) const;
  // Raw one-step prediction: decode_state(dyn([enc_s, enc_a, enc_d])).
  Tensor predict_next(const Tensor& S, const Tensor& A, const Tensor& D) const;
};

struct TrainConfig {
  double omega = 0.5;  // weight on the prediction term
  double lr = 1e-3;
  int epochs = 200;
  int batch = 64;
  std::uint64_t seed = 7;
  LatentDims dims;
  LatentArch arch;
  std::function<void(int epoch, double loss)> on_epoch;  // optional progress hook
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean per-sample loss each epoch
  double initial_loss = 0;         // before the first update
  double final_loss = 0;
};

// Node ids of the multi-task loss graph. Inputs take normalized batches.
struct LossNodes {
  int S = -1, A = -1, D = -1, S1 = -1;         // inputs (batch x width)
  int model = -1, value = -1, total = -1;      // 1 x 1 loss nodes
  int pred = -1;                               // normalized one-step prediction
};

// total = omega * model + (1 - omega) * value, where model is the squared
// one-step prediction error through the latent dynamics and value sums the
// three autoencoder reconstruction errors, all in normalized space. When
// trainable, weight nodes are params backed by the model's storage (one node
// per tensor even where a network is applied twice).
LossNodes build_multi_task_loss(Graph& g, LatentModelSet& m, int batch, double omega,
                                bool trainable);

// Mini-batch adaptive-moment training of all seven networks on the one-step
// pairs of the trajectory. Fits normalization stats, shuffles with the config
// seed, drops the last partial batch, and throws if the loss goes non-finite
// (message names the epoch). Deterministic given (data, config).
TrainReport train_latent(LatentModelSet& m, const Trajectory& data, const TrainConfig& cfg);

// Per-column regression metrics for one-step predictions. R2 of a column
// whose target variance is ~0 is recorded as NaN, listed in zero_variance,
// and excluded from r2_mean/r2_std.
struct ZoneMetrics {
  Tensor rmse, mae, r2;  // 1 x n
  std::vector<int> zero_variance;
  double rmse_overall = 0;
  double rmse_mean = 0, rmse_std = 0;
  double mae_mean = 0, mae_std = 0;
  double r2_mean = 0, r2_std = 0;
};

ZoneMetrics regression_metrics(const Tensor& pred, const Tensor& target);

// One-step-ahead evaluation over every (row t -> state t+1) pair.
using Predictor = std::function<Tensor(const Tensor& S, const Tensor& A, const Tensor& D)>;
ZoneMetrics evaluate_model(const Predictor& predict, const Trajectory& test);
ZoneMetrics evaluate_model(const LatentModelSet& m, const Trajectory& test);

// JSON persistence; parameters and stats round-trip bit-exactly.
void save_model(const LatentModelSet& m, const std::string& path);
LatentModelSet load_model(const std::string& path);

}  // namespace lvopt

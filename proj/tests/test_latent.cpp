#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "lvopt/latent.hpp"
#include "test_util.hpp"

using namespace lvopt;
using test::central_diff_grad;
using test::random_tensor;
using test::rel_err;

namespace {

// Small model for oracle tests: 3 zones, 2 actions, 5 disturbance features.
LatentModelSet toy_model(std::uint64_t seed) {
  LatentArch arch;
  arch.state_hidden = {4};
  arch.action_hidden = {4};
  arch.dist_hidden = {5};
  arch.dyn_hidden = {6};
  return LatentModelSet::make(3, 2, 5, LatentDims{2, 1, 2}, arch, seed);
}

Tensor hconcat(const Tensor& a, const Tensor& b, const Tensor& c) {
  Tensor out(a.rows(), a.cols() + b.cols() + c.cols());
  for (int r = 0; r < a.rows(); ++r) {
    int k = 0;
    for (int j = 0; j < a.cols(); ++j) out(r, k++) = a(r, j);
    for (int j = 0; j < b.cols(); ++j) out(r, k++) = b(r, j);
    for (int j = 0; j < c.cols(); ++j) out(r, k++) = c(r, j);
  }
  return out;
}

double sum_sq_diff(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s;
}

Trajectory small_dataset(int days) {
  BuildingModel b = BuildingModel::desk(4, 0.3, 77);
  DisturbanceProfile p = DisturbanceProfile::desk(4, 78);
  DatasetOptions opt;
  opt.seed = 79;
  return generate_dataset(b, p, days, opt);
}

}  // namespace

TEST_CASE("min-max stats round-trip and zero-range handling") {
  Tensor x(4, 3);
  const double vals[4][3] = {{1, 5, 2}, {3, 5, -2}, {2, 5, 0}, {0, 5, 6}};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) x(r, c) = vals[r][c];

  NormStats st = NormStats::fit(x);
  CHECK(st.lo(0, 0) == 0.0);
  CHECK(st.hi(0, 0) == 3.0);
  CHECK(st.lo(0, 1) == 5.0);
  CHECK(st.hi(0, 1) == 5.0);
  CHECK(st.lo(0, 2) == -2.0);
  CHECK(st.hi(0, 2) == 6.0);

  Tensor xn = st.normalize(x);
  for (int r = 0; r < 4; ++r) {
    CHECK(xn(r, 0) == doctest::Approx(vals[r][0] / 3.0).epsilon(1e-15));
    CHECK(xn(r, 1) == 0.0);  // zero-range column
    CHECK(xn(r, 2) == doctest::Approx((vals[r][2] + 2.0) / 8.0).epsilon(1e-15));
  }

  Tensor back = st.denormalize(xn);
  CHECK(max_abs_diff(back, x) < 1e-14);

  NormStats unfitted;
  CHECK_THROWS_WITH_AS(unfitted.normalize(x), doctest::Contains("not fitted"),
                       std::runtime_error);
}

TEST_CASE("loss graph decomposes into weighted model and value terms") {
  std::mt19937_64 rng(101);
  LatentModelSet m = toy_model(42);
  const int B = 6;
  Tensor Sn = random_tensor(B, 3, rng, 0, 1);
  Tensor An = random_tensor(B, 2, rng, 0, 1);
  Tensor Dn = random_tensor(B, 5, rng, 0, 1);
  Tensor S1n = random_tensor(B, 3, rng, 0, 1);

  const double omega = 0.37;
  Graph g;
  LossNodes n = build_multi_task_loss(g, m, B, omega, true);
  g.bind(n.S, Sn);
  g.bind(n.A, An);
  g.bind(n.D, Dn);
  g.bind(n.S1, S1n);
  const double total = g.forward_scalar(n.total);

  // Independent recomputation through batch inference.
  Tensor xs = m.enc_s.apply(Sn), xa = m.enc_a.apply(An), xd = m.enc_d.apply(Dn);
  Tensor pred = m.dec_s.apply(m.dyn.apply(hconcat(xs, xa, xd)));
  const double lm = sum_sq_diff(pred, S1n);
  const double lv = sum_sq_diff(m.dec_s.apply(xs), Sn) + sum_sq_diff(m.dec_a.apply(xa), An) +
                    sum_sq_diff(m.dec_d.apply(xd), Dn);

  CHECK(g.value(n.model)(0, 0) == doctest::Approx(lm).epsilon(1e-12));
  CHECK(g.value(n.value)(0, 0) == doctest::Approx(lv).epsilon(1e-12));
  CHECK(total == doctest::Approx(omega * lm + (1 - omega) * lv).epsilon(1e-12));
}

TEST_CASE("omega boundaries reduce the loss to a single term") {
  std::mt19937_64 rng(7);
  LatentModelSet m = toy_model(9);
  const int B = 4;
  Tensor Sn = random_tensor(B, 3, rng, 0, 1);
  Tensor An = random_tensor(B, 2, rng, 0, 1);
  Tensor Dn = random_tensor(B, 5, rng, 0, 1);
  Tensor S1n = random_tensor(B, 3, rng, 0, 1);

  for (double omega : {1.0, 0.0}) {
    Graph g;
    LossNodes n = build_multi_task_loss(g, m, B, omega, false);
    g.bind(n.S, Sn);
    g.bind(n.A, An);
    g.bind(n.D, Dn);
    g.bind(n.S1, S1n);
    const double total = g.forward_scalar(n.total);
    const double term = g.value(omega == 1.0 ? n.model : n.value)(0, 0);
    CHECK(total == term);
  }
}

TEST_CASE("identity autoencoders give zero reconstruction loss") {
  LatentArch arch;
  arch.state_hidden = {};
  arch.action_hidden = {};
  arch.dist_hidden = {};
  arch.dyn_hidden = {2};
  LatentModelSet m = LatentModelSet::make(1, 1, 1, LatentDims{1, 1, 1}, arch, 3);
  for (Mlp* net : {&m.enc_s, &m.dec_s, &m.enc_a, &m.dec_a, &m.enc_d, &m.dec_d}) {
    net->W[0](0, 0) = 1.0;
    net->b[0](0, 0) = 0.0;
  }

  std::mt19937_64 rng(4);
  const int B = 5;
  Tensor Sn = random_tensor(B, 1, rng, 0, 1);
  Tensor An = random_tensor(B, 1, rng, 0, 1);
  Tensor Dn = random_tensor(B, 1, rng, 0, 1);
  Tensor S1n = random_tensor(B, 1, rng, 0, 1);

  Graph g;
  LossNodes n = build_multi_task_loss(g, m, B, 0.5, false);
  g.bind(n.S, Sn);
  g.bind(n.A, An);
  g.bind(n.D, Dn);
  g.bind(n.S1, S1n);
  g.forward(n.total);
  CHECK(g.value(n.value)(0, 0) == 0.0);
}

TEST_CASE("loss graph registers each shared parameter exactly once") {
  LatentModelSet m = toy_model(1);
  Graph g;
  build_multi_task_loss(g, m, 4, 0.5, true);
  // Seven two-layer networks, each contributing one W and one b per layer,
  // with dec_s applied twice but registered once.
  CHECK(g.params().size() == 28);
}

TEST_CASE("multi-task loss gradients match central differences") {
  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    std::mt19937_64 rng(500 + draw);
    LatentModelSet m = toy_model(900 + draw);
    const int B = 4;
    Tensor Sn = random_tensor(B, 3, rng, 0, 1);
    Tensor An = random_tensor(B, 2, rng, 0, 1);
    Tensor Dn = random_tensor(B, 5, rng, 0, 1);
    Tensor S1n = random_tensor(B, 3, rng, 0, 1);

    Graph g;
    LossNodes n = build_multi_task_loss(g, m, B, 0.5, true);
    g.bind(n.S, Sn);
    g.bind(n.A, An);
    g.bind(n.D, Dn);
    g.bind(n.S1, S1n);
    g.forward_scalar(n.total);
    g.backward(n.total);

    const auto& params = g.params();
    // Every parameter tensor on the first three draws, then one rotating
    // tensor per draw to keep the sweep cheap.
    std::vector<size_t> picks;
    if (draw < 3)
      for (size_t i = 0; i < params.size(); ++i) picks.push_back(i);
    else
      picks.push_back(draw % params.size());

    for (size_t pi : picks) {
      Tensor* storage = params[pi].second;
      const Tensor analytic = g.grad(params[pi].first);
      const Tensor saved = *storage;
      const Tensor fd = central_diff_grad(
          [&](const Tensor& w) {
            *storage = w;
            return g.forward_scalar(n.total);
          },
          saved);
      *storage = saved;
      CHECK(rel_err(analytic, fd) < 1e-5);
    }
  }
}

TEST_CASE("training reduces loss and is deterministic") {
  Trajectory data = small_dataset(2);

  TrainConfig cfg;
  cfg.dims = LatentDims{2, 2, 3};
  cfg.arch.state_hidden = {8};
  cfg.arch.action_hidden = {8};
  cfg.arch.dist_hidden = {12};
  cfg.arch.dyn_hidden = {8};
  cfg.epochs = 40;
  cfg.batch = 32;
  cfg.seed = 5;

  LatentModelSet m1 = LatentModelSet::make(4, 4, dist_dim(4), cfg.dims, cfg.arch, 11);
  TrainReport r1 = train_latent(m1, data, cfg);
  CHECK(r1.epoch_loss.size() == 40);
  CHECK(r1.final_loss < r1.initial_loss);
  CHECK(r1.final_loss < 0.5 * r1.initial_loss);

  LatentModelSet m2 = LatentModelSet::make(4, 4, dist_dim(4), cfg.dims, cfg.arch, 11);
  TrainReport r2 = train_latent(m2, data, cfg);
  REQUIRE(r2.epoch_loss.size() == r1.epoch_loss.size());
  for (size_t i = 0; i < r1.epoch_loss.size(); ++i) CHECK(r1.epoch_loss[i] == r2.epoch_loss[i]);
  for (size_t l = 0; l < m1.dyn.W.size(); ++l) CHECK(max_abs_diff(m1.dyn.W[l], m2.dyn.W[l]) == 0.0);

  TrainConfig other = cfg;
  other.seed = 6;
  LatentModelSet m3 = LatentModelSet::make(4, 4, dist_dim(4), cfg.dims, cfg.arch, 11);
  TrainReport r3 = train_latent(m3, data, other);
  CHECK(r3.final_loss != r1.final_loss);
}

TEST_CASE("constant trajectory trains to zero loss") {
  const int N = 48, Z = 2;
  Trajectory t;
  t.states = Tensor::full(N, Z, 24.0);
  t.actions = Tensor::full(N, Z, 1.0);
  t.dist = Tensor::full(N, dist_dim(Z), 5.0);
  t.final_state.assign(Z, 24.0);

  TrainConfig cfg;
  cfg.dims = LatentDims{1, 1, 2};
  cfg.arch.state_hidden = {4};
  cfg.arch.action_hidden = {4};
  cfg.arch.dist_hidden = {4};
  cfg.arch.dyn_hidden = {4};
  cfg.epochs = 200;
  cfg.batch = 16;

  LatentModelSet m = LatentModelSet::make(Z, Z, dist_dim(Z), cfg.dims, cfg.arch, 2);
  TrainReport r = train_latent(m, t, cfg);
  CHECK(r.final_loss < 1e-8);
}

TEST_CASE("divergent training names the epoch") {
  // A non-finite sensor reading poisons the normalized batch, so the loss
  // goes non-finite on first contact.
  Trajectory data = small_dataset(1);
  data.dist(3, 2) = std::numeric_limits<double>::infinity();

  TrainConfig cfg;
  cfg.dims = LatentDims{2, 2, 3};
  cfg.arch.state_hidden = {8};
  cfg.arch.action_hidden = {8};
  cfg.arch.dist_hidden = {12};
  cfg.arch.dyn_hidden = {8};
  cfg.epochs = 10;
  cfg.batch = 32;

  LatentModelSet m = LatentModelSet::make(4, 4, dist_dim(4), cfg.dims, cfg.arch, 11);
  CHECK_THROWS_WITH_AS(train_latent(m, data, cfg), doctest::Contains("diverged at epoch"),
                       std::runtime_error);
}

TEST_CASE("train validates its configuration") {
  Trajectory data = small_dataset(1);
  LatentModelSet m = LatentModelSet::make(4, 4, dist_dim(4), LatentDims{2, 2, 3}, 1);
  TrainConfig bad;
  bad.dims = LatentDims{2, 2, 3};
  bad.omega = 1.0;
  CHECK_THROWS_WITH_AS(train_latent(m, data, bad), doctest::Contains("omega"),
                       std::runtime_error);
  bad.omega = 0.5;
  bad.epochs = 0;
  CHECK_THROWS_WITH_AS(train_latent(m, data, bad), doctest::Contains("epochs"),
                       std::runtime_error);
}

TEST_CASE("evaluation metrics match hand-computed values") {
  // Column 0: varying target; column 1: constant target (zero variance).
  Tensor target(4, 2), pred(4, 2);
  const double y[4] = {1.0, 2.0, 3.0, 6.0};
  const double p[4] = {1.5, 2.0, 2.0, 7.0};
  for (int r = 0; r < 4; ++r) {
    target(r, 0) = y[r];
    pred(r, 0) = p[r];
    target(r, 1) = 4.0;
    pred(r, 1) = 4.0 + 0.5 * r;
  }

  ZoneMetrics zm = regression_metrics(pred, target);

  // Column 0 by hand: errors 0.5, 0, -1, 1.
  const double sse0 = 0.25 + 0.0 + 1.0 + 1.0;
  const double mean0 = 3.0;
  const double sst0 = 4.0 + 1.0 + 0.0 + 9.0;
  CHECK(zm.rmse(0, 0) == doctest::Approx(std::sqrt(sse0 / 4.0)).epsilon(1e-15));
  CHECK(zm.mae(0, 0) == doctest::Approx(2.5 / 4.0).epsilon(1e-15));
  CHECK(zm.r2(0, 0) == doctest::Approx(1.0 - sse0 / sst0).epsilon(1e-15));
  (void)mean0;

  // Column 1: zero variance target.
  REQUIRE(zm.zero_variance.size() == 1);
  CHECK(zm.zero_variance[0] == 1);
  CHECK(std::isnan(zm.r2(0, 1)));
  const double sse1 = 0.0 + 0.25 + 1.0 + 2.25;
  CHECK(zm.rmse(0, 1) == doctest::Approx(std::sqrt(sse1 / 4.0)).epsilon(1e-15));

  // Means skip the undefined R2.
  CHECK(zm.r2_mean == doctest::Approx(zm.r2(0, 0)).epsilon(1e-15));
  CHECK(zm.r2_std == 0.0);
  CHECK(zm.rmse_overall ==
        doctest::Approx(std::sqrt((sse0 + sse1) / 8.0)).epsilon(1e-15));
}

TEST_CASE("perfect and mean predictors hit the R2 boundaries") {
  std::mt19937_64 rng(33);
  Tensor target = random_tensor(20, 3, rng, 10, 30);

  ZoneMetrics perfect = regression_metrics(target, target);
  for (int c = 0; c < 3; ++c) {
    CHECK(perfect.rmse(0, c) == 0.0);
    CHECK(perfect.mae(0, c) == 0.0);
    CHECK(perfect.r2(0, c) == 1.0);
  }

  Tensor mean_pred(20, 3);
  for (int c = 0; c < 3; ++c) {
    double mu = 0;
    for (int r = 0; r < 20; ++r) mu += target(r, c);
    mu /= 20;
    for (int r = 0; r < 20; ++r) mean_pred(r, c) = mu;
  }
  ZoneMetrics mean_m = regression_metrics(mean_pred, target);
  for (int c = 0; c < 3; ++c) CHECK(mean_m.r2(0, c) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("evaluate_model pairs each row with the following state") {
  Trajectory data = small_dataset(1);
  const int N = data.steps();
  Tensor expected_target(N, data.zones());
  for (int t = 0; t + 1 < N; ++t)
    for (int c = 0; c < data.zones(); ++c) expected_target(t, c) = data.states(t + 1, c);
  expected_target.set_row(N - 1, data.final_state);

  ZoneMetrics zm = evaluate_model(
      [&](const Tensor&, const Tensor&, const Tensor&) { return expected_target; }, data);
  CHECK(zm.rmse_overall == 0.0);
  for (int c = 0; c < data.zones(); ++c) CHECK(zm.rmse(0, c) == 0.0);
}

TEST_CASE("decode of the zero latent vector stays within the normalization envelope") {
  std::mt19937_64 rng(21);
  LatentModelSet m = toy_model(55);
  m.s_stats = NormStats::fit(random_tensor(30, 3, rng, 18, 30));

  // Freshly initialized biases are zero, so the zero latent maps to exactly
  // the lower envelope after denormalization.
  Tensor z(1, m.dims.state);
  Tensor out = m.decode_state(z);
  CHECK(out.all_finite());
  CHECK(max_abs_diff(out, m.s_stats.lo) == 0.0);
}

TEST_CASE("reduction ratios for shipped configurations") {
  LatentModelSet desk = LatentModelSet::make(12, 12, dist_dim(12), LatentDims{2, 3, 4}, 1);
  CHECK(desk.reduced_dim() == 9);
  CHECK(desk.original_dim() == 49);
  CHECK(desk.reduction_ratio() <= 0.2);

  // Full-scale configuration from the reference deployment: 90 zones, 80
  // conditioned, 181 disturbance features, latent dims 3/4/6.
  const double full_ratio = (3.0 + 4.0 + 6.0) / (90.0 + 80.0 + 181.0);
  CHECK(full_ratio == doctest::Approx(13.0 / 351.0).epsilon(1e-15));
  CHECK(full_ratio <= 0.2);
}

TEST_CASE("model persistence round-trips bit-exactly") {
  std::mt19937_64 rng(88);
  LatentModelSet m = toy_model(123);
  m.s_stats = NormStats::fit(random_tensor(20, 3, rng, 15, 32));
  m.a_stats = NormStats::fit(random_tensor(20, 2, rng, 0, 7.5));
  m.d_stats = NormStats::fit(random_tensor(20, 5, rng, -3, 40));

  const std::string path = "toy_model_roundtrip.json";
  save_model(m, path);
  LatentModelSet back = load_model(path);
  std::remove(path.c_str());

  CHECK(back.zones == m.zones);
  CHECK(back.dims.state == m.dims.state);
  CHECK(back.dims.action == m.dims.action);
  CHECK(back.dims.dist == m.dims.dist);
  CHECK(max_abs_diff(back.s_stats.lo, m.s_stats.lo) == 0.0);
  CHECK(max_abs_diff(back.s_stats.hi, m.s_stats.hi) == 0.0);
  const Mlp* nets_a[] = {&m.enc_s, &m.dec_s, &m.enc_a, &m.dec_a, &m.enc_d, &m.dec_d, &m.dyn};
  const Mlp* nets_b[] = {&back.enc_s, &back.dec_s, &back.enc_a, &back.dec_a,
                         &back.enc_d, &back.dec_d, &back.dyn};
  for (int i = 0; i < 7; ++i) {
    REQUIRE(nets_b[i]->widths == nets_a[i]->widths);
    for (size_t l = 0; l < nets_a[i]->W.size(); ++l) {
      CHECK(max_abs_diff(nets_b[i]->W[l], nets_a[i]->W[l]) == 0.0);
      CHECK(max_abs_diff(nets_b[i]->b[l], nets_a[i]->b[l]) == 0.0);
    }
  }

  Tensor S = random_tensor(6, 3, rng, 16, 31);
  Tensor A = random_tensor(6, 2, rng, 0, 7);
  Tensor D = random_tensor(6, 5, rng, -2, 39);
  CHECK(max_abs_diff(back.predict_next(S, A, D), m.predict_next(S, A, D)) == 0.0);

  CHECK_THROWS_WITH_AS(load_model("no_such_model.json"), doctest::Contains("cannot open"),
                       std::runtime_error);
}

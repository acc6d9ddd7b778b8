#include "lvopt/latent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

namespace lvopt {

namespace {
constexpr double kZeroRange = 1e-12;
}

NormStats NormStats::fit(const Tensor& X) {
  check(X.rows() >= 1 && X.cols() >= 1, "NormStats::fit: empty data");
  NormStats s;
  s.lo.resize(1, X.cols());
  s.hi.resize(1, X.cols());
  for (int c = 0; c < X.cols(); ++c) {
    double lo = X(0, c), hi = X(0, c);
    for (int r = 1; r < X.rows(); ++r) {
      lo = std::min(lo, X(r, c));
      hi = std::max(hi, X(r, c));
    }
    s.lo(0, c) = lo;
    s.hi(0, c) = hi;
  }
  return s;
}

Tensor NormStats::range() const {
  Tensor r(1, dim());
  for (int c = 0; c < dim(); ++c) r(0, c) = hi(0, c) - lo(0, c);
  return r;
}

Tensor NormStats::inv_range() const {
  Tensor r(1, dim());
  for (int c = 0; c < dim(); ++c) {
    const double d = hi(0, c) - lo(0, c);
    r(0, c) = d > kZeroRange ? 1.0 / d : 0.0;
  }
  return r;
}

Tensor NormStats::normalize(const Tensor& X) const {
  check(fitted(), "NormStats: stats not fitted");
  check(X.cols() == dim(), "NormStats::normalize: feature count mismatch");
  const Tensor inv = inv_range();
  Tensor out(X.rows(), X.cols());
  for (int r = 0; r < X.rows(); ++r)
    for (int c = 0; c < X.cols(); ++c) out(r, c) = (X(r, c) - lo(0, c)) * inv(0, c);
  return out;
}

Tensor NormStats::denormalize(const Tensor& Xn) const {
  check(fitted(), "NormStats: stats not fitted");
  check(Xn.cols() == dim(), "NormStats::denormalize: feature count mismatch");
  const Tensor rg = range();
  Tensor out(Xn.rows(), Xn.cols());
  for (int r = 0; r < Xn.rows(); ++r)
    for (int c = 0; c < Xn.cols(); ++c) out(r, c) = Xn(r, c) * rg(0, c) + lo(0, c);
  return out;
}

namespace {

std::vector<int> chain(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w;
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

Tensor hconcat3(const Tensor& a, const Tensor& b, const Tensor& c) {
  check(a.rows() == b.rows() && b.rows() == c.rows(), "latent_step: row count mismatch");
  Tensor out(a.rows(), a.cols() + b.cols() + c.cols());
  for (int r = 0; r < a.rows(); ++r) {
    int k = 0;
    for (int j = 0; j < a.cols(); ++j) out(r, k++) = a(r, j);
    for (int j = 0; j < b.cols(); ++j) out(r, k++) = b(r, j);
    for (int j = 0; j < c.cols(); ++j) out(r, k++) = c(r, j);
  }
  return out;
}

}  // namespace

LatentModelSet LatentModelSet::make(int zones, int actions, int dists, LatentDims dims,
                                    const LatentArch& arch, std::uint64_t seed) {
  check(zones > 0 && actions > 0 && dists > 0, "LatentModelSet: original dims must be positive");
  check(dims.state > 0 && dims.action > 0 && dims.dist > 0,
        "LatentModelSet: latent dims must be positive");
  check(dims.state <= zones && dims.action <= actions && dims.dist <= dists,
        "LatentModelSet: latent dims must not exceed original dims");
  LatentModelSet m;
  m.zones = zones;
  m.actions = actions;
  m.dists = dists;
  m.dims = dims;
  m.arch = arch;

  auto mirrored = [](std::vector<int> w) {
    std::reverse(w.begin(), w.end());
    return w;
  };
  m.enc_s = Mlp(chain(zones, arch.state_hidden, dims.state));
  m.dec_s = Mlp(mirrored(m.enc_s.widths));
  m.enc_a = Mlp(chain(actions, arch.action_hidden, dims.action));
  m.dec_a = Mlp(mirrored(m.enc_a.widths));
  m.enc_d = Mlp(chain(dists, arch.dist_hidden, dims.dist));
  m.dec_d = Mlp(mirrored(m.enc_d.widths));
  m.dyn = Mlp(chain(dims.state + dims.action + dims.dist, arch.dyn_hidden, dims.state));

  std::mt19937_64 rng(seed);
  for (Mlp* net : {&m.enc_s, &m.dec_s, &m.enc_a, &m.dec_a, &m.enc_d, &m.dec_d, &m.dyn})
    net->init(rng);
  return m;
}

size_t LatentModelSet::param_count() const {
  size_t n = 0;
  for (const Mlp* net : {&enc_s, &dec_s, &enc_a, &dec_a, &enc_d, &dec_d, &dyn})
    n += net->param_count();
  return n;
}

Tensor LatentModelSet::encode_state(const Tensor& S) const {
  check(s_stats.fitted(), "encode_state: normalization stats not fitted");
  return enc_s.apply(s_stats.normalize(S));
}
Tensor LatentModelSet::decode_state(const Tensor& X) const {
  check(s_stats.fitted(), "decode_state: normalization stats not fitted");
  return s_stats.denormalize(dec_s.apply(X));
}
Tensor LatentModelSet::encode_action(const Tensor& A) const {
  check(a_stats.fitted(), "encode_action: normalization stats not fitted");
  return enc_a.apply(a_stats.normalize(A));
}
Tensor LatentModelSet::decode_action(const Tensor& X) const {
  check(a_stats.fitted(), "decode_action: normalization stats not fitted");
  return a_stats.denormalize(dec_a.apply(X));
}
Tensor LatentModelSet::encode_dist(const Tensor& D) const {
  check(d_stats.fitted(), "encode_dist: normalization stats not fitted");
  return enc_d.apply(d_stats.normalize(D));
}
Tensor LatentModelSet::decode_dist(const Tensor& X) const {
  check(d_stats.fitted(), "decode_dist: normalization stats not fitted");
  return d_stats.denormalize(dec_d.apply(X));
}

Tensor LatentModelSet::latent_step(const Tensor& X, const Tensor& U, const Tensor& Wd) const {
  return dyn.apply(hconcat3(X, U, Wd));
}

Tensor LatentModelSet::predict_next(const Tensor& S, const Tensor& A, const Tensor& D) const {
  return decode_state(latent_step(encode_state(S), encode_action(A), encode_dist(D)));
}

LossNodes build_multi_task_loss(Graph& g, LatentModelSet& m, int batch, double omega,
                                bool trainable) {
  check(batch >= 1, "multi_task_loss: batch must be nonempty");
  check(omega >= 0.0 && omega <= 1.0, "multi_task_loss: omega must lie in [0, 1]");

  LossNodes n;
  n.S = g.input("S", batch, m.zones);
  n.A = g.input("A", batch, m.actions);
  n.D = g.input("D", batch, m.dists);
  n.S1 = g.input("S1", batch, m.zones);

  const MlpNodes enc_s = m.enc_s.make_nodes(g, "enc_s", trainable);
  const MlpNodes dec_s = m.dec_s.make_nodes(g, "dec_s", trainable);
  const MlpNodes enc_a = m.enc_a.make_nodes(g, "enc_a", trainable);
  const MlpNodes dec_a = m.dec_a.make_nodes(g, "dec_a", trainable);
  const MlpNodes enc_d = m.enc_d.make_nodes(g, "enc_d", trainable);
  const MlpNodes dec_d = m.dec_d.make_nodes(g, "dec_d", trainable);
  const MlpNodes dyn = m.dyn.make_nodes(g, "dyn", trainable);

  const int xs = m.enc_s.apply_nodes(g, n.S, enc_s);
  const int xa = m.enc_a.apply_nodes(g, n.A, enc_a);
  const int xd = m.enc_d.apply_nodes(g, n.D, enc_d);
  const int rs = m.dec_s.apply_nodes(g, xs, dec_s);
  const int ra = m.dec_a.apply_nodes(g, xa, dec_a);
  const int rd = m.dec_d.apply_nodes(g, xd, dec_d);
  const int xnext = m.dyn.apply_nodes(g, g.concat_cols({xs, xa, xd}), dyn);
  n.pred = m.dec_s.apply_nodes(g, xnext, dec_s);

  auto sqerr = [&](int a, int b) { return g.sum(g.square(g.add(a, g.scale(b, -1.0)))); };
  n.model = sqerr(n.pred, n.S1);
  n.value = g.add(g.add(sqerr(rs, n.S), sqerr(ra, n.A)), sqerr(rd, n.D));
  n.total = g.add(g.scale(n.model, omega), g.scale(n.value, 1.0 - omega));
  return n;
}

TrainReport train_latent(LatentModelSet& m, const Trajectory& data, const TrainConfig& cfg) {
  check(cfg.omega > 0.0 && cfg.omega < 1.0, "train: omega must lie in (0, 1)");
  check(cfg.epochs >= 1, "train: epochs must be >= 1");
  check(cfg.batch >= 1, "train: batch must be >= 1");
  const int N = data.steps();
  check(N >= 1, "train: trajectory has no transition pairs");
  check(m.zones == data.zones() && m.actions == data.action_dim() && m.dists == data.dist_dim(),
        "train: model dims do not match trajectory");
  check(static_cast<int>(data.final_state.size()) == m.zones,
        "train: trajectory is missing its final state");

  Tensor all_states(N + 1, m.zones);
  for (int t = 0; t < N; ++t)
    for (int c = 0; c < m.zones; ++c) all_states(t, c) = data.states(t, c);
  all_states.set_row(N, data.final_state);

  m.s_stats = NormStats::fit(all_states);
  m.a_stats = NormStats::fit(data.actions);
  m.d_stats = NormStats::fit(data.dist);

  const Tensor all_n = m.s_stats.normalize(all_states);
  Tensor Sn(N, m.zones), S1n(N, m.zones);
  for (int t = 0; t < N; ++t)
    for (int c = 0; c < m.zones; ++c) {
      Sn(t, c) = all_n(t, c);
      S1n(t, c) = all_n(t + 1, c);
    }
  const Tensor An = m.a_stats.normalize(data.actions);
  const Tensor Dn = m.d_stats.normalize(data.dist);

  const int B = std::min(cfg.batch, N);
  const int nbatch = N / B;

  Graph g;
  const LossNodes nodes = build_multi_task_loss(g, m, B, cfg.omega, true);

  Tensor Sb(B, m.zones), Ab(B, m.actions), Db(B, m.dists), S1b(B, m.zones);
  auto bind_batch = [&](const std::vector<int>& order, int off) {
    for (int r = 0; r < B; ++r) {
      const int src = order[off + r];
      for (int c = 0; c < m.zones; ++c) Sb(r, c) = Sn(src, c);
      for (int c = 0; c < m.actions; ++c) Ab(r, c) = An(src, c);
      for (int c = 0; c < m.dists; ++c) Db(r, c) = Dn(src, c);
      for (int c = 0; c < m.zones; ++c) S1b(r, c) = S1n(src, c);
    }
    g.bind(nodes.S, Sb);
    g.bind(nodes.A, Ab);
    g.bind(nodes.D, Db);
    g.bind(nodes.S1, S1b);
  };

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);

  auto eval_total = [&](int epoch) {
    g.forward(nodes.total);
    const double loss = g.value(nodes.total)(0, 0);
    if (!std::isfinite(loss)) fail("train: loss diverged at epoch " + std::to_string(epoch));
    return loss;
  };

  TrainReport report;
  {
    double sum = 0;
    for (int bi = 0; bi < nbatch; ++bi) {
      bind_batch(order, bi * B);
      sum += eval_total(1);
    }
    report.initial_loss = sum / (static_cast<double>(nbatch) * B);
  }

  struct AdamState {
    Tensor m1, m2;
  };
  const auto& params = g.params();
  std::vector<AdamState> adam(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    adam[i].m1.resize(params[i].second->rows(), params[i].second->cols());
    adam[i].m2.resize(params[i].second->rows(), params[i].second->cols());
  }
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long long tstep = 0;

  std::mt19937_64 rng(cfg.seed);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double esum = 0;
    for (int bi = 0; bi < nbatch; ++bi) {
      bind_batch(order, bi * B);
      const double loss = eval_total(epoch);
      g.backward(nodes.total);
      ++tstep;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(tstep));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(tstep));
      for (size_t i = 0; i < params.size(); ++i) {
        Tensor& w = *params[i].second;
        const Tensor& gr = g.grad(params[i].first);
        double* m1 = adam[i].m1.data();
        double* m2 = adam[i].m2.data();
        double* wp = w.data();
        const double* gp = gr.data();
        for (size_t k = 0; k < w.size(); ++k) {
          m1[k] = b1 * m1[k] + (1.0 - b1) * gp[k];
          m2[k] = b2 * m2[k] + (1.0 - b2) * gp[k] * gp[k];
          wp[k] -= cfg.lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + eps);
        }
      }
      esum += loss;
    }
    const double mean = esum / (static_cast<double>(nbatch) * B);
    report.epoch_loss.push_back(mean);
    if (cfg.on_epoch) cfg.on_epoch(epoch, mean);
  }
  report.final_loss = report.epoch_loss.back();
  return report;
}

ZoneMetrics regression_metrics(const Tensor& pred, const Tensor& target) {
  check(pred.same_shape(target), "regression_metrics: shape mismatch " + pred.shape_str() +
                                     " vs " + target.shape_str());
  check(target.rows() >= 1, "regression_metrics: no samples");
  const int N = target.rows(), n = target.cols();
  ZoneMetrics z;
  z.rmse.resize(1, n);
  z.mae.resize(1, n);
  z.r2.resize(1, n);

  double total_sq = 0;
  for (int c = 0; c < n; ++c) {
    double sse = 0, sae = 0, mean_y = 0;
    for (int r = 0; r < N; ++r) mean_y += target(r, c);
    mean_y /= N;
    double sst = 0;
    for (int r = 0; r < N; ++r) {
      const double e = pred(r, c) - target(r, c);
      sse += e * e;
      sae += std::abs(e);
      const double d = target(r, c) - mean_y;
      sst += d * d;
    }
    total_sq += sse;
    z.rmse(0, c) = std::sqrt(sse / N);
    z.mae(0, c) = sae / N;
    if (sst <= kZeroRange) {
      z.r2(0, c) = std::numeric_limits<double>::quiet_NaN();
      z.zero_variance.push_back(c);
    } else {
      z.r2(0, c) = 1.0 - sse / sst;
    }
  }
  z.rmse_overall = std::sqrt(total_sq / (static_cast<double>(N) * n));

  auto mean_std = [](const Tensor& v, double& mean, double& sd) {
    double s = 0;
    int cnt = 0;
    for (int c = 0; c < v.cols(); ++c)
      if (std::isfinite(v(0, c))) {
        s += v(0, c);
        ++cnt;
      }
    if (cnt == 0) {
      mean = sd = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    mean = s / cnt;
    double sq = 0;
    for (int c = 0; c < v.cols(); ++c)
      if (std::isfinite(v(0, c))) {
        const double d = v(0, c) - mean;
        sq += d * d;
      }
    sd = std::sqrt(sq / cnt);
  };
  mean_std(z.rmse, z.rmse_mean, z.rmse_std);
  mean_std(z.mae, z.mae_mean, z.mae_std);
  mean_std(z.r2, z.r2_mean, z.r2_std);
  return z;
}

ZoneMetrics evaluate_model(const Predictor& predict, const Trajectory& test) {
  const int N = test.steps();
  check(N >= 1, "evaluate_model: no transition pairs");
  check(static_cast<int>(test.final_state.size()) == test.zones(),
        "evaluate_model: trajectory is missing its final state");
  const Tensor pred = predict(test.states, test.actions, test.dist);
  Tensor target(N, test.zones());
  for (int t = 0; t + 1 < N; ++t)
    for (int c = 0; c < test.zones(); ++c) target(t, c) = test.states(t + 1, c);
  target.set_row(N - 1, test.final_state);
  return regression_metrics(pred, target);
}

ZoneMetrics evaluate_model(const LatentModelSet& m, const Trajectory& test) {
  return evaluate_model(
      [&m](const Tensor& S, const Tensor& A, const Tensor& D) { return m.predict_next(S, A, D); },
      test);
}

namespace {

using nlohmann::json;

json tensor_to_json(const Tensor& t) {
  return json{{"rows", t.rows()}, {"cols", t.cols()}, {"data", t.to_vector()}};
}

Tensor tensor_from_json(const json& j) {
  Tensor t(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto data = j.at("data").get<std::vector<double>>();
  check(data.size() == t.size(), "model file: tensor payload size mismatch");
  std::copy(data.begin(), data.end(), t.data());
  return t;
}

json mlp_to_json(const Mlp& net) {
  json layers = json::array();
  for (size_t l = 0; l < net.W.size(); ++l)
    layers.push_back(json{{"W", tensor_to_json(net.W[l])}, {"b", tensor_to_json(net.b[l])}});
  return json{{"widths", net.widths}, {"layers", std::move(layers)}};
}

Mlp mlp_from_json(const json& j) {
  Mlp net(j.at("widths").get<std::vector<int>>());
  const auto& layers = j.at("layers");
  check(layers.size() == net.W.size(), "model file: layer count mismatch");
  for (size_t l = 0; l < net.W.size(); ++l) {
    Tensor W = tensor_from_json(layers[l].at("W"));
    Tensor b = tensor_from_json(layers[l].at("b"));
    check(W.same_shape(net.W[l]) && b.same_shape(net.b[l]),
          "model file: layer shape mismatch");
    net.W[l] = std::move(W);
    net.b[l] = std::move(b);
  }
  return net;
}

json stats_to_json(const NormStats& s) {
  return json{{"lo", s.lo.to_vector()}, {"hi", s.hi.to_vector()}};
}

NormStats stats_from_json(const json& j) {
  NormStats s;
  s.lo = Tensor::row_vector(j.at("lo").get<std::vector<double>>());
  s.hi = Tensor::row_vector(j.at("hi").get<std::vector<double>>());
  check(s.lo.same_shape(s.hi), "model file: normalization stats size mismatch");
  return s;
}

}  // namespace

void save_model(const LatentModelSet& m, const std::string& path) {
  json j;
  j["format"] = "lvopt-latent-model";
  j["version"] = 1;
  j["zones"] = m.zones;
  j["actions"] = m.actions;
  j["dists"] = m.dists;
  j["latent"] = {{"state", m.dims.state}, {"action", m.dims.action}, {"dist", m.dims.dist}};
  j["arch"] = {{"state_hidden", m.arch.state_hidden},
               {"action_hidden", m.arch.action_hidden},
               {"dist_hidden", m.arch.dist_hidden},
               {"dyn_hidden", m.arch.dyn_hidden}};
  j["norm"] = {{"state", stats_to_json(m.s_stats)},
               {"action", stats_to_json(m.a_stats)},
               {"dist", stats_to_json(m.d_stats)}};
  j["networks"] = {{"enc_s", mlp_to_json(m.enc_s)}, {"dec_s", mlp_to_json(m.dec_s)},
                   {"enc_a", mlp_to_json(m.enc_a)}, {"dec_a", mlp_to_json(m.dec_a)},
                   {"enc_d", mlp_to_json(m.enc_d)}, {"dec_d", mlp_to_json(m.dec_d)},
                   {"dyn", mlp_to_json(m.dyn)}};

  std::ofstream f(path);
  check(f.good(), "save_model: cannot open " + path);
  f << j.dump(1) << "\n";
  check(f.good(), "save_model: write failed for " + path);
}

LatentModelSet load_model(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "load_model: cannot open " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const std::exception& e) {
    fail("load_model: " + path + " is not valid JSON: " + e.what());
  }
  try {
    check(j.at("format").get<std::string>() == "lvopt-latent-model",
          "load_model: unrecognized format tag in " + path);
    LatentModelSet m;
    m.zones = j.at("zones").get<int>();
    m.actions = j.at("actions").get<int>();
    m.dists = j.at("dists").get<int>();
    m.dims.state = j.at("latent").at("state").get<int>();
    m.dims.action = j.at("latent").at("action").get<int>();
    m.dims.dist = j.at("latent").at("dist").get<int>();
    m.arch.state_hidden = j.at("arch").at("state_hidden").get<std::vector<int>>();
    m.arch.action_hidden = j.at("arch").at("action_hidden").get<std::vector<int>>();
    m.arch.dist_hidden = j.at("arch").at("dist_hidden").get<std::vector<int>>();
    m.arch.dyn_hidden = j.at("arch").at("dyn_hidden").get<std::vector<int>>();
    m.s_stats = stats_from_json(j.at("norm").at("state"));
    m.a_stats = stats_from_json(j.at("norm").at("action"));
    m.d_stats = stats_from_json(j.at("norm").at("dist"));
    m.enc_s = mlp_from_json(j.at("networks").at("enc_s"));
    m.dec_s = mlp_from_json(j.at("networks").at("dec_s"));
    m.enc_a = mlp_from_json(j.at("networks").at("enc_a"));
    m.dec_a = mlp_from_json(j.at("networks").at("dec_a"));
    m.enc_d = mlp_from_json(j.at("networks").at("enc_d"));
    m.dec_d = mlp_from_json(j.at("networks").at("dec_d"));
    m.dyn = mlp_from_json(j.at("networks").at("dyn"));
    check(m.s_stats.dim() == m.zones && m.a_stats.dim() == m.actions && m.d_stats.dim() == m.dists,
          "load_model: normalization stats do not match dims");
    check(m.enc_s.in_dim() == m.zones && m.enc_s.out_dim() == m.dims.state,
          "load_model: enc_s shape does not match dims");
    check(m.dyn.in_dim() == m.dims.state + m.dims.action + m.dims.dist &&
              m.dyn.out_dim() == m.dims.state,
          "load_model: dyn shape does not match dims");
    return m;
  } catch (const json::exception& e) {
    fail("load_model: " + path + " has an invalid schema: " + e.what());
  }
}

}  // namespace lvopt

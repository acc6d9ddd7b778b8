#include "lvopt/mlp.hpp"

#include <cmath>

#include "lvopt/kernels.hpp"

namespace lvopt {

Mlp::Mlp(std::vector<int> layer_widths) : widths(std::move(layer_widths)) {
  check(widths.size() >= 2, "Mlp: need at least input and output widths");
  for (int w : widths) check(w > 0, "Mlp: widths must be positive");
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    W.emplace_back(widths[l], widths[l + 1]);
    b.emplace_back(1, widths[l + 1]);
  }
}

size_t Mlp::param_count() const {
  size_t n = 0;
  for (size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
  return n;
}

void Mlp::init(std::mt19937_64& rng) {
  for (size_t l = 0; l < W.size(); ++l) {
    const double limit = std::sqrt(6.0 / widths[l]);
    std::uniform_real_distribution<double> u(-limit, limit);
    for (size_t i = 0; i < W[l].size(); ++i) W[l].data()[i] = u(rng);
    b[l].fill(0.0);
  }
}

Tensor Mlp::apply(const Tensor& X) const {
  check(X.cols() == in_dim(),
        "Mlp::apply: input has " + std::to_string(X.cols()) + " features, expected " +
            std::to_string(in_dim()));
  Tensor h = X;
  Tensor z;
  for (size_t l = 0; l < W.size(); ++l) {
    z.resize(h.rows(), W[l].cols());
    kernels::matmul(h, W[l], z);
    kernels::add_rowvec(z, b[l], z);
    if (l + 1 < W.size()) kernels::relu(z, z);
    h = z;
  }
  return h;
}

int Mlp::build(Graph& g, int x, const std::string& prefix, bool trainable) {
  return apply_nodes(g, x, make_nodes(g, prefix, trainable));
}

int Mlp::build_const(Graph& g, int x, const std::string& prefix) const {
  return const_cast<Mlp*>(this)->build(g, x, prefix, false);
}

MlpNodes Mlp::make_nodes(Graph& g, const std::string& prefix, bool trainable) {
  MlpNodes n;
  for (size_t l = 0; l < W.size(); ++l) {
    const std::string tag = prefix + ".L" + std::to_string(l);
    if (trainable) {
      n.W.push_back(g.param(tag + ".W", &W[l]));
      n.b.push_back(g.param(tag + ".b", &b[l]));
    } else {
      n.W.push_back(g.constant(W[l], tag + ".W"));
      n.b.push_back(g.constant(b[l], tag + ".b"));
    }
  }
  return n;
}

MlpNodes Mlp::make_const_nodes(Graph& g, const std::string& prefix) const {
  return const_cast<Mlp*>(this)->make_nodes(g, prefix, false);
}

int Mlp::apply_nodes(Graph& g, int x, const MlpNodes& n) const {
  check(g.cols(x) == in_dim(), "Mlp::apply_nodes: input node width mismatch");
  check(n.W.size() == W.size() && n.b.size() == b.size(),
        "Mlp::apply_nodes: node list does not match layer count");
  int h = x;
  for (size_t l = 0; l < W.size(); ++l) {
    h = g.add(g.matmul(h, n.W[l]), n.b[l]);
    if (l + 1 < W.size()) h = g.relu(h);
  }
  return h;
}

}  // namespace lvopt

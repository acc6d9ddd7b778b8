#pragma once

#include <random>
#include <vector>

#include "lvopt/graph.hpp"
#include "lvopt/tensor.hpp"

namespace lvopt {

// Graph node ids for one network's weights, so several applications of the
// same network (weight sharing across time steps, or an encoder reused for
// reconstruction and prediction) point at a single set of nodes.
struct MlpNodes {
  std::vector<int> W, b;
};

// Fully connected network with ReLU hidden layers and a linear output.
// Weights are W[l] (in x out) so batches multiply as rows x W.
struct Mlp {
  std::vector<int> widths;  // [in, hidden..., out]
  std::vector<Tensor> W;
  std::vector<Tensor> b;

  Mlp() = default;
  explicit Mlp(std::vector<int> layer_widths);

  int in_dim() const { return widths.front(); }
  int out_dim() const { return widths.back(); }
  size_t layer_count() const { return W.size(); }
  size_t param_count() const;

  void init(std::mt19937_64& rng);

  // Batch inference: X is rows x in_dim.
  Tensor apply(const Tensor& X) const;

  // Adds the network to a graph. When trainable, weights become param nodes
  // backed by this object's storage (which must outlive the graph); otherwise
  // they are copied in as constants and gradients do not flow into them.
  int build(Graph& g, int x, const std::string& prefix, bool trainable);
  int build_const(Graph& g, int x, const std::string& prefix) const;

  // Weight sharing: create the weight nodes once, then apply them to any
  // number of inputs. build() is make_nodes followed by one apply_nodes.
  MlpNodes make_nodes(Graph& g, const std::string& prefix, bool trainable);
  MlpNodes make_const_nodes(Graph& g, const std::string& prefix) const;
  int apply_nodes(Graph& g, int x, const MlpNodes& n) const;
};

}  // namespace lvopt

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lvopt/tensor.hpp"

namespace lvopt {

// Reverse-mode autodiff over a small fixed op vocabulary. Shapes are static:
// they are checked when a node is created, and value/grad buffers are
// preallocated so repeated forward/backward passes do not allocate.
enum class Op {
  Input,
  Constant,
  Param,
  MatMul,
  Add,          // elementwise, or row-broadcast when rhs is 1 x n
  Relu,         // max(x, 0)
  PositivePart, // max(x - shift, 0), shift held as a constant attribute
  Square,
  Scale,        // c * x
  Sum,          // sum of all entries -> 1 x 1
  ConcatRows,
  ConcatCols,
  SliceRows,
};

const char* op_name(Op op);

class Graph {
 public:
  int input(const std::string& name, int rows, int cols);
  int constant(Tensor v, const std::string& name = "");
  // Parameter backed by external storage; the caller keeps ownership and the
  // storage must outlive the graph. Gradients are accumulated per node.
  int param(const std::string& name, Tensor* storage);

  int matmul(int a, int b);
  int add(int a, int b);
  int relu(int x);
  int positive_part(int x, Tensor shift);
  int square(int x);
  int scale(int x, double c);
  int sum(int x);
  int concat_rows(const std::vector<int>& xs);
  int concat_cols(const std::vector<int>& xs);
  int slice_rows(int x, int r0, int r1);

  void bind(int input_id, const Tensor& v);

  // Computes node values in topological (insertion) order up to root and
  // returns the root value, which must be 1 x 1 for the double overload.
  double forward_scalar(int root);
  void forward(int root);

  // Accumulates d(root)/d(node) into grad buffers for every node that can
  // reach a Param or Input marked differentiable. Root must be 1 x 1.
  void backward(int root);

  const Tensor& value(int id) const;
  const Tensor& grad(int id) const;
  int rows(int id) const;
  int cols(int id) const;
  int node_count() const { return static_cast<int>(nodes_.size()); }

  // Treat an input as differentiable so backward reaches it (params always are).
  void mark_differentiable(int input_id);

  const std::vector<std::pair<int, Tensor*>>& params() const { return params_; }

 private:
  struct Node {
    Op op;
    std::vector<int> parents;
    Tensor value;
    Tensor grad;
    Tensor attr;       // PositivePart shift
    double scalar = 0; // Scale factor
    int r0 = 0, r1 = 0;
    Tensor* bound = nullptr;
    std::string name;
    bool needs_grad = false;
    bool has_value = false; // Inputs must be bound before forward
  };

  int add_node(Node n);
  const Tensor& val(int id) const;
  [[noreturn]] void node_fail(int id, const std::string& msg) const;
  std::string label(int id) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Tensor*>> params_;
};

// Forward-difference gradient of a scalar function: g_i = (f(x + h e_i) - f(x)) / h.
// Throws if any evaluation is non-finite, naming the offending coordinate.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-6);

}  // namespace lvopt

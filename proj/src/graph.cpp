#include "lvopt/graph.hpp"

#include "lvopt/kernels.hpp"

namespace lvopt {

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::Param: return "param";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Relu: return "relu";
    case Op::PositivePart: return "positive_part";
    case Op::Square: return "square";
    case Op::Scale: return "scale";
    case Op::Sum: return "sum";
    case Op::ConcatRows: return "concat_rows";
    case Op::ConcatCols: return "concat_cols";
    case Op::SliceRows: return "slice_rows";
  }
  return "?";
}

std::string Graph::label(int id) const {
  std::ostringstream os;
  os << "node " << id << " (" << op_name(nodes_[id].op);
  if (!nodes_[id].name.empty()) os << " '" << nodes_[id].name << "'";
  os << ")";
  return os.str();
}

void Graph::node_fail(int id, const std::string& msg) const {
  fail("graph: " + label(id) + ": " + msg);
}

int Graph::add_node(Node n) {
  for (int p : n.parents) {
    check(p >= 0 && p < node_count(), "graph: parent id out of range");
    if (nodes_[p].needs_grad) n.needs_grad = true;
  }
  n.grad = Tensor(n.value.rows(), n.value.cols());
  nodes_.push_back(std::move(n));
  return node_count() - 1;
}

int Graph::input(const std::string& name, int rows, int cols) {
  Node n;
  n.op = Op::Input;
  n.name = name;
  n.value = Tensor(rows, cols);
  return add_node(std::move(n));
}

int Graph::constant(Tensor v, const std::string& name) {
  Node n;
  n.op = Op::Constant;
  n.name = name;
  n.value = std::move(v);
  n.has_value = true;
  return add_node(std::move(n));
}

int Graph::param(const std::string& name, Tensor* storage) {
  check(storage != nullptr, "graph: param '" + name + "' has null storage");
  Node n;
  n.op = Op::Param;
  n.name = name;
  n.value = Tensor(storage->rows(), storage->cols());
  n.bound = storage;
  n.needs_grad = true;
  n.has_value = true;
  int id = add_node(std::move(n));
  params_.push_back({id, storage});
  return id;
}

void Graph::mark_differentiable(int input_id) {
  check(input_id >= 0 && input_id < node_count(), "graph: bad input id");
  check(nodes_[input_id].op == Op::Input, "graph: mark_differentiable needs an input node");
  nodes_[input_id].needs_grad = true;
  // Nodes added before this call do not re-derive needs_grad; mark inputs
  // before wiring them into the graph.
}

int Graph::matmul(int a, int b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  if (va.cols() != vb.rows())
    fail("graph: matmul of " + label(a) + " " + va.shape_str() + " with " + label(b) + " " +
         vb.shape_str());
  Node n;
  n.op = Op::MatMul;
  n.parents = {a, b};
  n.value = Tensor(va.rows(), vb.cols());
  return add_node(std::move(n));
}

int Graph::add(int a, int b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  const bool broadcast = vb.rows() == 1 && va.cols() == vb.cols() && va.rows() != 1;
  if (!broadcast && !va.same_shape(vb))
    fail("graph: add of " + label(a) + " " + va.shape_str() + " with " + label(b) + " " +
         vb.shape_str());
  Node n;
  n.op = Op::Add;
  n.parents = {a, b};
  n.value = Tensor(va.rows(), va.cols());
  return add_node(std::move(n));
}

int Graph::relu(int x) {
  Node n;
  n.op = Op::Relu;
  n.parents = {x};
  n.value = Tensor(nodes_[x].value.rows(), nodes_[x].value.cols());
  return add_node(std::move(n));
}

int Graph::positive_part(int x, Tensor shift) {
  const Tensor& vx = nodes_[x].value;
  if (!vx.same_shape(shift))
    fail("graph: positive_part shift " + shift.shape_str() + " does not match " + label(x) + " " +
         vx.shape_str());
  Node n;
  n.op = Op::PositivePart;
  n.parents = {x};
  n.value = Tensor(vx.rows(), vx.cols());
  n.attr = std::move(shift);
  return add_node(std::move(n));
}

int Graph::square(int x) {
  Node n;
  n.op = Op::Square;
  n.parents = {x};
  n.value = Tensor(nodes_[x].value.rows(), nodes_[x].value.cols());
  return add_node(std::move(n));
}

int Graph::scale(int x, double c) {
  Node n;
  n.op = Op::Scale;
  n.parents = {x};
  n.scalar = c;
  n.value = Tensor(nodes_[x].value.rows(), nodes_[x].value.cols());
  return add_node(std::move(n));
}

int Graph::sum(int x) {
  Node n;
  n.op = Op::Sum;
  n.parents = {x};
  n.value = Tensor(1, 1);
  return add_node(std::move(n));
}

int Graph::concat_rows(const std::vector<int>& xs) {
  check(!xs.empty(), "graph: concat_rows of nothing");
  int cols = nodes_[xs[0]].value.cols();
  int rows = 0;
  for (int x : xs) {
    if (nodes_[x].value.cols() != cols)
      fail("graph: concat_rows column mismatch at " + label(x));
    rows += nodes_[x].value.rows();
  }
  Node n;
  n.op = Op::ConcatRows;
  n.parents = xs;
  n.value = Tensor(rows, cols);
  return add_node(std::move(n));
}

int Graph::concat_cols(const std::vector<int>& xs) {
  check(!xs.empty(), "graph: concat_cols of nothing");
  int rows = nodes_[xs[0]].value.rows();
  int cols = 0;
  for (int x : xs) {
    if (nodes_[x].value.rows() != rows)
      fail("graph: concat_cols row mismatch at " + label(x));
    cols += nodes_[x].value.cols();
  }
  Node n;
  n.op = Op::ConcatCols;
  n.parents = xs;
  n.value = Tensor(rows, cols);
  return add_node(std::move(n));
}

int Graph::slice_rows(int x, int r0, int r1) {
  const Tensor& vx = nodes_[x].value;
  if (!(0 <= r0 && r0 < r1 && r1 <= vx.rows()))
    fail("graph: slice_rows [" + std::to_string(r0) + ", " + std::to_string(r1) + ") out of " +
         label(x) + " with " + std::to_string(vx.rows()) + " rows");
  Node n;
  n.op = Op::SliceRows;
  n.parents = {x};
  n.r0 = r0;
  n.r1 = r1;
  n.value = Tensor(r1 - r0, vx.cols());
  return add_node(std::move(n));
}

void Graph::bind(int input_id, const Tensor& v) {
  check(input_id >= 0 && input_id < node_count(), "graph: bad input id");
  Node& n = nodes_[input_id];
  if (n.op != Op::Input) node_fail(input_id, "bind target is not an input");
  if (!n.value.same_shape(v))
    node_fail(input_id, "bound value " + v.shape_str() + " does not match declared " +
                            n.value.shape_str());
  n.value = v;
  n.has_value = true;
}

const Tensor& Graph::val(int id) const {
  const Node& n = nodes_[id];
  return n.op == Op::Param ? *n.bound : n.value;
}

const Tensor& Graph::value(int id) const {
  check(id >= 0 && id < node_count(), "graph: bad node id");
  return val(id);
}

const Tensor& Graph::grad(int id) const {
  check(id >= 0 && id < node_count(), "graph: bad node id");
  return nodes_[id].grad;
}

int Graph::rows(int id) const { return value(id).rows(); }
int Graph::cols(int id) const { return value(id).cols(); }

void Graph::forward(int root) {
  check(root >= 0 && root < node_count(), "graph: bad root id");
  for (int id = 0; id <= root; ++id) {
    Node& n = nodes_[id];
    switch (n.op) {
      case Op::Input:
        if (!n.has_value) node_fail(id, "input is unbound");
        break;
      case Op::Constant:
      case Op::Param:
        break;
      case Op::MatMul:
        kernels::matmul(val(n.parents[0]), val(n.parents[1]), n.value);
        break;
      case Op::Add: {
        const Tensor& a = val(n.parents[0]);
        const Tensor& b = val(n.parents[1]);
        if (a.same_shape(b))
          kernels::add(a, b, n.value);
        else
          kernels::add_rowvec(a, b, n.value);
        break;
      }
      case Op::Relu:
        kernels::relu(val(n.parents[0]), n.value);
        break;
      case Op::PositivePart:
        kernels::shifted_relu(val(n.parents[0]), n.attr, n.value);
        break;
      case Op::Square:
        kernels::square(val(n.parents[0]), n.value);
        break;
      case Op::Scale:
        kernels::scale(val(n.parents[0]), n.scalar, n.value);
        break;
      case Op::Sum:
        n.value(0, 0) = kernels::sum_all(val(n.parents[0]));
        break;
      case Op::ConcatRows: {
        int r = 0;
        for (int p : n.parents) {
          const Tensor& vp = val(p);
          for (int i = 0; i < vp.rows(); ++i, ++r)
            for (int j = 0; j < vp.cols(); ++j) n.value(r, j) = vp(i, j);
        }
        break;
      }
      case Op::ConcatCols: {
        int c = 0;
        for (int p : n.parents) {
          const Tensor& vp = val(p);
          for (int i = 0; i < vp.rows(); ++i)
            for (int j = 0; j < vp.cols(); ++j) n.value(i, c + j) = vp(i, j);
          c += vp.cols();
        }
        break;
      }
      case Op::SliceRows: {
        const Tensor& vp = val(n.parents[0]);
        for (int i = n.r0; i < n.r1; ++i)
          for (int j = 0; j < vp.cols(); ++j) n.value(i - n.r0, j) = vp(i, j);
        break;
      }
    }
  }
}

double Graph::forward_scalar(int root) {
  forward(root);
  const Tensor& v = value(root);
  if (v.rows() != 1 || v.cols() != 1)
    node_fail(root, "forward_scalar on a " + v.shape_str() + " value");
  if (!std::isfinite(v(0, 0))) node_fail(root, "non-finite value");
  return v(0, 0);
}

void Graph::backward(int root) {
  check(root >= 0 && root < node_count(), "graph: bad root id");
  {
    const Tensor& v = nodes_[root].op == Op::Param ? *nodes_[root].bound : nodes_[root].value;
    if (v.rows() != 1 || v.cols() != 1)
      node_fail(root, "backward root must be scalar, got " + v.shape_str());
  }
  for (int id = 0; id <= root; ++id)
    if (nodes_[id].needs_grad) nodes_[id].grad.fill(0.0);
  nodes_[root].grad(0, 0) = 1.0;
  for (int id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::Input:
      case Op::Constant:
      case Op::Param:
        break;
      case Op::MatMul: {
        Node& pa = nodes_[n.parents[0]];
        Node& pb = nodes_[n.parents[1]];
        if (pa.needs_grad) kernels::matmul_nt(g, val(n.parents[1]), pa.grad, true);
        if (pb.needs_grad) kernels::matmul_tn(val(n.parents[0]), g, pb.grad, true);
        break;
      }
      case Op::Add: {
        Node& pa = nodes_[n.parents[0]];
        Node& pb = nodes_[n.parents[1]];
        if (pa.needs_grad)
          for (size_t i = 0; i < g.size(); ++i) pa.grad.data()[i] += g.data()[i];
        if (pb.needs_grad) {
          if (pb.value.same_shape(n.value) ||
              (pb.op == Op::Param && pb.bound->same_shape(n.value)))
            for (size_t i = 0; i < g.size(); ++i) pb.grad.data()[i] += g.data()[i];
          else
            kernels::colsum_acc(g, pb.grad);
        }
        break;
      }
      case Op::Relu: {
        Node& p = nodes_[n.parents[0]];
        if (!p.needs_grad) break;
        const Tensor& x = val(n.parents[0]);
        // Subgradient 0 at the kink.
        for (size_t i = 0; i < g.size(); ++i)
          if (x.data()[i] > 0.0) p.grad.data()[i] += g.data()[i];
        break;
      }
      case Op::PositivePart: {
        Node& p = nodes_[n.parents[0]];
        if (!p.needs_grad) break;
        const Tensor& x = val(n.parents[0]);
        for (size_t i = 0; i < g.size(); ++i)
          if (x.data()[i] - n.attr.data()[i] > 0.0) p.grad.data()[i] += g.data()[i];
        break;
      }
      case Op::Square: {
        Node& p = nodes_[n.parents[0]];
        if (!p.needs_grad) break;
        const Tensor& x = val(n.parents[0]);
        for (size_t i = 0; i < g.size(); ++i) p.grad.data()[i] += 2.0 * x.data()[i] * g.data()[i];
        break;
      }
      case Op::Scale: {
        Node& p = nodes_[n.parents[0]];
        if (!p.needs_grad) break;
        for (size_t i = 0; i < g.size(); ++i) p.grad.data()[i] += n.scalar * g.data()[i];
        break;
      }
      case Op::Sum: {
        Node& p = nodes_[n.parents[0]];
        if (!p.needs_grad) break;
        const double gs = g(0, 0);
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad.data()[i] += gs;
        break;
      }
      case Op::ConcatRows: {
        int r = 0;
        for (int pi : n.parents) {
          Node& p = nodes_[pi];
          const int pr = val(pi).rows();
          if (p.needs_grad)
            for (int i = 0; i < pr; ++i)
              for (int j = 0; j < g.cols(); ++j) p.grad(i, j) += g(r + i, j);
          r += pr;
        }
        break;
      }
      case Op::ConcatCols: {
        int c = 0;
        for (int pi : n.parents) {
          Node& p = nodes_[pi];
          const int pc = val(pi).cols();
          if (p.needs_grad)
            for (int i = 0; i < g.rows(); ++i)
              for (int j = 0; j < pc; ++j) p.grad(i, j) += g(i, c + j);
          c += pc;
        }
        break;
      }
      case Op::SliceRows: {
        Node& p = nodes_[n.parents[0]];
        if (!p.needs_grad) break;
        for (int i = n.r0; i < n.r1; ++i)
          for (int j = 0; j < g.cols(); ++j) p.grad(i, j) += g(i - n.r0, j);
        break;
      }
    }
  }
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
  check(h > 0, "finite_diff_grad: step must be positive");
  Tensor xp = x;
  const double f0 = f(xp);
  if (!std::isfinite(f0)) fail("finite_diff_grad: base evaluation is non-finite");
  Tensor g(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < x.cols(); ++c) {
      const double saved = xp(r, c);
      xp(r, c) = saved + h;
      const double fp = f(xp);
      if (!std::isfinite(fp))
        fail("finite_diff_grad: non-finite value at coordinate (" + std::to_string(r) + ", " +
             std::to_string(c) + ")");
      g(r, c) = (fp - f0) / h;
      xp(r, c) = saved;
    }
  return g;
}

}  // namespace lvopt

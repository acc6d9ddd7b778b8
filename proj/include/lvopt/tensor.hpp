#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lvopt {

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

inline void check(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// Dense row-major matrix of doubles. Vectors are 1 x n or n x 1 as noted by
// the caller; shape is part of the value.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols) { resize(rows, cols); }

  static Tensor full(int rows, int cols, double v) {
    Tensor t(rows, cols);
    t.fill(v);
    return t;
  }

  static Tensor row_vector(const std::vector<double>& v) {
    Tensor t(1, static_cast<int>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) t.v_[i] = v[i];
    return t;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  void resize(int rows, int cols) {
    check(rows >= 0 && cols >= 0, "Tensor: negative dimension");
    rows_ = rows;
    cols_ = cols;
    v_.assign(static_cast<size_t>(rows) * cols, 0.0);
  }

  double& operator()(int r, int c) { return v_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return v_[static_cast<size_t>(r) * cols_ + c]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double* row(int r) { return v_.data() + static_cast<size_t>(r) * cols_; }
  const double* row(int r) const { return v_.data() + static_cast<size_t>(r) * cols_; }

  void fill(double v) {
    for (auto& x : v_) x = v;
  }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << rows_ << "x" << cols_;
    return os.str();
  }

  std::vector<double> to_vector() const { return v_; }

  std::vector<double> row_vec(int r) const {
    return std::vector<double>(row(r), row(r) + cols_);
  }

  void set_row(int r, const std::vector<double>& v) {
    check(static_cast<int>(v.size()) == cols_, "Tensor::set_row: size mismatch");
    for (int c = 0; c < cols_; ++c) (*this)(r, c) = v[c];
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  check(a.same_shape(b), "max_abs_diff: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace lvopt

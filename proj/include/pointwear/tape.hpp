#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pointwear/types.hpp"

namespace pw::ad {

/// Named trainable tensor plus its accumulated gradient and optimizer state.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  Parameter(std::string n, Matrix v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())),
        adam_m(Matrix::Zero(value.rows(), value.cols())),
        adam_v(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

class Tape;

/// Handle to a node on a tape. Copyable; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape over dense double matrices. Nodes are appended in
/// topological order; backward() walks them in reverse. Scalars are 1x1.
class Tape {
 public:
  Var constant(Matrix value);
  Var param(Parameter& p);

  // After backward(): gradient accumulated for a tape-local node.
  const Matrix& grad(Var v) const;

  // Seeds d(loss)=1 and pushes gradients to every reachable node. Parameter
  // leaves accumulate into Parameter::grad scaled by `scale`, or into `sink`
  // when given (so concurrent tapes never touch shared state).
  void backward(Var loss, double scale = 1.0,
                std::vector<std::pair<Parameter*, Matrix>>* sink = nullptr);

  std::size_t size() const { return nodes_.size(); }

  // --- elementwise / structural ---------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var add_rowvec(Var x, Var row);   // broadcast a 1xC row over all rows
  Var mul_rowvec(Var x, Var row);   // elementwise, row broadcast
  Var matmul(Var a, Var b);
  Var softplus(Var x);
  Var concat_cols(const std::vector<Var>& xs);
  Var concat_rows(const std::vector<Var>& xs);
  Var slice_cols(Var x, int begin, int count);
  Var repeat_row(Var row, Eigen::Index n);

  // --- gather / reduce --------------------------------------------------
  Var gather_rows(Var x, std::vector<uint32_t> idx);
  // out[i] = sum_j w(i,j) * x(idx(i,j)); idx/w are fixed (no grad through them)
  Var weighted_rows(Var x, std::vector<std::array<uint32_t, 3>> idx,
                    std::vector<std::array<double, 3>> w);
  // rows grouped in contiguous segments of `segment` rows; per-segment max
  Var segment_max(Var x, int segment);
  Var colwise_max(Var x);
  Var sum_squares(Var x);  // 1x1
  Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights);

  // Scalar node with precomputed d(out)/d(parent_i); used by losses whose
  // forward pass already produces the gradients (nearest-neighbor matches,
  // SDF hinges).
  Var custom_scalar(Matrix value, const std::vector<Var>& parents, std::vector<Matrix> grads);

  // --- geometry-aware --------------------------------------------------
  // y_i = R_i x_i + t_i with fixed rigid transforms
  Var apply_rigid(Var x, const std::vector<RigidTransform>& transforms);
  // y_i = R_i x_i (normals)
  Var rotate_rows(Var x, const std::vector<RigidTransform>& transforms);
  // rows normalized to unit length; rows with norm < 1e-12 map to (0,0,1)
  // with zero gradient
  Var normalize_rows(Var x);

  const Matrix& value(int id) const { return nodes_[id].value; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Parameter* parameter = nullptr;
    std::vector<int> parents;
    std::function<void(Tape&, const Node&)> backward;
  };

  std::vector<Node> nodes_;
  double param_scale_ = 1.0;

  Var push(Matrix value, std::vector<int> parents,
           std::function<void(Tape&, const Node&)> backward);
  Matrix& grad_ref(int id) { return nodes_[id].grad; }
  friend struct Var;
};

// Numerically stable softplus and its derivative (sigmoid).
double softplus_scalar(double x);
double sigmoid_scalar(double x);

}  // namespace pw::ad

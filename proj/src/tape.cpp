#include "pointwear/tape.hpp"

#include <cmath>

namespace pw::ad {

const Matrix& Var::value() const { return tape->value(id); }

double softplus_scalar(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var Tape::push(Matrix value, std::vector<int> parents,
               std::function<void(Tape&, const Node&)> backward) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.backward = std::move(backward);
  for (int p : n.parents) {
    if (nodes_[p].needs_grad) {
      n.needs_grad = true;
      break;
    }
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) { return push(std::move(value), {}, nullptr); }

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.needs_grad = true;
  n.parameter = &p;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

const Matrix& Tape::grad(Var v) const { return nodes_[v.id].grad; }

void Tape::backward(Var loss, double scale, std::vector<std::pair<Parameter*, Matrix>>* sink) {
  Node& top = nodes_[loss.id];
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw ArgumentError("backward: loss must be a 1x1 scalar");
  }
  for (Node& n : nodes_) {
    if (n.needs_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  if (!top.needs_grad) return;  // loss does not depend on any parameter
  top.grad(0, 0) = 1.0;
  param_scale_ = scale;

  for (int i = loss.id; i >= 0; --i) {
    const Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.parameter != nullptr) {
      if (sink != nullptr) {
        sink->emplace_back(n.parameter, param_scale_ * n.grad);
      } else {
        n.parameter->grad += param_scale_ * n.grad;
      }
    } else if (n.backward) {
      n.backward(*this, n);
    }
  }
}

namespace {
inline void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(what) + ": shape mismatch");
  }
}
}  // namespace

Var Tape::add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  const int pa = a.id, pb = b.id;
  return push(a.value() + b.value(), {pa, pb}, [pa, pb](Tape& t, const Node& n) {
    if (t.nodes_[pa].needs_grad) t.grad_ref(pa) += n.grad;
    if (t.nodes_[pb].needs_grad) t.grad_ref(pb) += n.grad;
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  const int pa = a.id, pb = b.id;
  return push(a.value() - b.value(), {pa, pb}, [pa, pb](Tape& t, const Node& n) {
    if (t.nodes_[pa].needs_grad) t.grad_ref(pa) += n.grad;
    if (t.nodes_[pb].needs_grad) t.grad_ref(pb) -= n.grad;
  });
}

Var Tape::scale(Var a, double s) {
  const int pa = a.id;
  return push(s * a.value(), {pa}, [pa, s](Tape& t, const Node& n) {
    if (t.nodes_[pa].needs_grad) t.grad_ref(pa) += s * n.grad;
  });
}

Var Tape::add_rowvec(Var x, Var row) {
  if (row.value().rows() != 1 || row.value().cols() != x.value().cols()) {
    throw ArgumentError("add_rowvec: row must be 1 x cols(x)");
  }
  const int px = x.id, pr = row.id;
  Matrix out = x.value();
  out.rowwise() += row.value().row(0);
  return push(std::move(out), {px, pr}, [px, pr](Tape& t, const Node& n) {
    if (t.nodes_[px].needs_grad) t.grad_ref(px) += n.grad;
    if (t.nodes_[pr].needs_grad) t.grad_ref(pr) += n.grad.colwise().sum();
  });
}

Var Tape::mul_rowvec(Var x, Var row) {
  if (row.value().rows() != 1 || row.value().cols() != x.value().cols()) {
    throw ArgumentError("mul_rowvec: row must be 1 x cols(x)");
  }
  const int px = x.id, pr = row.id;
  Matrix out = x.value().array().rowwise() * row.value().row(0).array();
  return push(std::move(out), {px, pr}, [px, pr](Tape& t, const Node& n) {
    if (t.nodes_[px].needs_grad) {
      t.grad_ref(px).array() += n.grad.array().rowwise() * t.value(pr).row(0).array();
    }
    if (t.nodes_[pr].needs_grad) {
      t.grad_ref(pr) += (n.grad.array() * t.value(px).array()).matrix().colwise().sum();
    }
  });
}

Var Tape::matmul(Var a, Var b) {
  if (a.value().cols() != b.value().rows()) throw ArgumentError("matmul: inner dim mismatch");
  const int pa = a.id, pb = b.id;
  return push(a.value() * b.value(), {pa, pb}, [pa, pb](Tape& t, const Node& n) {
    if (t.nodes_[pa].needs_grad) t.grad_ref(pa) += n.grad * t.value(pb).transpose();
    if (t.nodes_[pb].needs_grad) t.grad_ref(pb) += t.value(pa).transpose() * n.grad;
  });
}

Var Tape::softplus(Var x) {
  const int px = x.id;
  Matrix out = x.value().unaryExpr([](double v) { return softplus_scalar(v); });
  return push(std::move(out), {px}, [px](Tape& t, const Node& n) {
    if (!t.nodes_[px].needs_grad) return;
    t.grad_ref(px).array() +=
        n.grad.array() * t.value(px).unaryExpr([](double v) { return sigmoid_scalar(v); }).array();
  });
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw ArgumentError("concat_cols: empty");
  Eigen::Index rows = xs[0].rows(), cols = 0;
  for (const Var& v : xs) {
    if (v.rows() != rows) throw ArgumentError("concat_cols: row mismatch");
    cols += v.cols();
  }
  Matrix out(rows, cols);
  std::vector<int> parents;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Var& v : xs) {
    out.middleCols(at, v.cols()) = v.value();
    parents.push_back(v.id);
    offsets.push_back(at);
    at += v.cols();
  }
  return push(std::move(out), parents, [offsets](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      const int p = n.parents[i];
      if (!t.nodes_[p].needs_grad) continue;
      t.grad_ref(p) += n.grad.middleCols(offsets[i], t.value(p).cols());
    }
  });
}

Var Tape::concat_rows(const std::vector<Var>& xs) {
  if (xs.empty()) throw ArgumentError("concat_rows: empty");
  Eigen::Index cols = xs[0].cols(), rows = 0;
  for (const Var& v : xs) {
    if (v.cols() != cols) throw ArgumentError("concat_rows: col mismatch");
    rows += v.rows();
  }
  Matrix out(rows, cols);
  std::vector<int> parents;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Var& v : xs) {
    out.middleRows(at, v.rows()) = v.value();
    parents.push_back(v.id);
    offsets.push_back(at);
    at += v.rows();
  }
  return push(std::move(out), parents, [offsets](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      const int p = n.parents[i];
      if (!t.nodes_[p].needs_grad) continue;
      t.grad_ref(p) += n.grad.middleRows(offsets[i], t.value(p).rows());
    }
  });
}

Var Tape::slice_cols(Var x, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > x.cols()) {
    throw ArgumentError("slice_cols: out of range");
  }
  const int px = x.id;
  return push(x.value().middleCols(begin, count), {px}, [px, begin, count](Tape& t, const Node& n) {
    if (t.nodes_[px].needs_grad) t.grad_ref(px).middleCols(begin, count) += n.grad;
  });
}

Var Tape::repeat_row(Var row, Eigen::Index n) {
  if (row.value().rows() != 1) throw ArgumentError("repeat_row: input must be 1xC");
  const int pr = row.id;
  Matrix out = row.value().replicate(n, 1);
  return push(std::move(out), {pr}, [pr](Tape& t, const Node& nd) {
    if (t.nodes_[pr].needs_grad) t.grad_ref(pr) += nd.grad.colwise().sum();
  });
}

Var Tape::gather_rows(Var x, std::vector<uint32_t> idx) {
  const int px = x.id;
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= static_cast<uint32_t>(x.rows())) throw ArgumentError("gather_rows: index range");
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(idx[i]);
  }
  return push(std::move(out), {px}, [px, idx = std::move(idx)](Tape& t, const Node& n) {
    if (!t.nodes_[px].needs_grad) return;
    Matrix& g = t.grad_ref(px);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var Tape::weighted_rows(Var x, std::vector<std::array<uint32_t, 3>> idx,
                        std::vector<std::array<double, 3>> w) {
  if (idx.size() != w.size()) throw ArgumentError("weighted_rows: idx/w length mismatch");
  const int px = x.id;
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (int j = 0; j < 3; ++j) {
      if (idx[i][j] >= static_cast<uint32_t>(x.rows())) {
        throw ArgumentError("weighted_rows: index range");
      }
      out.row(static_cast<Eigen::Index>(i)) += w[i][j] * x.value().row(idx[i][j]);
    }
  }
  return push(std::move(out), {px},
              [px, idx = std::move(idx), w = std::move(w)](Tape& t, const Node& n) {
                if (!t.nodes_[px].needs_grad) return;
                Matrix& g = t.grad_ref(px);
                for (std::size_t i = 0; i < idx.size(); ++i) {
                  for (int j = 0; j < 3; ++j) {
                    g.row(idx[i][j]) += w[i][j] * n.grad.row(static_cast<Eigen::Index>(i));
                  }
                }
              });
}

Var Tape::segment_max(Var x, int segment) {
  if (segment <= 0 || x.rows() % segment != 0) {
    throw ArgumentError("segment_max: rows must be a multiple of the segment length");
  }
  const int px = x.id;
  const Eigen::Index groups = x.rows() / segment;
  Matrix out(groups, x.cols());
  std::vector<uint32_t> argmax(static_cast<std::size_t>(groups) * x.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::Index best = g * segment;
      double bv = x.value()(best, c);
      for (int r = 1; r < segment; ++r) {
        const double v = x.value()(g * segment + r, c);
        if (v > bv) {
          bv = v;
          best = g * segment + r;
        }
      }
      out(g, c) = bv;
      argmax[static_cast<std::size_t>(g) * x.cols() + c] = static_cast<uint32_t>(best);
    }
  }
  return push(std::move(out), {px}, [px, argmax = std::move(argmax)](Tape& t, const Node& n) {
    if (!t.nodes_[px].needs_grad) return;
    Matrix& g = t.grad_ref(px);
    for (Eigen::Index gr = 0; gr < n.grad.rows(); ++gr) {
      for (Eigen::Index c = 0; c < n.grad.cols(); ++c) {
        g(argmax[static_cast<std::size_t>(gr) * n.grad.cols() + c], c) += n.grad(gr, c);
      }
    }
  });
}

Var Tape::colwise_max(Var x) {
  if (x.rows() == 0) throw ArgumentError("colwise_max: empty");
  const int px = x.id;
  Matrix out(1, x.cols());
  std::vector<uint32_t> argmax(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::Index best = 0;
    double bv = x.value()(0, c);
    for (Eigen::Index r = 1; r < x.rows(); ++r) {
      if (x.value()(r, c) > bv) {
        bv = x.value()(r, c);
        best = r;
      }
    }
    out(0, c) = bv;
    argmax[c] = static_cast<uint32_t>(best);
  }
  return push(std::move(out), {px}, [px, argmax = std::move(argmax)](Tape& t, const Node& n) {
    if (!t.nodes_[px].needs_grad) return;
    Matrix& g = t.grad_ref(px);
    for (Eigen::Index c = 0; c < n.grad.cols(); ++c) g(argmax[c], c) += n.grad(0, c);
  });
}

Var Tape::sum_squares(Var x) {
  const int px = x.id;
  Matrix out(1, 1);
  out(0, 0) = x.value().squaredNorm();
  return push(std::move(out), {px}, [px](Tape& t, const Node& n) {
    if (t.nodes_[px].needs_grad) t.grad_ref(px) += 2.0 * n.grad(0, 0) * t.value(px);
  });
}

Var Tape::weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights) {
  if (scalars.size() != weights.size()) throw ArgumentError("weighted_sum: length mismatch");
  Matrix out(1, 1);
  out(0, 0) = 0.0;
  std::vector<int> parents;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i].rows() != 1 || scalars[i].cols() != 1) {
      throw ArgumentError("weighted_sum: inputs must be scalars");
    }
    out(0, 0) += weights[i] * scalars[i].value()(0, 0);
    parents.push_back(scalars[i].id);
  }
  return push(std::move(out), parents, [weights](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      const int p = n.parents[i];
      if (t.nodes_[p].needs_grad) t.grad_ref(p)(0, 0) += weights[i] * n.grad(0, 0);
    }
  });
}

Var Tape::custom_scalar(Matrix value, const std::vector<Var>& parents, std::vector<Matrix> grads) {
  if (value.rows() != 1 || value.cols() != 1) {
    throw ArgumentError("custom_scalar: value must be 1x1");
  }
  if (parents.size() != grads.size()) throw ArgumentError("custom_scalar: parent/grad mismatch");
  std::vector<int> pids;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    check_same_shape(parents[i].value(), grads[i], "custom_scalar");
    pids.push_back(parents[i].id);
  }
  return push(std::move(value), pids, [grads = std::move(grads)](Tape& t, const Node& n) {
    const double g = n.grad(0, 0);
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      const int p = n.parents[i];
      if (t.nodes_[p].needs_grad) t.grad_ref(p) += g * grads[i];
    }
  });
}

Var Tape::apply_rigid(Var x, const std::vector<RigidTransform>& transforms) {
  if (x.cols() != 3 || static_cast<std::size_t>(x.rows()) != transforms.size()) {
    throw ArgumentError("apply_rigid: expects Nx3 with one transform per row");
  }
  const int px = x.id;
  Matrix out(x.rows(), 3);
  std::vector<Mat3> rots(transforms.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.row(i) = (transforms[i].apply(x.value().row(i).transpose())).transpose();
    rots[i] = transforms[i].rotation;
  }
  return push(std::move(out), {px}, [px, rots = std::move(rots)](Tape& t, const Node& n) {
    if (!t.nodes_[px].needs_grad) return;
    Matrix& g = t.grad_ref(px);
    for (Eigen::Index i = 0; i < n.grad.rows(); ++i) {
      g.row(i) += n.grad.row(i) * rots[i];
    }
  });
}

Var Tape::rotate_rows(Var x, const std::vector<RigidTransform>& transforms) {
  if (x.cols() != 3 || static_cast<std::size_t>(x.rows()) != transforms.size()) {
    throw ArgumentError("rotate_rows: expects Nx3 with one transform per row");
  }
  const int px = x.id;
  Matrix out(x.rows(), 3);
  std::vector<Mat3> rots(transforms.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.row(i) = (transforms[i].rotation * x.value().row(i).transpose()).transpose();
    rots[i] = transforms[i].rotation;
  }
  return push(std::move(out), {px}, [px, rots = std::move(rots)](Tape& t, const Node& n) {
    if (!t.nodes_[px].needs_grad) return;
    Matrix& g = t.grad_ref(px);
    for (Eigen::Index i = 0; i < n.grad.rows(); ++i) {
      g.row(i) += n.grad.row(i) * rots[i];
    }
  });
}

Var Tape::normalize_rows(Var x) {
  const int px = x.id;
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double len = x.value().row(i).norm();
    if (len < 1e-12) {
      out.row(i).setZero();
      if (x.cols() == 3) out(i, 2) = 1.0;
    } else {
      out.row(i) = x.value().row(i) / len;
    }
  }
  return push(std::move(out), {px}, [px](Tape& t, const Node& n) {
    if (!t.nodes_[px].needs_grad) return;
    Matrix& g = t.grad_ref(px);
    const Matrix& xv = t.value(px);
    for (Eigen::Index i = 0; i < n.grad.rows(); ++i) {
      const double len = xv.row(i).norm();
      if (len < 1e-12) continue;  // flat spot by convention
      const Eigen::RowVectorXd y = xv.row(i) / len;
      const Eigen::RowVectorXd gi = n.grad.row(i);
      g.row(i) += (gi - (gi.dot(y)) * y) / len;
    }
  });
}

}  // namespace pw::ad

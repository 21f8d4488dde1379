#include "pointwear/losses.hpp"

#include <cmath>

namespace pw::losses {

void LossWeights::validate() const {
  if (lambda_cd < 0 || lambda_n < 0 || lambda_rd < 0 || lambda_rg < 0 || lambda_col < 0 ||
      epsilon < 0) {
    throw ArgumentError("loss weights must be non-negative");
  }
}

double LossTerms::total(const LossWeights& w) const {
  return w.lambda_cd * cd + w.lambda_n * (normal_active ? nml : 0.0) + w.lambda_rd * rd +
         w.lambda_rg * rg + w.lambda_col * col;
}

namespace {

struct MatchResult {
  std::vector<NearestHit> pred_to_gt;  // per predicted point
  std::vector<NearestHit> gt_to_pred;  // per ground-truth point
};

MatchResult match_clouds(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
  if (pred.empty() || gt.empty()) throw ArgumentError("chamfer: empty cloud");
  MatchResult m;
  {
    PointGrid grid(gt);
    m.pred_to_gt.resize(pred.size());
    parallel_for_each(pred.size(), [&](std::size_t i) { m.pred_to_gt[i] = grid.nearest(pred[i]); });
  }
  {
    PointGrid grid(pred);
    m.gt_to_pred.resize(gt.size());
    parallel_for_each(gt.size(), [&](std::size_t j) { m.gt_to_pred[j] = grid.nearest(gt[j]); });
  }
  return m;
}

double chamfer_from_matches(const MatchResult& m) {
  double t1 = 0.0;
  for (const NearestHit& h : m.pred_to_gt) t1 += h.sq_dist;
  double t2 = 0.0;
  for (const NearestHit& h : m.gt_to_pred) t2 += h.sq_dist;
  return t1 / static_cast<double>(m.pred_to_gt.size()) +
         t2 / static_cast<double>(m.gt_to_pred.size());
}

std::vector<Vec3> rows_to_points(const Matrix& m) {
  std::vector<Vec3> pts(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) pts[i] = m.row(i).transpose();
  return pts;
}

}  // namespace

double chamfer(const PointCloudN& a, const PointCloudN& b) {
  return chamfer_from_matches(match_clouds(a.points, b.points));
}

double normal_loss(const PointCloudN& pred, const PointCloudN& gt) {
  if (!pred.has_normals() || !gt.has_normals()) {
    throw ArgumentError("normal_loss: both clouds need normals");
  }
  if (pred.points.empty() || gt.points.empty()) throw ArgumentError("normal_loss: empty cloud");
  PointGrid grid(gt.points);
  std::vector<NearestHit> hits(pred.size());
  parallel_for_each(pred.size(), [&](std::size_t i) { hits[i] = grid.nearest(pred.points[i]); });
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum += (pred.normals[i] - gt.normals[hits[i].index]).cwiseAbs().sum();
  }
  return sum / static_cast<double>(pred.size());
}

double displacement_reg(const std::vector<Vec3>& displacements) {
  if (displacements.empty()) return 0.0;
  double sum = 0.0;
  for (const Vec3& r : displacements) sum += r.squaredNorm();
  return sum / static_cast<double>(displacements.size());
}

double garment_reg(const Matrix& local_codes, const Eigen::VectorXd& global_code) {
  double sum = 0.0;
  if (local_codes.rows() > 0) {
    sum = local_codes.squaredNorm() / static_cast<double>(local_codes.rows());
  }
  return sum + global_code.squaredNorm();
}

double collision_loss(const std::vector<Vec3>& points, const MeshDistanceField& body_field,
                      double eps) {
  if (eps < 0) throw ArgumentError("collision_loss: eps must be >= 0");
  if (points.empty()) return 0.0;
  std::vector<double> hinge(points.size());
  parallel_for_each(points.size(), [&](std::size_t i) {
    const double d = body_field.signed_distance(points[i]);
    hinge[i] = std::max(eps - d, 0.0);
  });
  double sum = 0.0;
  for (double h : hinge) sum += h;
  return sum / static_cast<double>(points.size());
}

// ---------------------------------------------------------------------------
// Tape nodes

ad::Var chamfer_node(ad::Tape& tape, ad::Var pred_points, const PointCloudN& target) {
  if (pred_points.cols() != 3) throw ArgumentError("chamfer_node: expects Nx3");
  const Matrix pred_val = pred_points.value();
  const std::vector<Vec3> pred = rows_to_points(pred_val);
  MatchResult m = match_clouds(pred, target.points);

  Matrix out(1, 1);
  out(0, 0) = chamfer_from_matches(m);

  const double inv_n = 1.0 / static_cast<double>(pred.size());
  const double inv_m = 1.0 / static_cast<double>(target.points.size());

  // d/dx_i of |x_i - y|^2 is 2(x_i - y); both directions contribute to the
  // predicted side, the target is fixed.
  Matrix grad = Matrix::Zero(pred_val.rows(), 3);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Vec3 diff = pred[i] - target.points[m.pred_to_gt[i].index];
    grad.row(static_cast<Eigen::Index>(i)) += (2.0 * inv_n) * diff.transpose();
  }
  for (std::size_t j = 0; j < target.points.size(); ++j) {
    const uint32_t i = m.gt_to_pred[j].index;
    const Vec3 diff = pred[i] - target.points[j];
    grad.row(i) += (2.0 * inv_m) * diff.transpose();
  }

  std::vector<ad::Var> parents{pred_points};
  return tape.custom_scalar(std::move(out), parents, {std::move(grad)});
}

ad::Var normal_node(ad::Tape& tape, const Matrix& pred_positions, ad::Var pred_normals,
                    const PointCloudN& target) {
  if (!target.has_normals()) throw ArgumentError("normal_node: target needs normals");
  if (pred_positions.rows() != pred_normals.rows()) {
    throw ArgumentError("normal_node: position/normal count mismatch");
  }
  const std::vector<Vec3> pred = rows_to_points(pred_positions);
  PointGrid grid(target.points);
  std::vector<NearestHit> hits(pred.size());
  parallel_for_each(pred.size(), [&](std::size_t i) { hits[i] = grid.nearest(pred[i]); });

  const Matrix& n_val = pred_normals.value();
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  Matrix grad = Matrix::Zero(n_val.rows(), 3);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Vec3 gt_n = target.normals[hits[i].index];
    for (int c = 0; c < 3; ++c) {
      const double d = n_val(static_cast<Eigen::Index>(i), c) - gt_n[c];
      sum += std::abs(d);
      // L1 subgradient, 0 at the kink
      grad(static_cast<Eigen::Index>(i), c) = inv_n * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
  }
  Matrix out(1, 1);
  out(0, 0) = sum * inv_n;

  std::vector<ad::Var> parents{pred_normals};
  return tape.custom_scalar(std::move(out), parents, {std::move(grad)});
}

ad::Var displacement_reg_node(ad::Tape& tape, ad::Var displacements) {
  const Eigen::Index n = displacements.rows();
  if (n == 0) return tape.constant(Matrix::Zero(1, 1));
  return tape.scale(tape.sum_squares(displacements), 1.0 / static_cast<double>(n));
}

ad::Var garment_reg_node(ad::Tape& tape, ad::Var local_codes, ad::Var global_code) {
  const Eigen::Index n = local_codes.rows();
  ad::Var global_term = tape.sum_squares(global_code);
  if (n == 0) return global_term;
  ad::Var local_term = tape.scale(tape.sum_squares(local_codes), 1.0 / static_cast<double>(n));
  return tape.add(local_term, global_term);
}

ad::Var collision_node(ad::Tape& tape, ad::Var gen_points, const MeshDistanceField& body_field,
                       double eps) {
  if (eps < 0) throw ArgumentError("collision_node: eps must be >= 0");
  if (gen_points.cols() != 3) throw ArgumentError("collision_node: expects Nx3");
  const Matrix pts_val = gen_points.value();
  const std::vector<Vec3> pts = rows_to_points(pts_val);
  const std::size_t n = pts.size();
  if (n == 0) return tape.constant(Matrix::Zero(1, 1));

  std::vector<double> hinge(n);
  std::vector<Vec3> sdf_grad(n);
  parallel_for_each(n, [&](std::size_t i) {
    const auto [d, g] = body_field.signed_distance_grad(pts[i]);
    hinge[i] = std::max(eps - d, 0.0);
    sdf_grad[i] = g;
  });

  double sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix grad = Matrix::Zero(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    sum += hinge[i];
    if (hinge[i] > 0.0) {
      grad.row(static_cast<Eigen::Index>(i)) = -inv_n * sdf_grad[i].transpose();
    }
  }
  Matrix out(1, 1);
  out(0, 0) = sum * inv_n;

  std::vector<ad::Var> parents{gen_points};
  return tape.custom_scalar(std::move(out), parents, {std::move(grad)});
}

}  // namespace pw::losses

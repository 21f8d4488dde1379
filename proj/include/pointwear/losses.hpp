#pragma once

#include <vector>

#include "pointwear/geometry.hpp"
#include "pointwear/tape.hpp"
#include "pointwear/types.hpp"

namespace pw::losses {

struct LossWeights {
  double lambda_cd = 1.0e4;
  double lambda_n = 1.0;
  double lambda_rd = 2.0e3;
  double lambda_rg = 1.0;
  double lambda_col = 2.0e-2;
  double epsilon = 5.0e-3;  // collision margin, meters

  void validate() const;
};

// Bi-directional normalized squared Chamfer distance.
double chamfer(const PointCloudN& a, const PointCloudN& b);

// Mean L1 gap between each predicted normal and the normal of its nearest
// (by position) ground-truth point.
double normal_loss(const PointCloudN& pred, const PointCloudN& gt);

// Mean squared norm of the displacements.
double displacement_reg(const std::vector<Vec3>& displacements);

// Mean squared norm of the per-sample garment codes plus the squared norm of
// the global code.
double garment_reg(const Matrix& local_codes, const Eigen::VectorXd& global_code);

// Mean hinge on the signed distance: max(eps - d(x), 0) per generated point.
double collision_loss(const std::vector<Vec3>& points, const MeshDistanceField& body_field,
                      double eps);

struct LossTerms {
  double cd = 0.0;
  double nml = 0.0;
  double rd = 0.0;
  double rg = 0.0;
  double col = 0.0;
  bool normal_active = false;

  double total(const LossWeights& w) const;
};

// ---------------------------------------------------------------------------
// Tape nodes. Nearest-neighbor matches are recomputed at every evaluation and
// treated as constants: gradients flow through distances only.

ad::Var chamfer_node(ad::Tape& tape, ad::Var pred_points, const PointCloudN& target);

// Matching uses `pred_positions` (fixed at forward time); the loss value and
// gradient involve only the normals.
ad::Var normal_node(ad::Tape& tape, const Matrix& pred_positions, ad::Var pred_normals,
                    const PointCloudN& target);

ad::Var displacement_reg_node(ad::Tape& tape, ad::Var displacements);

ad::Var garment_reg_node(ad::Tape& tape, ad::Var local_codes, ad::Var global_code);

ad::Var collision_node(ad::Tape& tape, ad::Var gen_points, const MeshDistanceField& body_field,
                       double eps);

}  // namespace pw::losses

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pointwear/render.hpp"
#include "pointwear/types.hpp"

namespace pw::eval {

struct EvalCameras {
  std::vector<OrthoCamera> cameras;
  double splat_radius = 5.0;

  // Front and back orthographic views fitted to the reference cloud.
  static EvalCameras standard(const PointCloudN& reference, int resolution = 1024,
                              double splat_radius = 5.0);
};

// Mean squared RGB difference between renders of the two clouds, over all
// pixels (background included), averaged over views, reported x 100.
double mse_normal_maps(const PointCloudN& pred, const PointCloudN& gt, const EvalCameras& cams);

// Chamfer distance in reporting units of 1e-4 m^2.
double cd_eval(const PointCloudN& pred, const PointCloudN& gt);
// L1 normal discrepancy in reporting units of 1e-1.
double nml_eval(const PointCloudN& pred, const PointCloudN& gt);

// Maps each render to one embedding row.
using Embedder = std::function<Matrix(const std::vector<NormalMapRender>&)>;

struct FidResult {
  bool available = false;
  double value = 0.0;
  std::string status;  // "ok" or why the metric is unavailable
};

// Frechet distance between Gaussian fits of the two embedding sets. Without
// an embedder the result is explicitly unavailable, never silently zero.
FidResult fid_stub(const std::vector<NormalMapRender>& pred_renders,
                   const std::vector<NormalMapRender>& gt_renders, const Embedder& embedder);

double frechet_from_embeddings(const Matrix& a, const Matrix& b);

struct FrameMetrics {
  std::string id;
  double mse = 0.0;
  double cd = 0.0;
  double nml = 0.0;
};

struct Report {
  std::vector<FrameMetrics> frames;
  double mean_mse = 0.0;
  double mean_cd = 0.0;
  double mean_nml = 0.0;
  int resolution = 1024;
  double splat_radius = 5.0;

  bool has_nan() const;
  io::json to_json() const;
};

Report evaluate_frames(const std::vector<std::pair<std::string, PointCloudN>>& pred,
                       const std::vector<std::pair<std::string, PointCloudN>>& gt,
                       int resolution = 1024, double splat_radius = 5.0,
                       const std::string& dump_dir = "");

}  // namespace pw::eval

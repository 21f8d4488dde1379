#include "pointwear/evaluator.hpp"

#include <cmath>
#include <filesystem>

#include "pointwear/losses.hpp"

namespace pw::eval {

EvalCameras EvalCameras::standard(const PointCloudN& reference, int resolution,
                                  double splat_radius) {
  if (reference.points.empty()) throw ArgumentError("eval cameras: empty reference cloud");
  Vec3 lo = reference.points[0], hi = reference.points[0];
  for (const Vec3& p : reference.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  EvalCameras out;
  out.splat_radius = splat_radius;
  OrthoCamera cam;
  cam.width = cam.height = resolution;
  cam.center = 0.5 * (lo + hi);
  cam.meters_per_pixel = 1.2 * std::max(hi.x() - lo.x(), hi.y() - lo.y()) / resolution;
  cam.view = ViewSide::kFront;
  out.cameras.push_back(cam);
  cam.view = ViewSide::kBack;
  out.cameras.push_back(cam);
  return out;
}

double mse_normal_maps(const PointCloudN& pred, const PointCloudN& gt, const EvalCameras& cams) {
  if (!pred.has_normals() && !pred.points.empty()) {
    throw ArgumentError("mse_normal_maps: pred cloud lacks normals");
  }
  if (!gt.has_normals() && !gt.points.empty()) {
    throw ArgumentError("mse_normal_maps: gt cloud lacks normals");
  }
  if (cams.cameras.empty()) throw ArgumentError("mse_normal_maps: no cameras");

  double view_sum = 0.0;
  for (const OrthoCamera& cam : cams.cameras) {
    const NormalMapRender a = render_normal_map(pred, cam, cams.splat_radius);
    const NormalMapRender b = render_normal_map(gt, cam, cams.splat_radius);
    double px_sum = 0.0;
    for (std::size_t i = 0; i < a.color.size(); ++i) {
      const double d = a.color[i] - b.color[i];
      px_sum += d * d;
    }
    view_sum += px_sum / static_cast<double>(a.color.size());
  }
  return 100.0 * view_sum / static_cast<double>(cams.cameras.size());
}

double cd_eval(const PointCloudN& pred, const PointCloudN& gt) {
  return losses::chamfer(pred, gt) * 1.0e4;
}

double nml_eval(const PointCloudN& pred, const PointCloudN& gt) {
  return losses::normal_loss(pred, gt) * 1.0e1;
}

namespace {

// tr((A B)^{1/2}) computed through the symmetric product sqrt(A) B sqrt(A);
// tiny negative eigenvalues from roundoff clamp to zero.
double trace_sqrt_product(const Matrix& a, const Matrix& b) {
  Eigen::SelfAdjointEigenSolver<Matrix> es_a(0.5 * (a + a.transpose()));
  Eigen::VectorXd ev = es_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix sqrt_a = es_a.eigenvectors() * ev.asDiagonal() * es_a.eigenvectors().transpose();
  const Matrix m = sqrt_a * b * sqrt_a;
  Eigen::SelfAdjointEigenSolver<Matrix> es_m(0.5 * (m + m.transpose()));
  return es_m.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

double frechet_from_embeddings(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ArgumentError("frechet: embedding dims differ");
  if (a.rows() < 2 || b.rows() < 2) throw ArgumentError("frechet: need at least 2 embeddings");

  const Eigen::RowVectorXd mu_a = a.colwise().mean();
  const Eigen::RowVectorXd mu_b = b.colwise().mean();
  const Matrix ca = (a.rowwise() - mu_a).transpose() * (a.rowwise() - mu_a) /
                    static_cast<double>(a.rows() - 1);
  const Matrix cb = (b.rowwise() - mu_b).transpose() * (b.rowwise() - mu_b) /
                    static_cast<double>(b.rows() - 1);

  const double mean_term = (mu_a - mu_b).squaredNorm();
  return mean_term + ca.trace() + cb.trace() - 2.0 * trace_sqrt_product(ca, cb);
}

FidResult fid_stub(const std::vector<NormalMapRender>& pred_renders,
                   const std::vector<NormalMapRender>& gt_renders, const Embedder& embedder) {
  FidResult r;
  if (!embedder) {
    r.available = false;
    r.status = "unavailable: no embedder supplied";
    return r;
  }
  const Matrix ea = embedder(pred_renders);
  const Matrix eb = embedder(gt_renders);
  r.value = frechet_from_embeddings(ea, eb);
  r.available = true;
  r.status = "ok";
  return r;
}

bool Report::has_nan() const {
  auto bad = [](double v) { return !std::isfinite(v); };
  if (bad(mean_mse) || bad(mean_cd) || bad(mean_nml)) return true;
  for (const FrameMetrics& f : frames) {
    if (bad(f.mse) || bad(f.cd) || bad(f.nml)) return true;
  }
  return false;
}

io::json Report::to_json() const {
  io::json j;
  j["kind"] = "metrics_report";
  // Declared rendering conventions so numbers are comparable across runs.
  j["conventions"] = {{"views", {"front", "back"}},
                      {"resolution", resolution},
                      {"splat_radius", splat_radius},
                      {"background", "white"},
                      {"mse_over_all_pixels", true},
                      {"units", {{"mse", "1e-2"}, {"cd", "1e-4 m^2"}, {"nml", "1e-1"}}}};
  io::json per_frame = io::json::array();
  for (const FrameMetrics& f : frames) {
    per_frame.push_back({{"id", f.id}, {"mse", f.mse}, {"cd", f.cd}, {"nml", f.nml}});
  }
  j["frames"] = per_frame;
  j["aggregate"] = {{"mse", mean_mse}, {"cd", mean_cd}, {"nml", mean_nml}};
  return j;
}

Report evaluate_frames(const std::vector<std::pair<std::string, PointCloudN>>& pred,
                       const std::vector<std::pair<std::string, PointCloudN>>& gt, int resolution,
                       double splat_radius, const std::string& dump_dir) {
  if (pred.size() != gt.size()) throw ArgumentError("evaluate_frames: frame count mismatch");
  if (pred.empty()) throw ArgumentError("evaluate_frames: no frames");

  Report report;
  report.resolution = resolution;
  report.splat_radius = splat_radius;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const EvalCameras cams = EvalCameras::standard(gt[i].second, resolution, splat_radius);
    FrameMetrics fm;
    fm.id = pred[i].first;
    fm.mse = mse_normal_maps(pred[i].second, gt[i].second, cams);
    fm.cd = cd_eval(pred[i].second, gt[i].second);
    fm.nml = nml_eval(pred[i].second, gt[i].second);
    report.frames.push_back(fm);
    report.mean_mse += fm.mse / static_cast<double>(pred.size());
    report.mean_cd += fm.cd / static_cast<double>(pred.size());
    report.mean_nml += fm.nml / static_cast<double>(pred.size());

    if (!dump_dir.empty()) {
      namespace fs = std::filesystem;
      fs::create_directories(dump_dir);
      for (std::size_t c = 0; c < cams.cameras.size(); ++c) {
        const std::string side = cams.cameras[c].view == ViewSide::kFront ? "front" : "back";
        io::write_png(fs::path(dump_dir) / (fm.id + "_pred_" + side + ".png"),
                      render_normal_map(pred[i].second, cams.cameras[c], splat_radius).to_image());
        io::write_png(fs::path(dump_dir) / (fm.id + "_gt_" + side + ".png"),
                      render_normal_map(gt[i].second, cams.cameras[c], splat_radius).to_image());
      }
    }
  }
  return report;
}

}  // namespace pw::eval

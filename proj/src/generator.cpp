#include "pointwear/generator.hpp"

#include <cmath>

#include "pointwear/deformer.hpp"
#include "pointwear/geometry.hpp"

namespace pw {

int GeneratorConfig::grid_side() const {
  return static_cast<int>(std::lround(std::sqrt(static_cast<double>(points / patches))));
}

void GeneratorConfig::validate() const {
  if (patches <= 0 || points <= 0) throw ArgumentError("generator: non-positive sizes");
  if (points % patches != 0) throw ArgumentError("generator: patches must divide points");
  const int side = grid_side();
  if (side * side != points / patches) {
    throw ArgumentError("generator: per-patch count must be a perfect square");
  }
  if (pose_dim <= 0 || garment_dim <= 0 || width <= 0 || hidden_layers <= 0) {
    throw ArgumentError("generator: non-positive network dims");
  }
}

std::vector<PointCloudN> sample_part_points(const ArticulatedBody& body,
                                            const std::vector<Vec3>& posed_vertices,
                                            const std::vector<std::string>& part_names,
                                            std::size_t n_per_part, uint64_t seed) {
  if (posed_vertices.size() != body.vertex_count()) {
    throw ArgumentError("sample_part_points: posed vertex count mismatch");
  }

  // Face -> part by corner majority, lowest id on ties.
  std::vector<uint8_t> face_part(body.faces.size());
  for (std::size_t f = 0; f < body.faces.size(); ++f) {
    const auto& tri = body.faces[f];
    const uint8_t a = body.part_labels[tri[0]], b = body.part_labels[tri[1]],
                  c = body.part_labels[tri[2]];
    if (a == b || a == c) {
      face_part[f] = a;
    } else if (b == c) {
      face_part[f] = b;
    } else {
      face_part[f] = std::min({a, b, c});
    }
  }

  std::vector<PointCloudN> out;
  for (std::size_t p = 0; p < part_names.size(); ++p) {
    const int part = body.part_index(part_names[p]);
    if (part < 0) throw ArgumentError("sample_part_points: unknown part: " + part_names[p]);

    TriMesh sub;
    sub.vertices = posed_vertices;
    for (std::size_t f = 0; f < body.faces.size(); ++f) {
      if (face_part[f] == part) sub.faces.push_back(body.faces[f]);
    }
    if (sub.faces.empty()) {
      throw ArgumentError("sample_part_points: part has no faces: " + part_names[p]);
    }
    SurfaceSamples s = sample_surface(sub, n_per_part, subseed(seed, "part_points", p));
    out.push_back(std::move(s.cloud));
  }
  return out;
}

PartEncoder::PartEncoder(nn::ParamStore& store, const std::string& name,
                         const PartEncoderConfig& config, Rng& rng)
    : config_(config) {
  nn::SetEncoderConfig cfg = nn::SetEncoderConfig::global_default(
      config_.feature_dim, config_.abstraction_counts, config_.group_k);
  encoder_ = std::make_unique<nn::SetEncoder>(store, name, cfg, /*dense=*/false, rng);
}

nn::SaPlan PartEncoder::plan(const PointCloudN& part_cloud) const {
  if (part_cloud.points.empty()) throw ArgumentError("part encoder: empty part cloud");
  return nn::build_sa_plan(part_cloud.points, encoder_->config(), /*with_fp=*/false);
}

ad::Var PartEncoder::encode_parts(ad::Tape& tape, const std::vector<nn::SaPlan>& plans,
                                  const std::vector<PointCloudN>& part_clouds) const {
  if (plans.size() != part_clouds.size() || plans.empty()) {
    throw ArgumentError("part encoder: need one plan per part cloud");
  }
  std::vector<ad::Var> per_part;
  for (std::size_t p = 0; p < plans.size(); ++p) {
    if (part_clouds[p].points.empty()) throw ArgumentError("part encoder: empty part cloud");
    Matrix feats = Matrix(static_cast<Eigen::Index>(part_clouds[p].size()), 3);
    for (std::size_t i = 0; i < part_clouds[p].size(); ++i) {
      feats.row(static_cast<Eigen::Index>(i)) = part_clouds[p].points[i].transpose();
    }
    per_part.push_back(encoder_->forward_global(tape, plans[p], feats));
  }
  return tape.colwise_max(tape.concat_rows(per_part));
}

PatchGenerator::PatchGenerator(nn::ParamStore& store, const std::string& name,
                               const GeneratorConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  const int side = config_.grid_side();
  grid_.resize(static_cast<Eigen::Index>(side) * side, 2);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double u = side == 1 ? 0.5 : static_cast<double>(c) / (side - 1);
      const double v = side == 1 ? 0.5 : static_cast<double>(r) / (side - 1);
      grid_.row(static_cast<Eigen::Index>(r) * side + c) << u, v;
    }
  }

  const int style_dim = config_.pose_dim + config_.garment_dim;
  for (int k = 0; k < config_.patches; ++k) {
    Patch patch;
    int in = 2;
    for (int l = 0; l < config_.hidden_layers; ++l) {
      const std::string base =
          name + ".p" + std::to_string(k) + ".l" + std::to_string(l);
      PatchLayer layer{
          nn::Linear::make(store, base, in, config_.width, rng),
          nn::Linear::make(store, base + ".fs", style_dim, config_.width, rng),
          nn::Linear::make(store, base + ".fh", style_dim, config_.width, rng),
      };
      // Modulation starts at identity scale.
      layer.film_scale.bias->value.setOnes();
      patch.layers.push_back(std::move(layer));
      in = config_.width;
    }
    patch.head = nn::Linear::make(store, name + ".p" + std::to_string(k) + ".head", in, 6, rng);
    // Normal channels start pointing up so the normalization is well defined
    // from the first step.
    patch.head.bias->value(0, 5) = 1.0;
    patches_.push_back(std::move(patch));
  }
}

PatchGenerator::Out PatchGenerator::forward(ad::Tape& tape, ad::Var pose_code,
                                            ad::Var garment_code) const {
  if (pose_code.rows() != 1 || pose_code.cols() != config_.pose_dim) {
    throw ArgumentError("generator: pose code must be 1 x pose_dim");
  }
  if (garment_code.rows() != 1 || garment_code.cols() != config_.garment_dim) {
    throw ArgumentError("generator: garment code must be 1 x garment_dim");
  }
  ad::Var style = tape.concat_cols({pose_code, garment_code});

  std::vector<ad::Var> patch_points;
  std::vector<ad::Var> patch_normals;
  for (const Patch& patch : patches_) {
    ad::Var x = tape.constant(grid_);
    for (const PatchLayer& layer : patch.layers) {
      ad::Var h = layer.main.apply(tape, x);
      ad::Var scale = layer.film_scale.apply(tape, style);
      ad::Var shift = layer.film_shift.apply(tape, style);
      x = tape.softplus(tape.add_rowvec(tape.mul_rowvec(h, scale), shift));
    }
    ad::Var head = patch.head.apply(tape, x);
    patch_points.push_back(tape.slice_cols(head, 0, 3));
    patch_normals.push_back(tape.normalize_rows(tape.slice_cols(head, 3, 3)));
  }

  Out out{tape.concat_rows(patch_points), tape.concat_rows(patch_normals)};
  return out;
}

GeneratedCloud generate(const PatchGenerator& generator, const Eigen::RowVectorXd& pose_code,
                        const Eigen::RowVectorXd& garment_code) {
  ad::Tape tape;
  ad::Var pose = tape.constant(pose_code);
  ad::Var garment = tape.constant(garment_code);
  PatchGenerator::Out fwd = generator.forward(tape, pose, garment);

  GeneratedCloud out;
  const Matrix& pts = fwd.points.value();
  const Matrix& nrm = fwd.normals.value();
  if (!pts.allFinite() || !nrm.allFinite()) {
    // Identify the first offending patch for the fault report.
    const int per_patch = generator.config().points / generator.config().patches;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      if (!pts.row(i).allFinite() || !nrm.row(i).allFinite()) {
        throw NumericError("generator produced non-finite output in patch " +
                           std::to_string(i / per_patch));
      }
    }
  }
  out.cloud.points = matrix_to_points(pts);
  out.cloud.normals = matrix_to_points(nrm);
  out.patch_of_point.resize(out.cloud.size());
  const int per_patch = generator.config().points / generator.config().patches;
  for (std::size_t i = 0; i < out.patch_of_point.size(); ++i) {
    out.patch_of_point[i] = static_cast<uint32_t>(i / per_patch);
  }
  return out;
}

}  // namespace pw

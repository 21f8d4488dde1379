#include "pointwear/deformer.hpp"

namespace pw {

void PoseEncoderConfig::validate() const {
  if (feature_dim <= 0) throw ArgumentError("pose encoder: feature_dim must be positive");
  if (abstraction_counts.empty()) throw ArgumentError("pose encoder: no abstraction levels");
  for (std::size_t i = 1; i < abstraction_counts.size(); ++i) {
    if (abstraction_counts[i] >= abstraction_counts[i - 1]) {
      throw ArgumentError("pose encoder: abstraction counts must strictly decrease");
    }
  }
}

GarmentCodes make_garment_codes(nn::ParamStore& store, std::size_t vertex_count, int code_dim,
                                double init_std, Rng& rng) {
  GarmentCodes codes;
  codes.local = &store.create("garment.local", static_cast<Eigen::Index>(vertex_count), code_dim,
                              nn::gaussian(static_cast<Eigen::Index>(vertex_count), code_dim,
                                           init_std, rng));
  codes.global =
      &store.create("garment.global", 1, code_dim, nn::gaussian(1, code_dim, init_std, rng));
  return codes;
}

PoseEncoder::PoseEncoder(nn::ParamStore& store, const std::string& name,
                         const PoseEncoderConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  nn::SetEncoderConfig cfg = nn::SetEncoderConfig::dense_default(
      config_.feature_dim, config_.abstraction_counts, config_.group_k);
  encoder_ = std::make_unique<nn::SetEncoder>(store, name, cfg, /*dense=*/true, rng);
}

nn::SaPlan PoseEncoder::plan(const std::vector<Vec3>& canonical_vertices) const {
  return nn::build_sa_plan(canonical_vertices, encoder_->config(), /*with_fp=*/true);
}

ad::Var PoseEncoder::forward(ad::Tape& tape, const nn::SaPlan& plan,
                             const std::vector<Vec3>& posed_vertices) const {
  if (posed_vertices.size() != plan.input_count) {
    throw ArgumentError("pose encoder: posed vertex count does not match plan");
  }
  return encoder_->forward_dense(tape, plan, points_to_matrix(posed_vertices));
}

PoseDecoder::PoseDecoder(nn::ParamStore& store, const std::string& name,
                         const DecoderConfig& config, Rng& rng)
    : config_(config) {
  if (config_.hidden_layers < 1) throw ArgumentError("pose decoder: need hidden layers");
  if (config_.skip_layer < 0 || config_.skip_layer >= config_.hidden_layers) {
    throw ArgumentError("pose decoder: skip layer out of range");
  }
  int in = config_.input_dim();
  for (int l = 0; l < config_.hidden_layers; ++l) {
    int layer_in = in;
    if (l == config_.skip_layer && l > 0) layer_in += config_.input_dim();
    hidden_.push_back(
        nn::Linear::make(store, name + ".h" + std::to_string(l), layer_in, config_.width, rng));
    in = config_.width;
  }
  head_displacement_ =
      nn::Linear::make(store, name + ".disp", config_.width, 3, rng, /*zero_init=*/true);
  head_normal_ = nn::Linear::make(store, name + ".norm", config_.width, 3, rng, /*zero_init=*/true);
  head_normal_.bias->value << 0.0, 0.0, 1.0;
}

PoseDecoder::Out PoseDecoder::forward(ad::Tape& tape, ad::Var features) const {
  if (features.cols() != config_.input_dim()) {
    throw ArgumentError("pose decoder: feature width mismatch");
  }
  ad::Var x = features;
  for (int l = 0; l < config_.hidden_layers; ++l) {
    if (l == config_.skip_layer && l > 0) x = tape.concat_cols({x, features});
    x = tape.softplus(hidden_[l].apply(tape, x));
  }
  Out out{head_displacement_.apply(tape, x),
          tape.normalize_rows(head_normal_.apply(tape, x))};
  return out;
}

std::vector<Vec3> matrix_to_points(const Matrix& m) {
  if (m.cols() != 3) throw ArgumentError("matrix_to_points: expects Nx3");
  std::vector<Vec3> pts(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) pts[i] = m.row(i).transpose();
  return pts;
}

Matrix points_to_matrix(const std::vector<Vec3>& pts) {
  Matrix m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

DeformForward deform_forward(ad::Tape& tape, const PoseEncoder& encoder, const nn::SaPlan& plan,
                             const std::vector<Vec3>& posed_vertices, const PoseDecoder& decoder,
                             const GarmentCodes& codes,
                             const std::vector<BaryRecord>& deformed_samples,
                             const Matrix& canonical_sample_positions,
                             const std::vector<RigidTransform>& sample_transforms) {
  const std::size_t n = deformed_samples.size();
  if (canonical_sample_positions.rows() != static_cast<Eigen::Index>(n) ||
      sample_transforms.size() != n) {
    throw ArgumentError("deform_forward: sample arrays disagree");
  }

  ad::Var vertex_pose_feats = encoder.forward(tape, plan, posed_vertices);

  std::vector<std::array<uint32_t, 3>> idx(n);
  std::vector<std::array<double, 3>> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    idx[i] = deformed_samples[i].vertex_ids;
    w[i] = deformed_samples[i].weights;
  }

  ad::Var pose_codes = tape.weighted_rows(vertex_pose_feats, idx, w);
  ad::Var local_codes = tape.weighted_rows(tape.param(*codes.local), idx, w);
  ad::Var global_rows = tape.repeat_row(tape.param(*codes.global), static_cast<Eigen::Index>(n));
  ad::Var positions = tape.constant(canonical_sample_positions);

  ad::Var features = tape.concat_cols({pose_codes, local_codes, global_rows, positions});
  PoseDecoder::Out decoded = decoder.forward(tape, features);

  DeformForward out;
  out.displacements = decoded.displacement;
  out.normals = decoded.normal;
  out.local_codes = local_codes;
  out.posed_points =
      tape.apply_rigid(tape.add(positions, decoded.displacement), sample_transforms);
  out.posed_normals = tape.rotate_rows(decoded.normal, sample_transforms);
  return out;
}

DeformerOutput deform(const ArticulatedBody& body, const Pose& pose, const PoseEncoder& encoder,
                      const nn::SaPlan& plan, const PoseDecoder& decoder,
                      const GarmentCodes& codes,
                      const std::vector<BaryRecord>& deformed_samples) {
  const auto bones = forward_kinematics(body, pose);
  const auto posed_vertices = skin_vertices(body, bones);
  const auto per_vertex = vertex_transforms(body, bones);

  const TriMesh canonical = body.canonical_mesh();
  const std::size_t n = deformed_samples.size();
  Matrix canonical_positions(static_cast<Eigen::Index>(n), 3);
  std::vector<RigidTransform> transforms(n);
  for (std::size_t i = 0; i < n; ++i) {
    canonical_positions.row(static_cast<Eigen::Index>(i)) =
        barycentric_point(canonical, deformed_samples[i]).transpose();
    transforms[i] =
        point_transform(deformed_samples[i], per_vertex, static_cast<std::int64_t>(i));
  }

  ad::Tape tape;
  DeformForward fwd = deform_forward(tape, encoder, plan, posed_vertices, decoder, codes,
                                     deformed_samples, canonical_positions, transforms);

  DeformerOutput out;
  out.displacements = matrix_to_points(fwd.displacements.value());
  out.canonical_normals = matrix_to_points(fwd.normals.value());
  out.posed_points = matrix_to_points(fwd.posed_points.value());
  out.posed_normals = matrix_to_points(fwd.posed_normals.value());
  return out;
}

}  // namespace pw

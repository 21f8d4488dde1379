#include "pointwear/body.hpp"

#include <cmath>

#include "pointwear/io.hpp"

namespace pw {

TriMesh ArticulatedBody::canonical_mesh() const {
  TriMesh m;
  m.vertices = canonical_vertices;
  m.faces = faces;
  return m;
}

TriMesh ArticulatedBody::posed_mesh(const std::vector<Vec3>& posed_vertices) const {
  TriMesh m;
  m.vertices = posed_vertices;
  m.faces = faces;
  return m;
}

uint8_t ArticulatedBody::part_of_sample(const BaryRecord& bary) const {
  int best = 0;
  for (int j = 1; j < 3; ++j) {
    const bool heavier = bary.weights[j] > bary.weights[best];
    const bool tie_lower =
        bary.weights[j] == bary.weights[best] && bary.vertex_ids[j] < bary.vertex_ids[best];
    if (heavier || tie_lower) best = j;
  }
  return part_labels[bary.vertex_ids[best]];
}

int ArticulatedBody::part_index(const std::string& name) const {
  for (std::size_t i = 0; i < part_names.size(); ++i) {
    if (part_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

void ArticulatedBody::validate() const {
  const std::size_t n = vertex_count(), j = joint_count();
  if (n == 0 || j == 0) throw ValidationError("body: empty vertices or joints");
  if (parent.size() != j) throw ValidationError("body: parent array length mismatch");
  if (static_cast<std::size_t>(skin_weights.rows()) != n ||
      static_cast<std::size_t>(skin_weights.cols()) != j) {
    throw ValidationError("body: skin weight shape mismatch");
  }
  if (part_labels.size() != n) throw ValidationError("body: part label length mismatch");

  if (parent[0] != 0) throw ValidationError("body: joint 0 must be the root");
  for (std::size_t k = 1; k < j; ++k) {
    if (parent[k] >= k) throw ValidationError("body: parents must precede children");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (skin_weights.row(k).minCoeff() < -1e-12) {
      throw ValidationError("body: negative skin weight");
    }
    if (std::abs(skin_weights.row(k).sum() - 1.0) > 1e-6) {
      throw ValidationError("body: skin weight row does not sum to 1");
    }
    if (part_labels[k] >= part_names.size()) {
      throw ValidationError("body: part label out of range");
    }
  }
  for (const auto& f : faces) {
    for (uint32_t v : f) {
      if (v >= n) throw ValidationError("body: face vertex id out of range");
    }
  }
}

Pose Pose::identity(std::size_t joint_count) {
  Pose p;
  p.joint_rotations.assign(joint_count, Mat3::Identity());
  return p;
}

void Pose::validate() const {
  for (const Mat3& r : joint_rotations) {
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
        std::abs(r.determinant() - 1.0) > 1e-6) {
      throw ValidationError("pose: rotation not orthonormal with det +1");
    }
  }
}

Mat3 axis_angle_to_matrix(const Vec3& aa) {
  const double angle = aa.norm();
  if (angle < 1e-12) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

Vec3 matrix_to_axis_angle(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

std::vector<RigidTransform> forward_kinematics(const ArticulatedBody& body, const Pose& pose) {
  const std::size_t j = body.joint_count();
  if (pose.joint_rotations.size() != j) {
    throw ArgumentError("forward_kinematics: pose has wrong joint count");
  }

  // Global transform per joint: rotate about the joint pivot in the parent's
  // posed frame. T_k maps canonical space to posed space.
  std::vector<RigidTransform> global(j);
  for (std::size_t k = 0; k < j; ++k) {
    const Mat3& rot = pose.joint_rotations[k];
    RigidTransform local;
    local.rotation = rot;
    local.translation = body.joints[k] - rot * body.joints[k];  // pivot at the joint
    if (k == 0) {
      global[k] = local;
      global[k].translation += pose.root_translation;
    } else {
      const RigidTransform& par = global[body.parent[k]];
      global[k].rotation = par.rotation * local.rotation;
      global[k].translation = par.rotation * local.translation + par.translation;
    }
  }
  return global;
}

std::vector<Vec3> skin_vertices(const ArticulatedBody& body,
                                const std::vector<RigidTransform>& bone_transforms) {
  if (bone_transforms.size() != body.joint_count()) {
    throw ArgumentError("skin_vertices: transform count mismatch");
  }
  const std::size_t n = body.vertex_count();
  std::vector<Vec3> posed(n);
  // Displacement form keeps identity transforms an exact fixpoint even when
  // a weight row sums to 1 only within tolerance.
  parallel_for_each(n, [&](std::size_t k) {
    const Vec3& v = body.canonical_vertices[k];
    Vec3 acc = v;
    for (std::size_t b = 0; b < bone_transforms.size(); ++b) {
      const double w = body.skin_weights(k, b);
      if (w == 0.0) continue;
      acc += w * (bone_transforms[b].apply(v) - v);
    }
    posed[k] = acc;
  });
  return posed;
}

std::vector<Mat4> vertex_transforms(const ArticulatedBody& body,
                                    const std::vector<RigidTransform>& bone_transforms) {
  if (bone_transforms.size() != body.joint_count()) {
    throw ArgumentError("vertex_transforms: transform count mismatch");
  }
  std::vector<Mat4> bones(bone_transforms.size());
  for (std::size_t b = 0; b < bones.size(); ++b) bones[b] = bone_transforms[b].matrix();

  const std::size_t n = body.vertex_count();
  std::vector<Mat4> out(n);
  parallel_for_each(n, [&](std::size_t k) {
    Mat4 acc = Mat4::Zero();
    for (std::size_t b = 0; b < bones.size(); ++b) {
      const double w = body.skin_weights(k, b);
      if (w == 0.0) continue;
      acc += w * bones[b];
    }
    out[k] = acc;
  });
  return out;
}

RigidTransform point_transform(const BaryRecord& bary, const std::vector<Mat4>& per_vertex,
                               std::int64_t sample_id) {
  Mat4 blended = Mat4::Zero();
  for (int j = 0; j < 3; ++j) {
    if (bary.vertex_ids[j] >= per_vertex.size()) {
      throw ArgumentError("point_transform: vertex id out of range");
    }
    blended += bary.weights[j] * per_vertex[bary.vertex_ids[j]];
  }

  const Mat3 linear = blended.topLeftCorner<3, 3>();
  if (linear.determinant() <= 0.0) {
    throw NumericError("point_transform: degenerate blended rotation at sample " +
                       std::to_string(sample_id));
  }

  RigidTransform t;
  t.translation = blended.topRightCorner<3, 1>();

  // One-hot weights or equal corner transforms already give a rotation;
  // keep it verbatim instead of round-tripping through the SVD.
  if ((linear.transpose() * linear - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12) {
    t.rotation = linear;
    return t;
  }

  // Polar decomposition: nearest rotation to the blended linear block.
  Eigen::JacobiSVD<Mat3> svd(linear, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  t.rotation = u * v.transpose();
  return t;
}

void pose_points(const std::vector<Vec3>& canonical_points, const std::vector<Vec3>& displacements,
                 const std::vector<Vec3>& canonical_normals,
                 const std::vector<RigidTransform>& transforms, std::vector<Vec3>& out_points,
                 std::vector<Vec3>& out_normals) {
  const std::size_t n = canonical_points.size();
  if (displacements.size() != n || canonical_normals.size() != n || transforms.size() != n) {
    throw ArgumentError("pose_points: length mismatch");
  }
  out_points.resize(n);
  out_normals.resize(n);
  parallel_for_each(n, [&](std::size_t i) {
    out_points[i] = transforms[i].apply(canonical_points[i] + displacements[i]);
    out_normals[i] = transforms[i].rotate(canonical_normals[i]);
  });
}

// ---------------------------------------------------------------------------
// Files

void save_body(const std::filesystem::path& json_path, const ArticulatedBody& body) {
  const std::size_t n = body.vertex_count(), f = body.faces.size(), j = body.joint_count();

  io::ArchiveWriter bin;
  std::vector<double> verts(n * 3), joints(j * 3), weights(n * j);
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) verts[i * 3 + a] = body.canonical_vertices[i][a];
  for (std::size_t i = 0; i < j; ++i)
    for (int a = 0; a < 3; ++a) joints[i * 3 + a] = body.joints[i][a];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < j; ++b) weights[i * j + b] = body.skin_weights(i, b);
  std::vector<uint32_t> faces(f * 3);
  for (std::size_t i = 0; i < f; ++i)
    for (int a = 0; a < 3; ++a) faces[i * 3 + a] = body.faces[i][a];

  bin.meta["kind"] = "body_arrays";
  bin.add_f64("vertices", verts.data(), {n, 3});
  bin.add_u32("faces", faces.data(), {f, 3});
  bin.add_f64("skin_weights", weights.data(), {n, j});
  bin.add_f64("joints", joints.data(), {j, 3});
  bin.add_u8("part_labels", body.part_labels.data(), {n});

  std::filesystem::path bin_path = json_path;
  bin_path.replace_extension(".bin");
  bin.save(bin_path);

  io::json header;
  header["kind"] = "body";
  header["counts"] = {{"vertices", n}, {"faces", f}, {"joints", j}, {"parts", body.part_count()}};
  header["part_names"] = body.part_names;
  header["parent"] = body.parent;
  header["bin"] = bin_path.filename().string();
  io::save_json(json_path, header);
}

ArticulatedBody load_body(const std::filesystem::path& json_path) {
  const io::json header = io::load_json(json_path);
  if (header.value("kind", "") != "body") throw ValidationError("not a body file");

  const std::filesystem::path bin_path =
      json_path.parent_path() / header.at("bin").get<std::string>();
  const io::Archive bin = io::Archive::load(bin_path);

  ArticulatedBody body;
  body.part_names = header.at("part_names").get<std::vector<std::string>>();
  body.parent = header.at("parent").get<std::vector<uint32_t>>();

  const auto verts = bin.f64("vertices");
  const auto faces = bin.u32("faces");
  const auto weights = bin.f64("skin_weights");
  const auto joints = bin.f64("joints");
  body.part_labels = bin.u8("part_labels");

  const std::size_t n = verts.size() / 3, f = faces.size() / 3, j = joints.size() / 3;
  body.canonical_vertices.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    body.canonical_vertices[i] = Vec3(verts[i * 3], verts[i * 3 + 1], verts[i * 3 + 2]);
  }
  body.faces.resize(f);
  for (std::size_t i = 0; i < f; ++i) {
    body.faces[i] = {faces[i * 3], faces[i * 3 + 1], faces[i * 3 + 2]};
  }
  body.joints.resize(j);
  for (std::size_t i = 0; i < j; ++i) {
    body.joints[i] = Vec3(joints[i * 3], joints[i * 3 + 1], joints[i * 3 + 2]);
  }
  body.skin_weights.resize(n, j);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < j; ++b) body.skin_weights(i, b) = weights[i * j + b];
  }
  body.validate();
  return body;
}

void save_pose(const std::filesystem::path& path, const Pose& pose) {
  io::json j;
  j["kind"] = "pose";
  io::json rots = io::json::array();
  for (const Mat3& r : pose.joint_rotations) {
    const Vec3 aa = matrix_to_axis_angle(r);
    rots.push_back({aa.x(), aa.y(), aa.z()});
  }
  j["joint_rotations"] = rots;
  j["root_translation"] = {pose.root_translation.x(), pose.root_translation.y(),
                           pose.root_translation.z()};
  io::save_json(path, j);
}

Pose load_pose(const std::filesystem::path& path) {
  const io::json j = io::load_json(path);
  if (j.value("kind", "") != "pose") throw ValidationError("not a pose file");
  Pose pose;
  for (const auto& r : j.at("joint_rotations")) {
    pose.joint_rotations.push_back(axis_angle_to_matrix(Vec3(r[0], r[1], r[2])));
  }
  const auto& t = j.at("root_translation");
  pose.root_translation = Vec3(t[0], t[1], t[2]);
  pose.validate();
  return pose;
}

}  // namespace pw

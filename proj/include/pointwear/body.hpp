#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pointwear/geometry.hpp"
#include "pointwear/types.hpp"

namespace pw {

/// Minimal articulated body: canonical template mesh, skeleton tree, skinning
/// weights, and per-vertex semantic part labels.
struct ArticulatedBody {
  std::vector<Vec3> canonical_vertices;
  std::vector<std::array<uint32_t, 3>> faces;
  std::vector<Vec3> joints;          // canonical joint positions
  std::vector<uint32_t> parent;      // parent joint index; root points at itself
  Matrix skin_weights;               // N_t x J, rows sum to 1
  std::vector<uint8_t> part_labels;  // per vertex
  std::vector<std::string> part_names;

  std::size_t vertex_count() const { return canonical_vertices.size(); }
  std::size_t joint_count() const { return joints.size(); }
  std::size_t part_count() const { return part_names.size(); }

  TriMesh canonical_mesh() const;
  TriMesh posed_mesh(const std::vector<Vec3>& posed_vertices) const;

  uint8_t part_of_vertex(uint32_t v) const { return part_labels[v]; }
  // Part of a surface sample: label of the corner with the largest
  // barycentric weight, lowest vertex id on ties.
  uint8_t part_of_sample(const BaryRecord& bary) const;
  int part_index(const std::string& name) const;  // -1 when unknown

  // Throws ValidationError on malformed tree, bad weights, or label range.
  void validate() const;
};

struct Pose {
  std::vector<Mat3> joint_rotations;  // one per joint
  Vec3 root_translation = Vec3::Zero();

  static Pose identity(std::size_t joint_count);
  void validate() const;
};

// Axis-angle pose parameterization used by pose files.
Mat3 axis_angle_to_matrix(const Vec3& axis_angle);
Vec3 matrix_to_axis_angle(const Mat3& rotation);

// Canonical-to-posed transform per joint. Child transforms compose along the
// parent chain; the identity pose yields identity transforms exactly.
std::vector<RigidTransform> forward_kinematics(const ArticulatedBody& body, const Pose& pose);

// Standard linear blend skinning of the template vertices.
std::vector<Vec3> skin_vertices(const ArticulatedBody& body,
                                const std::vector<RigidTransform>& bone_transforms);

// Per-vertex blended 4x4 skinning matrices (weights times bone transforms).
std::vector<Mat4> vertex_transforms(const ArticulatedBody& body,
                                    const std::vector<RigidTransform>& bone_transforms);

// Barycentric blend of the per-vertex matrices at a surface sample. The
// rotation block is re-orthonormalized via polar decomposition so the result
// is a proper rigid transform; throws NumericError (tagged with `sample_id`)
// if the blended rotation degenerates.
RigidTransform point_transform(const BaryRecord& bary, const std::vector<Mat4>& per_vertex,
                               std::int64_t sample_id = -1);

// Applies x = T.(p + r), n' = R.n per point.
void pose_points(const std::vector<Vec3>& canonical_points, const std::vector<Vec3>& displacements,
                 const std::vector<Vec3>& canonical_normals,
                 const std::vector<RigidTransform>& transforms, std::vector<Vec3>& out_points,
                 std::vector<Vec3>& out_normals);

// ---------------------------------------------------------------------------
// File formats: body = JSON header + sibling .bin with the arrays;
// pose = JSON with per-joint axis-angle and root translation.

void save_body(const std::filesystem::path& json_path, const ArticulatedBody& body);
ArticulatedBody load_body(const std::filesystem::path& json_path);

void save_pose(const std::filesystem::path& path, const Pose& pose);
Pose load_pose(const std::filesystem::path& path);

}  // namespace pw

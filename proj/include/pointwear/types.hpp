#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pointwear/common.hpp"

namespace pw {

/// Point cloud with optional unit normals; the common currency between the
/// deformation, generation, loss, and evaluation stages.
struct PointCloudN {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty, or same length as points

  std::size_t size() const { return points.size(); }
  bool has_normals() const { return !normals.empty(); }

  // Throws ValidationError on non-finite points, length mismatch, or
  // non-unit normals (tolerance 1e-6).
  void validate() const;
};

/// Location of a point on a triangle mesh: face, barycentric weights, and the
/// face's vertex ids, in corner order.
struct BaryRecord {
  uint32_t face_index = 0;
  std::array<double, 3> weights{{0, 0, 0}};
  std::array<uint32_t, 3> vertex_ids{{0, 0, 0}};

  // weights >= 0 and sum to 1 within 1e-9.
  void validate() const;
};

/// Proper rigid motion. rotation is orthonormal with det +1.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& n) const { return rotation * n; }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  static RigidTransform identity() { return {}; }

  void validate(double tol = 1e-6) const;
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<uint32_t, 3>> faces;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }

  Vec3 face_normal(std::size_t f) const;  // unit; zero vector for degenerate faces
  double face_area(std::size_t f) const;
  double total_area() const;
};

enum class RegionLabel : uint8_t {
  kUnclothed = 0,
  kDeformed = 1,
  kGenerated = 2,
};

}  // namespace pw

#include "pointwear/types.hpp"

#include <cmath>
#include <string>

namespace pw {

void PointCloudN::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) {
      throw ValidationError("point " + std::to_string(i) + " is not finite");
    }
  }
  if (!normals.empty()) {
    if (normals.size() != points.size()) {
      throw ValidationError("normal count does not match point count");
    }
    for (std::size_t i = 0; i < normals.size(); ++i) {
      const double n = normals[i].norm();
      if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) {
        throw ValidationError("normal " + std::to_string(i) + " is not unit length");
      }
    }
  }
}

void BaryRecord::validate() const {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("barycentric weight is negative or NaN");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("barycentric weights do not sum to 1");
}

void RigidTransform::validate(double tol) const {
  const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
  if (err.cwiseAbs().maxCoeff() > tol) throw ValidationError("rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > tol) {
    throw ValidationError("rotation determinant is not +1");
  }
  if (!translation.allFinite()) throw ValidationError("translation is not finite");
}

Vec3 TriMesh::face_normal(std::size_t f) const {
  const auto& t = faces[f];
  const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  const double len = n.norm();
  if (len <= 0.0) return Vec3::Zero();
  return n / len;
}

double TriMesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriMesh::total_area() const {
  double a = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) a += face_area(f);
  return a;
}

}  // namespace pw

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "pointwear/types.hpp"

namespace pw {

// Weighted sum of the three vertex rows selected by `bary`. `vertex_features`
// is row-major (one row per vertex). Linear in the features.
Eigen::VectorXd barycentric_interpolate(const Matrix& vertex_features, const BaryRecord& bary);

Vec3 barycentric_point(const TriMesh& mesh, const BaryRecord& bary);

// Greedy farthest point sampling. The first index is drawn from `seed`; each
// following pick maximizes the min squared distance to the chosen set, ties
// broken by lowest index.
std::vector<uint32_t> farthest_point_sample(const std::vector<Vec3>& points, std::size_t n,
                                            uint64_t seed);

// Same greedy rule but with a caller-fixed start index.
std::vector<uint32_t> farthest_point_sample_from(const std::vector<Vec3>& points, std::size_t n,
                                                 uint32_t start);

struct NearestHit {
  uint32_t index = 0;
  double sq_dist = 0.0;
};

/// Uniform grid over a fixed reference point set; exact nearest neighbor
/// queries with ties resolved to the lowest reference index.
class PointGrid {
 public:
  explicit PointGrid(std::vector<Vec3> reference);

  NearestHit nearest(const Vec3& query) const;
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  std::vector<Vec3> points_;
  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<std::vector<uint32_t>> cells_;

  int cell_index(int x, int y, int z) const { return (z * dims_[1] + y) * dims_[0] + x; }
  void cell_of(const Vec3& p, int out[3]) const;
};

// Exact nearest neighbor of every query against `reference`.
std::vector<NearestHit> nearest_neighbor(const PointCloudN& queries, const PointCloudN& reference);
std::vector<NearestHit> nearest_neighbor(const std::vector<Vec3>& queries,
                                         const std::vector<Vec3>& reference);

struct SurfacePoint {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  double distance = 0.0;  // unsigned
  uint32_t face = 0;
};

/// Uniform grid over triangles for closest-point and signed-distance queries.
/// Sign is determined by casting three fixed rays and taking the majority of
/// their orientation-signed crossing counts, which stays correct for bodies
/// assembled from several overlapping closed parts (plain even/odd parity
/// does not).
class MeshDistanceField {
 public:
  explicit MeshDistanceField(const TriMesh& mesh);

  SurfacePoint closest_point(const Vec3& p) const;
  bool inside(const Vec3& p) const;
  double signed_distance(const Vec3& p) const;

  // Signed distance plus its spatial gradient (unit vector pointing toward
  // increasing distance, i.e. outward).
  std::pair<double, Vec3> signed_distance_grad(const Vec3& p) const;

  const TriMesh& mesh() const { return mesh_; }
  std::size_t skipped_degenerate_faces() const { return skipped_faces_; }

 private:
  TriMesh mesh_;
  std::vector<uint32_t> tri_ids_;  // non-degenerate faces
  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<std::vector<uint32_t>> cells_;
  std::size_t skipped_faces_ = 0;

  int cell_index(int x, int y, int z) const { return (z * dims_[1] + y) * dims_[0] + x; }
  int winding_along(const Vec3& orig, const Vec3& dir, std::vector<uint32_t>& stamp,
                    uint32_t gen) const;
};

double signed_distance_to_mesh(const Vec3& p, const TriMesh& mesh);

// Closest point on triangle (a,b,c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct SurfaceSamples {
  PointCloudN cloud;  // positions + face normals
  std::vector<BaryRecord> barys;
};

// Area-weighted uniform surface sampling. Deterministic per seed. Degenerate
// faces carry zero probability; throws ArgumentError if all faces are
// degenerate.
SurfaceSamples sample_surface(const TriMesh& mesh, std::size_t n, uint64_t seed);

}  // namespace pw

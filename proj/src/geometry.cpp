#include "pointwear/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>

namespace pw {

Eigen::VectorXd barycentric_interpolate(const Matrix& vertex_features, const BaryRecord& bary) {
  bary.validate();
  for (uint32_t vid : bary.vertex_ids) {
    if (vid >= static_cast<uint32_t>(vertex_features.rows())) {
      throw ArgumentError("vertex id " + std::to_string(vid) + " out of range");
    }
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(vertex_features.cols());
  for (int j = 0; j < 3; ++j) {
    out += bary.weights[j] * vertex_features.row(bary.vertex_ids[j]).transpose();
  }
  return out;
}

Vec3 barycentric_point(const TriMesh& mesh, const BaryRecord& bary) {
  Vec3 p = Vec3::Zero();
  for (int j = 0; j < 3; ++j) p += bary.weights[j] * mesh.vertices[bary.vertex_ids[j]];
  return p;
}

std::vector<uint32_t> farthest_point_sample_from(const std::vector<Vec3>& points, std::size_t n,
                                                 uint32_t start) {
  const std::size_t total = points.size();
  if (n < 1 || n > total) throw ArgumentError("farthest_point_sample: n out of range");
  if (start >= total) throw ArgumentError("farthest_point_sample: start index out of range");

  std::vector<uint32_t> picked;
  picked.reserve(n);
  picked.push_back(start);

  std::vector<double> min_sq(total);
  parallel_for_each(total, [&](std::size_t i) { min_sq[i] = (points[i] - points[start]).squaredNorm(); });

  while (picked.size() < n) {
    uint32_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < total; ++i) {
      if (min_sq[i] > best_d) {
        best_d = min_sq[i];
        best = static_cast<uint32_t>(i);
      }
    }
    picked.push_back(best);
    const Vec3 bp = points[best];
    parallel_for_each(total, [&](std::size_t i) {
      const double d = (points[i] - bp).squaredNorm();
      if (d < min_sq[i]) min_sq[i] = d;
    });
  }
  return picked;
}

std::vector<uint32_t> farthest_point_sample(const std::vector<Vec3>& points, std::size_t n,
                                            uint64_t seed) {
  if (points.empty()) throw ArgumentError("farthest_point_sample: empty cloud");
  Rng rng(seed);
  std::uniform_int_distribution<uint32_t> pick(0, static_cast<uint32_t>(points.size() - 1));
  return farthest_point_sample_from(points, n, pick(rng));
}

// ---------------------------------------------------------------------------
// PointGrid

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

struct GridShape {
  Vec3 origin;
  double cell;
  int dims[3];
};

GridShape fit_grid(const Vec3& lo, const Vec3& hi, std::size_t item_count) {
  GridShape g;
  const Vec3 span = hi - lo;
  const double max_span = std::max({span.x(), span.y(), span.z(), 1e-9});
  // ~2 items per cell on average, capped to keep memory modest.
  const double target = std::cbrt(std::max<double>(1.0, static_cast<double>(item_count) / 2.0));
  g.cell = std::max(max_span / std::max(1.0, target), 1e-9);
  g.origin = lo;
  for (int a = 0; a < 3; ++a) {
    g.dims[a] = std::max(1, static_cast<int>(std::floor(span[a] / g.cell)) + 1);
    g.dims[a] = std::min(g.dims[a], 256);
  }
  return g;
}
}  // namespace

PointGrid::PointGrid(std::vector<Vec3> reference) : points_(std::move(reference)) {
  if (points_.empty()) throw ArgumentError("PointGrid: empty reference cloud");
  Vec3 lo = points_[0], hi = points_[0];
  for (const Vec3& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const GridShape g = fit_grid(lo, hi, points_.size());
  origin_ = g.origin;
  cell_ = g.cell;
  for (int a = 0; a < 3; ++a) dims_[a] = g.dims[a];
  cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
  for (uint32_t i = 0; i < points_.size(); ++i) {
    int c[3];
    cell_of(points_[i], c);
    cells_[cell_index(c[0], c[1], c[2])].push_back(i);
  }
}

void PointGrid::cell_of(const Vec3& p, int out[3]) const {
  for (int a = 0; a < 3; ++a) {
    int c = static_cast<int>(std::floor((p[a] - origin_[a]) / cell_));
    out[a] = std::clamp(c, 0, dims_[a] - 1);
  }
}

NearestHit PointGrid::nearest(const Vec3& query) const {
  int c[3];
  cell_of(query, c);
  NearestHit best{0, kInf};
  const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});

  for (int ring = 0; ring <= max_ring; ++ring) {
    // Cells in the current ring can only contain points at distance
    // >= (ring-1)*cell from the query; stop once the best hit beats that.
    if (best.sq_dist < kInf) {
      const double ring_min = (ring - 1) * cell_;
      if (ring_min > 0.0 && ring_min * ring_min > best.sq_dist) break;
    }
    bool any_cell = false;
    for (int dz = -ring; dz <= ring; ++dz) {
      const int z = c[2] + dz;
      if (z < 0 || z >= dims_[2]) continue;
      for (int dy = -ring; dy <= ring; ++dy) {
        const int y = c[1] + dy;
        if (y < 0 || y >= dims_[1]) continue;
        for (int dx = -ring; dx <= ring; ++dx) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
          const int x = c[0] + dx;
          if (x < 0 || x >= dims_[0]) continue;
          any_cell = true;
          for (uint32_t idx : cells_[cell_index(x, y, z)]) {
            const double d = (points_[idx] - query).squaredNorm();
            if (d < best.sq_dist || (d == best.sq_dist && idx < best.index)) {
              best = NearestHit{idx, d};
            }
          }
        }
      }
    }
    // Once a whole shell lies outside the grid every larger shell does too.
    if (!any_cell && ring > 0) break;
  }
  return best;
}

std::vector<NearestHit> nearest_neighbor(const std::vector<Vec3>& queries,
                                         const std::vector<Vec3>& reference) {
  if (reference.empty()) throw ArgumentError("nearest_neighbor: empty reference");
  PointGrid grid(reference);
  std::vector<NearestHit> hits(queries.size());
  parallel_for_each(queries.size(), [&](std::size_t i) { hits[i] = grid.nearest(queries[i]); });
  return hits;
}

std::vector<NearestHit> nearest_neighbor(const PointCloudN& queries, const PointCloudN& reference) {
  return nearest_neighbor(queries.points, reference.points);
}

// ---------------------------------------------------------------------------
// Point-triangle distance

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return a + v * ab;
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return a + w * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return a + v * ab + w * ac;
}

// ---------------------------------------------------------------------------
// MeshDistanceField

namespace {

// Watertight-friendly ray-triangle test; returns +1/-1 for front/back facing
// crossings with t > 0, 0 for a miss.
int ray_crossing(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-14) return 0;
  const double inv = 1.0 / det;
  const Vec3 tvec = orig - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return 0;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return 0;
  const double t = e2.dot(qvec) * inv;
  if (t <= 0.0) return 0;
  return det > 0.0 ? 1 : -1;
}

// Fixed, irrational-ish directions: unlikely to graze edges of axis-aligned
// or symmetric meshes.
const Vec3 kRayDirs[3] = {
    Vec3(0.57357643635104609, 0.59841342386754729, 0.55937795802999933).normalized(),
    Vec3(-0.34202014332566871, 0.81915204428899178, -0.46120533516568039).normalized(),
    Vec3(0.25881904510252074, -0.44463461297254533, 0.85749292571254421).normalized(),
};

}  // namespace

MeshDistanceField::MeshDistanceField(const TriMesh& mesh) : mesh_(mesh) {
  if (mesh_.faces.empty()) throw ArgumentError("MeshDistanceField: empty mesh");
  for (uint32_t f = 0; f < mesh_.faces.size(); ++f) {
    if (mesh_.face_area(f) < 1e-16) {
      ++skipped_faces_;
      continue;
    }
    tri_ids_.push_back(f);
  }
  if (tri_ids_.empty()) throw ArgumentError("MeshDistanceField: all faces degenerate");
  if (skipped_faces_ > 0) {
    std::cerr << "warning: skipped " << skipped_faces_ << " degenerate faces\n";
  }

  Vec3 lo = mesh_.vertices[0], hi = mesh_.vertices[0];
  for (const Vec3& v : mesh_.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const GridShape g = fit_grid(lo, hi, tri_ids_.size());
  origin_ = g.origin;
  cell_ = g.cell;
  for (int a = 0; a < 3; ++a) dims_[a] = g.dims[a];
  cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);

  for (uint32_t id : tri_ids_) {
    const auto& t = mesh_.faces[id];
    Vec3 tlo = mesh_.vertices[t[0]].cwiseMin(mesh_.vertices[t[1]]).cwiseMin(mesh_.vertices[t[2]]);
    Vec3 thi = mesh_.vertices[t[0]].cwiseMax(mesh_.vertices[t[1]]).cwiseMax(mesh_.vertices[t[2]]);
    int clo[3], chi[3];
    for (int a = 0; a < 3; ++a) {
      clo[a] = std::clamp(static_cast<int>(std::floor((tlo[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
      chi[a] = std::clamp(static_cast<int>(std::floor((thi[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
    }
    for (int z = clo[2]; z <= chi[2]; ++z)
      for (int y = clo[1]; y <= chi[1]; ++y)
        for (int x = clo[0]; x <= chi[0]; ++x) cells_[cell_index(x, y, z)].push_back(id);
  }
}

SurfacePoint MeshDistanceField::closest_point(const Vec3& p) const {
  int c[3];
  for (int a = 0; a < 3; ++a) {
    c[a] = std::clamp(static_cast<int>(std::floor((p[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
  }
  SurfacePoint best;
  best.distance = kInf;
  uint32_t best_face = std::numeric_limits<uint32_t>::max();
  const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});

  auto scan_cell = [&](int x, int y, int z) {
    for (uint32_t id : cells_[cell_index(x, y, z)]) {
      const auto& t = mesh_.faces[id];
      const Vec3 q = closest_point_on_triangle(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                               mesh_.vertices[t[2]]);
      const double d = (p - q).norm();
      if (d < best.distance || (d == best.distance && id < best_face)) {
        best.distance = d;
        best.position = q;
        best_face = id;
      }
    }
  };

  for (int ring = 0; ring <= max_ring; ++ring) {
    if (best.distance < kInf) {
      const double ring_min = (ring - 1) * cell_;
      if (ring_min > 0.0 && ring_min > best.distance) break;
    }
    for (int dz = -ring; dz <= ring; ++dz) {
      const int z = c[2] + dz;
      if (z < 0 || z >= dims_[2]) continue;
      for (int dy = -ring; dy <= ring; ++dy) {
        const int y = c[1] + dy;
        if (y < 0 || y >= dims_[1]) continue;
        for (int dx = -ring; dx <= ring; ++dx) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
          const int x = c[0] + dx;
          if (x < 0 || x >= dims_[0]) continue;
          scan_cell(x, y, z);
        }
      }
    }
  }
  best.face = best_face;
  best.normal = mesh_.face_normal(best_face);
  return best;
}

int MeshDistanceField::winding_along(const Vec3& orig, const Vec3& dir,
                                     std::vector<uint32_t>& stamp, uint32_t gen) const {
  // Clip the ray against the grid box; outside it there are no triangles.
  double t0 = 0.0, t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    const double lo = origin_[a], hi = origin_[a] + dims_[a] * cell_;
    if (std::abs(dir[a]) < 1e-15) {
      if (orig[a] < lo || orig[a] > hi) return 0;
    } else {
      double ta = (lo - orig[a]) / dir[a];
      double tb = (hi - orig[a]) / dir[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
  }
  if (t0 > t1) return 0;

  // Amanatides-Woo cell walk. A triangle spans several cells, so each id is
  // tested once per ray (stamped); the full-ray crossing test keeps the
  // count independent of which cell the triangle was first seen in.
  const Vec3 start = orig + (t0 + 1e-12) * dir;
  int c[3], step[3];
  double t_next[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    c[a] = std::clamp(static_cast<int>(std::floor((start[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
    if (dir[a] > 0) {
      step[a] = 1;
      t_next[a] = t0 + ((c[a] + 1) * cell_ + origin_[a] - start[a]) / dir[a];
      t_delta[a] = cell_ / dir[a];
    } else if (dir[a] < 0) {
      step[a] = -1;
      t_next[a] = t0 + (c[a] * cell_ + origin_[a] - start[a]) / dir[a];
      t_delta[a] = -cell_ / dir[a];
    } else {
      step[a] = 0;
      t_next[a] = kInf;
      t_delta[a] = kInf;
    }
  }

  int winding = 0;
  double t = t0;
  while (t <= t1 + 1e-12) {
    for (uint32_t id : cells_[cell_index(c[0], c[1], c[2])]) {
      if (stamp[id] == gen) continue;
      stamp[id] = gen;
      const auto& tri = mesh_.faces[id];
      winding += ray_crossing(orig, dir, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]],
                              mesh_.vertices[tri[2]]);
    }
    const int axis = (t_next[0] <= t_next[1] && t_next[0] <= t_next[2]) ? 0
                     : (t_next[1] <= t_next[2])                         ? 1
                                                                        : 2;
    t = t_next[axis];
    c[axis] += step[axis];
    if (c[axis] < 0 || c[axis] >= dims_[axis]) break;
    t_next[axis] += t_delta[axis];
  }
  return winding;
}

bool MeshDistanceField::inside(const Vec3& p) const {
  thread_local std::vector<uint32_t> stamp;
  thread_local uint32_t gen = 0;
  if (stamp.size() < mesh_.faces.size()) stamp.resize(mesh_.faces.size(), 0);
  int votes = 0;
  for (const Vec3& dir : kRayDirs) {
    if (++gen == 0) {
      std::fill(stamp.begin(), stamp.end(), 0);
      gen = 1;
    }
    const int winding = winding_along(p, dir, stamp, gen);
    votes += (winding != 0) ? 1 : 0;
  }
  return votes >= 2;
}

double MeshDistanceField::signed_distance(const Vec3& p) const {
  const SurfacePoint sp = closest_point(p);
  return inside(p) ? -sp.distance : sp.distance;
}

std::pair<double, Vec3> MeshDistanceField::signed_distance_grad(const Vec3& p) const {
  const SurfacePoint sp = closest_point(p);
  const bool in = inside(p);
  const double d = in ? -sp.distance : sp.distance;
  Vec3 grad;
  if (sp.distance > 1e-12) {
    grad = (p - sp.position) / sp.distance;
    if (in) grad = -grad;
  } else {
    grad = sp.normal;  // on the surface: fall back to the face normal
  }
  return {d, grad};
}

double signed_distance_to_mesh(const Vec3& p, const TriMesh& mesh) {
  MeshDistanceField field(mesh);
  return field.signed_distance(p);
}

// ---------------------------------------------------------------------------
// Surface sampling

SurfaceSamples sample_surface(const TriMesh& mesh, std::size_t n, uint64_t seed) {
  if (mesh.faces.empty()) throw ArgumentError("sample_surface: mesh has no faces");
  std::vector<double> cum(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cum[f] = total;
  }
  if (total <= 0.0) throw ArgumentError("sample_surface: all faces degenerate");

  SurfaceSamples out;
  out.cloud.points.resize(n);
  out.cloud.normals.resize(n);
  out.barys.resize(n);

  Rng rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uni(rng) * total;
    const auto it = std::lower_bound(cum.begin(), cum.end(), u);
    const uint32_t f = static_cast<uint32_t>(std::min<std::size_t>(
        static_cast<std::size_t>(it - cum.begin()), mesh.faces.size() - 1));

    const double r1 = uni(rng), r2 = uni(rng);
    const double s = std::sqrt(r1);
    BaryRecord bary;
    bary.face_index = f;
    bary.weights = {1.0 - s, s * (1.0 - r2), s * r2};
    bary.vertex_ids = mesh.faces[f];

    out.barys[i] = bary;
    out.cloud.points[i] = barycentric_point(mesh, bary);
    out.cloud.normals[i] = mesh.face_normal(f);
  }
  return out;
}

}  // namespace pw

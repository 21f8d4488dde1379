#include <doctest.h>

#include <algorithm>
#include <random>

#include "pointwear/geometry.hpp"
#include "test_helpers.hpp"

using namespace pw;
using pwtest::icosphere;
using pwtest::random_points;
using pwtest::unit_cube;

namespace {

// Greedy reference with identical tie rules, O(n*N) per step.
std::vector<uint32_t> fps_reference(const std::vector<Vec3>& pts, std::size_t n, uint32_t start) {
  std::vector<uint32_t> picked{start};
  while (picked.size() < n) {
    uint32_t best = 0;
    double best_d = -1.0;
    for (uint32_t i = 0; i < pts.size(); ++i) {
      double mind = std::numeric_limits<double>::infinity();
      for (uint32_t p : picked) mind = std::min(mind, (pts[i] - pts[p]).squaredNorm());
      if (mind > best_d) {
        best_d = mind;
        best = i;
      }
    }
    picked.push_back(best);
  }
  return picked;
}

}  // namespace

TEST_CASE("barycentric interpolation selects and blends") {
  Matrix feats(3, 2);
  feats << 1, 0, 0, 1, 1, 1;

  BaryRecord one_hot{0, {1, 0, 0}, {0, 1, 2}};
  CHECK(barycentric_interpolate(feats, one_hot).isApprox(Eigen::Vector2d(1, 0)));

  Matrix scalars(3, 1);
  scalars << 0, 3, 6;
  BaryRecord centroid{0, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0, 1, 2}};
  CHECK(barycentric_interpolate(scalars, centroid)(0) == doctest::Approx(3.0).epsilon(1e-12));

  // direct weighted-sum oracle
  BaryRecord mix{0, {0.2, 0.5, 0.3}, {0, 1, 2}};
  const Eigen::VectorXd got = barycentric_interpolate(feats, mix);
  CHECK(got(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(got(1) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("barycentric interpolation is linear") {
  Rng rng(7);
  std::uniform_real_distribution<double> uni(-1, 1);
  Matrix f(5, 4), g(5, 4);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 4; ++c) {
      f(r, c) = uni(rng);
      g(r, c) = uni(rng);
    }
  BaryRecord b{0, {0.6, 0.3, 0.1}, {1, 3, 4}};
  const double alpha = 1.7, beta = -0.4;
  const Eigen::VectorXd lhs = barycentric_interpolate(alpha * f + beta * g, b);
  const Eigen::VectorXd rhs =
      alpha * barycentric_interpolate(f, b) + beta * barycentric_interpolate(g, b);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("barycentric interpolation rejects bad input") {
  Matrix feats = Matrix::Zero(2, 1);
  BaryRecord out_of_range{0, {1, 0, 0}, {0, 1, 5}};
  CHECK_THROWS_AS(barycentric_interpolate(feats, out_of_range), ArgumentError);
  BaryRecord bad_weights{0, {0.5, 0.2, 0.1}, {0, 1, 1}};
  CHECK_THROWS_AS(barycentric_interpolate(feats, bad_weights), ValidationError);
}

TEST_CASE("farthest point sampling basics") {
  // n == cloud size gives a permutation
  const auto pts = random_points(17, 3);
  auto all = farthest_point_sample(pts, 17, 9);
  std::sort(all.begin(), all.end());
  for (uint32_t i = 0; i < 17; ++i) CHECK(all[i] == i);

  // collinear points: farthest from 0 is the point at 10
  std::vector<Vec3> line = {{0, 0, 0}, {1, 0, 0}, {10, 0, 0}};
  const auto two = farthest_point_sample_from(line, 2, 0);
  CHECK(two[0] == 0);
  CHECK(two[1] == 2);

  CHECK_THROWS_AS(farthest_point_sample(line, 4, 0), ArgumentError);
}

TEST_CASE("farthest point sampling matches the greedy oracle") {
  for (uint64_t seed : {11u, 12u, 13u}) {
    const auto pts = random_points(64, seed);
    const auto got = farthest_point_sample_from(pts, 8, 5);
    const auto want = fps_reference(pts, 8, 5);
    CHECK(got == want);
  }
}

TEST_CASE("nearest neighbor exactness") {
  PointCloudN ref;
  ref.points = {{0, 0, 0}, {2, 0, 0}};
  PointCloudN q;
  q.points = {{0.9, 0, 0}, {2, 0, 0}};
  const auto hits = nearest_neighbor(q, ref);
  CHECK(hits[0].index == 0);
  CHECK(hits[0].sq_dist == doctest::Approx(0.81).epsilon(1e-12));
  CHECK(hits[1].index == 1);
  CHECK(hits[1].sq_dist == 0.0);

  PointCloudN empty;
  CHECK_THROWS_AS(nearest_neighbor(q, empty), ArgumentError);
}

TEST_CASE("nearest neighbor matches the exhaustive scan") {
  const auto refs = random_points(300, 21);
  const auto queries = random_points(200, 22);
  PointCloudN ref_cloud, query_cloud;
  ref_cloud.points = refs;
  query_cloud.points = queries;
  const auto hits = nearest_neighbor(query_cloud, ref_cloud);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (uint32_t j = 0; j < refs.size(); ++j) {
      const double d = (queries[i] - refs[j]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    CHECK(hits[i].index == best);
    CHECK(hits[i].sq_dist == doctest::Approx(best_d).epsilon(1e-12));
  }
}

TEST_CASE("signed distance on the unit cube") {
  const TriMesh cube = unit_cube();
  CHECK(signed_distance_to_mesh(Vec3(2, 0.5, 0.5), cube) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(signed_distance_to_mesh(Vec3(0.5, 0.5, 0.5), cube) == doctest::Approx(-0.5).epsilon(1e-9));
  TriMesh empty;
  CHECK_THROWS_AS(signed_distance_to_mesh(Vec3(0, 0, 0), empty), ArgumentError);
}

namespace {

// Independent ray-triangle hit test for the parity oracle.
bool oracle_ray_hits(const Vec3& orig, const Vec3& dir, const Vec3& a, const Vec3& b,
                     const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = dir.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-14) return false;
  const double inv = 1.0 / det;
  const Vec3 tv = orig - a;
  const double u = tv.dot(pv) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qv = tv.cross(e1);
  const double v = dir.dot(qv) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  return e2.dot(qv) * inv > 0.0;
}

}  // namespace

TEST_CASE("signed distance matches parity and scan oracles on an icosphere") {
  const TriMesh sphere = icosphere(2);
  MeshDistanceField field(sphere);
  const Vec3 oracle_dir = Vec3(0.9723451, 0.2193883, 0.0831772).normalized();
  Rng rng(31);
  std::uniform_real_distribution<double> uni(-1.6, 1.6);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(uni(rng), uni(rng), uni(rng));

    // magnitude oracle: exhaustive triangle scan
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : sphere.faces) {
      const Vec3 q = closest_point_on_triangle(p, sphere.vertices[t[0]], sphere.vertices[t[1]],
                                               sphere.vertices[t[2]]);
      best = std::min(best, (p - q).norm());
    }
    // sign oracle: single-ray crossing parity over the full face list
    int crossings = 0;
    for (const auto& t : sphere.faces) {
      if (oracle_ray_hits(p, oracle_dir, sphere.vertices[t[0]], sphere.vertices[t[1]],
                          sphere.vertices[t[2]])) {
        ++crossings;
      }
    }
    const bool inside_oracle = (crossings % 2) == 1;

    const double d = field.signed_distance(p);
    CHECK(std::abs(std::abs(d) - best) < 1e-6);
    if (best > 1e-6) CHECK((d < 0) == inside_oracle);
  }
}

TEST_CASE("signed distance is continuous across a face") {
  const TriMesh sphere = icosphere(1);
  MeshDistanceField field(sphere);
  // probe segment crossing the surface
  const Vec3 a(0.0, 0.0, 0.8), b(0.0, 0.0, 1.2);
  double prev = field.signed_distance(a);
  CHECK(prev < 0);
  for (int i = 1; i <= 40000; ++i) {
    const double t = i / 40000.0;
    const double d = field.signed_distance(a + t * (b - a));
    CHECK(std::abs(d - prev) < 1e-4);
    prev = d;
  }
  CHECK(prev > 0);
}

TEST_CASE("surface sampling covers faces by area and round-trips through bary records") {
  TriMesh tri;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.faces = {{0, 1, 2}};
  const SurfaceSamples s = sample_surface(tri, 1, 5);
  const Vec3 rebuilt = barycentric_point(tri, s.barys[0]);
  CHECK((rebuilt - s.cloud.points[0]).norm() == 0.0);

  // two triangles with areas 1 and 3
  TriMesh two;
  two.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {5, 0, 0}, {11, 0, 0}, {5, 1, 0}};
  two.faces = {{0, 1, 2}, {3, 4, 5}};
  CHECK(two.face_area(0) == doctest::Approx(1.0));
  CHECK(two.face_area(1) == doctest::Approx(3.0));
  const SurfaceSamples many = sample_surface(two, 4000, 11);
  std::size_t on_big = 0;
  for (const auto& b : many.barys) {
    if (b.face_index == 1) ++on_big;
    double sum = b.weights[0] + b.weights[1] + b.weights[2];
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
  const double frac = static_cast<double>(on_big) / 4000.0;
  CHECK(frac == doctest::Approx(0.75).epsilon(0.03));

  TriMesh degenerate;
  degenerate.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  degenerate.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(sample_surface(degenerate, 3, 1), ArgumentError);
}

TEST_CASE("rigid transforms preserve distances and unit normals") {
  Rng rng(41);
  std::uniform_real_distribution<double> uni(-1, 1);
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(1.1, Vec3(uni(rng), uni(rng), uni(rng)).normalized())
                   .toRotationMatrix();
  t.translation = Vec3(uni(rng), uni(rng), uni(rng));
  t.validate();

  const auto pts = random_points(20, 42);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double before = (pts[i] - pts[i + 1]).norm();
    const double after = (t.apply(pts[i]) - t.apply(pts[i + 1])).norm();
    CHECK(std::abs(before - after) < 1e-6);
  }
  const Vec3 n = Vec3(0.3, -0.5, 0.81).normalized();
  CHECK(std::abs(t.rotate(n).norm() - 1.0) < 1e-12);
}

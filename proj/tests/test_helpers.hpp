#pragma once

// Shared fixtures for the test suites: small analytic meshes and random
// cloud generators. Everything here is independent of the library paths it
// is used to check.

#include <map>
#include <random>
#include <vector>

#include "pointwear/types.hpp"

namespace pwtest {

inline pw::TriMesh unit_cube() {
  pw::TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  const int quads[6][4] = {{0, 3, 2, 1},   // z = 0
                           {4, 5, 6, 7},   // z = 1
                           {0, 1, 5, 4},   // y = 0
                           {2, 3, 7, 6},   // y = 1
                           {0, 4, 7, 3},   // x = 0
                           {1, 2, 6, 5}};  // x = 1
  for (const auto& q : quads) {
    m.faces.push_back({static_cast<uint32_t>(q[0]), static_cast<uint32_t>(q[1]),
                       static_cast<uint32_t>(q[2])});
    m.faces.push_back({static_cast<uint32_t>(q[0]), static_cast<uint32_t>(q[2]),
                       static_cast<uint32_t>(q[3])});
  }
  return m;
}

inline pw::TriMesh icosphere(int subdivisions = 2, double radius = 1.0) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<pw::Vec3> v = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                             {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                             {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<uint32_t, 3>> f = {
      {0, 11, 5},  {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
      {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& p : v) p.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::vector<std::array<uint32_t, 3>> nf;
    std::map<std::pair<uint32_t, uint32_t>, uint32_t> midpoint;
    auto mid = [&](uint32_t a, uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back(((v[a] + v[b]) * 0.5).normalized());
      midpoint[key] = static_cast<uint32_t>(v.size() - 1);
      return midpoint[key];
    };
    for (const auto& tri : f) {
      const uint32_t ab = mid(tri[0], tri[1]), bc = mid(tri[1], tri[2]), ca = mid(tri[2], tri[0]);
      nf.push_back({tri[0], ab, ca});
      nf.push_back({tri[1], bc, ab});
      nf.push_back({tri[2], ca, bc});
      nf.push_back({ab, bc, ca});
    }
    f = std::move(nf);
  }
  pw::TriMesh m;
  for (const pw::Vec3& p : v) m.vertices.push_back(radius * p);
  m.faces = f;
  return m;
}

inline std::vector<pw::Vec3> random_points(std::size_t n, uint64_t seed, double scale = 1.0) {
  pw::Rng rng(seed);
  std::uniform_real_distribution<double> uni(-scale, scale);
  std::vector<pw::Vec3> pts(n);
  for (auto& p : pts) p = pw::Vec3(uni(rng), uni(rng), uni(rng));
  return pts;
}

inline pw::PointCloudN random_cloud(std::size_t n, uint64_t seed, double scale = 1.0) {
  pw::PointCloudN c;
  c.points = random_points(n, seed, scale);
  c.normals.resize(n);
  pw::Rng rng(seed ^ 0x5bd1e995);
  std::uniform_real_distribution<double> uni(-1, 1);
  for (auto& nrm : c.normals) {
    do {
      nrm = pw::Vec3(uni(rng), uni(rng), uni(rng));
    } while (nrm.norm() < 1e-3);
    nrm.normalize();
  }
  return c;
}

// Central finite difference of a scalar function with respect to one entry.
template <typename F>
double central_diff(F&& f, double& slot, double h) {
  const double saved = slot;
  slot = saved + h;
  const double up = f();
  slot = saved - h;
  const double down = f();
  slot = saved;
  return (up - down) / (2.0 * h);
}

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace pwtest

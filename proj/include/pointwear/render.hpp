#pragma once

#include <cstdint>
#include <vector>

#include "pointwear/io.hpp"
#include "pointwear/types.hpp"

namespace pw {

enum class ViewSide : uint8_t { kFront = 0, kBack = 1 };

/// Orthographic camera looking along -z (front) or +z (back), y up. The back
/// view is horizontally mirrored so both images show the figure the same way
/// round.
struct OrthoCamera {
  ViewSide view = ViewSide::kFront;
  int width = 1024;
  int height = 1024;
  double meters_per_pixel = 2.0e-3;
  Vec3 center = Vec3::Zero();  // world point mapped to the image center
  double near_plane = -10.0;   // along the view direction
  double far_plane = 10.0;

  void validate() const;

  // Continuous pixel coordinates (u right, v down) and depth along the view
  // direction (smaller = closer to the camera).
  void project(const Vec3& p, double& u, double& v, double& depth) const;
};

constexpr int32_t kNoPoint = -1;

struct NormalMapRender {
  // RGB in [0,1], row-major; background is white.
  std::vector<double> color;
  std::vector<double> depth;
  std::vector<int32_t> index;  // winning point id per pixel, kNoPoint if empty
  int width = 0;
  int height = 0;

  double* rgb(int x, int y) { return &color[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const double* rgb(int x, int y) const {
    return &color[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  int32_t id(int x, int y) const { return index[static_cast<std::size_t>(y) * width + x]; }

  io::ImageU8 to_image() const;
  std::size_t foreground_pixels() const;
};

// Z-buffered disk splatting; normal n colors its splat (n+1)/2. Lower point
// ids win depth ties, so the result is deterministic.
NormalMapRender render_normal_map(const PointCloudN& cloud, const OrthoCamera& camera,
                                  double splat_radius_px);

// Point ids whose winning splats fall inside mask-true pixels (value > 0).
// Returned sorted and unique.
std::vector<uint32_t> backproject_mask(const io::ImageU8& mask, const NormalMapRender& render);

}  // namespace pw

#include "pointwear/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pw {

void OrthoCamera::validate() const {
  if (width <= 0 || height <= 0) throw ArgumentError("camera: non-positive image size");
  if (!(meters_per_pixel > 0.0)) throw ArgumentError("camera: non-positive scale");
  if (!(near_plane < far_plane)) throw ArgumentError("camera: near must be below far");
}

void OrthoCamera::project(const Vec3& p, double& u, double& v, double& depth) const {
  const double sx = (p.x() - center.x()) / meters_per_pixel;
  const double sy = (p.y() - center.y()) / meters_per_pixel;
  if (view == ViewSide::kFront) {
    u = 0.5 * width + sx;
    depth = -(p.z() - center.z());
  } else {
    u = 0.5 * width - sx;
    depth = p.z() - center.z();
  }
  v = 0.5 * height - sy;
}

io::ImageU8 NormalMapRender::to_image() const {
  io::ImageU8 img = io::ImageU8::create(width, height, 3);
  for (std::size_t i = 0; i < color.size(); ++i) {
    const double c = std::clamp(color[i], 0.0, 1.0);
    img.data[i] = static_cast<uint8_t>(std::lround(c * 255.0));
  }
  return img;
}

std::size_t NormalMapRender::foreground_pixels() const {
  std::size_t n = 0;
  for (int32_t id : index) {
    if (id != kNoPoint) ++n;
  }
  return n;
}

NormalMapRender render_normal_map(const PointCloudN& cloud, const OrthoCamera& camera,
                                  double splat_radius_px) {
  camera.validate();
  if (!cloud.points.empty() && !cloud.has_normals()) {
    throw ArgumentError("render_normal_map: cloud has no normals");
  }

  NormalMapRender out;
  out.width = camera.width;
  out.height = camera.height;
  const std::size_t px = static_cast<std::size_t>(camera.width) * camera.height;
  out.color.assign(px * 3, 1.0);
  out.depth.assign(px, std::numeric_limits<double>::infinity());
  out.index.assign(px, kNoPoint);

  const double r = std::max(0.0, splat_radius_px);
  const double r2 = r * r;

  // Sequential over points: lower ids win exact depth ties, which makes the
  // output independent of everything but the inputs.
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double u, v, depth;
    camera.project(cloud.points[i], u, v, depth);
    if (depth < camera.near_plane || depth > camera.far_plane) continue;

    const int x0 = std::max(0, static_cast<int>(std::floor(u - r - 0.5)));
    const int x1 = std::min(camera.width - 1, static_cast<int>(std::ceil(u + r - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(v - r - 0.5)));
    const int y1 = std::min(camera.height - 1, static_cast<int>(std::ceil(v + r - 0.5)));

    const Vec3& n = cloud.normals[i];
    const double rgb[3] = {0.5 * (n.x() + 1.0), 0.5 * (n.y() + 1.0), 0.5 * (n.z() + 1.0)};

    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = (x + 0.5) - u;
        const double dy = (y + 0.5) - v;
        if (dx * dx + dy * dy > r2) continue;
        const std::size_t at = static_cast<std::size_t>(y) * camera.width + x;
        if (depth < out.depth[at]) {
          out.depth[at] = depth;
          out.index[at] = static_cast<int32_t>(i);
          out.color[at * 3 + 0] = rgb[0];
          out.color[at * 3 + 1] = rgb[1];
          out.color[at * 3 + 2] = rgb[2];
        }
      }
    }
  }
  return out;
}

std::vector<uint32_t> backproject_mask(const io::ImageU8& mask, const NormalMapRender& render) {
  if (mask.width != render.width || mask.height != render.height) {
    throw ArgumentError("backproject_mask: mask dimensions do not match render");
  }
  if (mask.channels != 1) throw ArgumentError("backproject_mask: mask must be single channel");

  std::vector<uint32_t> ids;
  for (int y = 0; y < render.height; ++y) {
    for (int x = 0; x < render.width; ++x) {
      if (mask.at(x, y, 0) == 0) continue;
      const int32_t id = render.id(x, y);
      if (id != kNoPoint) ids.push_back(static_cast<uint32_t>(id));
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace pw

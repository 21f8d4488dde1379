#include "pointwear/synth.hpp"

#include <algorithm>
#include <cmath>

#include "pointwear/geometry.hpp"
#include "pointwear/io.hpp"

namespace pw::synth {

SkirtType skirt_type_from_string(const std::string& s) {
  if (s == "long") return SkirtType::kLong;
  if (s == "short") return SkirtType::kShort;
  if (s == "none") return SkirtType::kNone;
  throw ArgumentError("unknown skirt type: " + s);
}

std::string to_string(SkirtType t) {
  switch (t) {
    case SkirtType::kLong: return "long";
    case SkirtType::kShort: return "short";
    case SkirtType::kNone: return "none";
  }
  return "none";
}

double FigureSpec::hem_y() const {
  return skirt == SkirtType::kShort ? skirt_hem_y_short : skirt_hem_y_long;
}

double FigureSpec::hem_radius() const {
  return skirt == SkirtType::kShort ? skirt_hem_radius_short : skirt_hem_radius_long;
}

void FigureSpec::validate() const {
  if (pelvis_radius <= 0 || torso_radius <= 0 || upper_leg_radius <= 0 || lower_leg_radius <= 0 ||
      hip_half_gap <= 0) {
    throw ArgumentError("figure: dimensions must be positive");
  }
  if (!(ankle_y < knee_y && knee_y < hip_y && pelvis_y0 < pelvis_y1 && torso_y0 < torso_y1)) {
    throw ArgumentError("figure: heights out of order");
  }
  if (segments < 6 || rings < 2) throw ArgumentError("figure: tessellation too coarse");
  if (skirt != SkirtType::kNone && !(hem_y() < skirt_waist_y)) {
    throw ArgumentError("figure: skirt hem must sit below the waist");
  }
}

io::json FigureSpec::to_json() const {
  io::json j;
  j["hip_half_gap"] = hip_half_gap;
  j["hip_y"] = hip_y;
  j["knee_y"] = knee_y;
  j["ankle_y"] = ankle_y;
  j["pelvis_y0"] = pelvis_y0;
  j["pelvis_y1"] = pelvis_y1;
  j["torso_y0"] = torso_y0;
  j["torso_y1"] = torso_y1;
  j["pelvis_radius"] = pelvis_radius;
  j["torso_radius"] = torso_radius;
  j["upper_leg_radius"] = upper_leg_radius;
  j["lower_leg_radius"] = lower_leg_radius;
  j["segments"] = segments;
  j["rings"] = rings;
  j["skirt"] = to_string(skirt);
  j["skirt_waist_y"] = skirt_waist_y;
  j["skirt_waist_radius"] = skirt_waist_radius;
  j["skirt_hem_y_long"] = skirt_hem_y_long;
  j["skirt_hem_radius_long"] = skirt_hem_radius_long;
  j["skirt_hem_y_short"] = skirt_hem_y_short;
  j["skirt_hem_radius_short"] = skirt_hem_radius_short;
  return j;
}

FigureSpec FigureSpec::from_json(const io::json& j) {
  FigureSpec s;
  s.hip_half_gap = j.value("hip_half_gap", s.hip_half_gap);
  s.hip_y = j.value("hip_y", s.hip_y);
  s.knee_y = j.value("knee_y", s.knee_y);
  s.ankle_y = j.value("ankle_y", s.ankle_y);
  s.pelvis_y0 = j.value("pelvis_y0", s.pelvis_y0);
  s.pelvis_y1 = j.value("pelvis_y1", s.pelvis_y1);
  s.torso_y0 = j.value("torso_y0", s.torso_y0);
  s.torso_y1 = j.value("torso_y1", s.torso_y1);
  s.pelvis_radius = j.value("pelvis_radius", s.pelvis_radius);
  s.torso_radius = j.value("torso_radius", s.torso_radius);
  s.upper_leg_radius = j.value("upper_leg_radius", s.upper_leg_radius);
  s.lower_leg_radius = j.value("lower_leg_radius", s.lower_leg_radius);
  s.segments = j.value("segments", s.segments);
  s.rings = j.value("rings", s.rings);
  s.skirt = skirt_type_from_string(j.value("skirt", to_string(s.skirt)));
  s.skirt_waist_y = j.value("skirt_waist_y", s.skirt_waist_y);
  s.skirt_waist_radius = j.value("skirt_waist_radius", s.skirt_waist_radius);
  s.skirt_hem_y_long = j.value("skirt_hem_y_long", s.skirt_hem_y_long);
  s.skirt_hem_radius_long = j.value("skirt_hem_radius_long", s.skirt_hem_radius_long);
  s.skirt_hem_y_short = j.value("skirt_hem_y_short", s.skirt_hem_y_short);
  s.skirt_hem_radius_short = j.value("skirt_hem_radius_short", s.skirt_hem_radius_short);
  return s;
}

RegionLabel RegionOracle::label(const Vec3& p, uint8_t part) const {
  for (uint8_t u : unclothed_parts) {
    if (u == part) return RegionLabel::kUnclothed;
  }
  if (has_skirt && p.y() >= hem_y && p.y() <= waist_y) return RegionLabel::kGenerated;
  return RegionLabel::kDeformed;
}

// ---------------------------------------------------------------------------
// Capsule meshing

namespace {

void orthonormal_frame(const Vec3& axis, Vec3& e1, Vec3& e2) {
  const Vec3 other = std::abs(axis.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
  e1 = axis.cross(other).normalized();
  e2 = axis.cross(e1);
}

// Appends a watertight capsule; returns the number of vertices added.
std::size_t append_capsule(const Capsule& cap, int segments, int rings, uint8_t part,
                           std::vector<Vec3>& vertices, std::vector<std::array<uint32_t, 3>>& faces,
                           std::vector<uint8_t>& labels) {
  const uint32_t base = static_cast<uint32_t>(vertices.size());
  const Vec3 axis = (cap.p1 - cap.p0).normalized();
  Vec3 e1, e2;
  orthonormal_frame(axis, e1, e2);
  const int cap_rings = std::max(3, segments / 4);

  auto dir = [&](int k) {
    const double th = 2.0 * M_PI * k / segments;
    return std::cos(th) * e1 + std::sin(th) * e2;
  };

  // Ring stack from bottom pole to top pole. Equator rings are shared with
  // the cylinder wall.
  std::vector<std::vector<uint32_t>> ring_ids;
  vertices.push_back(cap.p0 - cap.radius * axis);  // bottom pole
  labels.push_back(part);
  const uint32_t bottom_pole = base;

  for (int i = 1; i <= cap_rings; ++i) {
    const double a = (M_PI / 2.0) * i / cap_rings;
    std::vector<uint32_t> ring(segments);
    for (int k = 0; k < segments; ++k) {
      ring[k] = static_cast<uint32_t>(vertices.size());
      vertices.push_back(cap.p0 + cap.radius * (std::sin(a) * dir(k) - std::cos(a) * axis));
      labels.push_back(part);
    }
    ring_ids.push_back(std::move(ring));
  }
  for (int j = 1; j <= rings; ++j) {
    const double t = static_cast<double>(j) / rings;
    const Vec3 c = cap.p0 + t * (cap.p1 - cap.p0);
    std::vector<uint32_t> ring(segments);
    for (int k = 0; k < segments; ++k) {
      ring[k] = static_cast<uint32_t>(vertices.size());
      vertices.push_back(c + cap.radius * dir(k));
      labels.push_back(part);
    }
    ring_ids.push_back(std::move(ring));
  }
  for (int i = cap_rings - 1; i >= 1; --i) {
    const double a = (M_PI / 2.0) * i / cap_rings;
    std::vector<uint32_t> ring(segments);
    for (int k = 0; k < segments; ++k) {
      ring[k] = static_cast<uint32_t>(vertices.size());
      vertices.push_back(cap.p1 + cap.radius * (std::sin(a) * dir(k) + std::cos(a) * axis));
      labels.push_back(part);
    }
    ring_ids.push_back(std::move(ring));
  }
  vertices.push_back(cap.p1 + cap.radius * axis);  // top pole
  labels.push_back(part);
  const uint32_t top_pole = static_cast<uint32_t>(vertices.size() - 1);

  auto quad = [&](uint32_t a0, uint32_t a1, uint32_t b0, uint32_t b1) {
    faces.push_back({a0, a1, b0});
    faces.push_back({a1, b1, b0});
  };

  const auto& first = ring_ids.front();
  for (int k = 0; k < segments; ++k) {
    faces.push_back({bottom_pole, first[(k + 1) % segments], first[k]});
  }
  for (std::size_t r = 0; r + 1 < ring_ids.size(); ++r) {
    const auto& lo = ring_ids[r];
    const auto& hi = ring_ids[r + 1];
    for (int k = 0; k < segments; ++k) {
      quad(lo[k], lo[(k + 1) % segments], hi[k], hi[(k + 1) % segments]);
    }
  }
  const auto& last = ring_ids.back();
  for (int k = 0; k < segments; ++k) {
    faces.push_back({top_pole, last[k], last[(k + 1) % segments]});
  }
  return vertices.size() - base;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

Figure make_figure(const FigureSpec& spec) {
  spec.validate();
  Figure fig;
  fig.spec = spec;

  const double g = spec.hip_half_gap;
  fig.body.part_names = {"pelvis",         "torso",          "left_upper_leg",
                         "left_lower_leg", "right_upper_leg", "right_lower_leg"};
  fig.body.joints = {
      Vec3(0, 1.00, 0),          Vec3(0, spec.torso_y0, 0), Vec3(-g, spec.hip_y, 0),
      Vec3(-g, spec.knee_y, 0),  Vec3(g, spec.hip_y, 0),    Vec3(g, spec.knee_y, 0),
  };
  fig.body.parent = {0, 0, 0, 2, 0, 4};

  fig.capsules = {
      {Vec3(0, spec.pelvis_y0, 0), Vec3(0, spec.pelvis_y1, 0), spec.pelvis_radius},
      {Vec3(0, spec.torso_y0, 0), Vec3(0, spec.torso_y1, 0), spec.torso_radius},
      {Vec3(-g, spec.hip_y, 0), Vec3(-g, spec.knee_y, 0), spec.upper_leg_radius},
      {Vec3(-g, spec.knee_y, 0), Vec3(-g, spec.ankle_y, 0), spec.lower_leg_radius},
      {Vec3(g, spec.hip_y, 0), Vec3(g, spec.knee_y, 0), spec.upper_leg_radius},
      {Vec3(g, spec.knee_y, 0), Vec3(g, spec.ankle_y, 0), spec.lower_leg_radius},
  };

  for (uint8_t part = 0; part < fig.capsules.size(); ++part) {
    append_capsule(fig.capsules[part], spec.segments, spec.rings, part, fig.body.canonical_vertices,
                   fig.body.faces, fig.body.part_labels);
  }

  // Bone segments for the distance-falloff weights; the pelvis bone doubles
  // as the root.
  const std::vector<std::pair<Vec3, Vec3>> bones = {
      {Vec3(0, spec.pelvis_y0, 0), Vec3(0, spec.pelvis_y1, 0)},
      {Vec3(0, spec.torso_y0, 0), Vec3(0, spec.torso_y1, 0)},
      {Vec3(-g, spec.hip_y, 0), Vec3(-g, spec.knee_y, 0)},
      {Vec3(-g, spec.knee_y, 0), Vec3(-g, spec.ankle_y, 0)},
      {Vec3(g, spec.hip_y, 0), Vec3(g, spec.knee_y, 0)},
      {Vec3(g, spec.knee_y, 0), Vec3(g, spec.ankle_y, 0)},
  };
  const double sigma = 0.07;
  const std::size_t n = fig.body.canonical_vertices.size();
  const std::size_t j = bones.size();
  fig.body.skin_weights.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j));
  for (std::size_t v = 0; v < n; ++v) {
    Eigen::RowVectorXd w(j);
    for (std::size_t b = 0; b < j; ++b) {
      const double d = point_segment_distance(fig.body.canonical_vertices[v], bones[b].first,
                                              bones[b].second);
      w[static_cast<Eigen::Index>(b)] = std::exp(-(d * d) / (sigma * sigma));
    }
    // Drop negligible influences, then normalize.
    const double cutoff = 1e-4 * w.maxCoeff();
    for (Eigen::Index b = 0; b < w.size(); ++b) {
      if (w[b] < cutoff) w[b] = 0.0;
    }
    fig.body.skin_weights.row(static_cast<Eigen::Index>(v)) = w / w.sum();
  }

  fig.unclothed_part_names = {"left_lower_leg", "right_lower_leg"};
  fig.oracle.has_skirt = spec.skirt != SkirtType::kNone;
  fig.oracle.waist_y = spec.skirt_waist_y;
  fig.oracle.hem_y = spec.hem_y();
  for (const std::string& name : fig.unclothed_part_names) {
    fig.oracle.unclothed_parts.push_back(static_cast<uint8_t>(fig.body.part_index(name)));
  }

  fig.body.validate();
  return fig;
}

SurfaceSamples sample_body_surface(const Figure& figure, std::size_t n, uint64_t seed) {
  const TriMesh mesh = figure.body.canonical_mesh();
  std::vector<double> cum(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cum[f] = total;
  }
  if (total <= 0.0) throw ArgumentError("sample_body_surface: degenerate mesh");

  auto buried = [&](const Vec3& p, uint8_t own_part) {
    for (std::size_t c = 0; c < figure.capsules.size(); ++c) {
      if (c == own_part) continue;
      const Capsule& cap = figure.capsules[c];
      if (point_segment_distance(p, cap.p0, cap.p1) < cap.radius - 1e-9) return true;
    }
    return false;
  };

  SurfaceSamples out;
  Rng rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::size_t guard = 0;
  while (out.barys.size() < n) {
    if (++guard > 1000 * n) throw NumericError("sample_body_surface: rejection did not converge");
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

    const Vec3 p = barycentric_point(mesh, bary);
    const uint8_t part = figure.body.part_of_sample(bary);
    if (buried(p, part)) continue;

    out.barys.push_back(bary);
    out.cloud.points.push_back(p);
    out.cloud.normals.push_back(mesh.face_normal(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scan synthesis

double torso_displacement_amplitude(const Figure& figure, const Pose& pose) {
  const auto bones = forward_kinematics(figure.body, pose);
  const Vec3 knee_l = bones[3].apply(figure.body.joints[3]);
  const Vec3 knee_r = bones[5].apply(figure.body.joints[5]);
  const double rest = 2.0 * figure.spec.hip_half_gap;
  const double gap = (knee_l - knee_r).norm();
  return 0.004 + 0.004 * std::tanh(2.0 * (gap - rest) / rest);
}

namespace {

// Canonical wrinkle displacement of a deformed-region point, applied along
// the sample normal before skinning.
double torso_wrinkle(const Vec3& p, double amplitude) {
  const double azimuth = std::atan2(p.z(), p.x());
  return amplitude * std::sin(9.0 * p.y() + 2.0 * azimuth);
}

struct PosedCapsule {
  Vec3 p0, p1;
  double radius;
};

// Largest radial reach of a horizontal ray from the skirt axis before it
// leaves the inflated posed capsule; distance-along-ray to a convex set is
// convex, so the covered parameter range is an interval.
bool capsule_radial_support(const PosedCapsule& cap, const Vec3& origin, const Vec3& dir,
                            double t_max, double& support) {
  auto dist_at = [&](double t) {
    return point_segment_distance(origin + t * dir, cap.p0, cap.p1) - cap.radius;
  };
  // Locate the minimum by ternary search.
  double lo = 0.0, hi = t_max;
  for (int it = 0; it < 60; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (dist_at(m1) <= dist_at(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  const double t_min = 0.5 * (lo + hi);
  if (dist_at(t_min) > 0.0) return false;
  // Largest root in [t_min, t_max].
  double a = t_min, b = t_max;
  if (dist_at(b) <= 0.0) {
    support = b;
    return true;
  }
  for (int it = 0; it < 60; ++it) {
    const double m = 0.5 * (a + b);
    if (dist_at(m) <= 0.0) {
      a = m;
    } else {
      b = m;
    }
  }
  support = 0.5 * (a + b);
  return true;
}

}  // namespace

PointCloudN simulate_skirt(const Figure& figure, const Pose& pose, uint64_t seed,
                           const SkirtParams& params) {
  pose.validate();
  const auto bones = forward_kinematics(figure.body, pose);
  const auto per_vertex = vertex_transforms(figure.body, bones);
  const double amp = torso_displacement_amplitude(figure, pose);

  PointCloudN scan;

  // Body portion: unclothed samples verbatim, deformed samples displaced
  // along their canonical normal, generated-region samples dropped.
  const SurfaceSamples body_samples =
      sample_body_surface(figure, params.scan_body_points, subseed(seed, "scan_body"));
  for (std::size_t i = 0; i < body_samples.barys.size(); ++i) {
    const BaryRecord& bary = body_samples.barys[i];
    const Vec3 p = body_samples.cloud.points[i];
    const uint8_t part = figure.body.part_of_sample(bary);
    const RegionLabel label = figure.oracle.label(p, part);
    if (label == RegionLabel::kGenerated) continue;

    const Vec3 n = body_samples.cloud.normals[i];
    Vec3 canonical = p;
    if (label == RegionLabel::kDeformed) canonical += torso_wrinkle(p, amp) * n;
    const RigidTransform t = point_transform(bary, per_vertex, static_cast<std::int64_t>(i));
    scan.points.push_back(t.apply(canonical));
    scan.normals.push_back(t.rotate(n));
  }

  if (figure.spec.skirt == SkirtType::kNone) return scan;

  // Skirt sheet. The axis hangs vertically through the posed root joint.
  const Vec3 root = bones[0].apply(figure.body.joints[0]);
  const double axis_x = root.x(), axis_z = root.z();
  const double y_shift = pose.root_translation.y();
  const double waist = figure.spec.skirt_waist_y + y_shift;
  const double hem = figure.spec.hem_y() + y_shift;
  const double r_waist = figure.spec.skirt_waist_radius;
  const double r_hem = figure.spec.hem_radius();

  std::vector<PosedCapsule> posed(figure.capsules.size());
  for (std::size_t c = 0; c < figure.capsules.size(); ++c) {
    posed[c] = {bones[c].apply(figure.capsules[c].p0), bones[c].apply(figure.capsules[c].p1),
                figure.capsules[c].radius * 1.15};
  }

  Rng rng(subseed(seed, "skirt"));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double phase[3] = {2.0 * M_PI * uni(rng), 2.0 * M_PI * uni(rng), 2.0 * M_PI * uni(rng)};
  const int harmonics[3] = {3, 5, 8};
  const double amps[3] = {0.012, 0.008, 0.005};

  const auto knee_l = bones[3].apply(figure.body.joints[3]);
  const auto knee_r = bones[5].apply(figure.body.joints[5]);
  const double pose_phase = 4.0 * ((knee_l - knee_r).norm() - 2.0 * figure.spec.hip_half_gap);

  auto radius_at = [&](double y, double theta) {
    const double yc = std::clamp(y, hem, waist);
    const double frac = (waist - yc) / (waist - hem);
    double r = r_waist + frac * (r_hem - r_waist);
    double wrinkle = 0.0;
    for (int h = 0; h < 3; ++h) {
      wrinkle += amps[h] * std::cos(harmonics[h] * theta + phase[h] + pose_phase);
    }
    r += params.wrinkle_amplitude * frac * wrinkle;

    const Vec3 origin(axis_x, yc, axis_z);
    const Vec3 dir(std::cos(theta), 0.0, std::sin(theta));
    for (const PosedCapsule& cap : posed) {
      double support = 0.0;
      if (capsule_radial_support(cap, origin, dir, 2.0, support)) {
        r = std::max(r, support + params.clearance);
      }
    }
    return r;
  };

  auto surface_at = [&](double y, double theta) {
    const double r = radius_at(y, theta);
    return Vec3(axis_x + r * std::cos(theta), y, axis_z + r * std::sin(theta));
  };

  const std::size_t n_skirt = params.scan_skirt_points;
  const int rows = std::max(2, static_cast<int>(std::lround(std::sqrt(n_skirt / 2.0))));
  const int cols = static_cast<int>((n_skirt + rows - 1) / rows);
  std::size_t emitted = 0;
  for (int r = 0; r < rows && emitted < n_skirt; ++r) {
    for (int c = 0; c < cols && emitted < n_skirt; ++c) {
      const double y = hem + (waist - hem) * ((r + uni(rng)) / rows);
      const double theta = 2.0 * M_PI * ((c + uni(rng)) / cols);
      const Vec3 s = surface_at(y, theta);

      const double hy = 1e-4 * (waist - hem);
      const double ht = 1e-4;
      const double y0 = std::max(hem, y - hy), y1 = std::min(waist, y + hy);
      const Vec3 dy = (surface_at(y1, theta) - surface_at(y0, theta)) / (y1 - y0);
      const Vec3 dt = (surface_at(y, theta + ht) - surface_at(y, theta - ht)) / (2.0 * ht);
      Vec3 n = dy.cross(dt);
      const double len = n.norm();
      if (len < 1e-12) {
        n = Vec3(std::cos(theta), 0.0, std::sin(theta));
      } else {
        n /= len;
        if (n.dot(Vec3(std::cos(theta), 0.0, std::sin(theta))) < 0.0) n = -n;
      }

      scan.points.push_back(s);
      scan.normals.push_back(n);
      ++emitted;
    }
  }
  return scan;
}

Pose sample_pose(const Figure& figure, Rng& rng) {
  auto uni = [&](double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
  };
  Pose pose = Pose::identity(figure.body.joint_count());
  // torso sway
  pose.joint_rotations[1] = axis_angle_to_matrix(Vec3(uni(-0.12, 0.12), 0, uni(-0.12, 0.12)));
  // hips: abduction about z (outward only), swing about x
  pose.joint_rotations[2] = axis_angle_to_matrix(Vec3(uni(-0.30, 0.30), 0, uni(-0.35, 0.05)));
  pose.joint_rotations[4] = axis_angle_to_matrix(Vec3(uni(-0.30, 0.30), 0, uni(-0.05, 0.35)));
  // knees bend one way
  pose.joint_rotations[3] = axis_angle_to_matrix(Vec3(uni(0.0, 0.6), 0, 0));
  pose.joint_rotations[5] = axis_angle_to_matrix(Vec3(uni(0.0, 0.6), 0, 0));
  return pose;
}

// ---------------------------------------------------------------------------
// Dataset emission

MaskCameras mask_cameras(const ArticulatedBody& body, int resolution) {
  Vec3 lo = body.canonical_vertices[0], hi = body.canonical_vertices[0];
  for (const Vec3& v : body.canonical_vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec3 center = 0.5 * (lo + hi);
  const double extent = std::max(hi.x() - lo.x(), hi.y() - lo.y());

  MaskCameras cams;
  cams.front.view = ViewSide::kFront;
  cams.front.width = cams.front.height = resolution;
  cams.front.meters_per_pixel = 1.2 * extent / resolution;
  cams.front.center = center;
  cams.back = cams.front;
  cams.back.view = ViewSide::kBack;
  return cams;
}

CutMap cut_map_from_masks(const ArticulatedBody& body, const SurfaceSamples& samples,
                          const io::ImageU8& mask_front, const io::ImageU8& mask_back,
                          const MaskCameras& cameras, double splat_radius,
                          const std::vector<std::string>& unclothed_parts) {
  const NormalMapRender front = render_normal_map(samples.cloud, cameras.front, splat_radius);
  const NormalMapRender back = render_normal_map(samples.cloud, cameras.back, splat_radius);

  std::vector<uint32_t> loose = backproject_mask(mask_front, front);
  const std::vector<uint32_t> loose_back = backproject_mask(mask_back, back);
  loose.insert(loose.end(), loose_back.begin(), loose_back.end());
  std::sort(loose.begin(), loose.end());
  loose.erase(std::unique(loose.begin(), loose.end()), loose.end());

  std::vector<Vec3> loose_points;
  loose_points.reserve(loose.size());
  for (uint32_t id : loose) loose_points.push_back(samples.cloud.points[id]);

  std::vector<uint32_t> visible;
  for (int32_t id : front.index) {
    if (id != kNoPoint) visible.push_back(static_cast<uint32_t>(id));
  }
  for (int32_t id : back.index) {
    if (id != kNoPoint) visible.push_back(static_cast<uint32_t>(id));
  }
  std::sort(visible.begin(), visible.end());
  visible.erase(std::unique(visible.begin(), visible.end()), visible.end());

  return build_cut_map(samples, loose_points, unclothed_parts, body, &visible);
}

void emit_dataset(const FigureSpec& spec, const DatasetParams& params,
                  const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const Figure fig = make_figure(spec);

  fs::create_directories(out_dir);
  fs::create_directories(out_dir / "frames");
  fs::create_directories(out_dir / "masks");

  save_body(out_dir / "body.json", fig.body);

  // Labeled sample set at the near-canonical frame (identity pose).
  const SurfaceSamples samples =
      sample_body_surface(fig, params.body_samples, subseed(params.seed, "samples"));
  const MaskCameras cams = mask_cameras(fig.body, params.mask_resolution);

  // Oracle masks stand in for the interactive segmenter: a pixel is loose
  // when its winning sample sits in the skirt coverage band.
  const NormalMapRender front =
      render_normal_map(samples.cloud, cams.front, params.mask_splat_radius);
  const NormalMapRender back =
      render_normal_map(samples.cloud, cams.back, params.mask_splat_radius);
  auto make_mask = [&](const NormalMapRender& render) {
    io::ImageU8 mask = io::ImageU8::create(render.width, render.height, 1, 0);
    for (int y = 0; y < render.height; ++y) {
      for (int x = 0; x < render.width; ++x) {
        const int32_t id = render.id(x, y);
        if (id == kNoPoint) continue;
        const uint8_t part = fig.body.part_of_sample(samples.barys[id]);
        if (fig.oracle.label(samples.cloud.points[id], part) == RegionLabel::kGenerated) {
          mask.at(x, y, 0) = 255;
        }
      }
    }
    return mask;
  };
  const io::ImageU8 mask_front = make_mask(front);
  const io::ImageU8 mask_back = make_mask(back);
  io::write_png(out_dir / "masks" / "front.png", mask_front);
  io::write_png(out_dir / "masks" / "back.png", mask_back);

  const CutMap map = cut_map_from_masks(fig.body, samples, mask_front, mask_back, cams,
                                        params.mask_splat_radius, fig.unclothed_part_names);
  save_cut_map(out_dir / "cutmap.bin", map);

  Rng pose_rng(subseed(params.seed, "poses"));
  for (int f = 0; f < params.frames; ++f) {
    const Pose pose = sample_pose(fig, pose_rng);
    char name[32];
    std::snprintf(name, sizeof(name), "%04d", f);
    save_pose(out_dir / "frames" / (std::string(name) + ".pose.json"), pose);
    const PointCloudN scan =
        simulate_skirt(fig, pose, subseed(params.seed, "scan", static_cast<uint64_t>(f)),
                       params.skirt);
    io::write_ply(out_dir / "frames" / (std::string(name) + ".scan.ply"), scan);
  }

  io::json config;
  config["kind"] = "dataset";
  config["figure"] = spec.to_json();
  config["frames"] = params.frames;
  config["seed"] = params.seed;
  config["body_samples"] = params.body_samples;
  config["unclothed_parts"] = fig.unclothed_part_names;
  config["mask"] = {{"resolution", params.mask_resolution},
                    {"splat_radius", params.mask_splat_radius}};
  config["scan"] = {{"body_points", params.skirt.scan_body_points},
                    {"skirt_points", params.skirt.scan_skirt_points},
                    {"clearance", params.skirt.clearance},
                    {"wrinkle_amplitude", params.skirt.wrinkle_amplitude}};
  io::save_json(out_dir / "config.json", config);
}

}  // namespace pw::synth

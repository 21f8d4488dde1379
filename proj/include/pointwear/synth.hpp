#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pointwear/body.hpp"
#include "pointwear/cutmap.hpp"
#include "pointwear/render.hpp"
#include "pointwear/types.hpp"

namespace pw::synth {

enum class SkirtType { kLong, kShort, kNone };

SkirtType skirt_type_from_string(const std::string& s);
std::string to_string(SkirtType t);

struct FigureSpec {
  // Canonical layout, meters; y is up, the figure faces +z.
  double hip_half_gap = 0.10;
  double hip_y = 0.95;
  double knee_y = 0.50;
  double ankle_y = 0.12;
  double pelvis_y0 = 0.99;
  double pelvis_y1 = 1.10;
  double torso_y0 = 1.12;
  double torso_y1 = 1.55;
  double pelvis_radius = 0.11;
  double torso_radius = 0.12;
  double upper_leg_radius = 0.06;
  double lower_leg_radius = 0.05;

  int segments = 16;  // angular tessellation per capsule
  int rings = 12;     // axial tessellation per capsule body

  SkirtType skirt = SkirtType::kLong;
  double skirt_waist_y = 1.05;
  double skirt_waist_radius = 0.19;
  double skirt_hem_y_long = 0.35;
  double skirt_hem_radius_long = 0.43;
  double skirt_hem_y_short = 0.68;
  double skirt_hem_radius_short = 0.32;

  double hem_y() const;
  double hem_radius() const;
  void validate() const;

  io::json to_json() const;
  static FigureSpec from_json(const io::json& j);
};

struct Capsule {
  Vec3 p0, p1;
  double radius = 0.0;
};

/// Analytic ground truth for the region partition: listed unclothed parts
/// first, then the skirt coverage band, then the deformed default.
struct RegionOracle {
  bool has_skirt = false;
  double waist_y = 0.0;
  double hem_y = 0.0;
  std::vector<uint8_t> unclothed_parts;  // part ids

  RegionLabel label(const Vec3& canonical_point, uint8_t part) const;
};

struct Figure {
  ArticulatedBody body;
  std::vector<Capsule> capsules;  // canonical, one per part
  RegionOracle oracle;
  std::vector<std::string> unclothed_part_names;
  FigureSpec spec;
};

// Watertight capsule mesh per part, 6-joint skeleton, distance-falloff
// skinning, part labels, and the analytic region oracle.
Figure make_figure(const FigureSpec& spec);

// Area-weighted canonical surface samples that rejects points buried inside
// another part's capsule, so front+back renders can reach nearly all of them.
SurfaceSamples sample_body_surface(const Figure& figure, std::size_t n, uint64_t seed);

struct SkirtParams {
  double wrinkle_amplitude = 1.0;  // scale on the fixed 3-harmonic field
  std::size_t scan_body_points = 3000;
  std::size_t scan_skirt_points = 2500;
  double clearance = 5.0e-3;  // radial margin beyond the posed body support
};

// Full ground-truth scan for one pose: posed body samples outside the skirt
// band (torso samples carry the pose-dependent wrinkle displacement) merged
// with the analytic cone-sheet skirt. All skirt points clear the posed body
// by construction.
PointCloudN simulate_skirt(const Figure& figure, const Pose& pose, uint64_t seed,
                           const SkirtParams& params = {});

// The pose-dependent canonical displacement applied to deformed-region GT
// samples (exposed so tests can predict scans analytically).
double torso_displacement_amplitude(const Figure& figure, const Pose& pose);

Pose sample_pose(const Figure& figure, Rng& rng);

struct DatasetParams {
  int frames = 8;
  uint64_t seed = 1;
  std::size_t body_samples = 4096;  // the labeled surface sample set
  SkirtParams skirt;
  int mask_resolution = 768;
  double mask_splat_radius = 2.0;
};

struct MaskCameras {
  OrthoCamera front;
  OrthoCamera back;
};

MaskCameras mask_cameras(const ArticulatedBody& body, int resolution);

// Writes body.json/.bin, cutmap.bin, masks/, frames/, config.json.
void emit_dataset(const FigureSpec& spec, const DatasetParams& params,
                  const std::filesystem::path& out_dir);

// Rebuilds the cut map from rendered views and external masks; shared by the
// dataset emitter and the cutmap CLI command.
CutMap cut_map_from_masks(const ArticulatedBody& body, const SurfaceSamples& samples,
                          const io::ImageU8& mask_front, const io::ImageU8& mask_back,
                          const MaskCameras& cameras, double splat_radius,
                          const std::vector<std::string>& unclothed_parts);

}  // namespace pw::synth

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pointwear/body.hpp"
#include "pointwear/geometry.hpp"
#include "pointwear/types.hpp"

namespace pw {

/// Per-sample region labels over a fixed body surface sample set. The bary
/// records travel with the labels so downstream stages can rebuild sample
/// positions, normals, and skinning transforms from the body alone.
struct CutMap {
  std::vector<RegionLabel> labels;
  std::vector<BaryRecord> sample_refs;
  std::size_t unhit_samples = 0;  // visible in neither mask view; defaulted to deformed

  std::size_t size() const { return labels.size(); }
  std::size_t count(RegionLabel l) const;
  std::vector<uint32_t> indices_of(RegionLabel l) const;

  void validate() const;
};

// Labels every sample. Precedence: listed unclothed parts win over the loose
// claim, which wins over the deformed default. The loose region claims a
// sample when one of `loose_points` has it as exact nearest neighbor; points
// back-projected from the sample render land on their own sample, so the
// claim is the identity there. Samples never claimed and never on an
// unclothed part stay deformed (counted in `unhit_samples` when
// `visible_ids` is provided).
CutMap build_cut_map(const SurfaceSamples& body_samples, const std::vector<Vec3>& loose_points,
                     const std::vector<std::string>& unclothed_parts, const ArticulatedBody& body,
                     const std::vector<uint32_t>* visible_ids = nullptr);

void save_cut_map(const std::filesystem::path& path, const CutMap& map);
CutMap load_cut_map(const std::filesystem::path& path);

// Rebuilds sample positions/normals on a given vertex set (canonical or
// posed) from the stored bary records.
SurfaceSamples cut_map_samples(const CutMap& map, const ArticulatedBody& body,
                               const std::vector<Vec3>& vertices);

}  // namespace pw

#include "pointwear/cutmap.hpp"

#include <algorithm>

#include "pointwear/io.hpp"

namespace pw {

std::size_t CutMap::count(RegionLabel l) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

std::vector<uint32_t> CutMap::indices_of(RegionLabel l) const {
  std::vector<uint32_t> out;
  for (uint32_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == l) out.push_back(i);
  }
  return out;
}

void CutMap::validate() const {
  if (labels.size() != sample_refs.size()) {
    throw ValidationError("cut map: label/sample count mismatch");
  }
  for (RegionLabel l : labels) {
    if (static_cast<uint8_t>(l) > 2) throw ValidationError("cut map: label out of range");
  }
  for (const BaryRecord& b : sample_refs) b.validate();
}

CutMap build_cut_map(const SurfaceSamples& body_samples, const std::vector<Vec3>& loose_points,
                     const std::vector<std::string>& unclothed_parts, const ArticulatedBody& body,
                     const std::vector<uint32_t>* visible_ids) {
  const std::size_t n = body_samples.cloud.size();
  if (body_samples.barys.size() != n) {
    throw ArgumentError("build_cut_map: sample cloud and bary records disagree");
  }

  std::vector<bool> unclothed_part(body.part_count(), false);
  for (const std::string& name : unclothed_parts) {
    const int idx = body.part_index(name);
    if (idx < 0) throw ValidationError("build_cut_map: unknown part name: " + name);
    unclothed_part[idx] = true;
  }

  CutMap map;
  map.sample_refs = body_samples.barys;
  map.labels.assign(n, RegionLabel::kDeformed);

  // Each loose evidence point claims its nearest sample.
  if (!loose_points.empty()) {
    const auto hits = nearest_neighbor(loose_points, body_samples.cloud.points);
    for (const NearestHit& h : hits) map.labels[h.index] = RegionLabel::kGenerated;
  }

  // Unclothed parts override everything.
  for (std::size_t i = 0; i < n; ++i) {
    if (unclothed_part[body.part_of_sample(body_samples.barys[i])]) {
      map.labels[i] = RegionLabel::kUnclothed;
    }
  }

  if (visible_ids != nullptr) {
    std::vector<bool> seen(n, false);
    for (uint32_t id : *visible_ids) {
      if (id < n) seen[id] = true;
    }
    map.unhit_samples = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false));
  }
  return map;
}

void save_cut_map(const std::filesystem::path& path, const CutMap& map) {
  map.validate();
  io::ArchiveWriter w;
  w.meta["kind"] = "cutmap";
  w.meta["count"] = map.size();
  w.meta["unhit_samples"] = map.unhit_samples;
  std::vector<uint8_t> raw(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) raw[i] = static_cast<uint8_t>(map.labels[i]);
  w.add_u8("labels", raw.data(), {map.size()});
  io::add_bary_columns(w, map.sample_refs);
  w.save(path);
}

CutMap load_cut_map(const std::filesystem::path& path) {
  const io::Archive a = io::Archive::load(path);
  if (a.meta().value("kind", "") != "cutmap") throw ValidationError("not a cutmap file");
  CutMap map;
  const auto raw = a.u8("labels");
  map.labels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) map.labels[i] = static_cast<RegionLabel>(raw[i]);
  map.sample_refs = io::read_bary_columns(a);
  map.unhit_samples = a.meta().value("unhit_samples", 0);
  map.validate();
  return map;
}

SurfaceSamples cut_map_samples(const CutMap& map, const ArticulatedBody& body,
                               const std::vector<Vec3>& vertices) {
  TriMesh mesh;
  mesh.vertices = vertices;
  mesh.faces = body.faces;

  SurfaceSamples out;
  out.barys = map.sample_refs;
  out.cloud.points.resize(map.size());
  out.cloud.normals.resize(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    out.cloud.points[i] = barycentric_point(mesh, map.sample_refs[i]);
    out.cloud.normals[i] = mesh.face_normal(map.sample_refs[i].face_index);
  }
  return out;
}

}  // namespace pw

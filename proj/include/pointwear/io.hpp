#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointwear/types.hpp"

namespace pw::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Binary container: magic, little-endian u64 header length, JSON header, then
// the raw arrays back to back. The header lists name/dtype/shape/offset per
// array plus free-form metadata. Used for cut maps, bary sidecars, and
// checkpoints.

class ArchiveWriter {
 public:
  json meta;

  void add_f64(const std::string& name, const double* data, const std::vector<std::size_t>& shape);
  void add_u32(const std::string& name, const uint32_t* data, const std::vector<std::size_t>& shape);
  void add_u8(const std::string& name, const uint8_t* data, const std::vector<std::size_t>& shape);
  void save(const std::filesystem::path& path) const;

 private:
  struct Entry {
    std::string name;
    std::string dtype;
    std::vector<std::size_t> shape;
    std::vector<uint8_t> bytes;
  };
  std::vector<Entry> entries_;
  void add_raw(const std::string& name, const std::string& dtype, const void* data,
               std::size_t byte_count, const std::vector<std::size_t>& shape);
};

class Archive {
 public:
  static Archive load(const std::filesystem::path& path);

  const json& meta() const { return meta_; }
  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  std::vector<std::string> names() const;
  const std::vector<std::size_t>& shape(const std::string& name) const;
  std::vector<double> f64(const std::string& name) const;
  std::vector<uint32_t> u32(const std::string& name) const;
  std::vector<uint8_t> u8(const std::string& name) const;

 private:
  struct Entry {
    std::string dtype;
    std::vector<std::size_t> shape;
    std::vector<uint8_t> bytes;
  };
  json meta_;
  std::map<std::string, Entry> entries_;
  const Entry& entry(const std::string& name, const std::string& dtype) const;
};

// ---------------------------------------------------------------------------
// PLY point clouds: x,y,z plus optional nx,ny,nz. Binary little-endian by
// default; the reader also accepts ASCII.

void write_ply(const std::filesystem::path& path, const PointCloudN& cloud, bool binary = true);
PointCloudN read_ply(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// PNG images, 8-bit, 1 or 3 channels.

struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<uint8_t> data;  // row-major, interleaved

  static ImageU8 create(int w, int h, int c, uint8_t fill = 0);
  uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

void write_png(const std::filesystem::path& path, const ImageU8& image);
ImageU8 read_png(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Bary sidecar: columnar face ids (u32), weights (3xf64), vertex ids (3xu32).

void write_bary_sidecar(const std::filesystem::path& path, const std::vector<BaryRecord>& records);
std::vector<BaryRecord> read_bary_sidecar(const std::filesystem::path& path);

void add_bary_columns(ArchiveWriter& w, const std::vector<BaryRecord>& records);
std::vector<BaryRecord> read_bary_columns(const Archive& a);

// ---------------------------------------------------------------------------
// Append-only JSON-lines log.

class JsonlLogger {
 public:
  explicit JsonlLogger(const std::filesystem::path& path, bool truncate = true);
  void append(const json& record);

 private:
  std::ofstream out_;
};

json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const json& j);

}  // namespace pw::io

#include "pointwear/io.hpp"

#include <png.h>

#include <cstring>
#include <sstream>

namespace pw::io {

namespace {
constexpr char kMagic[8] = {'P', 'W', 'B', 'I', 'N', '0', '1', '\n'};

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f64") return 8;
  if (dtype == "u32" || dtype == "i32" || dtype == "f32") return 4;
  if (dtype == "u8") return 1;
  throw ValidationError("unknown dtype: " + dtype);
}

std::size_t shape_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

void ArchiveWriter::add_raw(const std::string& name, const std::string& dtype, const void* data,
                            std::size_t byte_count, const std::vector<std::size_t>& shape) {
  Entry e;
  e.name = name;
  e.dtype = dtype;
  e.shape = shape;
  e.bytes.resize(byte_count);
  if (byte_count > 0) std::memcpy(e.bytes.data(), data, byte_count);
  entries_.push_back(std::move(e));
}

void ArchiveWriter::add_f64(const std::string& name, const double* data,
                            const std::vector<std::size_t>& shape) {
  add_raw(name, "f64", data, shape_count(shape) * 8, shape);
}

void ArchiveWriter::add_u32(const std::string& name, const uint32_t* data,
                            const std::vector<std::size_t>& shape) {
  add_raw(name, "u32", data, shape_count(shape) * 4, shape);
}

void ArchiveWriter::add_u8(const std::string& name, const uint8_t* data,
                           const std::vector<std::size_t>& shape) {
  add_raw(name, "u8", data, shape_count(shape), shape);
}

void ArchiveWriter::save(const std::filesystem::path& path) const {
  json header = meta;
  json arrays = json::array();
  std::size_t offset = 0;
  for (const Entry& e : entries_) {
    arrays.push_back({{"name", e.name},
                      {"dtype", e.dtype},
                      {"shape", e.shape},
                      {"offset", offset},
                      {"bytes", e.bytes.size()}});
    offset += e.bytes.size();
  }
  header["arrays"] = arrays;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const Entry& e : entries_) {
    out.write(reinterpret_cast<const char*>(e.bytes.data()),
              static_cast<std::streamsize>(e.bytes.size()));
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw ValidationError("bad archive magic: " + path.string());
  }
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw ValidationError("truncated archive header: " + path.string());

  Archive a;
  a.meta_ = json::parse(hs);
  if (!a.meta_.contains("arrays")) throw ValidationError("archive header missing arrays");

  std::vector<uint8_t> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (const auto& arr : a.meta_["arrays"]) {
    Entry e;
    e.dtype = arr.at("dtype").get<std::string>();
    e.shape = arr.at("shape").get<std::vector<std::size_t>>();
    const std::size_t offset = arr.at("offset").get<std::size_t>();
    const std::size_t bytes = arr.at("bytes").get<std::size_t>();
    if (offset + bytes > payload.size()) throw ValidationError("archive array out of bounds");
    if (bytes != shape_count(e.shape) * dtype_size(e.dtype)) {
      throw ValidationError("archive array size mismatch");
    }
    e.bytes.assign(payload.begin() + offset, payload.begin() + offset + bytes);
    a.entries_.emplace(arr.at("name").get<std::string>(), std::move(e));
  }
  return a;
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

const Archive::Entry& Archive::entry(const std::string& name, const std::string& dtype) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("archive missing array: " + name);
  if (it->second.dtype != dtype) {
    throw ValidationError("archive array " + name + " has dtype " + it->second.dtype +
                          ", expected " + dtype);
  }
  return it->second;
}

const std::vector<std::size_t>& Archive::shape(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("archive missing array: " + name);
  return it->second.shape;
}

std::vector<double> Archive::f64(const std::string& name) const {
  const Entry& e = entry(name, "f64");
  std::vector<double> out(e.bytes.size() / 8);
  std::memcpy(out.data(), e.bytes.data(), e.bytes.size());
  return out;
}

std::vector<uint32_t> Archive::u32(const std::string& name) const {
  const Entry& e = entry(name, "u32");
  std::vector<uint32_t> out(e.bytes.size() / 4);
  std::memcpy(out.data(), e.bytes.data(), e.bytes.size());
  return out;
}

std::vector<uint8_t> Archive::u8(const std::string& name) const {
  const Entry& e = entry(name, "u8");
  return e.bytes;
}

// ---------------------------------------------------------------------------
// PLY

void write_ply(const std::filesystem::path& path, const PointCloudN& cloud, bool binary) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  const bool with_normals = cloud.has_normals();
  out << "ply\n";
  out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  out << "element vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (with_normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";

  if (binary) {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      double row[6];
      row[0] = cloud.points[i].x();
      row[1] = cloud.points[i].y();
      row[2] = cloud.points[i].z();
      if (with_normals) {
        row[3] = cloud.normals[i].x();
        row[4] = cloud.normals[i].y();
        row[5] = cloud.normals[i].z();
      }
      out.write(reinterpret_cast<const char*>(row), with_normals ? 48 : 24);
    }
  } else {
    out.precision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      out << cloud.points[i].x() << " " << cloud.points[i].y() << " " << cloud.points[i].z();
      if (with_normals) {
        out << " " << cloud.normals[i].x() << " " << cloud.normals[i].y() << " "
            << cloud.normals[i].z();
      }
      out << "\n";
    }
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

PointCloudN read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path.string());

  std::string line;
  std::getline(in, line);
  if (line != "ply" && line != "ply\r") throw ValidationError("not a PLY file: " + path.string());

  bool binary = false;
  std::size_t count = 0;
  std::vector<std::string> props;
  std::vector<std::string> prop_types;
  bool in_vertex_element = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt == "ascii") {
        binary = false;
      } else {
        throw ValidationError("unsupported PLY format: " + fmt);
      }
    } else if (tok == "element") {
      std::string what;
      ss >> what >> count;
      in_vertex_element = (what == "vertex");
      if (!in_vertex_element && count > 0) {
        throw ValidationError("unsupported PLY element: " + what);
      }
    } else if (tok == "property" && in_vertex_element) {
      std::string type, name;
      ss >> type >> name;
      prop_types.push_back(type);
      props.push_back(name);
    } else if (tok == "end_header") {
      break;
    }
  }

  auto index_of = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  const int inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
  if (ix < 0 || iy < 0 || iz < 0) throw ValidationError("PLY missing x/y/z properties");
  const bool with_normals = (inx >= 0 && iny >= 0 && inz >= 0);

  PointCloudN cloud;
  cloud.points.resize(count);
  if (with_normals) cloud.normals.resize(count);

  auto read_scalar = [&](std::istream& s, const std::string& type) -> double {
    if (type == "double" || type == "float64") {
      double v;
      s.read(reinterpret_cast<char*>(&v), 8);
      return v;
    }
    if (type == "float" || type == "float32") {
      float v;
      s.read(reinterpret_cast<char*>(&v), 4);
      return v;
    }
    throw ValidationError("unsupported PLY property type: " + type);
  };

  if (binary) {
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<double> row(props.size());
      for (std::size_t p = 0; p < props.size(); ++p) row[p] = read_scalar(in, prop_types[p]);
      cloud.points[i] = Vec3(row[ix], row[iy], row[iz]);
      if (with_normals) cloud.normals[i] = Vec3(row[inx], row[iny], row[inz]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<double> row(props.size());
      for (std::size_t p = 0; p < props.size(); ++p) in >> row[p];
      cloud.points[i] = Vec3(row[ix], row[iy], row[iz]);
      if (with_normals) cloud.normals[i] = Vec3(row[inx], row[iny], row[inz]);
    }
  }
  if (!in) throw ValidationError("truncated PLY data: " + path.string());
  return cloud;
}

// ---------------------------------------------------------------------------
// PNG

ImageU8 ImageU8::create(int w, int h, int c, uint8_t fill) {
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.channels = c;
  img.data.assign(static_cast<std::size_t>(w) * h * c, fill);
  return img;
}

void write_png(const std::filesystem::path& path, const ImageU8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ArgumentError("write_png: channels must be 1 or 3");
  }
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw ValidationError("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw ValidationError("libpng write failure: " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = const_cast<png_bytep>(image.data.data() +
                                    static_cast<std::size_t>(y) * image.width * image.channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

ImageU8 read_png(const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) throw ValidationError("cannot open: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw ValidationError("libpng read failure: " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  ImageU8 img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  img.channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  img.data.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);

  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) {
    rows[y] = img.data.data() + static_cast<std::size_t>(y) * img.width * img.channels;
  }
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

// ---------------------------------------------------------------------------
// Bary sidecar

void add_bary_columns(ArchiveWriter& w, const std::vector<BaryRecord>& records) {
  const std::size_t n = records.size();
  std::vector<uint32_t> faces(n);
  std::vector<double> weights(n * 3);
  std::vector<uint32_t> vids(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    faces[i] = records[i].face_index;
    for (int j = 0; j < 3; ++j) {
      weights[i * 3 + j] = records[i].weights[j];
      vids[i * 3 + j] = records[i].vertex_ids[j];
    }
  }
  w.add_u32("bary_face", faces.data(), {n});
  w.add_f64("bary_weights", weights.data(), {n, 3});
  w.add_u32("bary_vertex_ids", vids.data(), {n, 3});
}

std::vector<BaryRecord> read_bary_columns(const Archive& a) {
  const auto faces = a.u32("bary_face");
  const auto weights = a.f64("bary_weights");
  const auto vids = a.u32("bary_vertex_ids");
  const std::size_t n = faces.size();
  if (weights.size() != n * 3 || vids.size() != n * 3) {
    throw ValidationError("bary columns have inconsistent lengths");
  }
  std::vector<BaryRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    records[i].face_index = faces[i];
    for (int j = 0; j < 3; ++j) {
      records[i].weights[j] = weights[i * 3 + j];
      records[i].vertex_ids[j] = vids[i * 3 + j];
    }
  }
  return records;
}

void write_bary_sidecar(const std::filesystem::path& path, const std::vector<BaryRecord>& records) {
  ArchiveWriter w;
  w.meta["kind"] = "bary_sidecar";
  w.meta["count"] = records.size();
  add_bary_columns(w, records);
  w.save(path);
}

std::vector<BaryRecord> read_bary_sidecar(const std::filesystem::path& path) {
  return read_bary_columns(Archive::load(path));
}

// ---------------------------------------------------------------------------
// JSON helpers

JsonlLogger::JsonlLogger(const std::filesystem::path& path, bool truncate)
    : out_(path, truncate ? (std::ios::out | std::ios::trunc) : (std::ios::out | std::ios::app)) {
  if (!out_) throw ValidationError("cannot open log: " + path.string());
}

void JsonlLogger::append(const json& record) {
  out_ << record.dump() << "\n";
  out_.flush();
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path.string());
  json j;
  in >> j;
  return j;
}

void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace pw::io

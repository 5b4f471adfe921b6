#pragma once

// Single-file NRRD reader/writer, raw little-endian payload. Mandatory header
// fields are dimension, sizes, spacings, type and encoding; origin and axis
// orientation travel as key/value pairs. Writes are byte-deterministic.

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "scarforge/errors.hpp"
#include "scarforge/grid.hpp"

namespace scarforge {
namespace nrrd_detail {

template <typename T>
const char* type_string();
template <>
inline const char* type_string<std::uint8_t>() { return "uint8"; }
template <>
inline const char* type_string<std::int16_t>() { return "int16"; }
template <>
inline const char* type_string<std::uint16_t>() { return "uint16"; }
template <>
inline const char* type_string<std::int32_t>() { return "int32"; }
template <>
inline const char* type_string<float>() { return "float"; }
template <>
inline const char* type_string<double>() { return "double"; }

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  return buf;
}

inline bool machine_big_endian() { return std::endian::native == std::endian::big; }

template <typename T>
void swap_bytes(std::vector<T>& data) {
  if constexpr (sizeof(T) > 1) {
    for (T& v : data) {
      auto* p = reinterpret_cast<unsigned char*>(&v);
      std::reverse(p, p + sizeof(T));
    }
  }
}

struct Header {
  std::string type;
  int dimension = 0;
  std::vector<long long> sizes;
  std::vector<double> spacings;
  std::string encoding;
  std::string endian;
  std::map<std::string, std::string> keyvals;
};

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

inline Header parse_header(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::MalformedHeader, path + ": empty file");
  line = trim(line);
  if (line.rfind("NRRD", 0) != 0) fail(ErrorCode::MalformedHeader, path + ": missing NRRD magic");
  Header h;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) break;  // header/payload separator
    if (line[0] == '#') continue;
    const std::size_t kv = line.find(":=");
    if (kv != std::string::npos) {
      h.keyvals[trim(line.substr(0, kv))] = trim(line.substr(kv + 2));
      continue;
    }
    const std::size_t colon = line.find(": ");
    if (colon == std::string::npos) fail(ErrorCode::MalformedHeader, path + ": bad field line '" + line + "'");
    const std::string field = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 2));
    if (field == "type") {
      h.type = value;
    } else if (field == "dimension") {
      h.dimension = std::atoi(value.c_str());
    } else if (field == "sizes") {
      std::istringstream ss(value);
      long long v;
      while (ss >> v) h.sizes.push_back(v);
    } else if (field == "spacings") {
      std::istringstream ss(value);
      std::string tok;
      while (ss >> tok) h.spacings.push_back(std::strtod(tok.c_str(), nullptr));
    } else if (field == "encoding") {
      h.encoding = value;
    } else if (field == "endian") {
      h.endian = value;
    }
    // Unknown fields are ignored.
  }
  if (h.type.empty() || h.dimension == 0 || h.sizes.empty() || h.encoding.empty()) {
    fail(ErrorCode::MalformedHeader, path + ": missing mandatory field");
  }
  if (h.encoding != "raw") fail(ErrorCode::MalformedHeader, path + ": unsupported encoding " + h.encoding);
  return h;
}

inline std::vector<double> parse_vec(const std::string& s) {
  std::istringstream ss(s);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) out.push_back(std::strtod(tok.c_str(), nullptr));
  return out;
}

template <typename T>
std::vector<T> read_payload(std::istream& in, std::size_t count, const std::string& path,
                            const std::string& endian) {
  if (sizeof(T) > 1 && endian != "little") {
    fail(ErrorCode::MalformedHeader, path + ": endian must be little for multi-byte types");
  }
  std::vector<T> data(count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(T)) {
    fail(ErrorCode::SizeMismatch, path + ": payload shorter than sizes imply");
  }
  char extra;
  if (in.read(&extra, 1)) fail(ErrorCode::SizeMismatch, path + ": payload longer than sizes imply");
  if (machine_big_endian()) swap_bytes(data);
  return data;
}

template <typename Dst, typename Src>
std::vector<Dst> convert_payload(const std::vector<Src>& src, const std::string& path) {
  std::vector<Dst> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Dst d = static_cast<Dst>(src[i]);
    if (static_cast<Src>(d) != src[i]) {
      fail(ErrorCode::InvalidArgument, path + ": payload value not representable in target type");
    }
    out[i] = d;
  }
  return out;
}

template <typename T>
std::vector<T> read_any_as(std::istream& in, const Header& h, std::size_t count,
                           const std::string& path) {
  const std::string& t = h.type;
  if (t == type_string<T>()) return read_payload<T>(in, count, path, h.endian);
  if (t == "uint8" || t == "uchar" || t == "unsigned char")
    return convert_payload<T>(read_payload<std::uint8_t>(in, count, path, h.endian), path);
  if (t == "int16" || t == "short")
    return convert_payload<T>(read_payload<std::int16_t>(in, count, path, h.endian), path);
  if (t == "uint16" || t == "unsigned short")
    return convert_payload<T>(read_payload<std::uint16_t>(in, count, path, h.endian), path);
  if (t == "int32" || t == "int")
    return convert_payload<T>(read_payload<std::int32_t>(in, count, path, h.endian), path);
  if (t == "float")
    return convert_payload<T>(read_payload<float>(in, count, path, h.endian), path);
  if (t == "double")
    return convert_payload<T>(read_payload<double>(in, count, path, h.endian), path);
  fail(ErrorCode::MalformedHeader, path + ": unsupported type " + t);
}

inline void apply_geometry_keyvals(const Header& h, Vec3& origin, AxisOrientation& orient,
                                   const std::string& path) {
  if (auto it = h.keyvals.find("origin"); it != h.keyvals.end()) {
    auto v = parse_vec(it->second);
    if (v.size() != 3) fail(ErrorCode::MalformedHeader, path + ": origin needs 3 values");
    origin = {v[0], v[1], v[2]};
  }
  if (auto it = h.keyvals.find("axis order"); it != h.keyvals.end()) {
    auto v = parse_vec(it->second);
    if (v.size() != 3) fail(ErrorCode::MalformedHeader, path + ": axis order needs 3 values");
    orient.axis = {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])};
  }
  if (auto it = h.keyvals.find("axis flips"); it != h.keyvals.end()) {
    auto v = parse_vec(it->second);
    if (v.size() != 3) fail(ErrorCode::MalformedHeader, path + ": axis flips needs 3 values");
    orient.flip = {v[0] != 0.0, v[1] != 0.0, v[2] != 0.0};
  }
  if (!orient.is_permutation()) fail(ErrorCode::MalformedHeader, path + ": axis order is not a permutation");
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::FileMissing, path + ": cannot open");
  return in;
}

}  // namespace nrrd_detail

template <typename T>
void save_nrrd(const Grid3<T>& g, const std::string& path) {
  using namespace nrrd_detail;
  if (g.voxel_count() != g.data.size()) fail(ErrorCode::SizeMismatch, path + ": data length != dims product");
  std::ostringstream head;
  head << "NRRD0004\n";
  head << "type: " << type_string<T>() << "\n";
  head << "dimension: 3\n";
  head << "sizes: " << g.dims[0] << " " << g.dims[1] << " " << g.dims[2] << "\n";
  head << "spacings: " << format_double(g.spacing[0]) << " " << format_double(g.spacing[1]) << " "
       << format_double(g.spacing[2]) << "\n";
  head << "encoding: raw\n";
  head << "endian: little\n";
  head << "origin:=" << format_double(g.origin[0]) << " " << format_double(g.origin[1]) << " "
       << format_double(g.origin[2]) << "\n";
  head << "axis order:=" << g.orientation.axis[0] << " " << g.orientation.axis[1] << " "
       << g.orientation.axis[2] << "\n";
  head << "axis flips:=" << int(g.orientation.flip[0]) << " " << int(g.orientation.flip[1]) << " "
       << int(g.orientation.flip[2]) << "\n";
  head << "\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, path + ": cannot open for writing");
  const std::string hs = head.str();
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  if (machine_big_endian()) {
    auto copy = g.data;
    swap_bytes(copy);
    out.write(reinterpret_cast<const char*>(copy.data()),
              static_cast<std::streamsize>(copy.size() * sizeof(T)));
  } else {
    out.write(reinterpret_cast<const char*>(g.data.data()),
              static_cast<std::streamsize>(g.data.size() * sizeof(T)));
  }
  if (!out) fail(ErrorCode::IoFailure, path + ": write failed");
}

template <typename T>
Grid3<T> load_nrrd(const std::string& path) {
  using namespace nrrd_detail;
  auto in = open_input(path);
  const Header h = parse_header(in, path);
  if (h.dimension != 3) fail(ErrorCode::BadDimension, path + ": dimension must be 3");
  if (h.sizes.size() != 3 || h.spacings.size() != 3) {
    fail(ErrorCode::MalformedHeader, path + ": sizes/spacings need 3 entries");
  }
  Grid3<T> g;
  for (int a = 0; a < 3; ++a) {
    if (h.sizes[a] < 1) fail(ErrorCode::MalformedHeader, path + ": sizes must be >= 1");
    if (!(h.spacings[a] > 0.0)) fail(ErrorCode::MalformedHeader, path + ": spacings must be > 0");
    g.dims[a] = static_cast<int>(h.sizes[a]);
    g.spacing[a] = h.spacings[a];
  }
  apply_geometry_keyvals(h, g.origin, g.orientation, path);
  g.data = read_any_as<T>(in, h, g.voxel_count(), path);
  return g;
}

inline Mask3 load_mask(const std::string& path) {
  Mask3 m = load_nrrd<std::uint8_t>(path);
  for (auto v : m.data) {
    if (v > 1) fail(ErrorCode::InvalidArgument, path + ": mask payload contains values other than 0/1");
  }
  return m;
}

using AnyGrid = std::variant<Volume3, Mask3, LabelVolume>;

// Loads by payload type: float/double -> Volume3, uint8 with only {0,1} ->
// Mask3, other integral payloads -> LabelVolume.
inline AnyGrid load_nrrd_any(const std::string& path) {
  using namespace nrrd_detail;
  {
    auto in = open_input(path);
    const Header h = parse_header(in, path);
    if (h.type == "float" || h.type == "double") return load_nrrd<float>(path);
    if (h.type == "uint8" || h.type == "uchar" || h.type == "unsigned char") {
      auto m = load_nrrd<std::uint8_t>(path);
      bool binary = true;
      for (auto v : m.data) binary &= (v <= 1);
      if (binary) return m;
      LabelVolume lv;
      lv.dims = m.dims;
      lv.spacing = m.spacing;
      lv.origin = m.origin;
      lv.orientation = m.orientation;
      lv.data.assign(m.data.begin(), m.data.end());
      return lv;
    }
  }
  return load_nrrd<std::int32_t>(path);
}

// Displacement fields are stored as dimension-4 NRRD with a leading
// 3-component vector axis (sizes: 3 nx ny nz).
inline void save_field(const DisplacementField& f, const std::string& path) {
  using namespace nrrd_detail;
  std::ostringstream head;
  head << "NRRD0004\n";
  head << "type: float\n";
  head << "dimension: 4\n";
  head << "sizes: 3 " << f.dims[0] << " " << f.dims[1] << " " << f.dims[2] << "\n";
  head << "spacings: nan " << format_double(f.spacing[0]) << " " << format_double(f.spacing[1])
       << " " << format_double(f.spacing[2]) << "\n";
  head << "kinds: vector space space space\n";
  head << "encoding: raw\n";
  head << "endian: little\n";
  head << "origin:=" << format_double(f.origin[0]) << " " << format_double(f.origin[1]) << " "
       << format_double(f.origin[2]) << "\n";
  head << "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, path + ": cannot open for writing");
  const std::string hs = head.str();
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  std::vector<float> flat(f.voxel_count() * 3);
  for (std::size_t i = 0; i < f.voxel_count(); ++i) {
    flat[3 * i + 0] = f.data[i][0];
    flat[3 * i + 1] = f.data[i][1];
    flat[3 * i + 2] = f.data[i][2];
  }
  if (machine_big_endian()) swap_bytes(flat);
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(float)));
  if (!out) fail(ErrorCode::IoFailure, path + ": write failed");
}

inline DisplacementField load_field(const std::string& path) {
  using namespace nrrd_detail;
  auto in = open_input(path);
  const Header h = parse_header(in, path);
  if (h.dimension != 4) fail(ErrorCode::BadDimension, path + ": displacement field must be dimension 4");
  if (h.sizes.size() != 4 || h.sizes[0] != 3) {
    fail(ErrorCode::MalformedHeader, path + ": leading axis must have size 3");
  }
  if (h.spacings.size() != 4) fail(ErrorCode::MalformedHeader, path + ": spacings need 4 entries");
  if (h.type != "float") fail(ErrorCode::MalformedHeader, path + ": field payload must be float");
  DisplacementField f;
  for (int a = 0; a < 3; ++a) {
    if (h.sizes[a + 1] < 1) fail(ErrorCode::MalformedHeader, path + ": sizes must be >= 1");
    if (!(h.spacings[a + 1] > 0.0)) fail(ErrorCode::MalformedHeader, path + ": spacings must be > 0");
    f.dims[a] = static_cast<int>(h.sizes[a + 1]);
    f.spacing[a] = h.spacings[a + 1];
  }
  if (auto it = h.keyvals.find("origin"); it != h.keyvals.end()) {
    auto v = parse_vec(it->second);
    if (v.size() == 3) f.origin = {v[0], v[1], v[2]};
  }
  const std::size_t n = f.voxel_count();
  auto flat = read_payload<float>(in, n * 3, path, h.endian);
  f.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.data[i] = {flat[3 * i + 0], flat[3 * i + 1], flat[3 * i + 2]};
  }
  return f;
}

}  // namespace scarforge

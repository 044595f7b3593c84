#include "format_detail.hpp"

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sfrecon/errors.hpp"

namespace sfr::detail {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             const std::string& why) {
  throw Error(ErrorCode::ParseError,
              path + ":" + std::to_string(line) + ": " + why);
}

std::ifstream open_input(const std::string& path, bool binary) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::FileNotFound, "no such file: " + path);
  }
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

bool parse_double(const std::string& token, double& out) {
  errno = 0;
  char* end = nullptr;
  out = std::strtod(token.c_str(), &end);
  return end == token.c_str() + token.size() && errno == 0;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  // %.17g always round-trips; prefer the shorter form when it does too.
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<Eigen::Vector3d> read_xyz(const std::string& path) {
  auto in = open_input(path, false);
  std::vector<Eigen::Vector3d> points;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    std::vector<double> vals;
    bool bad = false;
    while (ls >> tok) {
      if (tok[0] == '#') break;
      double v;
      if (!parse_double(tok, v)) {
        bad = true;
        break;
      }
      vals.push_back(v);
    }
    if (bad || (!vals.empty() && vals.size() < 3)) {
      parse_fail(path, lineno, "expected at least 3 numbers per point line");
    }
    if (vals.empty()) continue;  // blank or comment line
    points.emplace_back(vals[0], vals[1], vals[2]);  // extras = normals etc.
  }
  return points;
}

void write_xyz(const std::vector<Eigen::Vector3d>& points,
               const std::string& path) {
  auto out = open_output(path);
  for (const auto& p : points) {
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
        << format_double(p.z()) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// PLY

namespace {

enum class PlyType : std::uint8_t {
  Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64
};

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

bool ply_type_from_name(const std::string& name, PlyType& out) {
  if (name == "char" || name == "int8") out = PlyType::Int8;
  else if (name == "uchar" || name == "uint8") out = PlyType::UInt8;
  else if (name == "short" || name == "int16") out = PlyType::Int16;
  else if (name == "ushort" || name == "uint16") out = PlyType::UInt16;
  else if (name == "int" || name == "int32") out = PlyType::Int32;
  else if (name == "uint" || name == "uint32") out = PlyType::UInt32;
  else if (name == "float" || name == "float32") out = PlyType::Float32;
  else if (name == "double" || name == "float64") out = PlyType::Float64;
  else return false;
  return true;
}

struct PlyProperty {
  std::string name;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
  PlyType value_type = PlyType::Float32;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

double read_binary_scalar(std::istream& in, PlyType t) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), ply_type_size(t));
  switch (t) {
    case PlyType::Int8: return static_cast<double>(static_cast<std::int8_t>(buf[0]));
    case PlyType::UInt8: return static_cast<double>(buf[0]);
    case PlyType::Int16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
    case PlyType::UInt16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
    case PlyType::Int32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
    case PlyType::UInt32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
    case PlyType::Float32: { float v; std::memcpy(&v, buf, 4); return v; }
    case PlyType::Float64: { double v; std::memcpy(&v, buf, 8); return v; }
  }
  return 0.0;
}

void append_face(std::vector<std::array<int, 3>>& tris,
                 const std::vector<long long>& poly, std::size_t n_vertices,
                 const std::string& path, std::size_t lineno) {
  if (poly.size() < 3) parse_fail(path, lineno, "face with fewer than 3 vertices");
  for (long long idx : poly) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= n_vertices) {
      parse_fail(path, lineno, "face index out of range");
    }
  }
  for (std::size_t k = 2; k < poly.size(); ++k) {
    tris.push_back({static_cast<int>(poly[0]), static_cast<int>(poly[k - 1]),
                    static_cast<int>(poly[k])});
  }
}

}  // namespace

GeometryData read_ply(const std::string& path, bool want_faces) {
  auto in = open_input(path, true);
  std::string line;
  std::size_t lineno = 0;

  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) parse_fail(path, lineno, "unexpected end of header");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply") parse_fail(path, lineno, "missing ply magic");

  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  while (true) {
    std::istringstream ls(next_line());
    std::string word;
    ls >> word;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else parse_fail(path, lineno, "unsupported ply format: " + fmt);
      have_format = true;
    } else if (word == "element") {
      PlyElement el;
      if (!(ls >> el.name >> el.count)) parse_fail(path, lineno, "bad element line");
      elements.push_back(el);
    } else if (word == "property") {
      if (elements.empty()) parse_fail(path, lineno, "property before element");
      PlyProperty prop;
      std::string t1;
      ls >> t1;
      if (t1 == "list") {
        std::string ct, vt;
        if (!(ls >> ct >> vt >> prop.name)) parse_fail(path, lineno, "bad list property");
        prop.is_list = true;
        if (!ply_type_from_name(ct, prop.count_type) ||
            !ply_type_from_name(vt, prop.value_type)) {
          parse_fail(path, lineno, "unknown property type");
        }
      } else {
        if (!ply_type_from_name(t1, prop.value_type) || !(ls >> prop.name)) {
          parse_fail(path, lineno, "bad property line");
        }
      }
      elements.back().properties.push_back(prop);
    } else if (word == "end_header") {
      break;
    } else {
      parse_fail(path, lineno, "unknown header keyword: " + word);
    }
  }
  if (!have_format) parse_fail(path, lineno, "header has no format line");

  GeometryData data;
  for (const PlyElement& el : elements) {
    const bool is_vertex = el.name == "vertex";
    const bool is_face = el.name == "face";
    int xi = -1, yi = -1, zi = -1, list_i = -1;
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      const auto& prop = el.properties[p];
      if (is_vertex && !prop.is_list) {
        if (prop.name == "x") xi = static_cast<int>(p);
        if (prop.name == "y") yi = static_cast<int>(p);
        if (prop.name == "z") zi = static_cast<int>(p);
      }
      if (is_face && prop.is_list &&
          (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
        list_i = static_cast<int>(p);
      }
    }
    if (is_vertex && (xi < 0 || yi < 0 || zi < 0)) {
      parse_fail(path, lineno, "vertex element lacks x/y/z properties");
    }

    if (is_vertex) data.vertices.reserve(el.count);
    std::vector<double> scalars(el.properties.size(), 0.0);
    std::vector<long long> poly;

    for (std::size_t r = 0; r < el.count; ++r) {
      poly.clear();
      if (binary) {
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          if (prop.is_list) {
            const auto n = static_cast<std::size_t>(
                read_binary_scalar(in, prop.count_type));
            for (std::size_t k = 0; k < n; ++k) {
              const double v = read_binary_scalar(in, prop.value_type);
              if (static_cast<int>(p) == list_i) {
                poly.push_back(static_cast<long long>(v));
              }
            }
          } else {
            scalars[p] = read_binary_scalar(in, prop.value_type);
          }
        }
        if (!in) parse_fail(path, lineno, "truncated binary payload");
      } else {
        std::istringstream ls(next_line());
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          if (prop.is_list) {
            std::size_t n = 0;
            if (!(ls >> n)) parse_fail(path, lineno, "bad list count");
            for (std::size_t k = 0; k < n; ++k) {
              long long v;
              if (!(ls >> v)) parse_fail(path, lineno, "truncated list");
              if (static_cast<int>(p) == list_i) poly.push_back(v);
            }
          } else {
            if (!(ls >> scalars[p])) parse_fail(path, lineno, "truncated row");
          }
        }
      }
      if (is_vertex) {
        data.vertices.emplace_back(scalars[xi], scalars[yi], scalars[zi]);
      } else if (is_face && want_faces && list_i >= 0) {
        append_face(data.triangles, poly, data.vertices.size(), path, lineno);
      }
    }
  }
  return data;
}

void write_ply(const GeometryData& data, const std::string& path) {
  auto out = open_output(path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << data.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "element face " << data.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
  for (const auto& v : data.vertices) {
    out << format_double(v.x()) << ' ' << format_double(v.y()) << ' '
        << format_double(v.z()) << '\n';
  }
  for (const auto& t : data.triangles) {
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// OBJ

GeometryData read_obj(const std::string& path, bool want_faces) {
  auto in = open_input(path, false);
  GeometryData data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) parse_fail(path, lineno, "bad vertex line");
      data.vertices.emplace_back(x, y, z);
    } else if (tag == "f" && want_faces) {
      std::vector<long long> poly;
      std::string ref;
      while (ls >> ref) {
        // "v", "v/vt", "v//vn", "v/vt/vn" — the vertex index leads.
        const std::size_t slash = ref.find('/');
        long long idx = 0;
        const std::string head = ref.substr(0, slash);
        auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
        if (ec != std::errc() || ptr != head.data() + head.size()) {
          parse_fail(path, lineno, "bad face reference: " + ref);
        }
        if (idx < 0) idx = static_cast<long long>(data.vertices.size()) + idx + 1;
        poly.push_back(idx - 1);  // OBJ indices are 1-based
      }
      append_face(data.triangles, poly, data.vertices.size(), path, lineno);
    }
    // vn / vt / usemtl / comments are ignored
  }
  return data;
}

void write_obj(const GeometryData& data, const std::string& path) {
  auto out = open_output(path);
  for (const auto& v : data.vertices) {
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' '
        << format_double(v.z()) << '\n';
  }
  for (const auto& t : data.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

}  // namespace sfr::detail

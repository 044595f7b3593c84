#include "sfrecon/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <unordered_map>

#include "format_detail.hpp"
#include "sfrecon/errors.hpp"

namespace sfr {

MeshFormat mesh_format_from_path(const std::string& path) {
  const auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (ext == "ply") return MeshFormat::Ply;
  return MeshFormat::Obj;
}

TriMesh load_mesh(const std::string& path, MeshFormat format) {
  detail::GeometryData data = format == MeshFormat::Ply
                                  ? detail::read_ply(path, true)
                                  : detail::read_obj(path, true);
  TriMesh mesh;
  mesh.vertices = std::move(data.vertices);
  mesh.triangles.reserve(data.triangles.size());
  for (const auto& t : data.triangles) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    mesh.triangles.push_back(t);
  }
  return mesh;
}

void export_mesh(const TriMesh& mesh, const std::string& path,
                 MeshFormat format) {
  const auto n = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    if (t[0] < 0 || t[0] >= n || t[1] < 0 || t[1] >= n || t[2] < 0 ||
        t[2] >= n || t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw Error(ErrorCode::DegenerateMesh,
                  "mesh has invalid or degenerate triangles");
    }
  }
  detail::GeometryData data;
  data.vertices = mesh.vertices;
  data.triangles = mesh.triangles;
  if (format == MeshFormat::Ply) {
    detail::write_ply(data, path);
  } else {
    detail::write_obj(data, path);
  }
}

namespace {

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

long long euler_characteristic(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> edges;
  edges.reserve(mesh.triangles.size() * 2);
  for (const auto& t : mesh.triangles) {
    edges[edge_key(t[0], t[1])]++;
    edges[edge_key(t[1], t[2])]++;
    edges[edge_key(t[2], t[0])]++;
  }
  const long long v = static_cast<long long>(mesh.vertices.size());
  const long long e = static_cast<long long>(edges.size());
  const long long f = static_cast<long long>(mesh.triangles.size());
  return v - e + f;
}

bool is_watertight(const TriMesh& mesh) {
  if (mesh.empty()) return false;
  std::unordered_map<std::uint64_t, int> edges;
  edges.reserve(mesh.triangles.size() * 2);
  for (const auto& t : mesh.triangles) {
    edges[edge_key(t[0], t[1])]++;
    edges[edge_key(t[1], t[2])]++;
    edges[edge_key(t[2], t[0])]++;
  }
  for (const auto& [key, count] : edges) {
    if (count != 2) return false;
  }
  return true;
}

}  // namespace sfr

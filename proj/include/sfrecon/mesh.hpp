#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

namespace sfr {

struct TriMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

enum class MeshFormat { Obj, Ply };

MeshFormat mesh_format_from_path(const std::string& path);

/// Reads an OBJ or PLY mesh; polygons are fan-triangulated and degenerate
/// triangles (repeated indices) are dropped.
TriMesh load_mesh(const std::string& path, MeshFormat format);

/// Writes a mesh; loading the written file reproduces the vertex and
/// triangle arrays exactly, in order.
void export_mesh(const TriMesh& mesh, const std::string& path,
                 MeshFormat format);

/// V - E + F with E counted over unique undirected vertex pairs.
long long euler_characteristic(const TriMesh& mesh);

/// True when every edge is shared by exactly two triangles (closed
/// 2-manifold, no boundary).
bool is_watertight(const TriMesh& mesh);

}  // namespace sfr

#pragma once

// Shared low-level readers/writers for xyz, PLY and OBJ files. Internal to
// the library; the public surfaces are load_points/save_points (clouds) and
// load_mesh/export_mesh (meshes).

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

namespace sfr::detail {

struct GeometryData {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;
};

std::vector<Eigen::Vector3d> read_xyz(const std::string& path);
void write_xyz(const std::vector<Eigen::Vector3d>& points,
               const std::string& path);

/// PLY reader, ascii and binary_little_endian. Extracts vertex x/y/z and,
/// when want_faces is set, fan-triangulated face indices. All other
/// elements and properties are skipped.
GeometryData read_ply(const std::string& path, bool want_faces);
void write_ply(const GeometryData& data, const std::string& path);

/// OBJ reader: 'v' lines and, when want_faces is set, 'f' lines
/// (polygon fan triangulation, "v/vt/vn" references reduced to v).
GeometryData read_obj(const std::string& path, bool want_faces);
void write_obj(const GeometryData& data, const std::string& path);

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

}  // namespace sfr::detail

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "sfrecon/kdtree.hpp"

namespace sfr {

/// The observed point set. Order is meaningful: deterministic algorithms
/// (farthest point sampling, tie rules) are defined against it.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Similarity mapping applied by normalize_to_unit_sphere:
///   normalized = (p - offset) * scale.
struct GlobalTransform {
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  double scale = 1.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return (p - offset) * scale;
  }
  Eigen::Vector3d invert(const Eigen::Vector3d& q) const {
    return q / scale + offset;
  }
};

enum class PointFormat { XyzText, Ply, ObjVertices };

/// Picks the format from a file extension (.xyz/.txt, .ply, .obj).
PointFormat format_from_path(const std::string& path);

/// Reads vertex records in file order; normals and colors are discarded.
/// PLY is accepted in ascii and binary_little_endian flavors.
PointCloud load_points(const std::string& path, PointFormat format);

/// Writes a cloud as xyz text or ascii PLY, round-trip exact.
void save_points(const PointCloud& cloud, const std::string& path,
                 PointFormat format);

/// Centers the cloud on its centroid and scales the farthest point onto the
/// unit sphere. Throws DegenerateCloud when the bounding radius is < 1e-9.
std::pair<PointCloud, GlobalTransform> normalize_to_unit_sphere(
    const PointCloud& cloud);

/// Greedy farthest point sampling. Seeded at index 0; every pick maximizes
/// the min distance to the picked set, ties to the lowest index.
std::vector<int> farthest_point_sampling(const PointCloud& cloud, int count);

/// Unsigned distance to the cloud: min_p ||q - p||. Exactly equal to a
/// brute-force scan over the indexed points.
double nearest_distance(const KdTree& index, const Eigen::Vector3d& q);

struct ShapeSpec {
  enum class Kind { Sphere, Torus, Box };
  Kind kind = Kind::Sphere;
  // sphere: radius = params[0]
  // torus:  major radius = params[0], minor radius = params[1]
  // box:    half-extents = params[0..2]
  double params[3] = {1.0, 0.0, 0.0};

  double bounding_radius() const;

  /// Parses "sphere:0.5", "torus:1,0.25", "box:0.4,0.3,0.2".
  static ShapeSpec parse(const std::string& text);
  std::string describe() const;
};

/// Area-uniform samples on an analytic surface, perturbed per coordinate by
/// Gaussian noise. noise_sigma is expressed relative to the shape's bounding
/// radius (unit-sphere scale), so noise levels carry over unchanged after
/// cloud normalization.
PointCloud sample_synthetic(const ShapeSpec& shape, int n, double noise_sigma,
                            std::uint64_t seed);

}  // namespace sfr

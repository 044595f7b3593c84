#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "sfrecon/mesh.hpp"

namespace sfr {

struct SurfaceSamples {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;  // unit face normals
};

struct MetricReport {
  double cd = 0.0;
  double nc = 0.0;
  double fscore = 0.0;
  double threshold = 0.0;
  int sample_count = 0;
};

/// Area-uniform surface samples with face normals, deterministic per seed.
/// Throws DegenerateMesh when no triangle has positive area.
SurfaceSamples sample_mesh_surface(const TriMesh& mesh, int count,
                                   std::uint64_t seed);

/// Symmetric mean nearest-neighbor distance:
/// (mean_a min_b |a-b| + mean_b min_a |a-b|) / 2. Unsquared, mean-reduced.
double chamfer_distance(const std::vector<Eigen::Vector3d>& a,
                        const std::vector<Eigen::Vector3d>& b);

/// Symmetric mean |n_x . n_nn(x)| over nearest-neighbor pairs; the absolute
/// dot keeps un-oriented reconstructions unpenalized. Normals must be unit
/// length within 1e-6.
double normal_consistency(const SurfaceSamples& a, const SurfaceSamples& b);

/// F = 2PR/(P+R) with precision = fraction of a within `threshold` of b and
/// recall symmetric; 0 when P+R = 0.
double f_score(const std::vector<Eigen::Vector3d>& a,
               const std::vector<Eigen::Vector3d>& b, double threshold);

/// Samples both meshes and evaluates all three metrics.
MetricReport evaluate_meshes(const TriMesh& reconstructed,
                             const TriMesh& reference, double threshold,
                             int samples, std::uint64_t seed);

}  // namespace sfr

#include "sfrecon/metrics.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

#include "sfrecon/errors.hpp"
#include "sfrecon/kdtree.hpp"
#include "sfrecon/rng.hpp"

namespace sfr {

SurfaceSamples sample_mesh_surface(const TriMesh& mesh, int count,
                                   std::uint64_t seed) {
  if (count < 1) {
    throw Error(ErrorCode::CountOutOfRange, "sample count must be >= 1");
  }
  std::vector<double> cumulative;
  cumulative.reserve(mesh.triangles.size());
  std::vector<Eigen::Vector3d> normals(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector3d& v0 = mesh.vertices[tri[0]];
    const Eigen::Vector3d cross = (mesh.vertices[tri[1]] - v0)
                                      .cross(mesh.vertices[tri[2]] - v0);
    const double area = 0.5 * cross.norm();
    total += area;
    cumulative.push_back(total);
    normals[t] = area > 0.0 ? cross.normalized() : Eigen::Vector3d::UnitZ();
  }
  if (mesh.triangles.empty() || !(total > 0.0)) {
    throw Error(ErrorCode::DegenerateMesh,
                "mesh has no triangle with positive area");
  }

  Rng rng(derive_seed(seed, 0x5a3d1e));
  SurfaceSamples samples;
  samples.points.reserve(count);
  samples.normals.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double pick = rng.uniform(0.0, total);
    const auto it =
        std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const auto t = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                 static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
    const auto& tri = mesh.triangles[t];
    // Uniform barycentric draw.
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double u = 1.0 - r1;
    const double v = r1 * (1.0 - r2);
    const double w = r1 * r2;
    samples.points.push_back(u * mesh.vertices[tri[0]] +
                             v * mesh.vertices[tri[1]] +
                             w * mesh.vertices[tri[2]]);
    samples.normals.push_back(normals[t]);
  }
  return samples;
}

double chamfer_distance(const std::vector<Eigen::Vector3d>& a,
                        const std::vector<Eigen::Vector3d>& b) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::EmptySet, "chamfer distance needs nonempty sets");
  }
  const KdTree tree_a(a), tree_b(b);
  double sum_ab = 0.0;
  for (const auto& p : a) sum_ab += tree_b.nearest_distance(p);
  double sum_ba = 0.0;
  for (const auto& p : b) sum_ba += tree_a.nearest_distance(p);
  return 0.5 * (sum_ab / static_cast<double>(a.size()) +
                sum_ba / static_cast<double>(b.size()));
}

namespace {

void check_normals(const SurfaceSamples& s) {
  if (s.points.size() != s.normals.size()) {
    throw Error(ErrorCode::BadNormals, "one normal per point required");
  }
  for (const auto& n : s.normals) {
    if (std::abs(n.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::BadNormals, "normals must be unit length");
    }
  }
}

double directed_nc(const SurfaceSamples& from, const SurfaceSamples& to,
                   const KdTree& to_tree) {
  double sum = 0.0;
  for (std::size_t i = 0; i < from.points.size(); ++i) {
    const Neighbor nn = to_tree.nearest(from.points[i]);
    sum += std::abs(from.normals[i].dot(to.normals[nn.index]));
  }
  return sum / static_cast<double>(from.points.size());
}

}  // namespace

double normal_consistency(const SurfaceSamples& a, const SurfaceSamples& b) {
  if (a.points.empty() || b.points.empty()) {
    throw Error(ErrorCode::EmptySet, "normal consistency needs nonempty sets");
  }
  check_normals(a);
  check_normals(b);
  const KdTree tree_a(a.points), tree_b(b.points);
  return 0.5 * (directed_nc(a, b, tree_b) + directed_nc(b, a, tree_a));
}

double f_score(const std::vector<Eigen::Vector3d>& a,
               const std::vector<Eigen::Vector3d>& b, double threshold) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::EmptySet, "f-score needs nonempty sets");
  }
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::BadConfig, "f-score threshold must be > 0");
  }
  const KdTree tree_a(a), tree_b(b);
  std::size_t hit_a = 0;
  for (const auto& p : a) {
    if (tree_b.nearest_distance(p) <= threshold) ++hit_a;
  }
  std::size_t hit_b = 0;
  for (const auto& p : b) {
    if (tree_a.nearest_distance(p) <= threshold) ++hit_b;
  }
  const double precision = static_cast<double>(hit_a) / a.size();
  const double recall = static_cast<double>(hit_b) / b.size();
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

MetricReport evaluate_meshes(const TriMesh& reconstructed,
                             const TriMesh& reference, double threshold,
                             int samples, std::uint64_t seed) {
  const SurfaceSamples a =
      sample_mesh_surface(reconstructed, samples, derive_seed(seed, 1));
  const SurfaceSamples b =
      sample_mesh_surface(reference, samples, derive_seed(seed, 2));
  MetricReport report;
  report.cd = chamfer_distance(a.points, b.points);
  report.nc = normal_consistency(a, b);
  report.fscore = f_score(a.points, b.points, threshold);
  report.threshold = threshold;
  report.sample_count = samples;
  return report;
}

}  // namespace sfr

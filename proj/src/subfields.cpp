#include "sfrecon/subfields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sfrecon/errors.hpp"
#include "sfrecon/sphere_fit.hpp"

namespace sfr {

Eigen::Vector3d local_normalize(const Eigen::Vector3d& p,
                                const Eigen::Vector3d& c, double a) {
  if (!(a > 0.0)) {
    throw Error(ErrorCode::NonpositiveExtent, "local_normalize needs a > 0");
  }
  return (p - c) / a;
}

Eigen::Vector3d sphere_transform(const Eigen::Vector3d& q_bar,
                                 const Eigen::Vector3d& t, double r,
                                 double R) {
  if (!(r > 0.0) || !(R > 0.0)) {
    throw Error(ErrorCode::NonpositiveRadius,
                "sphere_transform needs positive radii");
  }
  return R * (q_bar - t) / r;
}

std::vector<Subfield> init_subfields(const PointCloud& cloud, int count,
                                     double alpha) {
  const int n = static_cast<int>(cloud.size());
  if (count < 2 || count > n) {
    throw Error(ErrorCode::CountOutOfRange,
                "subfield count must be in [2, n]");
  }
  if (alpha < 1.0) {
    throw Error(ErrorCode::AlphaTooSmall, "alpha must be >= 1");
  }

  const std::vector<int> picks = farthest_point_sampling(cloud, count);
  std::vector<Subfield> subfields(count);
  for (int i = 0; i < count; ++i) {
    subfields[i].center = cloud.points[picks[i]];
  }
  for (int i = 0; i < count; ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int j = 0; j < count; ++j) {
      if (j == i) continue;
      nearest = std::min(nearest,
                         (subfields[i].center - subfields[j].center).norm());
    }
    subfields[i].extent = alpha * nearest;
  }

  // Minimal uniform inflation restoring full coverage, then nudge past
  // rounding until the coverage test itself passes.
  auto coverage_factor = [&]() {
    double worst = 0.0;
    for (const auto& p : cloud.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& sf : subfields) {
        best = std::min(best,
                        (p - sf.center).cwiseAbs().maxCoeff() / sf.extent);
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  double factor = coverage_factor();
  while (factor > 1.0) {
    for (auto& sf : subfields) sf.extent *= factor;
    factor = coverage_factor();
    if (factor > 1.0) factor *= 1.0 + 1e-14;
  }

  update_membership(subfields, cloud);
  return subfields;
}

void update_membership(std::vector<Subfield>& subfields,
                       const PointCloud& cloud) {
  for (auto& sf : subfields) {
    sf.members.clear();
    const double eff = sf.effective_extent();
    if (eff <= 0.0) continue;
    for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
      if ((cloud.points[i] - sf.center).cwiseAbs().maxCoeff() <= eff) {
        sf.members.push_back(i);
      }
    }
  }
}

void refit_spheres(std::vector<Subfield>& subfields, const PointCloud& cloud) {
  std::vector<Eigen::Vector3d> local;
  for (auto& sf : subfields) {
    if (sf.members.empty() || sf.extent <= 0.0) continue;
    local.clear();
    local.reserve(sf.members.size());
    for (int idx : sf.members) {
      local.push_back(local_normalize(cloud.points[idx], sf.center, sf.extent));
    }
    const SphereFit fit = fit_sphere_stabilized(local);
    sf.sphere_center = fit.center;
    sf.sphere_radius = fit.radius;
  }
}

std::vector<double> compute_point_sigmas(const KdTree& index, int k) {
  const auto& points = index.points();
  std::vector<double> sigmas(points.size(), 0.0);
  const int want = std::max(1, k);
  for (std::size_t i = 0; i < points.size(); ++i) {
    // +1 because the query point itself sits at distance zero.
    const auto nn = index.knn(points[i], want + 1);
    sigmas[i] = std::sqrt(nn.back().dist2);
  }
  return sigmas;
}

std::vector<QuerySample> sample_queries(const Subfield& subfield,
                                        const PointCloud& cloud,
                                        const KdTree& index,
                                        const std::vector<double>& point_sigmas,
                                        int per_point, double R, Rng& rng,
                                        int max_member_points) {
  if (subfield.members.empty()) {
    throw Error(ErrorCode::EmptySubfield, "subfield has no member points");
  }
  const double a = subfield.extent;
  if (!(a > 0.0)) {
    throw Error(ErrorCode::NonpositiveExtent,
                "cannot sample queries in a collapsed subfield");
  }

  const int member_count = static_cast<int>(subfield.members.size());
  const int use = (max_member_points > 0 && max_member_points < member_count)
                      ? max_member_points
                      : member_count;

  std::vector<QuerySample> samples;
  samples.reserve(static_cast<std::size_t>(use) * per_point);
  const double scale = R / (subfield.sphere_radius * a);

  for (int m = 0; m < use; ++m) {
    const int idx = (use == member_count)
                        ? subfield.members[m]
                        : subfield.members[rng.index(member_count)];
    const Eigen::Vector3d& p = cloud.points[idx];
    const double sigma = point_sigmas[idx];
    for (int j = 0; j < per_point; ++j) {
      Eigen::Vector3d q;
      bool inside = false;
      for (int attempt = 0; attempt < 4 && !inside; ++attempt) {
        q = p + sigma * rng.normal3();
        inside = subfield.contains(q);
      }
      if (!inside) continue;
      QuerySample sample;
      sample.q = q;
      sample.s_world = index.nearest_distance(q);
      sample.subfield = -1;  // caller tags the owning index
      sample.q_tilde = sphere_transform(local_normalize(q, subfield.center, a),
                                        subfield.sphere_center,
                                        subfield.sphere_radius, R);
      sample.target = sample.s_world * scale;
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

}  // namespace sfr

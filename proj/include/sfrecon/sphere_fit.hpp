#pragma once

#include <Eigen/Core>
#include <vector>

namespace sfr {

struct SphereFit {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
};

/// Least-squares sphere through a point set, solved in closed form from the
/// linear system with rows [2x 2y 2z 1] against |p|^2. The unknown vector b
/// gives center = b[0:3] and radius = sqrt(b[3] + |b[0:3]|^2).
///
/// Throws SingularFit when the system is rank-deficient (condition of the
/// normal equations above 1e12, e.g. coplanar points) or the radicand is
/// not positive.
SphereFit fit_sphere(const std::vector<Eigen::Vector3d>& points);

/// fit_sphere with the conditioning guards used during training: patches
/// that fit a near-flat sphere get the radius capped at 100x the patch
/// bounding radius with the center pulled in along the fitted direction,
/// and degenerate patches fall back to a unit sphere around the centroid.
/// Never throws.
SphereFit fit_sphere_stabilized(const std::vector<Eigen::Vector3d>& points);

}  // namespace sfr

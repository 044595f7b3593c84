#include "sfrecon/sphere_fit.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "sfrecon/errors.hpp"

namespace sfr {

SphereFit fit_sphere(const std::vector<Eigen::Vector3d>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 4) {
    throw Error(ErrorCode::SingularFit, "sphere fit needs at least 4 points");
  }

  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = 2.0 * points[i].x();
    a(i, 1) = 2.0 * points[i].y();
    a(i, 2) = 2.0 * points[i].z();
    a(i, 3) = 1.0;
    y(i) = points[i].squaredNorm();
  }

  // SVD solves the tall-thin least squares and exposes the conditioning of
  // the normal equations as (s_max/s_min)^2.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU |
                                               Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double smin = s(3), smax = s(0);
  if (!(smin > 0.0) || (smax / smin) * (smax / smin) > 1e12) {
    throw Error(ErrorCode::SingularFit,
                "sphere fit is rank-deficient (coplanar or collinear points)");
  }
  const Eigen::Vector4d b = svd.solve(y);

  const Eigen::Vector3d center = b.head<3>();
  const double radicand = b(3) + center.squaredNorm();
  if (!(radicand > 0.0)) {
    throw Error(ErrorCode::SingularFit, "sphere fit has nonpositive radicand");
  }
  return {center, std::sqrt(radicand)};
}

SphereFit fit_sphere_stabilized(const std::vector<Eigen::Vector3d>& points) {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += p;
  if (!points.empty()) centroid /= static_cast<double>(points.size());

  double patch_radius = 0.0;
  for (const auto& p : points) {
    patch_radius = std::max(patch_radius, (p - centroid).norm());
  }

  SphereFit fit;
  bool ok = true;
  try {
    fit = fit_sphere(points);
  } catch (const Error&) {
    ok = false;
  }
  if (!ok) {
    // Flat, tiny or otherwise unfittable patch: a sphere through the
    // centroid at a benign scale keeps the downstream transform bounded.
    fit.radius = std::max(patch_radius, 0.25);
    fit.center = centroid - Eigen::Vector3d(0.0, 0.0, fit.radius);
    return fit;
  }

  const double cap = 100.0 * std::max(patch_radius, 1e-2);
  if (fit.radius > cap) {
    const Eigen::Vector3d dir = (fit.center - centroid).normalized();
    fit.radius = cap;
    fit.center = centroid + cap * dir;
  }
  return fit;
}

}  // namespace sfr

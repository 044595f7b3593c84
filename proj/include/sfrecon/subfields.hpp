#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "sfrecon/kdtree.hpp"
#include "sfrecon/point_cloud.hpp"
#include "sfrecon/rng.hpp"

namespace sfr {

/// One local implicit field: an axis-aligned cube of half-extent `extent`
/// around `center`, a latent code for the shared model, the sphere fitted to
/// its member points in local coordinates, and the resolved field sign.
struct Subfield {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double extent = 0.0;  // half-extent; may drift nonpositive while training
  Eigen::VectorXd latent;
  Eigen::Vector3d sphere_center = Eigen::Vector3d::Zero();  // local frame
  double sphere_radius = 1.0;
  int sign = 1;
  std::vector<int> members;  // indices into the observed cloud

  double effective_extent() const { return extent > 0.0 ? extent : 0.0; }

  /// Chebyshev cube membership on the effective extent.
  bool contains(const Eigen::Vector3d& p) const {
    return (p - center).cwiseAbs().maxCoeff() <= effective_extent();
  }
};

/// One supervised sample for the modeling loss: a query point in the
/// normalized cloud frame, its unsigned distance to the cloud, and the
/// transformed point / scaled target under the owning subfield's frame at
/// sampling time.
struct QuerySample {
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
  double s_world = 0.0;
  int subfield = -1;
  Eigen::Vector3d q_tilde = Eigen::Vector3d::Zero();
  double target = 0.0;  // s(q) * R / (sphere_radius * extent)
};

/// Local cube coordinates: (p - c) / a. Members land in [-1, 1]^3.
Eigen::Vector3d local_normalize(const Eigen::Vector3d& p,
                                const Eigen::Vector3d& c, double a);

/// Sphere-normalizing transform: R * (q_bar - t) / r. Points on the fitted
/// sphere map onto the radius-R sphere at the origin.
Eigen::Vector3d sphere_transform(const Eigen::Vector3d& q_bar,
                                 const Eigen::Vector3d& t, double r, double R);

/// Places subfield centers by farthest point sampling and sizes each cube as
/// alpha times the nearest-center distance. If any observed point is left
/// uncovered the extents are inflated uniformly by the minimal factor that
/// restores coverage. Membership lists are filled.
std::vector<Subfield> init_subfields(const PointCloud& cloud, int count,
                                     double alpha);

/// Recomputes every subfield's member list against the cloud.
void update_membership(std::vector<Subfield>& subfields,
                       const PointCloud& cloud);

/// Refits each populated subfield's sphere to its members in local
/// coordinates (stabilized fit). Empty subfields keep their frame.
void refit_spheres(std::vector<Subfield>& subfields, const PointCloud& cloud);

/// Per-point sampling scale: distance to the k-th nearest other point.
std::vector<double> compute_point_sigmas(const KdTree& index, int k);

/// Draws Gaussian queries around member points (sigma from the per-point
/// rule), keeps those inside the cube (4 attempts each, then dropped), and
/// attaches unsigned-distance supervision. When max_member_points > 0 only
/// that many members, drawn at random, are used this call.
std::vector<QuerySample> sample_queries(const Subfield& subfield,
                                        const PointCloud& cloud,
                                        const KdTree& index,
                                        const std::vector<double>& point_sigmas,
                                        int per_point, double R, Rng& rng,
                                        int max_member_points = 0);

}  // namespace sfr

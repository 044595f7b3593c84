#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace sfr {

/// The one squared-distance expression used by every code path that claims
/// exact agreement with an exhaustive scan (the project builds with
/// -ffp-contract=off, so this evaluates identically everywhere).
inline double squared_distance(const Eigen::Vector3d& a,
                               const Eigen::Vector3d& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Nearest-neighbor result: squared distance plus the index of the
/// minimizing point. Ties resolve to the lowest point index, matching an
/// exhaustive scan exactly.
struct Neighbor {
  int index = -1;
  double dist2 = 0.0;
};

/// Static kd-tree over a fixed set of 3D points. Immutable after
/// construction; concurrent reads are safe.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(const std::vector<Eigen::Vector3d>& points);

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }

  /// Closest point to q. Exact: same minimizer as a brute-force scan with
  /// lowest-index tie breaking.
  Neighbor nearest(const Eigen::Vector3d& q) const;

  /// Euclidean distance to the closest point.
  double nearest_distance(const Eigen::Vector3d& q) const;

  /// The k nearest points, sorted by (dist2, index) ascending. k is clamped
  /// to the cloud size.
  std::vector<Neighbor> knn(const Eigen::Vector3d& q, int k) const;

  const std::vector<Eigen::Vector3d>& points() const { return points_; }

 private:
  struct Node {
    int axis = -1;        // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf payload range in order_
  };

  int build(int begin, int end);
  void search(int node, const Eigen::Vector3d& q, Neighbor& best) const;

  template <typename Visit>
  void walk(int node, const Eigen::Vector3d& q, double& bound,
            Visit&& visit) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<int> order_;  // point indices, partitioned per node
  std::vector<Node> nodes_;
  int root_ = -1;

  static constexpr int kLeafSize = 16;
};

}  // namespace sfr

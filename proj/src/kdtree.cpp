#include "sfrecon/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sfr {

namespace {

inline double sqdist(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return squared_distance(a, b);
}

/// Candidate ordering shared by nearest() and knn(): smaller squared
/// distance wins, equal distances go to the lower index.
inline bool better(double d2, int idx, double best_d2, int best_idx) {
  return d2 < best_d2 || (d2 == best_d2 && idx < best_idx);
}

}  // namespace

KdTree::KdTree(const std::vector<Eigen::Vector3d>& points) : points_(points) {
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<int>(points_.size()));
  }
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    // Keep leaf payloads in ascending index order so equal-distance scans
    // meet the lower index first.
    std::sort(order_.begin() + begin, order_.begin() + end);
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  Eigen::Vector3d lo = points_[order_[begin]];
  Eigen::Vector3d hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });

  Node node;
  node.axis = axis;
  node.split = points_[order_[mid]][axis];
  nodes_[id] = node;
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node_id, const Eigen::Vector3d& q,
                    Neighbor& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d2 = sqdist(q, points_[idx]);
      if (better(d2, idx, best.dist2, best.index)) {
        best.dist2 = d2;
        best.index = idx;
      }
    }
    return;
  }
  const double delta = q[node.axis] - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  search(near, q, best);
  // <= keeps equal-distance points on the far side reachable so the
  // lowest-index tie rule stays exact.
  if (delta * delta <= best.dist2) search(far, q, best);
}

Neighbor KdTree::nearest(const Eigen::Vector3d& q) const {
  Neighbor best;
  best.dist2 = std::numeric_limits<double>::infinity();
  best.index = std::numeric_limits<int>::max();
  if (root_ >= 0) search(root_, q, best);
  return best;
}

double KdTree::nearest_distance(const Eigen::Vector3d& q) const {
  return std::sqrt(nearest(q).dist2);
}

template <typename Visit>
void KdTree::walk(int node_id, const Eigen::Vector3d& q, double& bound,
                  Visit&& visit) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) visit(order_[i]);
    return;
  }
  const double delta = q[node.axis] - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  walk(near, q, bound, visit);
  if (delta * delta <= bound) walk(far, q, bound, visit);
}

std::vector<Neighbor> KdTree::knn(const Eigen::Vector3d& q, int k) const {
  std::vector<Neighbor> heap;  // max-heap on (dist2, index)
  if (root_ < 0 || k <= 0) return heap;
  k = std::min<int>(k, static_cast<int>(points_.size()));
  heap.reserve(k + 1);

  auto worse = [](const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  };

  double bound = std::numeric_limits<double>::infinity();
  walk(root_, q, bound, [&](int idx) {
    const double d2 = sqdist(q, points_[idx]);
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back({idx, d2});
      std::push_heap(heap.begin(), heap.end(), worse);
    } else if (better(d2, idx, heap.front().dist2, heap.front().index)) {
      std::pop_heap(heap.begin(), heap.end(), worse);
      heap.back() = {idx, d2};
      std::push_heap(heap.begin(), heap.end(), worse);
    }
    if (static_cast<int>(heap.size()) == k) bound = heap.front().dist2;
  });

  std::sort_heap(heap.begin(), heap.end(), worse);
  return heap;
}

}  // namespace sfr

#include "sfrecon/sign_flip.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <tuple>

#include "format_detail.hpp"
#include "sfrecon/errors.hpp"
#include "sfrecon/rng.hpp"

namespace sfr {

LocalFieldFn mlp_local_field(const FieldModel& model) {
  return [&model](int i, const Eigen::Vector3d&, const Eigen::Vector3d& q_tilde) {
    return mlp_eval(model.theta, q_tilde, model.subfields[i].latent);
  };
}

SignGraph build_overlap_graph(const std::vector<Subfield>& subfields) {
  SignGraph graph;
  graph.vertex_count = static_cast<int>(subfields.size());
  for (int i = 0; i < graph.vertex_count; ++i) {
    const double ai = subfields[i].effective_extent();
    if (ai <= 0.0) continue;
    for (int j = i + 1; j < graph.vertex_count; ++j) {
      const double aj = subfields[j].effective_extent();
      if (aj <= 0.0) continue;
      const Eigen::Vector3d gap =
          (subfields[i].center - subfields[j].center).cwiseAbs();
      // Positive-volume overlap on every axis; face contact does not count.
      if (((ai + aj) - gap.array() > 1e-12).all()) {
        graph.edges.push_back({i, j, 0.0, 0.0});
      }
    }
  }
  return graph;
}

std::pair<double, double> edge_weights(const std::vector<Subfield>& subfields,
                                       const LocalFieldFn& field, double R,
                                       int i, int j, int sample_count,
                                       std::uint64_t seed) {
  const Subfield& si = subfields[i];
  const Subfield& sj = subfields[j];
  const double ai = si.effective_extent();
  const double aj = sj.effective_extent();
  const Eigen::Vector3d lo =
      (si.center.array() - ai).max(sj.center.array() - aj);
  const Eigen::Vector3d hi =
      (si.center.array() + ai).min(sj.center.array() + aj);
  if (sample_count < 1 || ai <= 0.0 || aj <= 0.0 ||
      ((hi - lo).array() <= 1e-12).any()) {
    throw Error(ErrorCode::NoOverlap, "subfields do not overlap");
  }

  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i),
                      static_cast<std::uint64_t>(j)));
  const double scale_i = si.sphere_radius * si.extent / R;
  const double scale_j = sj.sphere_radius * sj.extent / R;
  double w_same = 0.0, w_flip = 0.0;
  for (int k = 0; k < sample_count; ++k) {
    Eigen::Vector3d q;
    for (int axis = 0; axis < 3; ++axis) q(axis) = rng.uniform(lo(axis), hi(axis));
    const Eigen::Vector3d qt_i = sphere_transform(
        local_normalize(q, si.center, si.extent), si.sphere_center,
        si.sphere_radius, R);
    const Eigen::Vector3d qt_j = sphere_transform(
        local_normalize(q, sj.center, sj.extent), sj.sphere_center,
        sj.sphere_radius, R);
    const double vi = scale_i * field(i, q, qt_i);
    const double vj = scale_j * field(j, q, qt_j);
    w_same += std::abs(vi - vj);
    w_flip += std::abs(vi + vj);
  }
  return {w_same, w_flip};
}

std::pair<double, double> edge_weights(const FieldModel& model, int i, int j,
                                       int sample_count, std::uint64_t seed) {
  return edge_weights(model.subfields, mlp_local_field(model),
                      model.config.sphere_scale, i, j, sample_count, seed);
}

SignGraph compute_sign_graph(const FieldModel& model, int samples_per_edge,
                             std::uint64_t seed) {
  SignGraph graph = build_overlap_graph(model.subfields);
  for (auto& e : graph.edges) {
    std::tie(e.w_same, e.w_flip) =
        edge_weights(model, e.i, e.j, samples_per_edge, seed);
  }
  return graph;
}

std::vector<int> assign_signs(SignGraph& graph) {
  const int n = graph.vertex_count;
  graph.signs.assign(n, 0);
  graph.tree_edges.clear();

  std::vector<std::vector<int>> adjacency(n);
  for (int e = 0; e < static_cast<int>(graph.edges.size()); ++e) {
    adjacency[graph.edges[e].i].push_back(e);
    adjacency[graph.edges[e].j].push_back(e);
  }

  // (key, edge id, vertex already in tree); smallest key first, then the
  // lowest edge id so ties are deterministic.
  using Candidate = std::tuple<double, int, int>;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> queue;

  auto push_edges = [&](int v) {
    for (int e : adjacency[v]) {
      const auto& edge = graph.edges[e];
      const int other = edge.i == v ? edge.j : edge.i;
      if (graph.signs[other] == 0) {
        queue.emplace(std::min(edge.w_same, edge.w_flip), e, v);
      }
    }
  };

  for (int root = 0; root < n; ++root) {
    if (graph.signs[root] != 0) continue;
    graph.signs[root] = 1;  // component root convention
    push_edges(root);
    while (!queue.empty()) {
      const auto [key, e, from] = queue.top();
      queue.pop();
      const auto& edge = graph.edges[e];
      const int to = edge.i == from ? edge.j : edge.i;
      if (graph.signs[to] != 0) continue;
      // Same sign when keeping the fields unflipped is cheaper; the tie
      // keeps the same sign.
      graph.signs[to] = edge.w_same <= edge.w_flip ? graph.signs[from]
                                                   : -graph.signs[from];
      graph.tree_edges.emplace_back(from, to);
      push_edges(to);
    }
  }
  return graph.signs;
}

void apply_signs(FieldModel& model, const std::vector<int>& signs) {
  if (signs.size() != model.subfields.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one sign per subfield required");
  }
  for (std::size_t i = 0; i < signs.size(); ++i) {
    model.subfields[i].sign = signs[i];
  }
}

void write_graph_dump(const SignGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << "vertices " << graph.vertex_count << "\n";
  out << "edges " << graph.edges.size() << "\n";
  for (const auto& e : graph.edges) {
    out << "edge " << e.i << ' ' << e.j << ' '
        << detail::format_double(e.w_same) << ' '
        << detail::format_double(e.w_flip) << "\n";
  }
  for (std::size_t i = 0; i < graph.signs.size(); ++i) {
    out << "sign " << i << ' ' << graph.signs[i] << "\n";
  }
  for (const auto& [from, to] : graph.tree_edges) {
    out << "tree " << from << ' ' << to << "\n";
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

}  // namespace sfr

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sfrecon/subfields.hpp"
#include "sfrecon/trainer.hpp"

namespace sfr {

/// Overlap-graph edge between two subfield cubes, carrying the agreement
/// weight pair: w_same sums |f_i - f_j| over shared samples, w_flip sums
/// |f_i + f_j|. The cheaper of the two decides the relative sign.
struct SignEdge {
  int i = -1;
  int j = -1;
  double w_same = 0.0;  // w^1
  double w_flip = 0.0;  // w^0
};

struct SignGraph {
  int vertex_count = 0;
  std::vector<SignEdge> edges;
  std::vector<int> signs;                        // per vertex, +1 / -1
  std::vector<std::pair<int, int>> tree_edges;   // MST edges as (parent, child)
};

/// Local field evaluator in model units: subfield index, the query in the
/// normalized cloud frame, and its sphere-transformed coordinates. The
/// production evaluator runs the shared MLP; tests plant analytic fields.
using LocalFieldFn = std::function<double(
    int subfield, const Eigen::Vector3d& q, const Eigen::Vector3d& q_tilde)>;

LocalFieldFn mlp_local_field(const FieldModel& model);

/// Edges between every pair of cubes whose intersection has positive volume
/// (per-axis overlap > 1e-12). Weights are left zero.
SignGraph build_overlap_graph(const std::vector<Subfield>& subfields);

/// Weight pair for one overlapping pair: uniform samples in the
/// intersection box, both local fields evaluated and scaled back to world
/// units by r*a/R before comparison. Throws NoOverlap.
std::pair<double, double> edge_weights(const std::vector<Subfield>& subfields,
                                       const LocalFieldFn& field, double R,
                                       int i, int j, int sample_count,
                                       std::uint64_t seed);

std::pair<double, double> edge_weights(const FieldModel& model, int i, int j,
                                       int sample_count, std::uint64_t seed);

/// build_overlap_graph + edge_weights over every edge.
SignGraph compute_sign_graph(const FieldModel& model, int samples_per_edge,
                             std::uint64_t seed);

/// Prim-style minimum spanning tree per connected component (edge key
/// min(w_same, w_flip), lowest-index root signed +1). Adding edge (i -> j)
/// sets h_j = h_i when w_same < w_flip, else -h_i; ties keep the same sign.
/// Fills graph.signs and graph.tree_edges and returns the signs.
std::vector<int> assign_signs(SignGraph& graph);

/// Copies resolved signs onto the model's subfields.
void apply_signs(FieldModel& model, const std::vector<int>& signs);

/// Plain-text dump of vertices, weighted edges and signs.
void write_graph_dump(const SignGraph& graph, const std::string& path);

}  // namespace sfr

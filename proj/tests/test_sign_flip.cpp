#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "sfrecon/errors.hpp"
#include "sfrecon/rng.hpp"
#include "sfrecon/sign_flip.hpp"

using namespace sfr;

namespace {

Subfield cube_at(double x, double y, double z, double extent) {
  Subfield sf;
  sf.center = Eigen::Vector3d(x, y, z);
  sf.extent = extent;
  sf.sphere_center = Eigen::Vector3d::Zero();
  sf.sphere_radius = 1.0;
  sf.latent = Eigen::VectorXd::Zero(4);
  return sf;
}

/// Planted world-space field g(q) wrapped as a local evaluator: the local
/// model value that makes the world-scaled comparison equal g(q).
LocalFieldFn planted_world_field(
    const std::vector<Subfield>& subfields, double R,
    std::function<double(int, const Eigen::Vector3d&)> g) {
  return [&subfields, R, g](int i, const Eigen::Vector3d& q,
                            const Eigen::Vector3d&) {
    const Subfield& sf = subfields[i];
    return g(i, q) * R / (sf.sphere_radius * sf.extent);
  };
}

/// Minimal cost over all sign assignments restricted to the tree edges.
double exhaustive_tree_cost(const SignGraph& graph) {
  const int n = graph.vertex_count;
  // Map tree edges back to their weight pairs.
  std::vector<const SignEdge*> tree;
  for (const auto& [from, to] : graph.tree_edges) {
    for (const auto& e : graph.edges) {
      if ((e.i == from && e.j == to) || (e.i == to && e.j == from)) {
        tree.push_back(&e);
        break;
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << n); ++mask) {
    double cost = 0.0;
    for (const auto* e : tree) {
      const int hi = (mask >> e->i) & 1 ? 1 : -1;
      const int hj = (mask >> e->j) & 1 ? 1 : -1;
      cost += hi == hj ? e->w_same : e->w_flip;
    }
    best = std::min(best, cost);
  }
  return best;
}

double assignment_cost(const SignGraph& graph) {
  double cost = 0.0;
  for (const auto& [from, to] : graph.tree_edges) {
    for (const auto& e : graph.edges) {
      if ((e.i == from && e.j == to) || (e.i == to && e.j == from)) {
        cost += graph.signs[e.i] == graph.signs[e.j] ? e.w_same : e.w_flip;
        break;
      }
    }
  }
  return cost;
}

}  // namespace

TEST_CASE("overlap graph construction") {
  SUBCASE("separated cubes have no edge") {
    std::vector<Subfield> sfs = {cube_at(0, 0, 0, 1.0), cube_at(3, 0, 0, 1.0)};
    CHECK(build_overlap_graph(sfs).edges.empty());
  }
  SUBCASE("generous extents create an edge") {
    std::vector<Subfield> sfs = {cube_at(0, 0, 0, 2.0), cube_at(3, 0, 0, 2.0)};
    const SignGraph graph = build_overlap_graph(sfs);
    REQUIRE(graph.edges.size() == 1);
    CHECK(graph.edges[0].i == 0);
    CHECK(graph.edges[0].j == 1);
  }
  SUBCASE("exact face contact is not an overlap") {
    std::vector<Subfield> sfs = {cube_at(0, 0, 0, 1.0), cube_at(2, 0, 0, 1.0)};
    CHECK(build_overlap_graph(sfs).edges.empty());
  }
  SUBCASE("collapsed subfields never connect") {
    std::vector<Subfield> sfs = {cube_at(0, 0, 0, -1.0), cube_at(0.1, 0, 0, 1.0)};
    CHECK(build_overlap_graph(sfs).edges.empty());
  }
}

TEST_CASE("edge weights from planted fields") {
  std::vector<Subfield> sfs = {cube_at(0, 0, 0, 1.0), cube_at(0.5, 0, 0, 1.0)};
  sfs[0].sphere_radius = 0.8;
  sfs[1].sphere_radius = 1.3;
  const double R = 1.0;
  const int count = 64;

  SUBCASE("identical constant fields: w_same 0, w_flip 2 sum|v|") {
    const auto field = planted_world_field(
        sfs, R, [](int, const Eigen::Vector3d&) { return 1.0; });
    const auto [w_same, w_flip] = edge_weights(sfs, field, R, 0, 1, count, 3);
    CHECK(w_same == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(w_flip == doctest::Approx(2.0 * count).epsilon(1e-9));
  }
  SUBCASE("negated fields: w_same 2 sum|v|, w_flip 0") {
    const auto field = planted_world_field(
        sfs, R, [](int i, const Eigen::Vector3d&) { return i == 0 ? 1.0 : -1.0; });
    const auto [w_same, w_flip] = edge_weights(sfs, field, R, 0, 1, count, 3);
    CHECK(w_same == doctest::Approx(2.0 * count).epsilon(1e-9));
    CHECK(w_flip == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("one field zero: both weights equal sum|v|") {
    const auto field = planted_world_field(
        sfs, R, [](int i, const Eigen::Vector3d&) { return i == 0 ? 1.0 : 0.0; });
    const auto [w_same, w_flip] = edge_weights(sfs, field, R, 0, 1, count, 3);
    CHECK(w_same == doctest::Approx(double(count)).epsilon(1e-9));
    CHECK(w_flip == doctest::Approx(double(count)).epsilon(1e-9));
    CHECK(w_same == w_flip);
  }
  SUBCASE("disjoint cubes refuse weights") {
    std::vector<Subfield> apart = {cube_at(0, 0, 0, 1.0), cube_at(5, 0, 0, 1.0)};
    const auto field = planted_world_field(
        apart, R, [](int, const Eigen::Vector3d&) { return 1.0; });
    try {
      edge_weights(apart, field, R, 0, 1, count, 3);
      FAIL("expected NoOverlap");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoOverlap);
    }
  }
}

TEST_CASE("sign assignment on two vertices") {
  SignGraph graph;
  graph.vertex_count = 2;

  SUBCASE("agreement is cheaper") {
    graph.edges = {{0, 1, 0.1, 5.0}};
    const auto signs = assign_signs(graph);
    CHECK(signs == std::vector<int>{1, 1});
  }
  SUBCASE("flip is cheaper") {
    graph.edges = {{0, 1, 5.0, 0.1}};
    const auto signs = assign_signs(graph);
    CHECK(signs == std::vector<int>{1, -1});
  }
  SUBCASE("tie keeps the same sign") {
    graph.edges = {{0, 1, 2.0, 2.0}};
    const auto signs = assign_signs(graph);
    CHECK(signs == std::vector<int>{1, 1});
  }
}

TEST_CASE("prim tree structure and exhaustive optimality") {
  Rng rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 4 + static_cast<int>(rng.index(7));  // up to 10 vertices
    SignGraph graph;
    graph.vertex_count = n;
    // Random connected graph: a random spanning chain plus extras.
    for (int v = 1; v < n; ++v) {
      const int u = static_cast<int>(rng.index(v));
      graph.edges.push_back({u, v, rng.uniform(), rng.uniform()});
    }
    const int extras = static_cast<int>(rng.index(n));
    for (int k = 0; k < extras; ++k) {
      const int i = static_cast<int>(rng.index(n));
      const int j = static_cast<int>(rng.index(n));
      if (i == j) continue;
      const int lo = std::min(i, j), hi = std::max(i, j);
      const bool duplicate =
          std::any_of(graph.edges.begin(), graph.edges.end(),
                      [&](const SignEdge& e) {
                        return (e.i == lo && e.j == hi) ||
                               (e.i == hi && e.j == lo);
                      });
      if (duplicate) continue;  // keeps the edge lookup by pair unambiguous
      graph.edges.push_back({lo, hi, rng.uniform(), rng.uniform()});
    }

    const auto signs = assign_signs(graph);
    REQUIRE(static_cast<int>(signs.size()) == n);
    for (int s : signs) CHECK((s == 1 || s == -1));

    // Spanning tree over one connected component: n-1 edges, all vertices.
    CHECK(static_cast<int>(graph.tree_edges.size()) == n - 1);
    std::vector<bool> reached(n, false);
    reached[0] = true;
    for (const auto& [from, to] : graph.tree_edges) {
      CHECK(reached[from]);  // Prim grows from the tree side
      CHECK(!reached[to]);
      reached[to] = true;
    }
    CHECK(std::all_of(reached.begin(), reached.end(), [](bool b) { return b; }));

    // Each tree edge satisfies its cheaper relation, and the total matches
    // the exhaustive optimum over sign vectors.
    for (const auto& [from, to] : graph.tree_edges) {
      for (const auto& e : graph.edges) {
        if ((e.i == from && e.j == to) || (e.i == to && e.j == from)) {
          if (e.w_same < e.w_flip) CHECK(signs[e.i] == signs[e.j]);
          if (e.w_flip < e.w_same) CHECK(signs[e.i] != signs[e.j]);
          break;
        }
      }
    }
    CHECK(assignment_cost(graph) ==
          doctest::Approx(exhaustive_tree_cost(graph)).epsilon(1e-12));
  }
}

TEST_CASE("disconnected components each get a +1 root") {
  SignGraph graph;
  graph.vertex_count = 5;
  graph.edges = {{0, 1, 0.1, 5.0}, {3, 4, 5.0, 0.1}};  // vertex 2 isolated
  const auto signs = assign_signs(graph);
  CHECK(signs[0] == 1);
  CHECK(signs[1] == 1);
  CHECK(signs[2] == 1);
  CHECK(signs[3] == 1);
  CHECK(signs[4] == -1);
  CHECK(graph.tree_edges.size() == 2);
}

TEST_CASE("flip symmetry of weights and planted-sign recovery") {
  // Eight cubes around a circle with planted signed distance fields, half
  // of them pre-negated. Negating one subfield's local field swaps the
  // weight pair on exactly its incident edges (same sample points, negated
  // values), and the assignment keeps undoing the planting up to one
  // global sign.
  std::vector<Subfield> sfs;
  const double r = 1.0;
  for (int k = 0; k < 8; ++k) {
    const double phi = 2.0 * 3.14159265358979 * k / 8.0;
    Subfield sf = cube_at(r * std::cos(phi), r * std::sin(phi), 0.0, 1.1);
    sf.sphere_radius = 0.9 + 0.05 * k;
    sfs.push_back(sf);
  }
  std::vector<int> planted(8);
  Rng rng(31);
  for (auto& h : planted) h = rng.uniform() < 0.5 ? 1 : -1;

  const int flipped_vertex = 3;
  auto make_field = [&](bool flip_one) {
    return planted_world_field(
        sfs, 1.0, [&planted, flip_one](int i, const Eigen::Vector3d& q) {
          const double local = planted[i] * (q.norm() - 1.0);
          return flip_one && i == flipped_vertex ? -local : local;
        });
  };

  SignGraph base = build_overlap_graph(sfs);
  REQUIRE(!base.edges.empty());
  SignGraph flipped = base;
  const auto field = make_field(false);
  const auto negated = make_field(true);
  for (std::size_t e = 0; e < base.edges.size(); ++e) {
    auto [ws, wf] = edge_weights(sfs, field, 1.0, base.edges[e].i,
                                 base.edges[e].j, 64, 5);
    base.edges[e].w_same = ws;
    base.edges[e].w_flip = wf;
    auto [ws2, wf2] = edge_weights(sfs, negated, 1.0, base.edges[e].i,
                                   base.edges[e].j, 64, 5);
    flipped.edges[e].w_same = ws2;
    flipped.edges[e].w_flip = wf2;
    if (base.edges[e].i == flipped_vertex || base.edges[e].j == flipped_vertex) {
      CHECK(ws == doctest::Approx(wf2).epsilon(1e-12));
      CHECK(wf == doctest::Approx(ws2).epsilon(1e-12));
    } else {
      CHECK(ws == doctest::Approx(ws2).epsilon(1e-12));
      CHECK(wf == doctest::Approx(wf2).epsilon(1e-12));
    }
  }

  // Both graphs recover their plantings up to one global sign.
  const auto signs = assign_signs(base);
  const int global = signs[0] * planted[0];
  for (int v = 0; v < 8; ++v) CHECK(signs[v] * planted[v] == global);

  std::vector<int> planted_one = planted;
  planted_one[flipped_vertex] = -planted_one[flipped_vertex];
  const auto mirror = assign_signs(flipped);
  const int global2 = mirror[0] * planted_one[0];
  for (int v = 0; v < 8; ++v) CHECK(mirror[v] * planted_one[v] == global2);
}

TEST_CASE("graph dump is written") {
  SignGraph graph;
  graph.vertex_count = 2;
  graph.edges = {{0, 1, 0.25, 1.5}};
  assign_signs(graph);
  const std::string path =
      (std::filesystem::temp_directory_path() / "sign_graph.txt").string();
  write_graph_dump(graph, path);
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  CHECK(content.find("vertices 2") != std::string::npos);
  CHECK(content.find("edge 0 1") != std::string::npos);
  CHECK(content.find("sign 0 1") != std::string::npos);
}

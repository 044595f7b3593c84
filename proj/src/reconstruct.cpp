#include "sfrecon/reconstruct.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <tuple>
#include <unordered_map>

#include "sfrecon/errors.hpp"
#include "sfrecon/parallel.hpp"

namespace sfr {

void GridSpec::validate() const {
  if (resolution.minCoeff() < 2) {
    throw Error(ErrorCode::BadConfig, "grid resolution must be >= 2 per axis");
  }
  if (((hi - lo).array() <= 0.0).any()) {
    throw Error(ErrorCode::BadConfig, "grid bounds must have positive size");
  }
}

Eigen::Vector3d GridSpec::step() const {
  return (hi - lo).cwiseQuotient((resolution.cast<double>().array() - 1.0).matrix());
}

Eigen::Vector3d GridSpec::node(int ix, int iy, int iz) const {
  const Eigen::Vector3d s = step();
  return lo + Eigen::Vector3d(ix * s.x(), iy * s.y(), iz * s.z());
}

GridSpec GridSpec::cover_model(const FieldModel& model, int resolution,
                               double inflate) {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(
      std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  bool any = false;
  for (const auto& sf : model.subfields) {
    const double a = sf.effective_extent();
    if (a <= 0.0) continue;
    any = true;
    lo = lo.cwiseMin((sf.center.array() - a).matrix());
    hi = hi.cwiseMax((sf.center.array() + a).matrix());
  }
  if (!any) {
    lo = Eigen::Vector3d::Constant(-1.0);
    hi = Eigen::Vector3d::Constant(1.0);
  }
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  const Eigen::Vector3d half = 0.5 * (hi - lo) * (1.0 + inflate);
  GridSpec grid;
  grid.resolution = Eigen::Vector3i::Constant(resolution);
  grid.lo = center - half;
  grid.hi = center + half;
  grid.validate();
  return grid;
}

namespace {

inline double cheb(const Eigen::Vector3d& delta) {
  return delta.cwiseAbs().maxCoeff();
}

}  // namespace

std::vector<double> interpolation_weights(
    const Eigen::Vector3d& q, const std::vector<const Subfield*>& cubes) {
  if (cubes.empty()) {
    throw Error(ErrorCode::NotInsideCube, "no cubes listed");
  }
  std::vector<double> weights(cubes.size(), 0.0);
  double denom = 0.0;
  for (std::size_t j = 0; j < cubes.size(); ++j) {
    const double a = cubes[j]->effective_extent();
    const double d = cheb(q - cubes[j]->center);
    if (d > a) {
      throw Error(ErrorCode::NotInsideCube,
                  "query lies outside a listed cube");
    }
    weights[j] = std::abs(d - a);
    denom += weights[j];
  }
  if (denom < 1e-15) {
    std::fill(weights.begin(), weights.end(), 1.0 / cubes.size());
    return weights;
  }
  for (double& w : weights) w /= denom;
  return weights;
}

double background_offset(const std::vector<Subfield>& subfields) {
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& sf : subfields) {
    const double a = sf.effective_extent();
    if (a > 0.0) smallest = std::min(smallest, a);
  }
  return std::isfinite(smallest) ? 0.1 * smallest : 1.0;
}

double exterior_cube_distance(const std::vector<Subfield>& subfields,
                              const Eigen::Vector3d& q) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& sf : subfields) {
    const double a = sf.effective_extent();
    if (!(a > 0.0)) continue;
    const double d2 =
        ((q - sf.center).cwiseAbs().array() - a).max(0.0).square().sum();
    best = std::min(best, d2);
  }
  return std::isfinite(best) ? std::sqrt(best) : 1.0;
}

double blended_field(const std::vector<Subfield>& subfields, double R,
                     const LocalFieldFn& field, const Eigen::Vector3d& q) {
  std::vector<const Subfield*> covering;
  std::vector<int> indices;
  for (std::size_t i = 0; i < subfields.size(); ++i) {
    const double a = subfields[i].effective_extent();
    if (a > 0.0 && cheb(q - subfields[i].center) <= a) {
      covering.push_back(&subfields[i]);
      indices.push_back(static_cast<int>(i));
    }
  }
  if (covering.empty()) {
    return exterior_cube_distance(subfields, q) + background_offset(subfields);
  }
  const std::vector<double> weights = interpolation_weights(q, covering);
  double value = 0.0;
  for (std::size_t k = 0; k < covering.size(); ++k) {
    const Subfield& sf = *covering[k];
    const Eigen::Vector3d q_tilde =
        sphere_transform(local_normalize(q, sf.center, sf.extent),
                         sf.sphere_center, sf.sphere_radius, R);
    const double local = field(indices[k], q, q_tilde);
    value += weights[k] * sf.sign * (sf.sphere_radius * sf.extent / R) * local;
  }
  return value;
}

double global_sdf(const FieldModel& model, const Eigen::Vector3d& q) {
  const LocalFieldFn field = mlp_local_field(model);
  return blended_field(model.subfields, model.config.sphere_scale, field, q);
}

std::vector<double> evaluate_field_grid(const FieldModel& model,
                                        const GridSpec& grid, int workers) {
  grid.validate();
  const int nx = grid.resolution.x(), ny = grid.resolution.y(),
            nz = grid.resolution.z();
  const std::size_t total = static_cast<std::size_t>(nx) * ny * nz;
  std::vector<double> values(total, 0.0);

  const auto& sfs = model.subfields;
  const int n_subfields = static_cast<int>(sfs.size());
  const double R = model.config.sphere_scale;
  const double bg = background_offset(sfs);

  // Slabs of z-planes; every node belongs to exactly one slab, so the
  // per-node results do not depend on the partition.
  parallel_chunks(static_cast<std::size_t>(nz), workers,
                  [&](std::size_t z_begin, std::size_t z_end, int) {
    const std::size_t slab_nodes =
        static_cast<std::size_t>(nx) * ny * (z_end - z_begin);
    std::vector<float> denoms(slab_nodes, 0.0f);
    std::vector<std::uint8_t> counts(slab_nodes, 0);
    std::vector<std::vector<int>> buckets(n_subfields);

    auto slab_index = [&](int ix, int iy, std::size_t iz) {
      return static_cast<std::size_t>(ix) +
             static_cast<std::size_t>(nx) *
                 (static_cast<std::size_t>(iy) + static_cast<std::size_t>(ny) * (iz - z_begin));
    };

    for (std::size_t iz = z_begin; iz < z_end; ++iz) {
      for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
          const Eigen::Vector3d q = grid.node(ix, iy, static_cast<int>(iz));
          const std::size_t local = slab_index(ix, iy, iz);
          double denom = 0.0;
          int count = 0;
          for (int j = 0; j < n_subfields; ++j) {
            const double a = sfs[j].effective_extent();
            if (!(a > 0.0)) continue;
            const double d = cheb(q - sfs[j].center);
            if (d <= a) {
              denom += a - d;
              ++count;
              buckets[j].push_back(static_cast<int>(local));
            }
          }
          if (count == 0) {
            const std::size_t node =
                static_cast<std::size_t>(ix) +
                static_cast<std::size_t>(nx) *
                    (static_cast<std::size_t>(iy) +
                     static_cast<std::size_t>(ny) * iz);
            values[node] = exterior_cube_distance(sfs, q) + bg;
          } else {
            denoms[local] = static_cast<float>(denom);
            counts[local] =
                static_cast<std::uint8_t>(std::min(count, 255));
          }
        }
      }
    }

    // One batched model evaluation per subfield over its covered nodes.
    constexpr int kChunk = 8192;
    for (int j = 0; j < n_subfields; ++j) {
      const auto& bucket = buckets[j];
      if (bucket.empty()) continue;
      const Subfield& sf = sfs[j];
      const double scale = sf.sign * sf.sphere_radius * sf.extent / R;
      for (std::size_t start = 0; start < bucket.size(); start += kChunk) {
        const auto len = static_cast<Eigen::Index>(
            std::min<std::size_t>(kChunk, bucket.size() - start));
        Eigen::MatrixXd q_tilde(len, 3);
        for (Eigen::Index k = 0; k < len; ++k) {
          const int local = bucket[start + k];
          const int ix = local % nx;
          const int iy = (local / nx) % ny;
          const auto iz = static_cast<int>(z_begin + local / (static_cast<std::size_t>(nx) * ny));
          const Eigen::Vector3d q = grid.node(ix, iy, iz);
          q_tilde.row(k) =
              sphere_transform(local_normalize(q, sf.center, sf.extent),
                               sf.sphere_center, sf.sphere_radius, R)
                  .transpose();
        }
        const Eigen::VectorXd local_values =
            mlp_eval_batch(model.theta, q_tilde, sf.latent);
        for (Eigen::Index k = 0; k < len; ++k) {
          const int local = bucket[start + k];
          const int ix = local % nx;
          const int iy = (local / nx) % ny;
          const auto iz = static_cast<int>(z_begin + local / (static_cast<std::size_t>(nx) * ny));
          const Eigen::Vector3d q = grid.node(ix, iy, iz);
          const double a = sf.effective_extent();
          const double num = a - cheb(q - sf.center);
          const double denom = denoms[local];
          const double w = denom < 1e-15 ? 1.0 / counts[local] : num / denom;
          const std::size_t node =
              static_cast<std::size_t>(ix) +
              static_cast<std::size_t>(nx) *
                  (static_cast<std::size_t>(iy) +
                   static_cast<std::size_t>(ny) * iz);
          values[node] += w * scale * local_values(k);
        }
      }
    }
  });
  return values;
}

// ---------------------------------------------------------------------------
// Marching cubes
//
// Cell corners: 0=(0,0,0) 1=(1,0,0) 2=(1,1,0) 3=(0,1,0) 4..7 = +z above.
// Cell edges (corner pairs):
//   0:(0,1) 1:(1,2) 2:(2,3) 3:(3,0) 4:(4,5) 5:(5,6) 6:(6,7) 7:(7,4)
//   8:(0,4) 9:(1,5) 10:(2,6) 11:(3,7)
// The 256-entry triangle table is assembled at first use from per-face
// marching-squares contours (ambiguous faces always keep the two inside
// corners connected), which makes the boundary on any shared face a
// function of that face's corner signs alone.

namespace {

constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                     {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                     {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Corners counter-clockwise seen from outside, and the cyclic face edges
// between consecutive corners.
constexpr int kFaceCorners[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                                    {2, 3, 7, 6}, {0, 4, 7, 3}, {1, 2, 6, 5}};
constexpr int kFaceEdges[6][4] = {{3, 2, 1, 0},  {4, 5, 6, 7}, {0, 9, 4, 8},
                                  {2, 11, 6, 10}, {8, 7, 11, 3}, {1, 10, 5, 9}};

/// One closed contour of a cell patch, pre-rotated so that a triangle fan
/// from the first entry stays clear of the cube's faces (fan chords between
/// two edges of one face would geometrically coincide with the neighbor
/// cell's chords and break manifoldness). Loops with no such rotation get a
/// centroid vertex instead.
struct McPolygon {
  std::vector<int> edges;
  bool use_centroid = false;
};

using TriangleRow = std::vector<McPolygon>;

/// Directed contour segments of one face under the configuration's corner
/// signs; segments run with the inside region on the left, seen from
/// outside the cell.
void face_segments(int config, int face, std::vector<std::array<int, 2>>& out) {
  bool inside[4];
  int mask = 0;
  for (int k = 0; k < 4; ++k) {
    inside[k] = (config >> kFaceCorners[face][k]) & 1;
    if (inside[k]) mask |= 1 << k;
  }
  const int* e = kFaceEdges[face];
  auto seg = [&](int from, int to) { out.push_back({e[from], e[to]}); };

  switch (mask) {
    case 0b0000:
    case 0b1111:
      break;
    case 0b0001: seg(0, 3); break;  // single inside corner k: E_k -> E_{k-1}
    case 0b0010: seg(1, 0); break;
    case 0b0100: seg(2, 1); break;
    case 0b1000: seg(3, 2); break;
    case 0b1110: seg(3, 0); break;  // single outside corner k: E_{k-1} -> E_k
    case 0b1101: seg(0, 1); break;
    case 0b1011: seg(1, 2); break;
    case 0b0111: seg(2, 3); break;
    case 0b0011: seg(1, 3); break;  // adjacent pair (k,k+1): E_{k+1} -> E_{k+3}
    case 0b0110: seg(2, 0); break;
    case 0b1100: seg(3, 1); break;
    case 0b1001: seg(0, 2); break;
    case 0b0101:  // diagonal inside 0,2: wrap outside corners 1 and 3
      seg(0, 1);
      seg(2, 3);
      break;
    case 0b1010:  // diagonal inside 1,3: wrap outside corners 0 and 2
      seg(3, 0);
      seg(1, 2);
      break;
  }
}

bool edges_share_face(int ea, int eb) {
  for (int f = 0; f < 6; ++f) {
    bool a = false, b = false;
    for (int k = 0; k < 4; ++k) {
      a = a || kFaceEdges[f][k] == ea;
      b = b || kFaceEdges[f][k] == eb;
    }
    if (a && b) return true;
  }
  return false;
}

TriangleRow build_config(int config) {
  std::vector<std::array<int, 2>> segments;
  for (int face = 0; face < 6; ++face) face_segments(config, face, segments);

  // Each crossed cell edge has exactly one outgoing and one incoming
  // segment, so the segments chain into disjoint closed loops.
  std::array<int, 12> next;
  next.fill(-1);
  for (const auto& s : segments) next[s[0]] = s[1];

  TriangleRow polygons;
  std::array<bool, 12> used{};
  for (const auto& s : segments) {
    const int start = s[0];
    if (used[start]) continue;
    std::vector<int> loop;
    int cur = start;
    do {
      loop.push_back(cur);
      used[cur] = true;
      cur = next[cur];
    } while (cur != start && cur != -1);
    if (loop.size() < 3) continue;
    // Loops as built run with the inside on the left; reverse so triangle
    // normals point toward the positive side of the field.
    std::reverse(loop.begin(), loop.end());

    // Rotate so every fan chord (first vertex to a non-neighbor) connects
    // edges that do not share a cube face.
    const std::size_t n = loop.size();
    McPolygon polygon;
    polygon.use_centroid = true;
    for (std::size_t rot = 0; rot < n && polygon.use_centroid; ++rot) {
      bool safe = true;
      for (std::size_t k = 2; k + 1 < n && safe; ++k) {
        safe = !edges_share_face(loop[rot], loop[(rot + k) % n]);
      }
      if (safe) {
        polygon.use_centroid = false;
        polygon.edges.resize(n);
        for (std::size_t k = 0; k < n; ++k) polygon.edges[k] = loop[(rot + k) % n];
      }
    }
    if (polygon.use_centroid) polygon.edges = loop;
    polygons.push_back(std::move(polygon));
  }
  return polygons;
}

const std::array<TriangleRow, 256>& mc_table() {
  static const std::array<TriangleRow, 256> table = [] {
    std::array<TriangleRow, 256> t;
    for (int config = 0; config < 256; ++config) t[config] = build_config(config);
    return t;
  }();
  return table;
}

}  // namespace

TriMesh polygonize(const std::vector<double>& values, const GridSpec& grid) {
  grid.validate();
  const int nx = grid.resolution.x(), ny = grid.resolution.y(),
            nz = grid.resolution.z();
  if (values.size() != static_cast<std::size_t>(nx) * ny * nz) {
    throw Error(ErrorCode::ShapeMismatch, "grid value count mismatch");
  }

  auto node_id = [&](int ix, int iy, int iz) {
    return static_cast<std::int64_t>(ix) +
           static_cast<std::int64_t>(nx) *
               (static_cast<std::int64_t>(iy) +
                static_cast<std::int64_t>(ny) * iz);
  };

  const auto& table = mc_table();
  TriMesh mesh;
  std::unordered_map<std::int64_t, int> edge_vertex;

  const int corner_offset[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                   {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

  for (int iz = 0; iz + 1 < nz; ++iz) {
    for (int iy = 0; iy + 1 < ny; ++iy) {
      for (int ix = 0; ix + 1 < nx; ++ix) {
        int config = 0;
        double corner_value[8];
        for (int c = 0; c < 8; ++c) {
          corner_value[c] = values[static_cast<std::size_t>(
              node_id(ix + corner_offset[c][0], iy + corner_offset[c][1],
                      iz + corner_offset[c][2]))];
          if (corner_value[c] < 0.0) config |= 1 << c;
        }
        const TriangleRow& polygons = table[config];
        if (polygons.empty()) continue;

        auto edge_vertex_index = [&](int edge) {
          const int ca = kEdgeCorners[edge][0];
          const int cb = kEdgeCorners[edge][1];
          const int ax = ix + corner_offset[ca][0],
                    ay = iy + corner_offset[ca][1],
                    az = iz + corner_offset[ca][2];
          const int bx = ix + corner_offset[cb][0],
                    by = iy + corner_offset[cb][1],
                    bz = iz + corner_offset[cb][2];
          // Global edge key: base node (lower corner) and axis.
          const bool forward = std::tie(ax, ay, az) < std::tie(bx, by, bz);
          const int axis = ax != bx ? 0 : (ay != by ? 1 : 2);
          const std::int64_t base =
              forward ? node_id(ax, ay, az) : node_id(bx, by, bz);
          const std::int64_t key = 3 * base + axis;
          const auto found = edge_vertex.find(key);
          if (found != edge_vertex.end()) return found->second;

          const double va = corner_value[ca];
          const double vb = corner_value[cb];
          const double t = va / (va - vb);
          const Eigen::Vector3d pa = grid.node(ax, ay, az);
          const Eigen::Vector3d pb = grid.node(bx, by, bz);
          const int index = static_cast<int>(mesh.vertices.size());
          mesh.vertices.push_back(pa + t * (pb - pa));
          edge_vertex.emplace(key, index);
          return index;
        };

        for (const auto& polygon : polygons) {
          std::vector<int> ring(polygon.edges.size());
          for (std::size_t k = 0; k < polygon.edges.size(); ++k) {
            ring[k] = edge_vertex_index(polygon.edges[k]);
          }
          if (polygon.use_centroid) {
            Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
            for (int v : ring) centroid += mesh.vertices[v];
            centroid /= static_cast<double>(ring.size());
            const int center = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(centroid);
            for (std::size_t k = 0; k < ring.size(); ++k) {
              const int a = ring[k];
              const int b = ring[(k + 1) % ring.size()];
              if (a != b) mesh.triangles.push_back({center, a, b});
            }
          } else {
            for (std::size_t k = 2; k < ring.size(); ++k) {
              const int a = ring[0];
              const int b = ring[k - 1];
              const int c = ring[k];
              if (a == b || b == c || a == c) continue;
              mesh.triangles.push_back({a, b, c});
            }
          }
        }
      }
    }
  }
  return mesh;
}

TriMesh marching_cubes(
    const std::function<double(const Eigen::Vector3d&)>& field,
    const GridSpec& grid) {
  grid.validate();
  const int nx = grid.resolution.x(), ny = grid.resolution.y(),
            nz = grid.resolution.z();
  std::vector<double> values(static_cast<std::size_t>(nx) * ny * nz);
  std::size_t at = 0;
  for (int iz = 0; iz < nz; ++iz) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        values[at++] = field(grid.node(ix, iy, iz));
      }
    }
  }
  return polygonize(values, grid);
}

TriMesh extract_mesh(const FieldModel& model, const GridSpec& grid,
                     int workers) {
  const std::vector<double> values = evaluate_field_grid(model, grid, workers);
  TriMesh mesh = polygonize(values, grid);
  for (auto& v : mesh.vertices) v = model.transform.invert(v);
  return mesh;
}

}  // namespace sfr

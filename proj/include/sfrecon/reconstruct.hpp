#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "sfrecon/mesh.hpp"
#include "sfrecon/sign_flip.hpp"
#include "sfrecon/subfields.hpp"
#include "sfrecon/trainer.hpp"

namespace sfr {

/// Regular evaluation lattice: `resolution` node counts per axis (>= 2) over
/// the axis-aligned box [lo, hi].
struct GridSpec {
  Eigen::Vector3i resolution = Eigen::Vector3i(128, 128, 128);
  Eigen::Vector3d lo = Eigen::Vector3d(-1.0, -1.0, -1.0);
  Eigen::Vector3d hi = Eigen::Vector3d(1.0, 1.0, 1.0);

  void validate() const;
  Eigen::Vector3d step() const;
  Eigen::Vector3d node(int ix, int iy, int iz) const;

  /// Bounding box of the union of effective cubes, inflated by `inflate`
  /// per axis, at a uniform node resolution.
  static GridSpec cover_model(const FieldModel& model, int resolution,
                              double inflate = 0.05);
};

/// Boundary-vanishing blend weights for a point covered by all the listed
/// cubes: |cheb(q - c_j) - a_j| normalized over the list. Weights sum to 1;
/// a weight hits 0 exactly on its cube's boundary. Denominators under 1e-15
/// fall back to uniform. Throws NotInsideCube if q is outside a listed cube.
std::vector<double> interpolation_weights(
    const Eigen::Vector3d& q, const std::vector<const Subfield*>& cubes);

/// Positive background value added outside the cube union: one tenth of the
/// smallest effective half-extent.
double background_offset(const std::vector<Subfield>& subfields);

/// Euclidean distance from q to the nearest effective cube (0 inside).
double exterior_cube_distance(const std::vector<Subfield>& subfields,
                              const Eigen::Vector3d& q);

/// Signed global field: inside the cube union, the weighted blend of
/// sign * (r a / R) * local field over all covering subfields; outside, the
/// exterior distance plus the positive background offset.
double blended_field(const std::vector<Subfield>& subfields, double R,
                     const LocalFieldFn& field, const Eigen::Vector3d& q);

/// blended_field with the trained shared model, in the normalized frame.
double global_sdf(const FieldModel& model, const Eigen::Vector3d& q);

/// Batched grid evaluation of global_sdf (per-subfield batching, fanned out
/// over workers by grid slab).
std::vector<double> evaluate_field_grid(const FieldModel& model,
                                        const GridSpec& grid, int workers);

/// Zero iso-surface of a node-value lattice. Cells triangulate from a
/// 256-way configuration table built from per-face contours with a fixed
/// rule on ambiguous faces, so adjacent cells always agree and the output
/// is closed wherever the field changes sign strictly inside the grid.
/// Vertices interpolate linearly along crossing edges and are welded.
TriMesh polygonize(const std::vector<double>& values, const GridSpec& grid);

/// Evaluates an arbitrary field on the grid nodes and polygonizes it.
TriMesh marching_cubes(
    const std::function<double(const Eigen::Vector3d&)>& field,
    const GridSpec& grid);

/// Full inference: evaluate the model field over the grid, extract the zero
/// set and map vertices back to world coordinates.
TriMesh extract_mesh(const FieldModel& model, const GridSpec& grid,
                     int workers);

}  // namespace sfr

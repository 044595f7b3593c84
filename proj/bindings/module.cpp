// Python bindings for the reconstruction pipeline: cloud generation and IO,
// training, sign resolution, iso-surface extraction and the evaluation
// metrics. Point sets cross the boundary as (n, 3) float64 arrays.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "sfrecon/errors.hpp"
#include "sfrecon/metrics.hpp"
#include "sfrecon/mlp.hpp"
#include "sfrecon/parallel.hpp"
#include "sfrecon/point_cloud.hpp"
#include "sfrecon/reconstruct.hpp"
#include "sfrecon/rng.hpp"
#include "sfrecon/sign_flip.hpp"
#include "sfrecon/sphere_fit.hpp"
#include "sfrecon/trainer.hpp"

namespace py = pybind11;
using namespace sfr;

namespace {

Eigen::MatrixXd to_matrix(const std::vector<Eigen::Vector3d>& points) {
  Eigen::MatrixXd out(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.row(i) = points[i].transpose();
  }
  return out;
}

std::vector<Eigen::Vector3d> to_points(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.cols() != 3) {
    throw py::value_error("expected an (n, 3) array of points");
  }
  std::vector<Eigen::Vector3d> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i).transpose();
  return out;
}

Eigen::MatrixXi to_faces_matrix(const std::vector<std::array<int, 3>>& tris) {
  Eigen::MatrixXi out(tris.size(), 3);
  for (std::size_t i = 0; i < tris.size(); ++i) {
    out(static_cast<Eigen::Index>(i), 0) = tris[i][0];
    out(static_cast<Eigen::Index>(i), 1) = tris[i][1];
    out(static_cast<Eigen::Index>(i), 2) = tris[i][2];
  }
  return out;
}

TriMesh to_mesh(const Eigen::Ref<const Eigen::MatrixXd>& vertices,
                const Eigen::Ref<const Eigen::MatrixXi>& faces) {
  if (faces.cols() != 3) {
    throw py::value_error("expected an (m, 3) array of triangle indices");
  }
  TriMesh mesh;
  mesh.vertices = to_points(vertices);
  mesh.triangles.resize(faces.rows());
  for (Eigen::Index i = 0; i < faces.rows(); ++i) {
    mesh.triangles[i] = {faces(i, 0), faces(i, 1), faces(i, 2)};
  }
  return mesh;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Surface reconstruction from un-oriented point clouds via "
            "sign-agnostic local implicit fields";

  py::register_exception<Error>(m, "SfreconError");

  py::class_<TrainingConfig>(m, "TrainingConfig")
      .def(py::init<>())
      .def_static("desk", &TrainingConfig::desk)
      .def_static("paper", &TrainingConfig::paper)
      .def_readwrite("n_subfields", &TrainingConfig::subfield_count)
      .def_readwrite("latent_dim", &TrainingConfig::latent_dim)
      .def_readwrite("widths", &TrainingConfig::widths)
      .def_readwrite("sphere_scale", &TrainingConfig::sphere_scale)
      .def_readwrite("alpha", &TrainingConfig::alpha)
      .def_readwrite("iterations", &TrainingConfig::iterations)
      .def_readwrite("lr_theta_z", &TrainingConfig::lr_theta_z)
      .def_readwrite("lr_c_a", &TrainingConfig::lr_c_a)
      .def_readwrite("decay_factor", &TrainingConfig::decay_factor)
      .def_readwrite("decay_iters", &TrainingConfig::decay_iters)
      .def_readwrite("sigma_z_init", &TrainingConfig::sigma_z_init)
      .def_readwrite("per_point_samples", &TrainingConfig::per_point_samples)
      .def_readwrite("knn_k", &TrainingConfig::knn_k)
      .def_readwrite("seed", &TrainingConfig::seed)
      .def_readwrite("refit_interval", &TrainingConfig::refit_interval)
      .def_readwrite("batch_points", &TrainingConfig::batch_points)
      .def_readwrite("log_interval", &TrainingConfig::log_interval)
      .def_property(
          "lambda_nuclear",
          [](const TrainingConfig& c) { return c.weights.nuclear; },
          [](TrainingConfig& c, double v) { c.weights.nuclear = v; })
      .def_property(
          "lambda_volume",
          [](const TrainingConfig& c) { return c.weights.volume; },
          [](TrainingConfig& c, double v) { c.weights.volume = v; })
      .def_property(
          "lambda_placing",
          [](const TrainingConfig& c) { return c.weights.placing; },
          [](TrainingConfig& c, double v) { c.weights.placing = v; })
      .def_property(
          "lambda_covering",
          [](const TrainingConfig& c) { return c.weights.covering; },
          [](TrainingConfig& c, double v) { c.weights.covering = v; })
      .def("validate", &TrainingConfig::validate)
      .def("override", [](TrainingConfig& c, const std::string& kv) {
        apply_config_override(c, kv);
      });

  py::class_<FieldModel>(m, "FieldModel")
      .def_property_readonly("n_subfields",
                             [](const FieldModel& model) {
                               return model.subfields.size();
                             })
      .def_property_readonly("signs",
                             [](const FieldModel& model) {
                               std::vector<int> signs;
                               for (const auto& sf : model.subfields) {
                                 signs.push_back(sf.sign);
                               }
                               return signs;
                             })
      .def_property_readonly("centers",
                             [](const FieldModel& model) {
                               std::vector<Eigen::Vector3d> centers;
                               for (const auto& sf : model.subfields) {
                                 centers.push_back(sf.center);
                               }
                               return to_matrix(centers);
                             })
      .def_property_readonly("extents",
                             [](const FieldModel& model) {
                               Eigen::VectorXd extents(model.subfields.size());
                               for (std::size_t i = 0; i < model.subfields.size(); ++i) {
                                 extents(i) = model.subfields[i].extent;
                               }
                               return extents;
                             })
      .def("global_sdf",
           [](const FieldModel& model,
              const Eigen::Ref<const Eigen::MatrixXd>& queries) {
             const auto points = to_points(queries);
             Eigen::VectorXd values(points.size());
             for (std::size_t i = 0; i < points.size(); ++i) {
               values(i) = global_sdf(model, points[i]);
             }
             return values;
           },
           py::arg("queries"),
           "Signed global field at (n, 3) query points, normalized frame")
      .def("save", &save_model, py::arg("path"))
      .def_static("load", &load_model, py::arg("path"));

  m.def("sample_synthetic",
        [](const std::string& shape, int n, double sigma, std::uint64_t seed) {
          return to_matrix(
              sample_synthetic(ShapeSpec::parse(shape), n, sigma, seed).points);
        },
        py::arg("shape"), py::arg("n"), py::arg("sigma") = 0.0,
        py::arg("seed") = 0,
        "Area-uniform samples of 'sphere:r', 'torus:R,r' or 'box:hx,hy,hz'");

  m.def("load_points",
        [](const std::string& path) {
          return to_matrix(load_points(path, format_from_path(path)).points);
        },
        py::arg("path"));

  m.def("save_points",
        [](const Eigen::Ref<const Eigen::MatrixXd>& points,
           const std::string& path) {
          PointCloud cloud;
          cloud.points = to_points(points);
          save_points(cloud, path, format_from_path(path));
        },
        py::arg("points"), py::arg("path"));

  m.def("normalize_to_unit_sphere",
        [](const Eigen::Ref<const Eigen::MatrixXd>& points) {
          PointCloud cloud;
          cloud.points = to_points(points);
          const auto [normalized, transform] = normalize_to_unit_sphere(cloud);
          return py::make_tuple(to_matrix(normalized.points), transform.offset,
                                transform.scale);
        },
        py::arg("points"), "Returns (normalized_points, offset, scale)");

  m.def("farthest_point_sampling",
        [](const Eigen::Ref<const Eigen::MatrixXd>& points, int count) {
          PointCloud cloud;
          cloud.points = to_points(points);
          return farthest_point_sampling(cloud, count);
        },
        py::arg("points"), py::arg("count"));

  m.def("nearest_distances",
        [](const Eigen::Ref<const Eigen::MatrixXd>& points,
           const Eigen::Ref<const Eigen::MatrixXd>& queries) {
          const KdTree index(to_points(points));
          const auto qs = to_points(queries);
          Eigen::VectorXd out(qs.size());
          for (std::size_t i = 0; i < qs.size(); ++i) {
            out(i) = index.nearest_distance(qs[i]);
          }
          return out;
        },
        py::arg("points"), py::arg("queries"),
        "Unsigned distance from each query to the point set");

  m.def("fit_sphere",
        [](const Eigen::Ref<const Eigen::MatrixXd>& points) {
          const SphereFit fit = fit_sphere(to_points(points));
          return py::make_tuple(fit.center, fit.radius);
        },
        py::arg("points"), "Least-squares sphere: (center, radius)");

  m.def("train",
        [](const Eigen::Ref<const Eigen::MatrixXd>& points,
           const TrainingConfig& config, const py::object& progress) {
          PointCloud cloud;
          cloud.points = to_points(points);
          if (progress.is_none()) {
            py::gil_scoped_release release;
            return train(cloud, config);
          }
          return train(cloud, config, [&](const TrainEvent& event) {
            progress(event.iteration, event.loss.total, event.loss.modeling);
          });
        },
        py::arg("points"), py::arg("config") = TrainingConfig::desk(),
        py::arg("progress") = py::none(),
        "Optimizes the shared model and subfields on the given cloud");

  m.def("assign_signs",
        [](FieldModel& model, int edge_samples, std::uint64_t seed) {
          SignGraph graph = compute_sign_graph(model, edge_samples, seed);
          apply_signs(model, assign_signs(graph));
          return model.subfields.empty() ? std::vector<int>{} : [&] {
            std::vector<int> signs;
            for (const auto& sf : model.subfields) signs.push_back(sf.sign);
            return signs;
          }();
        },
        py::arg("model"), py::arg("edge_samples") = 128, py::arg("seed") = 0,
        "Resolves per-subfield signs by MST propagation; returns the signs");

  m.def("extract_mesh",
        [](const FieldModel& model, int resolution) {
          py::gil_scoped_release release;
          const GridSpec grid = GridSpec::cover_model(model, resolution);
          const TriMesh mesh = extract_mesh(model, grid, worker_count());
          py::gil_scoped_acquire acquire;
          return py::make_tuple(to_matrix(mesh.vertices),
                                to_faces_matrix(mesh.triangles));
        },
        py::arg("model"), py::arg("resolution") = 128,
        "Zero-surface triangle mesh in world coordinates: (V, F)");

  m.def("reconstruct",
        [](const Eigen::Ref<const Eigen::MatrixXd>& points,
           const TrainingConfig& config, int resolution) {
          PointCloud cloud;
          cloud.points = to_points(points);
          py::gil_scoped_release release;
          FieldModel model = train(cloud, config);
          SignGraph graph =
              compute_sign_graph(model, 128, derive_seed(config.seed, 0xf11b));
          apply_signs(model, assign_signs(graph));
          const GridSpec grid = GridSpec::cover_model(model, resolution);
          const TriMesh mesh = extract_mesh(model, grid, worker_count());
          py::gil_scoped_acquire acquire;
          return py::make_tuple(to_matrix(mesh.vertices),
                                to_faces_matrix(mesh.triangles));
        },
        py::arg("points"), py::arg("config") = TrainingConfig::desk(),
        py::arg("resolution") = 128,
        "Full pipeline: train, resolve signs, extract the mesh");

  m.def("export_mesh",
        [](const Eigen::Ref<const Eigen::MatrixXd>& vertices,
           const Eigen::Ref<const Eigen::MatrixXi>& faces,
           const std::string& path) {
          export_mesh(to_mesh(vertices, faces), path,
                      mesh_format_from_path(path));
        },
        py::arg("vertices"), py::arg("faces"), py::arg("path"));

  m.def("load_mesh",
        [](const std::string& path) {
          const TriMesh mesh = load_mesh(path, mesh_format_from_path(path));
          return py::make_tuple(to_matrix(mesh.vertices),
                                to_faces_matrix(mesh.triangles));
        },
        py::arg("path"));

  m.def("sample_mesh_surface",
        [](const Eigen::Ref<const Eigen::MatrixXd>& vertices,
           const Eigen::Ref<const Eigen::MatrixXi>& faces, int count,
           std::uint64_t seed) {
          const SurfaceSamples samples =
              sample_mesh_surface(to_mesh(vertices, faces), count, seed);
          return py::make_tuple(to_matrix(samples.points),
                                to_matrix(samples.normals));
        },
        py::arg("vertices"), py::arg("faces"), py::arg("count"),
        py::arg("seed") = 0, "Area-uniform samples: (points, face normals)");

  m.def("chamfer_distance",
        [](const Eigen::Ref<const Eigen::MatrixXd>& a,
           const Eigen::Ref<const Eigen::MatrixXd>& b) {
          return chamfer_distance(to_points(a), to_points(b));
        },
        py::arg("a"), py::arg("b"));

  m.def("f_score",
        [](const Eigen::Ref<const Eigen::MatrixXd>& a,
           const Eigen::Ref<const Eigen::MatrixXd>& b, double threshold) {
          return f_score(to_points(a), to_points(b), threshold);
        },
        py::arg("a"), py::arg("b"), py::arg("threshold") = 0.005);

  m.def("normal_consistency",
        [](const Eigen::Ref<const Eigen::MatrixXd>& points_a,
           const Eigen::Ref<const Eigen::MatrixXd>& normals_a,
           const Eigen::Ref<const Eigen::MatrixXd>& points_b,
           const Eigen::Ref<const Eigen::MatrixXd>& normals_b) {
          SurfaceSamples a, b;
          a.points = to_points(points_a);
          a.normals = to_points(normals_a);
          b.points = to_points(points_b);
          b.normals = to_points(normals_b);
          return normal_consistency(a, b);
        },
        py::arg("points_a"), py::arg("normals_a"), py::arg("points_b"),
        py::arg("normals_b"));

  m.def("evaluate_meshes",
        [](const Eigen::Ref<const Eigen::MatrixXd>& va,
           const Eigen::Ref<const Eigen::MatrixXi>& fa,
           const Eigen::Ref<const Eigen::MatrixXd>& vb,
           const Eigen::Ref<const Eigen::MatrixXi>& fb, double threshold,
           int samples, std::uint64_t seed) {
          const MetricReport report = evaluate_meshes(
              to_mesh(va, fa), to_mesh(vb, fb), threshold, samples, seed);
          py::dict out;
          out["cd"] = report.cd;
          out["nc"] = report.nc;
          out["f"] = report.fscore;
          out["threshold"] = report.threshold;
          out["samples"] = report.sample_count;
          return out;
        },
        py::arg("vertices_a"), py::arg("faces_a"), py::arg("vertices_b"),
        py::arg("faces_b"), py::arg("threshold") = 0.005,
        py::arg("samples") = 100000, py::arg("seed") = 0);
}

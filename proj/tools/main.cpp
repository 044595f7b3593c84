// Command-line pipeline: generate synthetic clouds, reconstruct surfaces,
// evaluate reconstructions and probe the geometric initialization.
//
// Exit codes: 0 ok, 2 usage, 3 I/O, 4 numeric failure, 5 empty result.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "sfrecon/errors.hpp"
#include "sfrecon/metrics.hpp"
#include "sfrecon/mlp.hpp"
#include "sfrecon/parallel.hpp"
#include "sfrecon/point_cloud.hpp"
#include "sfrecon/reconstruct.hpp"
#include "sfrecon/rng.hpp"
#include "sfrecon/sign_flip.hpp"
#include "sfrecon/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitEmpty = 5;

int exit_code_for(const sfr::Error& e) {
  switch (e.code()) {
    case sfr::ErrorCode::FileNotFound:
    case sfr::ErrorCode::IoError:
    case sfr::ErrorCode::ParseError:
    case sfr::ErrorCode::VersionMismatch:
    case sfr::ErrorCode::EmptyCloud:
      return kExitIo;
    case sfr::ErrorCode::NonFiniteLoss:
      return kExitNumeric;
    default:
      return kExitUsage;
  }
}

Eigen::Vector3d parse_vec3(const std::string& text) {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  std::stringstream ss(text);
  std::string item;
  int k = 0;
  while (std::getline(ss, item, ',') && k < 3) v(k++) = std::stod(item);
  if (k != 3) {
    throw sfr::Error(sfr::ErrorCode::BadConfig,
                     "expected x,y,z triple, got: " + text);
  }
  return v;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

struct GenArgs {
  std::string shape = "sphere:1";
  int n = 5000;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen(const GenArgs& args) {
  const sfr::ShapeSpec spec = sfr::ShapeSpec::parse(args.shape);
  const sfr::PointCloud cloud =
      sfr::sample_synthetic(spec, args.n, args.sigma, args.seed);
  sfr::save_points(cloud, args.out, sfr::format_from_path(args.out));
  std::printf("wrote %zu points  shape=%s  sigma=%g  -> %s\n", cloud.size(),
              spec.describe().c_str(), args.sigma, args.out.c_str());
  return kExitOk;
}

struct ReconstructArgs {
  std::string input;
  std::string out_mesh;
  std::string checkpoint;
  std::string config_path;
  std::string log_path;
  std::string graph_dump;
  std::string profile = "desk";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int resolution = 128;
  int edge_samples = 128;
  int verbosity = 0;
};

int run_reconstruct(const ReconstructArgs& args) {
  sfr::TrainingConfig config;
  if (args.profile == "desk") {
    config = sfr::TrainingConfig::desk();
  } else if (args.profile == "paper") {
    config = sfr::TrainingConfig::paper();
  } else {
    throw sfr::Error(sfr::ErrorCode::BadConfig,
                     "unknown profile: " + args.profile);
  }
  if (!args.config_path.empty()) {
    config = sfr::parse_config_file(args.config_path, config);
  }
  for (const auto& kv : args.overrides) sfr::apply_config_override(config, kv);
  if (args.seed) config.seed = *args.seed;

  const sfr::PointCloud cloud =
      sfr::load_points(args.input, sfr::format_from_path(args.input));

  std::string log_path = args.log_path;
  if (log_path.empty()) log_path = args.out_mesh + ".train.csv";
  std::ofstream log(log_path);
  if (!log) {
    throw sfr::Error(sfr::ErrorCode::IoError, "cannot write " + log_path);
  }
  log << sfr::csv_header() << "\n";

  sfr::TrainEvent last{};
  const auto sink = [&](const sfr::TrainEvent& event) {
    last = event;
    log << sfr::csv_row(event) << "\n";
    if (args.verbosity > 0) {
      std::fprintf(stderr, "iter %lld  total %.6g  modeling %.6g\n",
                   event.iteration, event.loss.total, event.loss.modeling);
    }
  };

  sfr::FieldModel model = sfr::train(cloud, config, sink);

  sfr::SignGraph graph = sfr::compute_sign_graph(
      model, args.edge_samples, sfr::derive_seed(config.seed, 0xf11b));
  sfr::apply_signs(model, sfr::assign_signs(graph));
  if (!args.graph_dump.empty()) sfr::write_graph_dump(graph, args.graph_dump);

  if (!args.checkpoint.empty()) sfr::save_model(model, args.checkpoint);

  const sfr::GridSpec grid = sfr::GridSpec::cover_model(model, args.resolution);
  const sfr::TriMesh mesh =
      sfr::extract_mesh(model, grid, sfr::worker_count());
  if (mesh.empty()) {
    std::fprintf(stderr, "extraction produced an empty mesh\n");
    return kExitEmpty;
  }
  sfr::export_mesh(mesh, args.out_mesh, sfr::mesh_format_from_path(args.out_mesh));

  std::printf("final loss: total=%.6g modeling=%.6g nuclear=%.6g volume=%.6g "
              "placing=%.6g covering=%.6g\n",
              last.loss.total, last.loss.modeling, last.loss.nuclear,
              last.loss.volume, last.loss.placing, last.loss.covering);
  std::printf("mesh: %zu vertices, %zu triangles -> %s\n",
              mesh.vertices.size(), mesh.triangles.size(),
              args.out_mesh.c_str());
  if (!args.checkpoint.empty()) {
    std::printf("checkpoint: %s\n", args.checkpoint.c_str());
  }
  std::printf("training log: %s\n", log_path.c_str());
  return kExitOk;
}

struct EvaluateArgs {
  std::string mesh_a;
  std::string mesh_b;
  double threshold = 0.005;
  int samples = 100000;
  std::uint64_t seed = 0;
  std::string csv;
};

int run_evaluate(const EvaluateArgs& args) {
  const sfr::TriMesh a =
      sfr::load_mesh(args.mesh_a, sfr::mesh_format_from_path(args.mesh_a));
  const sfr::TriMesh b =
      sfr::load_mesh(args.mesh_b, sfr::mesh_format_from_path(args.mesh_b));
  const sfr::MetricReport report =
      sfr::evaluate_meshes(a, b, args.threshold, args.samples, args.seed);
  std::printf("cd=%.8g nc=%.8g f=%.8g threshold=%g samples=%d\n", report.cd,
              report.nc, report.fscore, report.threshold, report.sample_count);
  if (!args.csv.empty()) {
    std::ofstream out(args.csv);
    if (!out) {
      throw sfr::Error(sfr::ErrorCode::IoError, "cannot write " + args.csv);
    }
    out << "cd,nc,f,threshold,samples\n";
    out << report.cd << ',' << report.nc << ',' << report.fscore << ','
        << report.threshold << ',' << report.sample_count << "\n";
  }
  return kExitOk;
}

struct CheckInitArgs {
  std::string widths = "256,256,256,256,256,256";
  int latent_dim = 64;
  double radius = 1.0;
  std::string center = "0,0,0";
  double sigma_z = 1e-3;
  int trials = 1000;
  std::uint64_t seed = 0;
};

int run_check_init(const CheckInitArgs& args) {
  const std::vector<int> widths = parse_int_list(args.widths);
  const Eigen::Vector3d center = parse_vec3(args.center);

  sfr::MlpParams params = sfr::mlp_new(widths, args.latent_dim, args.seed);
  sfr::geometric_init(params, args.radius, center,
                      sfr::derive_seed(args.seed, 1));

  const double at_center =
      sfr::mlp_eval(params, center, Eigen::VectorXd::Zero(args.latent_dim));
  std::printf("center value: %.17g (expected %.17g, |err| %.3g)\n", at_center,
              -args.radius, std::abs(at_center + args.radius));

  sfr::Rng rng(sfr::derive_seed(args.seed, 2));
  double mean_err = 0.0, max_err = 0.0;
  Eigen::VectorXd z(args.latent_dim);
  for (int t = 0; t < args.trials; ++t) {
    const Eigen::Vector3d p =
        2.0 * std::cbrt(rng.uniform()) * rng.unit_vector();
    for (int k = 0; k < args.latent_dim; ++k) {
      z(k) = args.sigma_z * rng.normal();
    }
    const double got = sfr::mlp_eval(params, p, z);
    const double want = (p - center).norm() - args.radius;
    const double err = std::abs(got - want);
    mean_err += err;
    max_err = std::max(max_err, err);
  }
  mean_err /= std::max(1, args.trials);
  std::printf("sphere approximation over %d points in the radius-2 ball:\n",
              args.trials);
  std::printf("  mean |f - sdf| = %.6g\n  max  |f - sdf| = %.6g\n", mean_err,
              max_err);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud surface reconstruction with local implicit fields"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand(
      "gen", "Sample a synthetic shape into a point-cloud file");
  gen_cmd->add_option("--shape", gen.shape,
                      "sphere:r | torus:R,r | box:hx,hy,hz");
  gen_cmd->add_option("--n", gen.n, "number of points");
  gen_cmd->add_option("--sigma", gen.sigma,
                      "Gaussian noise level, relative to the bounding radius");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--out", gen.out, "output file (.xyz/.ply/.obj)")
      ->required();

  ReconstructArgs rec;
  auto* rec_cmd = app.add_subcommand(
      "reconstruct", "Fit the implicit model to a cloud and extract a mesh");
  rec_cmd->add_option("--in", rec.input, "input point cloud")->required();
  rec_cmd->add_option("--out", rec.out_mesh, "output mesh (.obj/.ply)")
      ->required();
  rec_cmd->add_option("--checkpoint", rec.checkpoint, "model checkpoint path");
  rec_cmd->add_option("--config", rec.config_path, "key=value config file");
  rec_cmd->add_option("--set", rec.overrides,
                      "config override key=value (repeatable)");
  rec_cmd->add_option("--profile", rec.profile, "desk | paper");
  rec_cmd->add_option("--seed", rec.seed, "overrides the config seed");
  rec_cmd->add_option("--resolution", rec.resolution,
                      "marching-cubes grid nodes per axis");
  rec_cmd->add_option("--log", rec.log_path, "training CSV log path");
  rec_cmd->add_option("--graph-dump", rec.graph_dump,
                      "write the sign graph as text");
  rec_cmd->add_option("--edge-samples", rec.edge_samples,
                      "samples per overlap edge");
  rec_cmd->add_flag("-v,--verbose", rec.verbosity, "progress to stderr");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Chamfer distance, normal consistency and F-score");
  eval_cmd->add_option("--mesh-a", eval.mesh_a, "reconstructed mesh")
      ->required();
  eval_cmd->add_option("--mesh-b", eval.mesh_b, "reference mesh")->required();
  eval_cmd->add_option("--threshold", eval.threshold, "F-score threshold");
  eval_cmd->add_option("--samples", eval.samples, "surface samples per mesh");
  eval_cmd->add_option("--seed", eval.seed, "sampling seed");
  eval_cmd->add_option("--csv", eval.csv, "also write one CSV row here");

  CheckInitArgs chk;
  auto* chk_cmd = app.add_subcommand(
      "check-init", "Probe the spherical geometric initialization");
  chk_cmd->add_option("--widths", chk.widths, "comma-separated layer widths");
  chk_cmd->add_option("--latent-dim", chk.latent_dim, "latent dimension");
  chk_cmd->add_option("--radius", chk.radius, "sphere radius");
  chk_cmd->add_option("--center", chk.center, "sphere center x,y,z");
  chk_cmd->add_option("--sigma-z", chk.sigma_z, "latent init stddev");
  chk_cmd->add_option("--trials", chk.trials, "Monte-Carlo sample count");
  chk_cmd->add_option("--seed", chk.seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen);
    if (rec_cmd->parsed()) return run_reconstruct(rec);
    if (eval_cmd->parsed()) return run_evaluate(eval);
    if (chk_cmd->parsed()) return run_check_init(chk);
  } catch (const sfr::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", sfr::to_string(e.code()),
                 e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sfrecon/losses.hpp"
#include "sfrecon/mlp.hpp"
#include "sfrecon/point_cloud.hpp"
#include "sfrecon/subfields.hpp"

namespace sfr {

/// Everything the optimization loop needs, mirrored one-to-one by the
/// key=value config file (see parse_config_file).
struct TrainingConfig {
  int subfield_count = 32;                         // N
  int latent_dim = 64;                             // d
  std::vector<int> widths = {256, 256, 256, 256, 256, 256};
  double sphere_scale = 1.0;                       // R
  double alpha = 1.5;
  long long iterations = 3000;
  double lr_theta_z = 1e-3;
  double lr_c_a = 3e-4;
  double decay_factor = 0.2;
  std::vector<long long> decay_iters = {2000, 2600};
  LossWeights weights;
  double sigma_z_init = 1e-3;
  int per_point_samples = 8;
  int knn_k = 50;
  std::uint64_t seed = 0;
  long long refit_interval = 500;
  // Member points drawn per subfield per iteration; 0 uses every member.
  // Keeps desk-scale iteration cost bounded on large clouds.
  int batch_points = 4;
  long long log_interval = 50;

  /// Throws BadConfig when a field is out of its documented range.
  void validate() const;

  /// Desk-scale defaults: minutes on a CPU.
  static TrainingConfig desk();
  /// The published large-run settings: 40k iterations with staged decays.
  static TrainingConfig paper();

  /// Learning rates at an iteration under the staged decay schedule.
  double lr_theta_z_at(long long iteration) const;
  double lr_c_a_at(long long iteration) const;
};

/// Optimizer snapshot carried inside checkpoints so an interrupted run can
/// resume on the exact trajectory.
struct TrainState {
  long long iteration = 0;
  AdamState theta;
  AdamState latents;
  AdamState centers;
  AdamState extents;
};

/// The trained artifact: shared model, subfields, the cloud normalization
/// and the config it was produced with.
struct FieldModel {
  MlpParams theta;
  std::vector<Subfield> subfields;
  GlobalTransform transform;
  TrainingConfig config;
  std::optional<TrainState> train_state;
};

struct TrainEvent {
  long long iteration = 0;
  LossBreakdown loss;
  double lr_theta_z = 0.0;
  double lr_c_a = 0.0;
};

using ProgressSink = std::function<void(const TrainEvent&)>;

/// Runs the full optimization: normalize, place subfields, fit spheres,
/// geometric init against the origin radius-R sphere, then the Adam loop
/// with per-iteration query resampling and periodic sphere refits.
/// Deterministic per config.seed. Throws NonFiniteLoss (with the iteration
/// in the message) if the objective diverges.
FieldModel train(const PointCloud& cloud, const TrainingConfig& config,
                 const ProgressSink& sink = {});

/// Continues a checkpointed run (model.train_state required) up to
/// model.config.iterations. Produces the same trajectory the uninterrupted
/// run would have.
void resume_train(FieldModel& model, const PointCloud& cloud,
                  const ProgressSink& sink = {});

/// Versioned binary checkpoint; bit-stable round trip.
void save_model(const FieldModel& model, const std::string& path);
FieldModel load_model(const std::string& path);

/// key=value config file covering every TrainingConfig field. Unknown keys
/// are rejected. Lists are comma-separated.
TrainingConfig parse_config_file(const std::string& path,
                                 TrainingConfig base = TrainingConfig::desk());

/// Applies one "key=value" override; throws BadConfig for unknown keys.
void apply_config_override(TrainingConfig& config, const std::string& kv);

/// One CSV row per event: iteration plus the six loss fields.
std::string csv_header();
std::string csv_row(const TrainEvent& event);

}  // namespace sfr

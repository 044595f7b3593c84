#include "sfrecon/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sfrecon/errors.hpp"
#include "sfrecon/parallel.hpp"
#include "sfrecon/rng.hpp"

namespace sfr {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::BadConfig, "config: " + what);
}

}  // namespace

void TrainingConfig::validate() const {
  require(subfield_count >= 2, "subfield_count must be >= 2");
  require(latent_dim >= 3, "latent_dim must be >= 3");
  require(widths.size() >= 2, "at least 2 layers required");
  require(widths[0] >= 3, "first layer width must be >= 3");
  for (int w : widths) require(w >= 1, "layer widths must be >= 1");
  require(sphere_scale > 0.0, "sphere_scale must be > 0");
  require(alpha >= 1.0, "alpha must be >= 1");
  require(iterations >= 0, "iterations must be >= 0");
  require(lr_theta_z > 0.0 && lr_c_a > 0.0, "learning rates must be > 0");
  require(decay_factor > 0.0, "decay_factor must be > 0");
  for (std::size_t i = 0; i < decay_iters.size(); ++i) {
    require(decay_iters[i] <= iterations, "decay iterations must be <= iterations");
    if (i > 0) {
      require(decay_iters[i] > decay_iters[i - 1],
              "decay iterations must be strictly increasing");
    }
  }
  require(weights.nuclear >= 0.0 && weights.volume >= 0.0 &&
              weights.placing >= 0.0 && weights.covering >= 0.0,
          "penalty weights must be >= 0");
  require(sigma_z_init > 0.0, "sigma_z_init must be > 0");
  require(per_point_samples >= 1, "per_point_samples must be >= 1");
  require(knn_k >= 1, "knn_k must be >= 1");
  require(refit_interval >= 0, "refit_interval must be >= 0");
  require(batch_points >= 0, "batch_points must be >= 0");
  require(log_interval >= 1, "log_interval must be >= 1");
}

TrainingConfig TrainingConfig::desk() { return TrainingConfig{}; }

TrainingConfig TrainingConfig::paper() {
  TrainingConfig cfg;
  cfg.iterations = 40000;
  cfg.decay_iters = {20000, 30000, 35000, 38000};
  cfg.weights.volume = 3e-4;
  cfg.weights.placing = 1.0;
  cfg.weights.covering = 1.0;
  cfg.refit_interval = 500;
  return cfg;
}

namespace {

double decayed(double base, double factor,
               const std::vector<long long>& marks, long long iteration) {
  double lr = base;
  for (long long mark : marks) {
    if (iteration >= mark) lr *= factor;
  }
  return lr;
}

}  // namespace

double TrainingConfig::lr_theta_z_at(long long iteration) const {
  return decayed(lr_theta_z, decay_factor, decay_iters, iteration);
}

double TrainingConfig::lr_c_a_at(long long iteration) const {
  return decayed(lr_c_a, decay_factor, decay_iters, iteration);
}

namespace {

void train_loop(FieldModel& model, const PointCloud& cloud,
                const ProgressSink& sink) {
  const TrainingConfig& cfg = model.config;
  const auto n_subfields = static_cast<Eigen::Index>(model.subfields.size());
  const int workers = worker_count();

  const KdTree index(cloud.points);
  const int knn = std::min<int>(cfg.knn_k, static_cast<int>(cloud.size()) - 1);
  const std::vector<double> sigmas = compute_point_sigmas(index, knn);

  TrainState& state = *model.train_state;
  for (long long iter = state.iteration; iter < cfg.iterations; ++iter) {
    update_membership(model.subfields, cloud);
    if (cfg.refit_interval > 0 && iter > 0 && iter % cfg.refit_interval == 0) {
      refit_spheres(model.subfields, cloud);
    }

    // Queries are redrawn every iteration from per-(iteration, subfield)
    // streams, so the trajectory is independent of the worker count.
    std::vector<std::vector<QuerySample>> batches(n_subfields);
    parallel_chunks(static_cast<std::size_t>(n_subfields), workers,
                    [&](std::size_t begin, std::size_t end, int) {
      for (std::size_t i = begin; i < end; ++i) {
        const Subfield& sf = model.subfields[i];
        if (sf.extent <= 0.0 || sf.members.empty()) continue;  // frozen
        Rng rng(derive_seed(cfg.seed, 0x51a0 + iter, i));
        batches[i] = sample_queries(sf, cloud, index, sigmas,
                                    cfg.per_point_samples, cfg.sphere_scale,
                                    rng, cfg.batch_points);
        for (auto& sample : batches[i]) sample.subfield = static_cast<int>(i);
      }
    });

    FieldGrads grads;
    const LossBreakdown loss =
        combined_loss(model.theta, model.subfields, cloud, batches,
                      cfg.weights, cfg.sphere_scale, &grads, workers);
    if (!std::isfinite(loss.total)) {
      throw Error(ErrorCode::NonFiniteLoss,
                  "loss became non-finite at iteration " + std::to_string(iter));
    }

    // Early |.| kinks can spike on degenerate subfields; clip globally.
    const double grad_norm = std::sqrt(grads.squared_norm());
    if (grad_norm > 10.0) grads.scale(10.0 / grad_norm);

    const double lr_tz = cfg.lr_theta_z_at(iter);
    const double lr_ca = cfg.lr_c_a_at(iter);

    adam_step(state.theta, model.theta, grads.theta, lr_tz);

    Eigen::MatrixXd zmat(n_subfields, model.theta.latent_dim());
    Eigen::MatrixXd cmat(n_subfields, 3);
    Eigen::VectorXd avec(n_subfields);
    for (Eigen::Index i = 0; i < n_subfields; ++i) {
      zmat.row(i) = model.subfields[i].latent.transpose();
      cmat.row(i) = model.subfields[i].center.transpose();
      avec(i) = model.subfields[i].extent;
    }
    adam_step_flat(state.latents, zmat.data(), grads.latents.data(),
                   zmat.size(), lr_tz);
    adam_step_flat(state.centers, cmat.data(), grads.centers.data(),
                   cmat.size(), lr_ca);
    adam_step_flat(state.extents, avec.data(), grads.extents.data(),
                   avec.size(), lr_ca);
    for (Eigen::Index i = 0; i < n_subfields; ++i) {
      model.subfields[i].latent = zmat.row(i).transpose();
      model.subfields[i].center = cmat.row(i).transpose();
      model.subfields[i].extent = avec(i);
    }

    state.iteration = iter + 1;
    if (sink && (iter % cfg.log_interval == 0 || iter + 1 == cfg.iterations)) {
      sink(TrainEvent{iter, loss, lr_tz, lr_ca});
    }
  }
  update_membership(model.subfields, cloud);
}

}  // namespace

FieldModel train(const PointCloud& cloud, const TrainingConfig& config,
                 const ProgressSink& sink) {
  config.validate();
  if (static_cast<int>(cloud.size()) < config.subfield_count) {
    throw Error(ErrorCode::CountOutOfRange,
                "cloud smaller than the subfield count");
  }

  FieldModel model;
  model.config = config;

  auto [normalized, transform] = normalize_to_unit_sphere(cloud);
  model.transform = transform;

  model.subfields =
      init_subfields(normalized, config.subfield_count, config.alpha);
  refit_spheres(model.subfields, normalized);

  model.theta = mlp_new(config.widths, config.latent_dim,
                        derive_seed(config.seed, 0xa110c));
  // Shared model starts as the SDF of the origin-centered radius-R sphere;
  // the per-subfield transforms map local patches onto that sphere.
  geometric_init(model.theta, config.sphere_scale, Eigen::Vector3d::Zero(),
                 derive_seed(config.seed, 0x6e0));

  Rng zrng(derive_seed(config.seed, 0x1a7e47));
  for (auto& sf : model.subfields) {
    sf.latent.resize(config.latent_dim);
    for (int k = 0; k < config.latent_dim; ++k) {
      sf.latent(k) = config.sigma_z_init * zrng.normal();
    }
  }

  TrainState state;
  state.theta = adam_init(model.theta.parameter_count());
  state.latents = adam_init(static_cast<Eigen::Index>(config.subfield_count) *
                            config.latent_dim);
  state.centers = adam_init(static_cast<Eigen::Index>(config.subfield_count) * 3);
  state.extents = adam_init(config.subfield_count);
  model.train_state = state;

  train_loop(model, normalized, sink);
  return model;
}

void resume_train(FieldModel& model, const PointCloud& cloud,
                  const ProgressSink& sink) {
  if (!model.train_state) {
    throw Error(ErrorCode::BadConfig,
                "model has no optimizer state to resume from");
  }
  model.config.validate();
  PointCloud normalized;
  normalized.points.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    normalized.points.push_back(model.transform.apply(p));
  }
  train_loop(model, normalized, sink);
}

// ---------------------------------------------------------------------------
// Checkpoint format

namespace {

constexpr char kMagic[4] = {'S', 'F', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_i64(std::ostream& out, long long v) {
  put_u64(out, static_cast<std::uint64_t>(v));
}
void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw Error(ErrorCode::ParseError, "truncated checkpoint");
  return v;
}
long long get_i64(std::istream& in) {
  return static_cast<long long>(get_u64(in));
}
double get_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw Error(ErrorCode::ParseError, "truncated checkpoint");
  return v;
}

void put_vec(std::ostream& out, const Eigen::VectorXd& v) {
  put_u64(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
}

Eigen::VectorXd get_vec(std::istream& in) {
  const auto size = static_cast<Eigen::Index>(get_u64(in));
  if (size < 0 || size > (1ll << 32)) {
    throw Error(ErrorCode::ParseError, "corrupt vector header");
  }
  Eigen::VectorXd v(size);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * size));
  if (!in) throw Error(ErrorCode::ParseError, "truncated vector payload");
  return v;
}

void put_config(std::ostream& out, const TrainingConfig& cfg) {
  put_i64(out, cfg.subfield_count);
  put_i64(out, cfg.latent_dim);
  put_u64(out, cfg.widths.size());
  for (int w : cfg.widths) put_i64(out, w);
  put_f64(out, cfg.sphere_scale);
  put_f64(out, cfg.alpha);
  put_i64(out, cfg.iterations);
  put_f64(out, cfg.lr_theta_z);
  put_f64(out, cfg.lr_c_a);
  put_f64(out, cfg.decay_factor);
  put_u64(out, cfg.decay_iters.size());
  for (long long d : cfg.decay_iters) put_i64(out, d);
  put_f64(out, cfg.weights.nuclear);
  put_f64(out, cfg.weights.volume);
  put_f64(out, cfg.weights.placing);
  put_f64(out, cfg.weights.covering);
  put_f64(out, cfg.sigma_z_init);
  put_i64(out, cfg.per_point_samples);
  put_i64(out, cfg.knn_k);
  put_u64(out, cfg.seed);
  put_i64(out, cfg.refit_interval);
  put_i64(out, cfg.batch_points);
  put_i64(out, cfg.log_interval);
}

TrainingConfig get_config(std::istream& in) {
  TrainingConfig cfg;
  cfg.subfield_count = static_cast<int>(get_i64(in));
  cfg.latent_dim = static_cast<int>(get_i64(in));
  cfg.widths.clear();
  const auto n_widths = get_u64(in);
  for (std::uint64_t i = 0; i < n_widths; ++i) {
    cfg.widths.push_back(static_cast<int>(get_i64(in)));
  }
  cfg.sphere_scale = get_f64(in);
  cfg.alpha = get_f64(in);
  cfg.iterations = get_i64(in);
  cfg.lr_theta_z = get_f64(in);
  cfg.lr_c_a = get_f64(in);
  cfg.decay_factor = get_f64(in);
  cfg.decay_iters.clear();
  const auto n_decay = get_u64(in);
  for (std::uint64_t i = 0; i < n_decay; ++i) {
    cfg.decay_iters.push_back(get_i64(in));
  }
  cfg.weights.nuclear = get_f64(in);
  cfg.weights.volume = get_f64(in);
  cfg.weights.placing = get_f64(in);
  cfg.weights.covering = get_f64(in);
  cfg.sigma_z_init = get_f64(in);
  cfg.per_point_samples = static_cast<int>(get_i64(in));
  cfg.knn_k = static_cast<int>(get_i64(in));
  cfg.seed = get_u64(in);
  cfg.refit_interval = get_i64(in);
  cfg.batch_points = static_cast<int>(get_i64(in));
  cfg.log_interval = get_i64(in);
  return cfg;
}

void put_adam(std::ostream& out, const AdamState& s) {
  put_i64(out, s.step);
  put_f64(out, s.beta1);
  put_f64(out, s.beta2);
  put_f64(out, s.epsilon);
  put_vec(out, s.m);
  put_vec(out, s.v);
}

AdamState get_adam(std::istream& in) {
  AdamState s;
  s.step = get_i64(in);
  s.beta1 = get_f64(in);
  s.beta2 = get_f64(in);
  s.epsilon = get_f64(in);
  s.m = get_vec(in);
  s.v = get_vec(in);
  return s;
}

}  // namespace

void save_model(const FieldModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);

  out.write(kMagic, 4);
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  put_u64(out, model.train_state ? 1 : 0);

  put_config(out, model.config);
  put_f64(out, model.transform.offset.x());
  put_f64(out, model.transform.offset.y());
  put_f64(out, model.transform.offset.z());
  put_f64(out, model.transform.scale);

  write_params(out, model.theta);

  put_u64(out, model.subfields.size());
  for (const auto& sf : model.subfields) {
    for (int k = 0; k < 3; ++k) put_f64(out, sf.center(k));
    put_f64(out, sf.extent);
    put_vec(out, sf.latent);
    for (int k = 0; k < 3; ++k) put_f64(out, sf.sphere_center(k));
    put_f64(out, sf.sphere_radius);
    put_i64(out, sf.sign);
    put_u64(out, sf.members.size());
    for (int m : sf.members) put_i64(out, m);
  }

  if (model.train_state) {
    put_i64(out, model.train_state->iteration);
    put_adam(out, model.train_state->theta);
    put_adam(out, model.train_state->latents);
    put_adam(out, model.train_state->centers);
    put_adam(out, model.train_state->extents);
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

FieldModel load_model(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::FileNotFound, "no such checkpoint: " + path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);

  char magic[4] = {};
  in.read(magic, 4);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "not a recognized model checkpoint: " + path);
  }
  const bool has_state = get_u64(in) != 0;

  FieldModel model;
  model.config = get_config(in);
  model.transform.offset.x() = get_f64(in);
  model.transform.offset.y() = get_f64(in);
  model.transform.offset.z() = get_f64(in);
  model.transform.scale = get_f64(in);

  model.theta = read_params(in);

  const auto n_subfields = get_u64(in);
  model.subfields.resize(n_subfields);
  for (auto& sf : model.subfields) {
    for (int k = 0; k < 3; ++k) sf.center(k) = get_f64(in);
    sf.extent = get_f64(in);
    sf.latent = get_vec(in);
    for (int k = 0; k < 3; ++k) sf.sphere_center(k) = get_f64(in);
    sf.sphere_radius = get_f64(in);
    sf.sign = static_cast<int>(get_i64(in));
    const auto n_members = get_u64(in);
    sf.members.resize(n_members);
    for (auto& m : sf.members) m = static_cast<int>(get_i64(in));
  }

  if (has_state) {
    TrainState state;
    state.iteration = get_i64(in);
    state.theta = get_adam(in);
    state.latents = get_adam(in);
    state.centers = get_adam(in);
    state.extents = get_adam(in);
    model.train_state = std::move(state);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Config files and overrides

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

long long parse_ll(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadConfig, "bad integer for " + key + ": " + v);
  }
}

double parse_f64(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadConfig, "bad number for " + key + ": " + v);
  }
}

std::vector<long long> parse_ll_list(const std::string& v,
                                     const std::string& key) {
  std::vector<long long> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_ll(item, key));
  }
  return out;
}

}  // namespace

void apply_config_override(TrainingConfig& config, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) {
    throw Error(ErrorCode::BadConfig, "expected key=value, got: " + kv);
  }
  const std::string key = trim(kv.substr(0, eq));
  const std::string value = trim(kv.substr(eq + 1));

  if (key == "n_subfields") {
    config.subfield_count = static_cast<int>(parse_ll(value, key));
  } else if (key == "latent_dim") {
    config.latent_dim = static_cast<int>(parse_ll(value, key));
  } else if (key == "widths") {
    config.widths.clear();
    for (long long w : parse_ll_list(value, key)) {
      config.widths.push_back(static_cast<int>(w));
    }
  } else if (key == "sphere_scale" || key == "R") {
    config.sphere_scale = parse_f64(value, key);
  } else if (key == "alpha") {
    config.alpha = parse_f64(value, key);
  } else if (key == "iterations") {
    config.iterations = parse_ll(value, key);
  } else if (key == "lr_theta_z") {
    config.lr_theta_z = parse_f64(value, key);
  } else if (key == "lr_c_a") {
    config.lr_c_a = parse_f64(value, key);
  } else if (key == "decay_factor") {
    config.decay_factor = parse_f64(value, key);
  } else if (key == "decay_iters") {
    config.decay_iters = parse_ll_list(value, key);
  } else if (key == "lambda_nuclear") {
    config.weights.nuclear = parse_f64(value, key);
  } else if (key == "lambda_volume") {
    config.weights.volume = parse_f64(value, key);
  } else if (key == "lambda_placing") {
    config.weights.placing = parse_f64(value, key);
  } else if (key == "lambda_covering") {
    config.weights.covering = parse_f64(value, key);
  } else if (key == "sigma_z_init") {
    config.sigma_z_init = parse_f64(value, key);
  } else if (key == "per_point") {
    config.per_point_samples = static_cast<int>(parse_ll(value, key));
  } else if (key == "knn_k") {
    config.knn_k = static_cast<int>(parse_ll(value, key));
  } else if (key == "seed") {
    config.seed = static_cast<std::uint64_t>(parse_ll(value, key));
  } else if (key == "refit_interval") {
    config.refit_interval = parse_ll(value, key);
  } else if (key == "batch_points") {
    config.batch_points = static_cast<int>(parse_ll(value, key));
  } else if (key == "log_interval") {
    config.log_interval = parse_ll(value, key);
  } else {
    throw Error(ErrorCode::BadConfig, "unknown config key: " + key);
  }
}

TrainingConfig parse_config_file(const std::string& path, TrainingConfig base) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::FileNotFound, "no such config: " + path);
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_config_override(base, line);
    } catch (const Error& e) {
      throw Error(ErrorCode::BadConfig,
                  path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

std::string csv_header() {
  return "iteration,modeling,nuclear,volume,placing,covering,total";
}

std::string csv_row(const TrainEvent& event) {
  std::ostringstream os;
  os.precision(12);
  os << event.iteration << ',' << event.loss.modeling << ','
     << event.loss.nuclear << ',' << event.loss.volume << ','
     << event.loss.placing << ',' << event.loss.covering << ','
     << event.loss.total;
  return os.str();
}

}  // namespace sfr

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sfrecon/errors.hpp"
#include "sfrecon/point_cloud.hpp"
#include "sfrecon/trainer.hpp"

using namespace sfr;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TrainingConfig tiny_config() {
  TrainingConfig cfg;
  cfg.subfield_count = 4;
  cfg.latent_dim = 4;
  cfg.widths = {8, 8};
  cfg.iterations = 6;
  cfg.decay_iters = {4};
  cfg.per_point_samples = 2;
  cfg.batch_points = 3;
  cfg.knn_k = 8;
  cfg.refit_interval = 3;
  cfg.log_interval = 2;
  cfg.seed = 77;
  return cfg;
}

PointCloud tiny_cloud() {
  return sample_synthetic(ShapeSpec::parse("sphere:0.5"), 120, 0.0, 5);
}

bool params_equal(const MlpParams& a, const MlpParams& b) {
  bool equal = a.w_point == b.w_point && a.w_latent == b.w_latent &&
               a.b_first == b.b_first && a.w_head == b.w_head &&
               a.b_head == b.b_head;
  for (std::size_t i = 0; equal && i < a.w_hidden.size(); ++i) {
    equal = a.w_hidden[i] == b.w_hidden[i] && a.b_hidden[i] == b.b_hidden[i];
  }
  return equal;
}

bool models_equal(const FieldModel& a, const FieldModel& b) {
  if (!params_equal(a.theta, b.theta)) return false;
  if (a.subfields.size() != b.subfields.size()) return false;
  for (std::size_t i = 0; i < a.subfields.size(); ++i) {
    const Subfield& x = a.subfields[i];
    const Subfield& y = b.subfields[i];
    if (x.center != y.center || x.extent != y.extent || x.latent != y.latent ||
        x.sphere_center != y.sphere_center ||
        x.sphere_radius != y.sphere_radius || x.sign != y.sign ||
        x.members != y.members) {
      return false;
    }
  }
  return a.transform.offset == b.transform.offset &&
         a.transform.scale == b.transform.scale;
}

}  // namespace

TEST_CASE("config validation") {
  TrainingConfig cfg = tiny_config();
  cfg.validate();

  SUBCASE("decay iterations must stay within the run") {
    cfg.decay_iters = {10};
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
  SUBCASE("decay iterations strictly increase") {
    cfg.iterations = 100;
    cfg.decay_iters = {5, 5};
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
  SUBCASE("rates positive") {
    cfg.lr_theta_z = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
  SUBCASE("alpha at least one") {
    cfg.alpha = 0.9;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
}

TEST_CASE("learning-rate schedule") {
  const TrainingConfig paper = TrainingConfig::paper();
  CHECK(paper.iterations == 40000);
  CHECK(paper.lr_theta_z_at(0) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(paper.lr_theta_z_at(19999) == doctest::Approx(1e-3).epsilon(1e-12));
  // At the first decay mark the rate drops by the 0.2 factor.
  CHECK(paper.lr_theta_z_at(20000) == doctest::Approx(2e-4).epsilon(1e-12));
  CHECK(paper.lr_theta_z_at(38000) ==
        doctest::Approx(1e-3 * 0.2 * 0.2 * 0.2 * 0.2).epsilon(1e-12));
  CHECK(paper.lr_c_a_at(20000) == doctest::Approx(6e-5).epsilon(1e-12));
  CHECK(paper.weights.volume == 3e-4);
  CHECK(paper.weights.placing == 1.0);
  CHECK(paper.weights.covering == 1.0);
}

TEST_CASE("zero iterations returns the initialized model") {
  TrainingConfig cfg = tiny_config();
  cfg.iterations = 0;
  cfg.decay_iters.clear();
  const PointCloud cloud = tiny_cloud();
  const FieldModel model = train(cloud, cfg);
  CHECK(model.subfields.size() == 4);
  // Geometric head bias survives untouched: no update has run.
  CHECK(model.theta.b_head == -cfg.sphere_scale);
  CHECK(model.train_state->iteration == 0);
  for (const auto& sf : model.subfields) {
    CHECK(sf.latent.size() == 4);
    CHECK(sf.sign == 1);
  }
}

TEST_CASE("training is deterministic per seed") {
  const PointCloud cloud = tiny_cloud();
  const TrainingConfig cfg = tiny_config();
  const FieldModel a = train(cloud, cfg);
  const FieldModel b = train(cloud, cfg);
  CHECK(models_equal(a, b));

  TrainingConfig other = cfg;
  other.seed = 78;
  const FieldModel c = train(cloud, other);
  CHECK(!params_equal(a.theta, c.theta));
}

TEST_CASE("training runs reduce the loss on an easy cloud") {
  TrainingConfig cfg = tiny_config();
  cfg.subfield_count = 6;
  cfg.widths = {32, 32, 32};
  cfg.latent_dim = 8;
  cfg.iterations = 60;
  cfg.decay_iters = {};
  cfg.batch_points = 6;
  cfg.per_point_samples = 4;
  cfg.log_interval = 1;
  const PointCloud cloud = tiny_cloud();

  std::vector<double> modeling;
  const FieldModel model = train(cloud, cfg, [&](const TrainEvent& e) {
    modeling.push_back(e.loss.modeling);
  });
  REQUIRE(modeling.size() == 60);
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 10; ++i) early += modeling[i];
  for (int i = 50; i < 60; ++i) late += modeling[i];
  CHECK(late < early);
  CHECK(model.train_state->iteration == 60);
}

TEST_CASE("checkpoint round trip is bit-stable") {
  const PointCloud cloud = tiny_cloud();
  const FieldModel model = train(cloud, tiny_config());
  const std::string path = temp_path("trainer_ckpt.sfm");
  save_model(model, path);
  const FieldModel back = load_model(path);
  CHECK(models_equal(model, back));
  REQUIRE(back.train_state.has_value());
  CHECK(back.train_state->iteration == model.train_state->iteration);
  CHECK(back.train_state->theta.m == model.train_state->theta.m);
  CHECK(back.train_state->theta.v == model.train_state->theta.v);
  CHECK(back.config.widths == model.config.widths);
  CHECK(back.config.seed == model.config.seed);

  SUBCASE("truncated checkpoint raises a parse error") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    const std::string cut_path = temp_path("trainer_ckpt_cut.sfm");
    std::ofstream out(cut_path, std::ios::binary);
    out << bytes.substr(0, bytes.size() * 2 / 3);
    out.close();
    CHECK_THROWS_AS(load_model(cut_path), Error);
  }
  SUBCASE("wrong magic raises VersionMismatch") {
    const std::string bad_path = temp_path("trainer_ckpt_bad.sfm");
    std::ofstream out(bad_path, std::ios::binary);
    out << "not a checkpoint at all";
    out.close();
    try {
      load_model(bad_path);
      FAIL("expected VersionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::VersionMismatch);
    }
  }
}

TEST_CASE("resume reproduces the uninterrupted trajectory") {
  const PointCloud cloud = tiny_cloud();
  TrainingConfig cfg = tiny_config();
  cfg.iterations = 10;
  cfg.decay_iters = {7};
  const FieldModel full = train(cloud, cfg);

  TrainingConfig half = cfg;
  half.iterations = 5;
  half.decay_iters = {};  // not reached in the first half anyway
  FieldModel partial = train(cloud, half);
  const std::string path = temp_path("trainer_resume.sfm");
  save_model(partial, path);

  FieldModel resumed = load_model(path);
  resumed.config.iterations = 10;
  resumed.config.decay_iters = {7};
  resume_train(resumed, cloud);
  CHECK(models_equal(full, resumed));
}

TEST_CASE("csv rows") {
  CHECK(csv_header() ==
        "iteration,modeling,nuclear,volume,placing,covering,total");
  TrainEvent event;
  event.iteration = 12;
  event.loss.modeling = 1.5;
  event.loss.total = 2.0;
  const std::string row = csv_row(event);
  CHECK(row.substr(0, 3) == "12,");
  CHECK(row.find(",2") != std::string::npos);
}

TEST_CASE("config files and overrides") {
  const std::string path = temp_path("trainer_cfg.txt");
  std::ofstream out(path);
  out << "# sample config\n"
         "n_subfields = 12\n"
         "widths = 16,16,16\n"
         "iterations = 500\n"
         "decay_iters = 200, 400\n"
         "lambda_volume = 0.0005\n"
         "seed = 9\n";
  out.close();

  TrainingConfig cfg = parse_config_file(path);
  CHECK(cfg.subfield_count == 12);
  CHECK(cfg.widths == std::vector<int>{16, 16, 16});
  CHECK(cfg.iterations == 500);
  CHECK(cfg.decay_iters == std::vector<long long>{200, 400});
  CHECK(cfg.weights.volume == 0.0005);
  CHECK(cfg.seed == 9);

  SUBCASE("override on top") {
    apply_config_override(cfg, "alpha=2.0");
    CHECK(cfg.alpha == 2.0);
    apply_config_override(cfg, "R = 1.5");
    CHECK(cfg.sphere_scale == 1.5);
  }
  SUBCASE("unknown key rejected") {
    try {
      apply_config_override(cfg, "warp_speed=9");
      FAIL("expected BadConfig");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BadConfig);
    }
  }
  SUBCASE("malformed value rejected") {
    CHECK_THROWS_AS(apply_config_override(cfg, "iterations=abc"), Error);
    CHECK_THROWS_AS(apply_config_override(cfg, "no_equals_here"), Error);
  }
  SUBCASE("unknown key in file carries the line number") {
    const std::string bad = temp_path("trainer_cfg_bad.txt");
    std::ofstream o(bad);
    o << "iterations = 5\nbananas = 7\n";
    o.close();
    try {
      parse_config_file(bad);
      FAIL("expected BadConfig");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
}

TEST_CASE("training propagates cloud-size preconditions") {
  TrainingConfig cfg = tiny_config();
  PointCloud cloud;
  cloud.points = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(train(cloud, cfg), Error);
}

TEST_CASE("diverging runs abort with NonFiniteLoss") {
  TrainingConfig cfg = tiny_config();
  // An absurd rate overflows the forward pass within a couple of steps.
  cfg.lr_theta_z = 1e300;
  cfg.iterations = 10;
  cfg.decay_iters = {};
  try {
    train(tiny_cloud(), cfg);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

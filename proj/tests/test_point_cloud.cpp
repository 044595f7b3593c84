#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "sfrecon/errors.hpp"
#include "sfrecon/point_cloud.hpp"
#include "sfrecon/rng.hpp"

using namespace sfr;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

PointCloud random_cloud(int n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (int i = 0; i < n; ++i) cloud.points.push_back(scale * rng.normal3());
  return cloud;
}

}  // namespace

TEST_CASE("xyz text loading") {
  const std::string path = temp_path("pc_basic.xyz");
  write_file(path, "0 0 0\n1 0 0\n");
  const PointCloud cloud = load_points(path, PointFormat::XyzText);
  REQUIRE(cloud.size() == 2);
  CHECK(cloud.points[0] == Eigen::Vector3d(0, 0, 0));
  CHECK(cloud.points[1] == Eigen::Vector3d(1, 0, 0));

  SUBCASE("empty file raises EmptyCloud") {
    write_file(path, "");
    try {
      load_points(path, PointFormat::XyzText);
      FAIL("expected EmptyCloud");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyCloud);
    }
  }
  SUBCASE("missing file raises FileNotFound") {
    try {
      load_points(temp_path("does_not_exist.xyz"), PointFormat::XyzText);
      FAIL("expected FileNotFound");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::FileNotFound);
    }
  }
  SUBCASE("garbage line raises ParseError with line number") {
    write_file(path, "0 0 0\n1 banana 0\n");
    try {
      load_points(path, PointFormat::XyzText);
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("extra columns are treated as discarded attributes") {
    write_file(path, "1 2 3 0 0 1\n");
    const PointCloud c = load_points(path, PointFormat::XyzText);
    REQUIRE(c.size() == 1);
    CHECK(c.points[0] == Eigen::Vector3d(1, 2, 3));
  }
}

TEST_CASE("ply loading discards normals and supports binary") {
  const std::string path = temp_path("pc_test.ply");
  write_file(path,
             "ply\nformat ascii 1.0\n"
             "element vertex 3\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property float nx\nproperty float ny\nproperty float nz\n"
             "end_header\n"
             "0 0 0 0 0 1\n"
             "1 0 0 0 0 1\n"
             "0 1 0 0 0 1\n");
  const PointCloud cloud = load_points(path, PointFormat::Ply);
  REQUIRE(cloud.size() == 3);
  CHECK(cloud.points[2] == Eigen::Vector3d(0, 1, 0));

  SUBCASE("binary little endian") {
    const std::string bin_path = temp_path("pc_test_bin.ply");
    std::ofstream out(bin_path, std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\n"
           "element vertex 2\n"
           "property double x\nproperty double y\nproperty double z\n"
           "end_header\n";
    const double coords[6] = {0.5, -1.25, 3.0, 7.0, 0.0, -2.5};
    out.write(reinterpret_cast<const char*>(coords), sizeof(coords));
    out.close();
    const PointCloud c = load_points(bin_path, PointFormat::Ply);
    REQUIRE(c.size() == 2);
    CHECK(c.points[0] == Eigen::Vector3d(0.5, -1.25, 3.0));
    CHECK(c.points[1] == Eigen::Vector3d(7.0, 0.0, -2.5));
  }
}

TEST_CASE("obj vertex loading") {
  const std::string path = temp_path("pc_test.obj");
  write_file(path, "# comment\nv 1 2 3\nvn 0 0 1\nv -1 0 0.5\nf 1 2 1\n");
  const PointCloud cloud = load_points(path, PointFormat::ObjVertices);
  REQUIRE(cloud.size() == 2);
  CHECK(cloud.points[1] == Eigen::Vector3d(-1, 0, 0.5));
}

TEST_CASE("point save/load round trip") {
  PointCloud cloud = random_cloud(57, 99);
  for (const char* name : {"rt.xyz", "rt.ply", "rt.obj"}) {
    const std::string path = temp_path(name);
    save_points(cloud, path, format_from_path(path));
    const PointCloud back = load_points(path, format_from_path(path));
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CHECK(back.points[i] == cloud.points[i]);  // bit-exact text round trip
    }
  }
}

TEST_CASE("normalize_to_unit_sphere") {
  SUBCASE("axis pair") {
    PointCloud cloud;
    cloud.points = {{2, 0, 0}, {-2, 0, 0}};
    const auto [normalized, transform] = normalize_to_unit_sphere(cloud);
    CHECK(normalized.points[0] == Eigen::Vector3d(1, 0, 0));
    CHECK(normalized.points[1] == Eigen::Vector3d(-1, 0, 0));
    CHECK(transform.offset == Eigen::Vector3d(0, 0, 0));
    CHECK(transform.scale == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("already normalized stays put") {
    PointCloud cloud;
    cloud.points = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
    const auto [normalized, transform] = normalize_to_unit_sphere(cloud);
    CHECK(transform.scale == doctest::Approx(1.0).epsilon(1e-15));
    for (int i = 0; i < 4; ++i) {
      CHECK((normalized.points[i] - cloud.points[i]).norm() < 1e-15);
    }
  }
  SUBCASE("repeated point is degenerate") {
    PointCloud cloud;
    cloud.points = {{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
    try {
      normalize_to_unit_sphere(cloud);
      FAIL("expected DegenerateCloud");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateCloud);
    }
  }
  SUBCASE("centroid at origin, max norm 1, inverse identity") {
    const PointCloud cloud = random_cloud(200, 5, 3.0);
    const auto [normalized, transform] = normalize_to_unit_sphere(cloud);
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    double max_norm = 0.0;
    for (const auto& p : normalized.points) {
      centroid += p;
      max_norm = std::max(max_norm, p.norm());
    }
    centroid /= static_cast<double>(normalized.size());
    CHECK(centroid.norm() <= 1e-12);
    CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Eigen::Vector3d back = transform.invert(normalized.points[i]);
      CHECK((back - cloud.points[i]).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("farthest point sampling") {
  SUBCASE("x-axis trio") {
    PointCloud cloud;
    cloud.points = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    const auto picks = farthest_point_sampling(cloud, 2);
    REQUIRE(picks.size() == 2);
    CHECK(picks[0] == 0);
    CHECK(picks[1] == 2);
  }
  SUBCASE("count equals n returns all indices") {
    const PointCloud cloud = random_cloud(17, 3);
    const auto picks = farthest_point_sampling(cloud, 17);
    std::vector<bool> seen(17, false);
    for (int p : picks) {
      CHECK(!seen[p]);
      seen[p] = true;
    }
  }
  SUBCASE("count out of range") {
    const PointCloud cloud = random_cloud(4, 3);
    for (int bad : {0, 5}) {
      try {
        farthest_point_sampling(cloud, bad);
        FAIL("expected CountOutOfRange");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CountOutOfRange);
      }
    }
  }
  SUBCASE("deterministic on the same sequence") {
    const PointCloud cloud = random_cloud(120, 11);
    CHECK(farthest_point_sampling(cloud, 20) ==
          farthest_point_sampling(cloud, 20));
  }
  SUBCASE("greedy min-distance maximization") {
    const PointCloud cloud = random_cloud(60, 13);
    const auto picks = farthest_point_sampling(cloud, 8);
    // Re-run the selection rule independently.
    std::vector<int> expect{0};
    std::vector<double> mind(60, std::numeric_limits<double>::infinity());
    for (int step = 1; step < 8; ++step) {
      for (int i = 0; i < 60; ++i) {
        mind[i] = std::min(
            mind[i],
            (cloud.points[i] - cloud.points[expect.back()]).squaredNorm());
      }
      int arg = 0;
      for (int i = 1; i < 60; ++i) {
        if (mind[i] > mind[arg]) arg = i;
      }
      expect.push_back(arg);
    }
    CHECK(picks == expect);
  }
}

TEST_CASE("nearest_distance matches brute force exactly") {
  SUBCASE("hand examples") {
    PointCloud single;
    single.points = {{0, 0, 0}};
    const KdTree index(single.points);
    CHECK(nearest_distance(index, {3, 4, 0}) == 5.0);
    CHECK(nearest_distance(index, {0, 0, 0}) == 0.0);

    PointCloud corners;
    for (double x : {-1.0, 1.0}) {
      for (double y : {-1.0, 1.0}) {
        for (double z : {-1.0, 1.0}) corners.points.push_back({x, y, z});
      }
    }
    const KdTree corner_index(corners.points);
    CHECK(nearest_distance(corner_index, {0, 0, 0}) ==
          doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  }

  SUBCASE("1000 random queries on random clouds") {
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 50 + static_cast<int>(rng.index(450));
      const PointCloud cloud = random_cloud(n, 1000 + trial);
      const KdTree index(cloud.points);
      for (int k = 0; k < 200; ++k) {
        const Eigen::Vector3d q = 2.0 * rng.normal3();
        const auto brute = oracle::nearest_brute(cloud.points, q);
        const Neighbor fast = index.nearest(q);
        CHECK(fast.index == brute.index);
        CHECK(fast.dist2 == brute.dist2);
      }
    }
  }

  SUBCASE("tie rule picks the lowest index") {
    PointCloud cloud;
    cloud.points = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
    // Equidistant from all four; brute force and tree must agree.
    const KdTree index(cloud.points);
    for (int rot = 0; rot < 4; ++rot) {
      const Neighbor nn = index.nearest({0, 0, 0});
      CHECK(nn.index == 0);
    }
  }

  SUBCASE("triangle inequality for the unsigned distance") {
    const PointCloud cloud = random_cloud(300, 21);
    const KdTree index(cloud.points);
    Rng rng(22);
    for (int k = 0; k < 300; ++k) {
      const Eigen::Vector3d q1 = rng.normal3();
      const Eigen::Vector3d q2 = rng.normal3();
      const double s1 = nearest_distance(index, q1);
      const double s2 = nearest_distance(index, q2);
      CHECK(std::abs(s1 - s2) <= (q1 - q2).norm() + 1e-12);
    }
  }
}

TEST_CASE("kd-tree knn ordering") {
  const PointCloud cloud = random_cloud(200, 31);
  const KdTree index(cloud.points);
  Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d q = rng.normal3();
    const auto knn = index.knn(q, 10);
    REQUIRE(knn.size() == 10);
    // Against a sorted brute-force scan.
    std::vector<std::pair<double, int>> all;
    for (int i = 0; i < 200; ++i) {
      all.emplace_back(squared_distance(cloud.points[i], q), i);
    }
    std::sort(all.begin(), all.end());
    for (int k = 0; k < 10; ++k) {
      CHECK(knn[k].index == all[k].second);
      CHECK(knn[k].dist2 == all[k].first);
    }
  }
}

TEST_CASE("synthetic shape sampling") {
  SUBCASE("noiseless sphere radii") {
    const PointCloud cloud =
        sample_synthetic(ShapeSpec::parse("sphere:1"), 100, 0.0, 4);
    for (const auto& p : cloud.points) {
      CHECK(p.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("torus implicit identity") {
    const PointCloud cloud =
        sample_synthetic(ShapeSpec::parse("torus:1,0.25"), 500, 0.0, 4);
    for (const auto& p : cloud.points) {
      const double ring = std::sqrt(p.x() * p.x() + p.y() * p.y()) - 1.0;
      CHECK(ring * ring + p.z() * p.z() ==
            doctest::Approx(0.0625).epsilon(1e-9));
    }
  }
  SUBCASE("box samples on the surface") {
    const ShapeSpec spec = ShapeSpec::parse("box:0.5,0.4,0.3");
    const PointCloud cloud = sample_synthetic(spec, 400, 0.0, 4);
    for (const auto& p : cloud.points) {
      const double sx = std::abs(p.x()) / 0.5;
      const double sy = std::abs(p.y()) / 0.4;
      const double sz = std::abs(p.z()) / 0.3;
      CHECK(std::max({sx, sy, sz}) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("same seed reproduces the cloud") {
    const ShapeSpec spec = ShapeSpec::parse("torus:1,0.3");
    const PointCloud a = sample_synthetic(spec, 250, 0.01, 9);
    const PointCloud b = sample_synthetic(spec, 250, 0.01, 9);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.points[i] == b.points[i]);
    }
  }
  SUBCASE("bad parameters") {
    for (const char* bad : {"sphere:0", "torus:1,2", "box:1,-1,1", "hat:1"}) {
      try {
        sample_synthetic(ShapeSpec::parse(bad), 10, 0.0, 0);
        FAIL("expected BadShapeParam for ", bad);
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadShapeParam);
      }
    }
  }
}

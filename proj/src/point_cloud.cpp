#include "sfrecon/point_cloud.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "format_detail.hpp"
#include "sfrecon/errors.hpp"
#include "sfrecon/rng.hpp"

namespace sfr {

namespace {

std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

PointFormat format_from_path(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "ply") return PointFormat::Ply;
  if (ext == "obj") return PointFormat::ObjVertices;
  return PointFormat::XyzText;
}

PointCloud load_points(const std::string& path, PointFormat format) {
  PointCloud cloud;
  switch (format) {
    case PointFormat::XyzText:
      cloud.points = detail::read_xyz(path);
      break;
    case PointFormat::Ply:
      cloud.points = detail::read_ply(path, /*want_faces=*/false).vertices;
      break;
    case PointFormat::ObjVertices:
      cloud.points = detail::read_obj(path, /*want_faces=*/false).vertices;
      break;
  }
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "no points in " + path);
  }
  for (const auto& p : cloud.points) {
    if (!p.allFinite()) {
      throw Error(ErrorCode::ParseError, "non-finite coordinate in " + path);
    }
  }
  return cloud;
}

void save_points(const PointCloud& cloud, const std::string& path,
                 PointFormat format) {
  switch (format) {
    case PointFormat::XyzText:
      detail::write_xyz(cloud.points, path);
      break;
    case PointFormat::Ply: {
      detail::GeometryData data;
      data.vertices = cloud.points;
      detail::write_ply(data, path);
      break;
    }
    case PointFormat::ObjVertices: {
      detail::GeometryData data;
      data.vertices = cloud.points;
      detail::write_obj(data, path);
      break;
    }
  }
}

std::pair<PointCloud, GlobalTransform> normalize_to_unit_sphere(
    const PointCloud& cloud) {
  if (cloud.size() < 2) {
    throw Error(ErrorCode::DegenerateCloud,
                "normalization needs at least 2 points");
  }
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  double max_norm = 0.0;
  for (const auto& p : cloud.points) {
    max_norm = std::max(max_norm, (p - centroid).norm());
  }
  if (max_norm < 1e-9) {
    throw Error(ErrorCode::DegenerateCloud,
                "bounding radius below 1e-9; cloud is a single location");
  }

  GlobalTransform transform;
  transform.offset = centroid;
  transform.scale = 1.0 / max_norm;

  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(transform.apply(p));
  return {std::move(out), transform};
}

std::vector<int> farthest_point_sampling(const PointCloud& cloud, int count) {
  const int n = static_cast<int>(cloud.size());
  if (count < 1 || count > n) {
    throw Error(ErrorCode::CountOutOfRange,
                "farthest_point_sampling: count " + std::to_string(count) +
                    " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<int> picks;
  picks.reserve(count);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());

  int current = 0;  // deterministic seed: index 0
  picks.push_back(current);
  for (int s = 1; s < count; ++s) {
    const Eigen::Vector3d& c = cloud.points[current];
    int next = -1;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      const double d2 = (cloud.points[i] - c).squaredNorm();
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > best) {  // strict: ties keep the lowest index
        best = min_d2[i];
        next = i;
      }
    }
    picks.push_back(next);
    current = next;
  }
  return picks;
}

double nearest_distance(const KdTree& index, const Eigen::Vector3d& q) {
  return index.nearest_distance(q);
}

double ShapeSpec::bounding_radius() const {
  switch (kind) {
    case Kind::Sphere: return params[0];
    case Kind::Torus: return params[0] + params[1];
    case Kind::Box:
      return Eigen::Vector3d(params[0], params[1], params[2]).norm();
  }
  return 0.0;
}

ShapeSpec ShapeSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::vector<double> vals;
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        vals.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw Error(ErrorCode::BadShapeParam, "bad shape parameter: " + item);
      }
    }
  }
  ShapeSpec spec;
  if (name == "sphere") {
    spec.kind = Kind::Sphere;
    if (vals.size() != 1) {
      throw Error(ErrorCode::BadShapeParam, "sphere expects 1 parameter");
    }
    spec.params[0] = vals[0];
  } else if (name == "torus") {
    spec.kind = Kind::Torus;
    if (vals.size() != 2) {
      throw Error(ErrorCode::BadShapeParam, "torus expects 2 parameters");
    }
    spec.params[0] = vals[0];
    spec.params[1] = vals[1];
  } else if (name == "box") {
    spec.kind = Kind::Box;
    if (vals.size() != 3) {
      throw Error(ErrorCode::BadShapeParam, "box expects 3 parameters");
    }
    spec.params[0] = vals[0];
    spec.params[1] = vals[1];
    spec.params[2] = vals[2];
  } else {
    throw Error(ErrorCode::BadShapeParam, "unknown shape: " + name);
  }
  return spec;
}

std::string ShapeSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Sphere: os << "sphere:" << params[0]; break;
    case Kind::Torus: os << "torus:" << params[0] << "," << params[1]; break;
    case Kind::Box:
      os << "box:" << params[0] << "," << params[1] << "," << params[2];
      break;
  }
  return os.str();
}

namespace {

void validate_shape(const ShapeSpec& shape) {
  switch (shape.kind) {
    case ShapeSpec::Kind::Sphere:
      if (shape.params[0] <= 0.0) {
        throw Error(ErrorCode::BadShapeParam, "sphere radius must be > 0");
      }
      break;
    case ShapeSpec::Kind::Torus:
      if (shape.params[0] <= 0.0 || shape.params[1] <= 0.0 ||
          shape.params[1] >= shape.params[0]) {
        throw Error(ErrorCode::BadShapeParam,
                    "torus needs 0 < minor < major radius");
      }
      break;
    case ShapeSpec::Kind::Box:
      if (shape.params[0] <= 0.0 || shape.params[1] <= 0.0 ||
          shape.params[2] <= 0.0) {
        throw Error(ErrorCode::BadShapeParam, "box half-extents must be > 0");
      }
      break;
  }
}

Eigen::Vector3d sample_surface_point(const ShapeSpec& shape, Rng& rng) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  switch (shape.kind) {
    case ShapeSpec::Kind::Sphere:
      return shape.params[0] * rng.unit_vector();
    case ShapeSpec::Kind::Torus: {
      const double R = shape.params[0], r = shape.params[1];
      const double u = rng.uniform(0.0, two_pi);
      // Area density in the tube angle v is proportional to R + r cos v.
      double v;
      do {
        v = rng.uniform(0.0, two_pi);
      } while (rng.uniform() > (R + r * std::cos(v)) / (R + r));
      const double ring = R + r * std::cos(v);
      return {ring * std::cos(u), ring * std::sin(u), r * std::sin(v)};
    }
    case ShapeSpec::Kind::Box: {
      const double hx = shape.params[0], hy = shape.params[1],
                   hz = shape.params[2];
      const double ax = hy * hz, ay = hx * hz, az = hx * hy;  // per face pair
      const double total = 2.0 * (ax + ay + az);
      double pick = rng.uniform(0.0, total);
      const double su = 2.0 * rng.uniform() - 1.0;
      const double sv = 2.0 * rng.uniform() - 1.0;
      for (int axis = 0; axis < 3; ++axis) {
        const double area = axis == 0 ? ax : axis == 1 ? ay : az;
        for (double side : {-1.0, 1.0}) {
          if (pick < area) {
            Eigen::Vector3d p;
            p[axis] = side * shape.params[axis];
            p[(axis + 1) % 3] = su * shape.params[(axis + 1) % 3];
            p[(axis + 2) % 3] = sv * shape.params[(axis + 2) % 3];
            return p;
          }
          pick -= area;
        }
      }
      return {hx, hy, hz};  // unreachable up to rounding
    }
  }
  return Eigen::Vector3d::Zero();
}

}  // namespace

PointCloud sample_synthetic(const ShapeSpec& shape, int n, double noise_sigma,
                            std::uint64_t seed) {
  validate_shape(shape);
  if (n < 1) throw Error(ErrorCode::BadShapeParam, "sample count must be >= 1");
  if (noise_sigma < 0.0) {
    throw Error(ErrorCode::BadShapeParam, "noise sigma must be >= 0");
  }

  Rng rng(derive_seed(seed, 0x9e0d));
  const double world_sigma = noise_sigma * shape.bounding_radius();
  PointCloud cloud;
  cloud.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d p = sample_surface_point(shape, rng);
    if (world_sigma > 0.0) p += world_sigma * rng.normal3();
    cloud.points.push_back(p);
  }
  return cloud;
}

}  // namespace sfr

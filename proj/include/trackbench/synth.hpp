#pragma once

// Synthetic sequences: procedurally textured box scenes, ray-cast grayscale
// and exact depth renders, camera trajectories for the four motion types,
// and an oracle tracker with injected noise.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trackbench/errors.hpp"
#include "trackbench/geometry.hpp"
#include "trackbench/image.hpp"
#include "trackbench/parallel.hpp"
#include "trackbench/sequence.hpp"
#include "trackbench/tracker_types.hpp"

namespace trackbench {

// ---------------------------------------------------------------- noise

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) { return mix64(seed ^ mix64(v)); }

// Uniform value in [-1, 1] attached to an integer lattice point.
inline double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  const std::uint64_t h = hash_combine(hash_combine(seed, static_cast<std::uint64_t>(ix)), static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

inline double quintic(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

}  // namespace detail

/// Smooth 2D value noise in [-1, 1] with unit lattice spacing. Hash based,
/// so evaluation order never changes the result.
inline double value_noise(double x, double y, std::uint64_t seed) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
  const double sx = detail::quintic(x - fx), sy = detail::quintic(y - fy);
  const double a = detail::lattice_value(ix, iy, seed), b = detail::lattice_value(ix + 1, iy, seed);
  const double c = detail::lattice_value(ix, iy + 1, seed), d = detail::lattice_value(ix + 1, iy + 1, seed);
  return (1 - sy) * ((1 - sx) * a + sx * b) + sy * ((1 - sx) * c + sx * d);
}

// ---------------------------------------------------------------- scene

/// Procedural albedo: octaves of value noise mixed with a checkerboard.
struct Material {
  double base = 128.0;
  double contrast = 60.0;  // peak deviation from base, gray levels
  std::vector<double> wavelengths = {0.05, 0.1, 0.2, 0.4, 0.8};  // meters
  double checker_period = 0.0;  // meters; 0 disables the checkerboard
  double checker_weight = 0.3;
  std::uint64_t seed = 0;

  double albedo(double s, double t) const {
    double n = 0.0, norm = 0.0, amp = 1.0;
    for (std::size_t o = 0; o < wavelengths.size(); ++o) {
      n += amp * value_noise(s / wavelengths[o], t / wavelengths[o], detail::hash_combine(seed, o));
      norm += amp;
      amp *= 0.8;
    }
    double v = norm > 0 ? n / norm : 0.0;
    if (checker_period > 0) {
      const auto cs = static_cast<std::int64_t>(std::floor(s / checker_period));
      const auto ct = static_cast<std::int64_t>(std::floor(t / checker_period));
      const double checker = ((cs + ct) & 1) ? 1.0 : -1.0;
      v = (1 - checker_weight) * v * 2.0 + checker_weight * checker;
    } else {
      v *= 2.0;
    }
    return std::clamp(base + contrast * v, 0.0, 255.0);
  }
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Point3 point = Point3::Zero();
  double albedo = 0.0;
};

/// Infinite plane perpendicular to one coordinate axis.
struct AxisPlane {
  int axis = 2;
  double offset = 0.0;
  Material material;
};

/// Axis-aligned box; hit from outside or, when the ray starts inside, from
/// within (a closed room). One material per face: -x,+x,-y,+y,-z,+z.
struct Box {
  Point3 min = Point3::Zero();
  Point3 max = Point3::Ones();
  std::array<Material, 6> faces;
};

struct Scene {
  std::vector<AxisPlane> planes;
  std::vector<Box> boxes;
};

namespace detail {

inline double surface_albedo(const Material& m, const Point3& p, int axis) {
  const int a = (axis + 1) % 3, b = (axis + 2) % 3;
  // keep u along x/z and v along y wherever possible so textures look upright
  const int s_axis = axis == 1 ? 0 : (a == 1 ? b : a);
  const int t_axis = 3 - axis - s_axis;
  return m.albedo(p[s_axis], p[t_axis]);
}

inline constexpr double kRayEps = 1e-9;

inline void intersect(const AxisPlane& pl, const Point3& o, const Eigen::Vector3d& d, Hit& best) {
  const double dn = d[pl.axis];
  if (dn == 0.0) return;
  const double t = (pl.offset - o[pl.axis]) / dn;
  if (t <= kRayEps || t >= best.t) return;
  Point3 p = o + t * d;
  p[pl.axis] = pl.offset;
  best = {t, p, surface_albedo(pl.material, p, pl.axis)};
}

inline void intersect(const Box& box, const Point3& o, const Eigen::Vector3d& d, Hit& best) {
  double t_near = -std::numeric_limits<double>::infinity(), t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1, far_axis = -1;
  bool near_max = false, far_max = false;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return;
      continue;
    }
    double t0 = (box.min[a] - o[a]) / d[a], t1 = (box.max[a] - o[a]) / d[a];
    bool t0_is_max = false;
    if (t0 > t1) {
      std::swap(t0, t1);
      t0_is_max = true;
    }
    if (t0 > t_near) {
      t_near = t0;
      near_axis = a;
      near_max = t0_is_max;
    }
    if (t1 < t_far) {
      t_far = t1;
      far_axis = a;
      far_max = !t0_is_max;
    }
  }
  if (t_far < t_near) return;
  double t;
  int axis;
  bool at_max;
  if (t_near > kRayEps) {
    t = t_near;
    axis = near_axis;
    at_max = near_max;
  } else if (t_far > kRayEps) {
    t = t_far;
    axis = far_axis;
    at_max = far_max;
  } else {
    return;
  }
  if (axis < 0 || t >= best.t) return;
  Point3 p = o + t * d;
  p[axis] = at_max ? box.max[axis] : box.min[axis];
  best = {t, p, surface_albedo(box.faces[static_cast<std::size_t>(2 * axis + (at_max ? 1 : 0))], p, axis)};
}

}  // namespace detail

/// Nearest surface along o + t*d (t > 0).
inline Hit cast_ray(const Scene& scene, const Point3& o, const Eigen::Vector3d& d) {
  Hit best;
  for (const auto& pl : scene.planes) detail::intersect(pl, o, d, best);
  for (const auto& b : scene.boxes) detail::intersect(b, o, d, best);
  return best;
}

/// Ray through pixel (u, v) in world coordinates; its camera-frame z
/// component is 1, so the hit parameter t equals the camera-frame depth.
inline Eigen::Vector3d pixel_ray(const CameraIntrinsics& K, const RigidPose& pose, double u, double v) {
  return pose.rotation() * Eigen::Vector3d((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
}

struct RenderedFrame {
  GrayImage image;
  DepthMap depth;
};

/// Casts one ray per pixel through the pixel centre. Image = albedo
/// quantized to 8 bits, depth = camera-frame z of the hit (NaN on a miss).
inline RenderedFrame render(const Scene& scene, const RigidPose& pose, const CameraIntrinsics& K) {
  RenderedFrame out{GrayImage(K.width, K.height), DepthMap(K.width, K.height)};
  const Point3 o = pose.translation();
  for (int v = 0; v < K.height; ++v)
    for (int u = 0; u < K.width; ++u) {
      const Hit h = cast_ray(scene, o, pixel_ray(K, pose, u, v));
      if (std::isfinite(h.t)) {
        out.image(u, v) = static_cast<std::uint8_t>(std::lround(h.albedo));
        out.depth(u, v) = static_cast<float>(h.t);
      } else {
        out.image(u, v) = 0;
        out.depth(u, v) = std::numeric_limits<float>::quiet_NaN();
      }
    }
  return out;
}

struct SceneParams {
  int objects = 8;
  double room_half_width = 12.0;
  double floor_y = 1.8;     // y points down
  double ceiling_y = -6.0;
  double back_z = 14.0;
  double front_z = -8.0;
  double object_min_z = 4.0;
  double object_max_z = 10.0;
  double object_half_spread = 4.5;  // |x| of object centres
  double object_contrast = 60.0;
  double background_contrast = 18.0;
};

/// Closed room (every ray hits a wall) with textured boxes standing in front
/// of a low-contrast back wall. Deterministic per seed.
inline Scene make_scene(std::uint64_t seed, const SceneParams& params = {}) {
  std::mt19937_64 rng(detail::mix64(seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto material = [&](double base, double contrast, double checker) {
    Material m;
    m.base = base;
    m.contrast = contrast;
    m.checker_period = checker;
    m.seed = rng();
    return m;
  };
  Scene scene;
  Box room;
  room.min = {-params.room_half_width, params.ceiling_y, params.front_z};
  room.max = {params.room_half_width, params.floor_y, params.back_z};
  for (std::size_t f = 0; f < 6; ++f) room.faces[f] = material(110 + 20 * unit(rng), 35.0, 0.0);
  room.faces[5] = material(120.0, params.background_contrast, 0.0);  // back wall
  scene.boxes.push_back(room);

  for (int i = 0; i < params.objects; ++i) {
    const double sx = 0.5 + 1.1 * unit(rng), sy = 0.5 + 1.2 * unit(rng), sz = 0.4 + 0.8 * unit(rng);
    const double cx = (2 * unit(rng) - 1) * params.object_half_spread;
    const double cy = -2.0 + 2.8 * unit(rng);
    const double cz = params.object_min_z + (params.object_max_z - params.object_min_z) * unit(rng);
    Box b;
    b.min = {cx - sx / 2, std::min(cy - sy / 2, params.floor_y - 0.05), cz - sz / 2};
    b.max = {cx + sx / 2, std::min(cy + sy / 2, params.floor_y), cz + sz / 2};
    const double base = 70 + 120 * unit(rng);
    const double checker = unit(rng) < 0.5 ? 0.15 + 0.25 * unit(rng) : 0.0;
    for (auto& f : b.faces) f = material(base, params.object_contrast, checker);
    scene.boxes.push_back(b);
  }
  return scene;
}

/// Single textured plane at depth z in front of an identity camera.
inline Scene make_plane_scene(double z, std::uint64_t seed, double contrast = 60.0) {
  Scene s;
  Material m;
  m.seed = seed;
  m.contrast = contrast;
  s.planes.push_back({2, z, m});
  return s;
}

// ---------------------------------------------------------------- trajectories

enum class MotionKind { sideways, fixating, forwards, arvr };

inline std::string to_string(MotionKind m) {
  switch (m) {
    case MotionKind::sideways: return "sideways";
    case MotionKind::fixating: return "fixating";
    case MotionKind::forwards: return "forwards";
    case MotionKind::arvr: return "arvr";
  }
  return "?";
}

inline MotionKind motion_from_string(const std::string& s) {
  if (s == "sideways" || s == "linear") return MotionKind::sideways;
  if (s == "fixating") return MotionKind::fixating;
  if (s == "forwards" || s == "forward") return MotionKind::forwards;
  if (s == "arvr") return MotionKind::arvr;
  throw InvalidSpec("unknown motion kind '" + s + "'");
}

struct Waypoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

struct TrajectorySpec {
  MotionKind motion = MotionKind::sideways;
  int frames = 60;
  double fps = 30.0;
  int direction = 1;         // +1: towards +x (sideways) / counterclockwise sweep (fixating)
  double baseline = 1.5;     // sideways: total travel, meters
  double radius = 7.0;       // fixating: distance to the target
  double arc = 0.6;          // fixating: swept angle, radians
  Point3 target = {0, 0, 7}; // fixating: point kept on the optical axis
  double distance = 2.0;     // forwards: total travel, meters
  std::vector<Waypoint> waypoints;  // arvr; empty selects the default loop
};

/// Default AR/VR loop: four waypoints, yaw/pitch excursions within 25 degrees.
inline std::vector<Waypoint> default_arvr_waypoints() {
  auto q = [](double yaw_deg, double pitch_deg) {
    const double d = std::numbers::pi / 180.0;
    return Eigen::Quaterniond(Eigen::AngleAxisd(yaw_deg * d, Eigen::Vector3d::UnitY()) *
                              Eigen::AngleAxisd(pitch_deg * d, Eigen::Vector3d::UnitX()));
  };
  return {{{0.0, 0.0, 0.0}, q(0, 0)},
          {{0.45, -0.10, 0.25}, q(-20, 8)},
          {{0.15, 0.15, 0.55}, q(5, -12)},
          {{-0.35, 0.0, 0.25}, q(25, 5)},
          {{0.0, 0.0, 0.0}, q(0, 0)}};
}

/// Rotation whose optical axis (z) points from `eye` to `target`, with the
/// camera y axis kept in the vertical plane (pointing down).
inline Eigen::Quaterniond look_at(const Point3& eye, const Point3& target) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = Eigen::Vector3d::UnitY().cross(z);
  if (x.norm() < 1e-12) x = Eigen::Vector3d::UnitX();
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = z;
  return Eigen::Quaterniond(R).normalized();
}

/// Haversine ease: 0 -> 1 with zero velocity at both ends.
inline double haversine_ease(double tau) { return 0.5 * (1.0 - std::cos(std::numbers::pi * tau)); }

inline std::vector<RigidPose> make_trajectory(const TrajectorySpec& spec) {
  if (spec.frames < 2) throw InvalidSpec("trajectory needs at least 2 frames");
  if (spec.direction != 1 && spec.direction != -1) throw InvalidSpec("direction must be +1 or -1");
  std::vector<RigidPose> poses;
  poses.reserve(static_cast<std::size_t>(spec.frames));
  const double last = spec.frames - 1;
  switch (spec.motion) {
    case MotionKind::sideways: {
      if (!(spec.baseline > 0)) throw InvalidSpec("sideways baseline must be positive");
      for (int i = 0; i < spec.frames; ++i) {
        const double x = spec.direction * spec.baseline * (i / last - 0.5);
        poses.push_back(RigidPose::from_translation({x, 0, 0}));
      }
      break;
    }
    case MotionKind::fixating: {
      if (!(spec.radius > 0)) throw InvalidSpec("fixating radius must be positive");
      if (!(spec.arc > 0)) throw InvalidSpec("fixating arc must be positive");
      for (int i = 0; i < spec.frames; ++i) {
        const double phi = spec.direction * spec.arc * (i / last - 0.5);
        const Point3 eye = spec.target + spec.radius * Point3(std::sin(phi), 0.0, -std::cos(phi));
        poses.emplace_back(look_at(eye, spec.target), eye);
      }
      break;
    }
    case MotionKind::forwards: {
      if (!(spec.distance > 0)) throw InvalidSpec("forwards distance must be positive");
      for (int i = 0; i < spec.frames; ++i)
        poses.push_back(RigidPose::from_translation({0, 0, spec.direction * spec.distance * i / last}));
      break;
    }
    case MotionKind::arvr: {
      const auto wps = spec.waypoints.empty() ? default_arvr_waypoints() : spec.waypoints;
      if (wps.size() < 2) throw InvalidSpec("arvr needs at least 2 waypoints");
      const int segments = static_cast<int>(wps.size()) - 1;
      for (int i = 0; i < spec.frames; ++i) {
        const double g = segments * (i / last);
        const int seg = std::min(static_cast<int>(std::floor(g)), segments - 1);
        const double s = haversine_ease(g - seg);
        const Waypoint& a = wps[static_cast<std::size_t>(seg)];
        const Waypoint& b = wps[static_cast<std::size_t>(seg + 1)];
        poses.emplace_back(slerp(a.orientation, b.orientation, s), (1 - s) * a.position + s * b.position);
      }
      break;
    }
  }
  return poses;
}

// ---------------------------------------------------------------- oracle tracker

struct OracleNoise {
  Vec2 bias = Vec2::Zero();
  Mat2 covariance = Mat2::Zero();
  std::uint64_t seed = 0;
};

/// Tracks whose observations are exact reprojections of planted points plus
/// N(bias, covariance) noise. The birth observation (frame 0) is exact so
/// that depth anchoring reproduces the planted point; a track ends when its
/// point leaves the image or passes behind the camera.
inline std::vector<FeatureTrack> oracle_tracker(const SequenceBundle& seq, std::span<const Point3> planted,
                                                const OracleNoise& noise) {
  // 2x2 Cholesky factor; tolerates singular (e.g. zero) covariances
  const Mat2& S = noise.covariance;
  const double l11 = std::sqrt(std::max(0.0, S(0, 0)));
  const double l21 = l11 > 0 ? S(1, 0) / l11 : 0.0;
  const double l22 = std::sqrt(std::max(0.0, S(1, 1) - l21 * l21));
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<FeatureTrack> tracks;
  tracks.reserve(planted.size());
  for (std::size_t i = 0; i < planted.size(); ++i) {
    FeatureTrack t;
    t.id = static_cast<std::int64_t>(i);
    t.birth_frame = 0;
    for (std::size_t f = 0; f < seq.size(); ++f) {
      const Point3 Xc = transform(inverse(seq.poses[f]), planted[i]);
      if (!(Xc.z() > kMinDepth)) break;
      Pixel p = project(seq.intrinsics, Xc);
      if (!seq.intrinsics.contains(p)) break;
      if (f > 0) {
        const double z1 = normal(rng), z2 = normal(rng);
        p.u += noise.bias.x() + l11 * z1;
        p.v += noise.bias.y() + l21 * z1 + l22 * z2;
      }
      t.observations.push_back({static_cast<int>(f), p});
    }
    if (!t.observations.empty()) tracks.push_back(std::move(t));
  }
  return tracks;
}

/// Spatial points behind a regular pixel grid of the first frame, using its
/// depth image. Points sit exactly on integer pixels so depth anchoring
/// recovers them without interpolation error.
inline std::vector<Point3> plant_grid_points(const SequenceBundle& seq, int step, int margin = 20) {
  std::vector<Point3> pts;
  const Frame& f0 = seq.frames.front();
  if (!f0.depth) throw MissingStream("planting points needs depth in frame 0");
  const auto& K = seq.intrinsics;
  for (int v = margin; v < K.height - margin; v += step)
    for (int u = margin; u < K.width - margin; u += step) {
      const float z = (*f0.depth)(u, v);
      if (!(std::isfinite(z) && z > 0)) continue;
      pts.push_back(transform(seq.poses.front(), backproject(K, {double(u), double(v)}, z)));
    }
  return pts;
}

// ---------------------------------------------------------------- generator

struct GeneratorConfig {
  std::uint64_t seed = 0;
  std::uint64_t scene_seed = 0;
  TrajectorySpec trajectory;
  CameraIntrinsics intrinsics{500.0, 500.0, 399.5, 299.5, 800, 600};
  SceneParams scene;
  std::optional<int> keyframe;  // emit a keyframe cloud at this frame
  double cloud_density = 1.0;   // cloud points per pixel
  bool rotate = false;          // rotate images 90 degrees counterclockwise
  std::optional<OracleNoise> noise;
};

inline OracleNoise oracle_noise_from_json(const nlohmann::json& j, std::uint64_t default_seed) {
  OracleNoise n;
  n.seed = default_seed;
  try {
    if (j.contains("bias")) n.bias = Vec2(j.at("bias").at(0).get<double>(), j.at("bias").at(1).get<double>());
    if (j.contains("covariance")) {
      const auto& c = j.at("covariance");
      if (c.size() == 2 && c.at(0).is_array())
        n.covariance << c.at(0).at(0).get<double>(), c.at(0).at(1).get<double>(), c.at(1).at(0).get<double>(),
            c.at(1).at(1).get<double>();
      else if (c.size() == 2)
        n.covariance << c.at(0).get<double>(), 0, 0, c.at(1).get<double>();
      else
        throw InvalidSpec("noise covariance must be [[a,b],[c,d]] or [a,d]");
    }
    if (j.contains("seed")) n.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("noise: ") + e.what());
  }
  if (std::abs(n.covariance(0, 1) - n.covariance(1, 0)) > 1e-12 || n.covariance(0, 0) < 0 ||
      n.covariance(1, 1) < 0 || n.covariance.determinant() < -1e-12)
    throw InvalidSpec("noise covariance must be symmetric positive semidefinite");
  return n;
}

inline nlohmann::json oracle_noise_to_json(const OracleNoise& n) {
  return {{"bias", {n.bias.x(), n.bias.y()}},
          {"covariance", {{n.covariance(0, 0), n.covariance(0, 1)}, {n.covariance(1, 0), n.covariance(1, 1)}}},
          {"seed", n.seed}};
}

/// Parses {seed, motion, frames, fps, intrinsics, scene_seed, noise?} plus
/// optional trajectory/scene knobs.
inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig g;
  try {
    if (!j.is_object()) throw FormatError("generator config must be a JSON object");
    g.seed = j.value("seed", std::uint64_t{0});
    g.scene_seed = j.value("scene_seed", g.seed);
    g.trajectory.motion = motion_from_string(j.value("motion", std::string("sideways")));
    g.trajectory.frames = j.value("frames", 60);
    g.trajectory.fps = j.value("fps", 30.0);
    g.trajectory.direction = j.value("direction", 1);
    g.trajectory.baseline = j.value("baseline", g.trajectory.baseline);
    g.trajectory.radius = j.value("radius", g.trajectory.radius);
    g.trajectory.arc = j.value("arc", g.trajectory.arc);
    g.trajectory.distance = j.value("distance", g.trajectory.distance);
    if (j.contains("target"))
      g.trajectory.target = {j["target"].at(0).get<double>(), j["target"].at(1).get<double>(),
                             j["target"].at(2).get<double>()};
    if (j.contains("intrinsics")) g.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    if (j.contains("objects")) g.scene.objects = j.at("objects").get<int>();
    if (j.contains("keyframe") && !j.at("keyframe").is_null()) g.keyframe = j.at("keyframe").get<int>();
    g.cloud_density = j.value("cloud_density", 1.0);
    g.rotate = j.value("rotate", 0) == 90;
    if (j.contains("noise") && !j.at("noise").is_null()) g.noise = oracle_noise_from_json(j.at("noise"), g.seed);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("generator config: ") + e.what());
  }
  if (!(g.trajectory.fps > 0)) throw InvalidSpec("fps must be positive");
  if (g.keyframe && (*g.keyframe < 0 || *g.keyframe >= g.trajectory.frames))
    throw InvalidSpec("keyframe outside the generated frame range");
  if (!(g.cloud_density > 0)) throw InvalidSpec("cloud_density must be positive");
  return g;
}

inline nlohmann::json generator_config_to_json(const GeneratorConfig& g) {
  nlohmann::json j = {{"seed", g.seed},
                      {"scene_seed", g.scene_seed},
                      {"motion", to_string(g.trajectory.motion)},
                      {"frames", g.trajectory.frames},
                      {"fps", g.trajectory.fps},
                      {"direction", g.trajectory.direction},
                      {"baseline", g.trajectory.baseline},
                      {"radius", g.trajectory.radius},
                      {"arc", g.trajectory.arc},
                      {"distance", g.trajectory.distance},
                      {"target", {g.trajectory.target.x(), g.trajectory.target.y(), g.trajectory.target.z()}},
                      {"intrinsics", intrinsics_to_json(g.intrinsics)},
                      {"objects", g.scene.objects},
                      {"cloud_density", g.cloud_density},
                      {"rotate", g.rotate ? 90 : 0}};
  j["keyframe"] = g.keyframe ? nlohmann::json(*g.keyframe) : nlohmann::json(nullptr);
  j["noise"] = g.noise ? oracle_noise_to_json(*g.noise) : nlohmann::json(nullptr);
  return j;
}

/// Exact laser-scan stand-in: rays through uniformly random sub-pixel
/// locations of the keyframe, expressed in the keyframe camera frame.
inline KeyframeCloud sample_keyframe_cloud(const Scene& scene, const CameraIntrinsics& K, const RigidPose& pose,
                                           int frame, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-0.5, K.width - 0.5), V(-0.5, K.height - 0.5);
  const auto n = static_cast<std::size_t>(std::llround(density * K.width * K.height));
  KeyframeCloud cloud;
  cloud.frame = frame;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = U(rng), v = V(rng);
    const Hit h = cast_ray(scene, pose.translation(), pixel_ray(K, pose, u, v));
    if (!std::isfinite(h.t)) continue;
    cloud.points.push_back(backproject(K, {u, v}, h.t));
  }
  return cloud;
}

inline SequenceBundle generate_sequence(const GeneratorConfig& cfg, int workers = 1) {
  const Scene scene = make_scene(cfg.scene_seed, cfg.scene);
  const auto poses = make_trajectory(cfg.trajectory);
  SequenceBundle seq;
  seq.intrinsics = cfg.intrinsics;
  seq.poses = poses;
  seq.frames.resize(poses.size());
  parallel_for(poses.size(), workers, [&](std::size_t i) {
    RenderedFrame r = render(scene, poses[i], cfg.intrinsics);
    Frame& f = seq.frames[i];
    f.index = static_cast<int>(i);
    f.timestamp = static_cast<double>(i) / cfg.trajectory.fps;
    f.image = std::make_shared<const GrayImage>(std::move(r.image));
    f.depth = std::make_shared<const DepthMap>(std::move(r.depth));
  });
  if (cfg.keyframe)
    seq.keyframe_cloud = sample_keyframe_cloud(scene, cfg.intrinsics, poses[static_cast<std::size_t>(*cfg.keyframe)],
                                               *cfg.keyframe, cfg.cloud_density,
                                               detail::hash_combine(cfg.seed, 0xc10dULL));
  seq.metadata.motion = to_string(cfg.trajectory.motion);
  seq.metadata.scene_id = "synth-" + std::to_string(cfg.scene_seed);
  seq.metadata.curated = true;
  seq.metadata.original_indices.resize(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) seq.metadata.original_indices[i] = static_cast<int>(i);
  if (cfg.rotate) seq = rotate_ccw(seq);
  validate_sequence(seq);
  return seq;
}

}  // namespace trackbench

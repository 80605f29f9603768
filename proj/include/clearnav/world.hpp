#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "clearnav/dynamics.hpp"

namespace clearnav {

using Vec2 = Eigen::Vector2d;
using PointCloud2D = std::vector<Vec2>;

inline constexpr std::size_t kStandardCloudSize = 300;
inline constexpr double kDefaultFov = 69.0 * std::numbers::pi / 180.0;

struct Circle {
  Vec2 center = Vec2::Zero();
  double radius = 1.0;
};

struct Box {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Ones();
};

using Obstacle = std::variant<Circle, Box>;

struct Bounds {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Ones();

  bool contains(const Vec2& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  }
};

// Static 2D scene. The bounds rectangle acts as a wall.
struct World {
  std::vector<Obstacle> obstacles;
  Bounds bounds;
  RobotState start;
  Vec2 goal = Vec2::Zero();
};

// Range-scanner noise emulating monocular depth error: a smooth multiplicative
// angular bias b(theta, t) = bias_mean + range_bias_scale * g(theta, t), white
// additive noise, and per-ray dropout.
struct NoiseModel {
  double range_bias_scale = 0.0;
  double bias_mean = 0.0;
  double additive_sigma = 0.0;
  int drift_timescale = 10;  // steps between bias keyframes
  double dropout_prob = 0.0;

  bool is_zero() const {
    return range_bias_scale == 0.0 && bias_mean == 0.0 && additive_sigma == 0.0 &&
           dropout_prob == 0.0;
  }
};

struct SensorConfig {
  double fov = kDefaultFov;
  int n_rays = 69;
  double max_range = 5.0;
  NoiseModel noise;
};

// ---------------------------------------------------------------------------
// Validation

inline void validate(const Obstacle& o) {
  if (const auto* c = std::get_if<Circle>(&o)) {
    if (!(c->radius > 0.0)) throw std::invalid_argument("circle radius must be positive");
  } else {
    const auto& b = std::get<Box>(o);
    if (!(b.lo.x() < b.hi.x() && b.lo.y() < b.hi.y()))
      throw std::invalid_argument("box min corner must be below max corner");
  }
}

inline void validate(const SensorConfig& cfg) {
  if (!(cfg.fov > 0.0 && cfg.fov <= 2.0 * std::numbers::pi))
    throw std::invalid_argument("sensor fov must lie in (0, 2pi]");
  if (cfg.n_rays < 1) throw std::invalid_argument("sensor needs at least one ray");
  if (!(cfg.max_range > 0.0)) throw std::invalid_argument("sensor max_range must be positive");
  if (cfg.noise.additive_sigma < 0.0) throw std::invalid_argument("additive_sigma must be >= 0");
  if (!(cfg.noise.dropout_prob >= 0.0 && cfg.noise.dropout_prob < 1.0))
    throw std::invalid_argument("dropout_prob must lie in [0, 1)");
  if (cfg.noise.drift_timescale < 1) throw std::invalid_argument("drift_timescale must be >= 1");
}

// ---------------------------------------------------------------------------
// Geometry

inline double distance_to(const Vec2& p, const Circle& c) {
  return std::max(0.0, (p - c.center).norm() - c.radius);
}

inline double distance_to(const Vec2& p, const Box& b) {
  const double dx = std::max({b.lo.x() - p.x(), 0.0, p.x() - b.hi.x()});
  const double dy = std::max({b.lo.y() - p.y(), 0.0, p.y() - b.hi.y()});
  return std::hypot(dx, dy);
}

inline double distance_to(const Vec2& p, const Obstacle& o) {
  return std::visit([&](const auto& shape) { return distance_to(p, shape); }, o);
}

// Distance from an interior point to the bounding walls; 0 outside.
inline double distance_to_walls(const Vec2& p, const Bounds& b) {
  if (!b.contains(p)) return 0.0;
  return std::min({p.x() - b.lo.x(), b.hi.x() - p.x(), p.y() - b.lo.y(), b.hi.y() - p.y()});
}

// Euclidean distance from `p` to the nearest obstacle or wall surface; 0 inside.
inline double true_clearance(const Vec2& p, const World& world) {
  double d = distance_to_walls(p, world.bounds);
  for (const auto& o : world.obstacles) d = std::min(d, distance_to(p, o));
  return d;
}

inline void validate(const World& world, double robot_radius) {
  if (!(world.bounds.lo.x() < world.bounds.hi.x() && world.bounds.lo.y() < world.bounds.hi.y()))
    throw std::invalid_argument("world bounds are empty");
  for (const auto& o : world.obstacles) validate(o);
  const Vec2 start{world.start.x, world.start.y};
  if (!world.bounds.contains(start) || !world.bounds.contains(world.goal))
    throw std::invalid_argument("start and goal must lie inside the bounds");
  if (true_clearance(start, world) < robot_radius)
    throw std::invalid_argument("start pose intersects an inflated obstacle");
  for (const auto& o : world.obstacles)
    if (distance_to(world.goal, o) < robot_radius)
      throw std::invalid_argument("goal intersects an inflated obstacle");
}

// Ray/shape intersections: smallest t >= 0 with origin + t*dir on the surface,
// `dir` unit length. An origin inside a solid shape hits at t = 0.

inline std::optional<double> intersect(const Vec2& origin, const Vec2& dir, const Circle& c) {
  const Vec2 oc = origin - c.center;
  const double b = oc.dot(dir);
  const double cc = oc.squaredNorm() - c.radius * c.radius;
  if (cc <= 0.0) return 0.0;
  const double disc = b * b - cc;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t < 0.0) return std::nullopt;
  return t;
}

inline std::optional<double> intersect(const Vec2& origin, const Vec2& dir, const Box& box) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.lo[a] || origin[a] > box.hi[a]) return std::nullopt;
      continue;
    }
    double t0 = (box.lo[a] - origin[a]) / dir[a];
    double t1 = (box.hi[a] - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_far < 0.0) return std::nullopt;
  return std::max(t_near, 0.0);
}

inline std::optional<double> intersect(const Vec2& origin, const Vec2& dir, const Obstacle& o) {
  return std::visit([&](const auto& shape) { return intersect(origin, dir, shape); }, o);
}

// Exit distance of a ray starting inside the bounds.
inline double exit_walls(const Vec2& origin, const Vec2& dir, const Bounds& b) {
  double t = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a) {
    if (dir[a] > 0.0) t = std::min(t, (b.hi[a] - origin[a]) / dir[a]);
    if (dir[a] < 0.0) t = std::min(t, (b.lo[a] - origin[a]) / dir[a]);
  }
  return std::max(t, 0.0);
}

inline double cast_ray(const Vec2& origin, const Vec2& dir, const World& world) {
  double t = exit_walls(origin, dir, world.bounds);
  for (const auto& o : world.obstacles)
    if (auto hit = intersect(origin, dir, o)) t = std::min(t, *hit);
  return t;
}

// ---------------------------------------------------------------------------
// Scanning

// Body-frame bearing of ray `i`; rays span the fov symmetrically about the heading.
inline double ray_bearing(const SensorConfig& cfg, int i) {
  if (cfg.n_rays == 1) return 0.0;
  return -0.5 * cfg.fov + cfg.fov * static_cast<double>(i) / static_cast<double>(cfg.n_rays - 1);
}

// Per-ray true range; nullopt where nothing lies within max_range.
inline std::vector<std::optional<double>> scan_ranges(const RobotState& state, const World& world,
                                                      const SensorConfig& cfg) {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(cfg.n_rays));
  const Vec2 origin{state.x, state.y};
  for (int i = 0; i < cfg.n_rays; ++i) {
    const double a = state.psi + ray_bearing(cfg, i);
    const Vec2 dir{std::cos(a), std::sin(a)};
    const double t = cast_ray(origin, dir, world);
    if (t <= cfg.max_range) out[static_cast<std::size_t>(i)] = t;
  }
  return out;
}

inline Vec2 polar_point(double range, double bearing) {
  return {range * std::cos(bearing), range * std::sin(bearing)};
}

// Noise-free scan, hit points in the robot body frame.
inline PointCloud2D raycast_scan(const RobotState& state, const World& world,
                                 const SensorConfig& cfg) {
  const auto ranges = scan_ranges(state, world, cfg);
  PointCloud2D cloud;
  for (int i = 0; i < cfg.n_rays; ++i)
    if (const auto& r = ranges[static_cast<std::size_t>(i)]) cloud.push_back(polar_point(*r, ray_bearing(cfg, i)));
  return cloud;
}

inline Vec2 body_to_world(const Vec2& p, const RobotState& s) {
  const double c = std::cos(s.psi);
  const double sn = std::sin(s.psi);
  return {s.x + c * p.x() - sn * p.y(), s.y + sn * p.x() + c * p.y()};
}

inline PointCloud2D to_world_frame(const PointCloud2D& body, const RobotState& s) {
  PointCloud2D out;
  out.reserve(body.size());
  for (const auto& p : body) out.push_back(body_to_world(p, s));
  return out;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Smooth angular bias field, piecewise-linear in time between keyframes spaced
// drift_timescale steps apart. Keyframe shapes are a pure function of
// (seed, keyframe index), so the field can be evaluated at any step.
class BiasField {
 public:
  BiasField() = default;
  BiasField(const NoiseModel& noise, double fov, std::uint64_t seed)
      : noise_(noise), fov_(fov), seed_(seed) {}

  double operator()(double bearing, long step) const {
    if (noise_.range_bias_scale == 0.0) return noise_.bias_mean;
    const long period = std::max(1, noise_.drift_timescale);
    const long key = step >= 0 ? step / period : 0;
    const double frac = step >= 0 ? static_cast<double>(step % period) / static_cast<double>(period) : 0.0;
    const double g = (1.0 - frac) * shape(key, bearing) + frac * shape(key + 1, bearing);
    return noise_.bias_mean + noise_.range_bias_scale * g;
  }

 private:
  // g(u) = (a0 + a1 sin(pi u / 2) + a2 cos(pi u)) / 3 with u the bearing scaled
  // to [-1, 1] over the fov and a_k ~ U(-1, 1); |g| <= 1.
  double shape(long key, double bearing) const {
    std::mt19937_64 gen(detail::splitmix64(seed_ ^ detail::splitmix64(static_cast<std::uint64_t>(key))));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double a0 = unit(gen);
    const double a1 = unit(gen);
    const double a2 = unit(gen);
    const double u = std::clamp(bearing / (0.5 * fov_), -1.0, 1.0);
    return (a0 + a1 * std::sin(0.5 * std::numbers::pi * u) + a2 * std::cos(std::numbers::pi * u)) / 3.0;
  }

  NoiseModel noise_;
  double fov_ = kDefaultFov;
  std::uint64_t seed_ = 0;
};

// Noisy scan: r -> r (1 + b(theta, t)) + eta, eta ~ N(0, additive_sigma^2),
// rays dropped with dropout_prob, ranges clamped to (0, max_range]. True misses
// stay misses.
template <class Rng>
PointCloud2D estimated_scan(const RobotState& state, const World& world, const SensorConfig& cfg,
                            const BiasField& bias, long step, Rng& rng) {
  const auto ranges = scan_ranges(state, world, cfg);
  const NoiseModel& nm = cfg.noise;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double kMinRange = 1e-3;

  PointCloud2D cloud;
  for (int i = 0; i < cfg.n_rays; ++i) {
    const auto& r = ranges[static_cast<std::size_t>(i)];
    if (!r) continue;
    const double bearing = ray_bearing(cfg, i);
    if (nm.is_zero()) {
      cloud.push_back(polar_point(*r, bearing));
      continue;
    }
    const double noise = nm.additive_sigma > 0.0 ? nm.additive_sigma * gauss(rng) : 0.0;
    const bool dropped = nm.dropout_prob > 0.0 && unit(rng) < nm.dropout_prob;
    if (dropped) continue;
    const double est = std::clamp(*r * (1.0 + bias(bearing, step)) + noise, kMinRange, cfg.max_range);
    cloud.push_back(polar_point(est, bearing));
  }
  return cloud;
}

// Resizes a cloud to exactly 300 points: subsample without replacement, pad by
// resampling with replacement, or fill with free-space sentinels at max_range
// spread across the fov when empty.
template <class Rng>
PointCloud2D standardize_cloud(const PointCloud2D& cloud, const SensorConfig& cfg, Rng& rng) {
  constexpr std::size_t n = kStandardCloudSize;
  if (cloud.size() == n) return cloud;
  PointCloud2D out;
  out.reserve(n);
  if (cloud.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      const double bearing = -0.5 * cfg.fov + cfg.fov * static_cast<double>(i) / static_cast<double>(n - 1);
      out.push_back(polar_point(cfg.max_range, bearing));
    }
    return out;
  }
  if (cloud.size() > n) {
    std::sample(cloud.begin(), cloud.end(), std::back_inserter(out), n, rng);
    return out;
  }
  out = cloud;
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  while (out.size() < n) out.push_back(cloud[pick(rng)]);
  return out;
}

}  // namespace clearnav

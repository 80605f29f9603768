#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "clearnav/world.hpp"

using namespace clearnav;

namespace {

World open_world(std::vector<Obstacle> obstacles = {}) {
  World w;
  w.bounds = {Vec2{-100, -100}, Vec2{100, 100}};
  w.obstacles = std::move(obstacles);
  return w;
}

// Dense sampling of a box outline.
double sampled_box_distance(const Vec2& p, const Box& b, double step) {
  double best = std::numeric_limits<double>::infinity();
  for (double x = b.lo.x(); x <= b.hi.x() + 1e-12; x += step) {
    best = std::min(best, (p - Vec2{x, b.lo.y()}).norm());
    best = std::min(best, (p - Vec2{x, b.hi.y()}).norm());
  }
  for (double y = b.lo.y(); y <= b.hi.y() + 1e-12; y += step) {
    best = std::min(best, (p - Vec2{b.lo.x(), y}).norm());
    best = std::min(best, (p - Vec2{b.hi.x(), y}).norm());
  }
  return best;
}

double march(const Vec2& origin, const Vec2& dir, const World& w, double step, double max_t) {
  for (double t = 0.0; t <= max_t; t += step)
    if (true_clearance(origin + t * dir, w) <= 0.0) return t;
  return std::numeric_limits<double>::infinity();
}

}  // namespace

TEST(TrueClearance, CircleExamples) {
  const World w = open_world({Circle{{2, 0}, 1}});
  EXPECT_DOUBLE_EQ(true_clearance({0, 0}, w), 1.0);
  EXPECT_DOUBLE_EQ(true_clearance({2, 0}, w), 0.0);
}

TEST(TrueClearance, BoxAgainstBoundarySampling) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Box b{{-0.5, -0.25}, {0.75, 0.5}};
  const World w = open_world({b});
  for (int i = 0; i < 200; ++i) {
    const Vec2 p{u(rng), u(rng)};
    const bool inside = p.x() > b.lo.x() && p.x() < b.hi.x() && p.y() > b.lo.y() && p.y() < b.hi.y();
    const double expected = inside ? 0.0 : sampled_box_distance(p, b, 1e-3);
    EXPECT_NEAR(true_clearance(p, w), expected, 2e-3);
  }
}

TEST(TrueClearance, Lipschitz) {
  std::mt19937_64 rng(2);
  World w;
  w.bounds = {Vec2{0, 0}, Vec2{8, 5}};
  w.obstacles = {Circle{{2, 2}, 0.5}, Box{{4, 1}, {5, 3}}, Circle{{6.5, 4}, 0.3}};
  std::uniform_real_distribution<double> ux(0, 8), uy(0, 5);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 p{ux(rng), uy(rng)}, q{ux(rng), uy(rng)};
    EXPECT_LE(std::abs(true_clearance(p, w) - true_clearance(q, w)), (p - q).norm() + 1e-12);
  }
}

TEST(TrueClearance, WallsCount) {
  World w;
  w.bounds = {Vec2{0, 0}, Vec2{4, 4}};
  EXPECT_DOUBLE_EQ(true_clearance({1, 2}, w), 1.0);
  EXPECT_DOUBLE_EQ(true_clearance({-1, 2}, w), 0.0);
}

TEST(Raycast, CentralRayHitsWall) {
  World w;
  w.bounds = {Vec2{-3, -3}, Vec2{3, 3}};
  SensorConfig cfg;
  cfg.n_rays = 69;  // odd, so ray 34 is on the heading
  const auto cloud = raycast_scan({0, 0, 0, 0, 0}, w, cfg);
  ASSERT_EQ(cloud.size(), 69u);
  EXPECT_NEAR(cloud[34].x(), 3.0, 1e-12);
  EXPECT_NEAR(cloud[34].y(), 0.0, 1e-12);
}

TEST(Raycast, EmptyWorldEmptyCloud) {
  EXPECT_TRUE(raycast_scan({0, 0, 0, 0, 0}, open_world(), SensorConfig{}).empty());
}

TEST(Raycast, CircleAgainstRayMarching) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> c(-2.0, 2.0), r(0.2, 0.8), a(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < 50; ++i) {
    const World w = open_world({Circle{{3.0 + c(rng), c(rng)}, r(rng)}});
    const double ang = a(rng) * 0.1 - 0.1;
    const Vec2 dir{std::cos(ang), std::sin(ang)};
    const auto hit = intersect(Vec2{0, 0}, dir, w.obstacles[0]);
    const double marched = march({0, 0}, dir, w, 1e-4, 7.0);
    if (!hit) {
      EXPECT_TRUE(std::isinf(marched));
      continue;
    }
    EXPECT_NEAR(*hit, marched, 5e-4);
  }
}

TEST(Raycast, HitsLieOnSurfaces) {
  World w;
  w.bounds = {Vec2{0, 0}, Vec2{8, 5}};
  w.obstacles = {Circle{{3, 2.5}, 0.5}, Box{{5, 1}, {6, 2}}, Circle{{4, 4}, 0.4}};
  SensorConfig cfg;
  cfg.fov = 2.0 * std::numbers::pi;
  cfg.n_rays = 360;
  cfg.max_range = 20;
  const RobotState s{1.0, 2.0, 0.3, 0, 0};
  for (const auto& p : to_world_frame(raycast_scan(s, w, cfg), s)) EXPECT_LT(true_clearance(p, w), 1e-6);
}

TEST(EstimatedScan, ZeroNoiseMatchesRaycast) {
  World w;
  w.bounds = {Vec2{0, 0}, Vec2{8, 5}};
  w.obstacles = {Circle{{3, 2.5}, 0.5}};
  SensorConfig cfg;
  const RobotState s{1, 2.5, 0, 0, 0};
  std::mt19937_64 rng(3);
  const BiasField bias(cfg.noise, cfg.fov, 1);
  const auto est = estimated_scan(s, w, cfg, bias, 0, rng);
  const auto ref = raycast_scan(s, w, cfg);
  ASSERT_EQ(est.size(), ref.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    EXPECT_EQ(est[i].x(), ref[i].x());
    EXPECT_EQ(est[i].y(), ref[i].y());
  }
}

TEST(EstimatedScan, AdditiveNoiseMean) {
  World w;
  w.bounds = {Vec2{-2, -2}, Vec2{2, 2}};
  SensorConfig cfg;
  cfg.fov = 1e-6;
  cfg.n_rays = 10000;
  cfg.noise.additive_sigma = 0.2;
  std::mt19937_64 rng(8);
  const BiasField bias(cfg.noise, cfg.fov, 2);
  const auto cloud = estimated_scan({0, 0, 0, 0, 0}, w, cfg, bias, 0, rng);
  ASSERT_EQ(cloud.size(), 10000u);
  double mean = 0.0;
  for (const auto& p : cloud) mean += p.norm();
  EXPECT_NEAR(mean / static_cast<double>(cloud.size()), 2.0, 0.01);
}

TEST(EstimatedScan, FullDropoutEmpties) {
  World w;
  w.bounds = {Vec2{-2, -2}, Vec2{2, 2}};
  SensorConfig cfg;
  cfg.noise.dropout_prob = 1.0;
  std::mt19937_64 rng(8);
  const BiasField bias(cfg.noise, cfg.fov, 2);
  EXPECT_TRUE(estimated_scan({0, 0, 0, 0, 0}, w, cfg, bias, 0, rng).empty());
  EXPECT_THROW(validate(cfg), std::invalid_argument);
}

TEST(EstimatedScan, RangesClamped) {
  World w;
  w.bounds = {Vec2{-4.9, -4.9}, Vec2{4.9, 4.9}};
  SensorConfig cfg;
  cfg.noise = {0.5, 0.5, 0.3, 5, 0.0};
  std::mt19937_64 rng(8);
  const BiasField bias(cfg.noise, cfg.fov, 2);
  for (long t = 0; t < 20; ++t)
    for (const auto& p : estimated_scan({0, 0, 0.2 * t, 0, 0}, w, cfg, bias, t, rng)) {
      EXPECT_GT(p.norm(), 0.0);
      EXPECT_LE(p.norm(), cfg.max_range + 1e-12);
    }
}

TEST(BiasField, BoundedSmoothAndReproducible) {
  const NoiseModel nm{0.3, 0.1, 0.0, 10, 0.0};
  const BiasField a(nm, kDefaultFov, 77), b(nm, kDefaultFov, 77);
  for (long t = 0; t < 60; ++t) {
    for (double th = -0.6; th <= 0.6; th += 0.05) {
      EXPECT_LE(std::abs(a(th, t) - nm.bias_mean), nm.range_bias_scale + 1e-12);
      EXPECT_EQ(a(th, t), b(th, t));
      // piecewise-linear in time: one step moves the field by at most 2 * scale / timescale
      EXPECT_LE(std::abs(a(th, t + 1) - a(th, t)), 2.0 * nm.range_bias_scale / 10.0 + 1e-12);
    }
  }
}

TEST(StandardizeCloud, SizesAndMembership) {
  std::mt19937_64 rng(6);
  SensorConfig cfg;
  std::uniform_real_distribution<double> u(-3, 3);
  auto random_cloud = [&](std::size_t n) {
    PointCloud2D c;
    for (std::size_t i = 0; i < n; ++i) c.push_back({u(rng), u(rng)});
    return c;
  };
  const auto c300 = random_cloud(300);
  EXPECT_EQ(standardize_cloud(c300, cfg, rng), c300);

  const auto c600 = random_cloud(600);
  const auto s600 = standardize_cloud(c600, cfg, rng);
  ASSERT_EQ(s600.size(), 300u);
  for (const auto& p : s600) EXPECT_NE(std::find(c600.begin(), c600.end(), p), c600.end());
  auto sorted = s600;
  std::sort(sorted.begin(), sorted.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());

  const auto empty = standardize_cloud({}, cfg, rng);
  ASSERT_EQ(empty.size(), 300u);
  for (const auto& p : empty) {
    EXPECT_NEAR(p.norm(), cfg.max_range, 1e-12);
    EXPECT_LE(std::abs(std::atan2(p.y(), p.x())), 0.5 * cfg.fov + 1e-12);
  }

  for (std::size_t n : {1u, 7u, 299u, 301u, 1000u}) {
    const auto c = random_cloud(n);
    const auto s = standardize_cloud(c, cfg, rng);
    EXPECT_EQ(s.size(), 300u);
    for (const auto& p : s) EXPECT_NE(std::find(c.begin(), c.end(), p), c.end());
  }
}

TEST(Validation, RejectsBadInputs) {
  EXPECT_THROW(validate(Obstacle{Circle{{0, 0}, 0.0}}), std::invalid_argument);
  EXPECT_THROW(validate(Obstacle{Box{{1, 0}, {0, 1}}}), std::invalid_argument);
  SensorConfig cfg;
  cfg.fov = 7.0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.n_rays = 0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  World w;
  w.bounds = {Vec2{0, 0}, Vec2{4, 4}};
  w.start = {1, 1, 0, 0, 0};
  w.goal = {3, 3};
  w.obstacles = {Circle{{1.2, 1}, 0.2}};
  EXPECT_THROW(validate(w, 0.3), std::invalid_argument);
  w.obstacles = {Circle{{2, 2}, 0.2}};
  EXPECT_NO_THROW(validate(w, 0.3));
}

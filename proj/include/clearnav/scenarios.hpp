#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <random>
#include <vector>

#include "clearnav/world.hpp"

namespace clearnav {

struct ClutterConfig {
  Bounds bounds{Vec2{0.0, 0.0}, Vec2{8.0, 5.0}};
  Vec2 start{0.7, 2.5};
  Vec2 goal{7.3, 2.5};
  int min_obstacles = 6;
  int max_obstacles = 10;
  double min_size = 0.3;
  double max_size = 0.7;
  double circle_fraction = 0.3;
  // Obstacles stay this far from start and goal.
  double keep_out = 1.0;
  // Feasibility check: grid resolution and clearance required along the corridor.
  double grid_resolution = 0.05;
  double corridor_clearance = 0.4;
  int max_attempts = 200;
};

// Breadth-first search on a grid whose free cells have true clearance of at
// least `clearance`. Start and goal snap to their nearest cells.
inline bool path_exists(const World& world, const Vec2& from, const Vec2& to, double clearance, double resolution) {
  const Vec2 lo = world.bounds.lo;
  const int nx = static_cast<int>(std::floor((world.bounds.hi.x() - lo.x()) / resolution)) + 1;
  const int ny = static_cast<int>(std::floor((world.bounds.hi.y() - lo.y()) / resolution)) + 1;
  auto cell_center = [&](int i, int j) { return Vec2{lo.x() + i * resolution, lo.y() + j * resolution}; };
  auto to_cell = [&](const Vec2& p) {
    return std::pair<int, int>{std::clamp(static_cast<int>(std::lround((p.x() - lo.x()) / resolution)), 0, nx - 1),
                               std::clamp(static_cast<int>(std::lround((p.y() - lo.y()) / resolution)), 0, ny - 1)};
  };
  std::vector<char> free(static_cast<std::size_t>(nx * ny), 0);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      free[static_cast<std::size_t>(i * ny + j)] = true_clearance(cell_center(i, j), world) >= clearance;
  const auto [si, sj] = to_cell(from);
  const auto [gi, gj] = to_cell(to);
  if (!free[static_cast<std::size_t>(si * ny + sj)] || !free[static_cast<std::size_t>(gi * ny + gj)]) return false;
  std::vector<char> seen(free.size(), 0);
  std::deque<std::pair<int, int>> queue{{si, sj}};
  seen[static_cast<std::size_t>(si * ny + sj)] = 1;
  constexpr int di[4] = {1, -1, 0, 0};
  constexpr int dj[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    if (i == gi && j == gj) return true;
    for (int k = 0; k < 4; ++k) {
      const int a = i + di[k], b = j + dj[k];
      if (a < 0 || b < 0 || a >= nx || b >= ny) continue;
      const auto c = static_cast<std::size_t>(a * ny + b);
      if (seen[c] || !free[c]) continue;
      seen[c] = 1;
      queue.emplace_back(a, b);
    }
  }
  return false;
}

// Random box/circle clutter between start and goal, rejection-sampled until a
// corridor with the configured clearance connects them.
template <class Rng>
World generate_clutter_world(const ClutterConfig& cfg, Rng& rng) {
  std::uniform_int_distribution<int> count(cfg.min_obstacles, cfg.max_obstacles);
  std::uniform_real_distribution<double> ux(cfg.bounds.lo.x(), cfg.bounds.hi.x());
  std::uniform_real_distribution<double> uy(cfg.bounds.lo.y(), cfg.bounds.hi.y());
  std::uniform_real_distribution<double> size(cfg.min_size, cfg.max_size);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  World world;
  world.bounds = cfg.bounds;
  world.start = RobotState{cfg.start.x(), cfg.start.y(), 0.0, 0.0, 0.0};
  world.start.psi = std::atan2(cfg.goal.y() - cfg.start.y(), cfg.goal.x() - cfg.start.x());
  world.goal = cfg.goal;

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    world.obstacles.clear();
    const int n = count(rng);
    while (static_cast<int>(world.obstacles.size()) < n) {
      const Vec2 c{ux(rng), uy(rng)};
      if ((c - cfg.start).norm() < cfg.keep_out || (c - cfg.goal).norm() < cfg.keep_out) continue;
      const double s = size(rng);
      if (unit(rng) < cfg.circle_fraction) {
        world.obstacles.emplace_back(Circle{c, 0.5 * s});
      } else {
        const double s2 = size(rng);
        world.obstacles.emplace_back(Box{c - 0.5 * Vec2{s, s2}, c + 0.5 * Vec2{s, s2}});
      }
    }
    if (path_exists(world, cfg.start, cfg.goal, cfg.corridor_clearance, cfg.grid_resolution)) return world;
  }
  world.obstacles.clear();
  return world;
}

inline World empty_world(const Bounds& bounds, const RobotState& start, const Vec2& goal) {
  World w;
  w.bounds = bounds;
  w.start = start;
  w.goal = goal;
  return w;
}

// One box straddling the straight line from start to goal.
inline World single_obstacle_world(double obstacle_distance = 2.5, double half_size = 0.25) {
  World w;
  w.bounds = Bounds{Vec2{0.0, 0.0}, Vec2{7.0, 5.0}};
  w.start = RobotState{0.7, 2.5, 0.0, 0.0, 0.0};
  w.goal = Vec2{6.3, 2.5};
  const Vec2 c{w.start.x + obstacle_distance, 2.5};
  w.obstacles.emplace_back(Box{c - Vec2{half_size, half_size}, c + Vec2{half_size, half_size}});
  return w;
}

}  // namespace clearnav

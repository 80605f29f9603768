#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "clearnav/collision_model.hpp"
#include "clearnav/planner.hpp"
#include "clearnav/scenarios.hpp"
#include "clearnav/training.hpp"
#include "clearnav/world.hpp"

namespace clearnav {

enum class Method { augmented, baseline_nll, det, raw_costmap, oracle };

inline constexpr std::array<Method, 5> kAllMethods{Method::augmented, Method::baseline_nll, Method::det,
                                                   Method::raw_costmap, Method::oracle};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::augmented: return "augmented";
    case Method::baseline_nll: return "baseline_nll";
    case Method::det: return "det";
    case Method::raw_costmap: return "raw_costmap";
    case Method::oracle: return "oracle";
  }
  return "?";
}

inline Method parse_method(std::string_view name) {
  for (Method m : kAllMethods)
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (expected augmented, baseline_nll, det, raw_costmap or oracle)");
}

enum class EpisodeResult { reached, collided, stuck, timeout };

inline std::string_view to_string(EpisodeResult r) {
  switch (r) {
    case EpisodeResult::reached: return "reached";
    case EpisodeResult::collided: return "collided";
    case EpisodeResult::stuck: return "stuck";
    case EpisodeResult::timeout: return "timeout";
  }
  return "?";
}

struct EpisodeConfig {
  double timeout_s = 120.0;
  double stuck_window_s = 10.0;
  double stuck_distance = 0.1;
  double goal_tolerance = 0.3;
  int exec_horizon = 1;
  // raw_costmap inflation added on top of the robot radius, and the oracle's fixed spread.
  double raw_inflation = 0.1;
  double oracle_sigma = 0.05;
  double det_sigma = 1e-6;
};

// Trained networks available to the learned methods.
struct ModelSet {
  std::optional<ModelParams> augmented;
  std::optional<ModelParams> baseline;
};

// One executed state. Prediction columns describe the plan whose first
// command led to this state and are zero on the initial row.
struct TraceRow {
  double t = 0.0;
  RobotState state;
  ClearancePrediction pred{0.0, 0.0, 0.0};
  double risk = 0.0;
  double true_clearance = 0.0;
};

struct EpisodeOutcome {
  EpisodeResult result = EpisodeResult::timeout;
  double duration = 0.0;
  std::vector<TraceRow> trace;
  std::vector<Command> commands;
  double avg_speed = 0.0;
  double max_speed = 0.0;
  double min_true_clearance = 0.0;
};

inline std::unique_ptr<ClearancePredictor> make_predictor(Method method, const World& world, const ModelSet& models,
                                                          const SensorConfig& camera, const EpisodeConfig& ep) {
  auto need = [](const std::optional<ModelParams>& m, std::string_view name) -> const ModelParams& {
    if (!m) throw std::invalid_argument("method needs a trained " + std::string(name) + " model");
    return *m;
  };
  switch (method) {
    case Method::augmented: return std::make_unique<LearnedPredictor>(need(models.augmented, "augmented"));
    case Method::baseline_nll: return std::make_unique<LearnedPredictor>(need(models.baseline, "baseline"));
    case Method::det: return std::make_unique<LearnedPredictor>(need(models.baseline, "baseline"), ep.det_sigma);
    case Method::raw_costmap: return std::make_unique<RawCloudPredictor>(ep.raw_inflation, camera.max_range);
    case Method::oracle: return std::make_unique<OraclePredictor>(world, ep.oracle_sigma, camera.max_range);
  }
  throw std::invalid_argument("unknown method");
}

inline double goal_distance(const RobotState& s, const Vec2& goal) { return std::hypot(s.x - goal.x(), s.y - goal.y()); }

// Runs the MPC loop from world.start until the goal is reached, the robot
// collides, stalls for stuck_window_s, or timeout_s elapses.
inline EpisodeOutcome run_episode(const World& world, Method method, const ModelSet& models, const SensorConfig& camera,
                                  const PlannerConfig& planner, const EpisodeConfig& ep, std::uint64_t seed,
                                  int sectors = kDefaultSectors) {
  const auto predictor = make_predictor(method, world, models, camera, ep);
  PlannerConfig pcfg = planner;
  pcfg.seed = seed;
  MpcController mpc(pcfg, camera, sectors, seed, ep.exec_horizon);
  const double dt = planner.dt;
  const auto window_steps = static_cast<std::size_t>(std::llround(ep.stuck_window_s / dt));
  const auto max_steps = static_cast<long>(std::llround(ep.timeout_s / dt));

  EpisodeOutcome out;
  SimState sim{world.start, 0};
  TraceRow first;
  first.state = sim.robot;
  first.true_clearance = true_clearance(Vec2{sim.robot.x, sim.robot.y}, world);
  out.trace.push_back(first);
  out.min_true_clearance = first.true_clearance;

  auto finish = [&](EpisodeResult r) {
    out.result = r;
    out.duration = static_cast<double>(sim.step) * dt;
    double sum = 0.0;
    for (const auto& c : out.commands) {
      sum += c.v;
      out.max_speed = std::max(out.max_speed, c.v);
    }
    out.avg_speed = out.commands.empty() ? 0.0 : sum / static_cast<double>(out.commands.size());
    return out;
  };

  if (first.true_clearance < planner.robot_radius) return finish(EpisodeResult::collided);
  while (true) {
    if (goal_distance(sim.robot, world.goal) <= ep.goal_tolerance) return finish(EpisodeResult::reached);
    if (sim.step >= max_steps) return finish(EpisodeResult::timeout);
    const std::size_t rows = out.trace.size();
    if (rows > window_steps) {
      const auto& then = out.trace[rows - 1 - window_steps].state;
      if (std::hypot(sim.robot.x - then.x, sim.robot.y - then.y) < ep.stuck_distance)
        return finish(EpisodeResult::stuck);
    }

    const MpcStepResult r = mpc.step(sim, world, *predictor, world.goal);
    for (std::size_t k = 0; k < r.executed.size(); ++k) {
      out.commands.push_back(r.executed[k]);
      TraceRow row;
      row.t = static_cast<double>(sim.step + static_cast<long>(k) + 1) * dt;
      row.state = r.executed_states[k];
      row.pred = r.plan.prediction;
      row.risk = r.risk;
      row.true_clearance = true_clearance(Vec2{row.state.x, row.state.y}, world);
      out.min_true_clearance = std::min(out.min_true_clearance, row.true_clearance);
      out.trace.push_back(row);
    }
    sim = r.next;
    if (r.collided) return finish(EpisodeResult::collided);
  }
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchmarkConfig {
  int episodes = 60;
  std::uint64_t seed = 2024;
  ClutterConfig clutter;
  SensorConfig camera;
  PlannerConfig planner;
  EpisodeConfig episode;
  int sectors = kDefaultSectors;
};

struct MethodSummary {
  Method method = Method::augmented;
  int episodes = 0;
  double collision_pct = 0.0;
  double stuck_pct = 0.0;
  double reached_pct = 0.0;
  double timeout_pct = 0.0;
  double avg_speed = 0.0;  // mean over episodes of the per-episode average
  double max_speed = 0.0;  // max over episodes
};

struct EpisodeRecord {
  Method method = Method::augmented;
  int episode = 0;
  EpisodeResult result = EpisodeResult::timeout;
  double duration = 0.0;
  double avg_speed = 0.0;
  double max_speed = 0.0;
  double min_true_clearance = 0.0;
};

struct BenchmarkReport {
  std::uint64_t seed = 0;
  int episodes = 0;
  std::string config_hash;
  std::vector<MethodSummary> summaries;
  std::vector<EpisodeRecord> records;

  const MethodSummary& summary(Method m) const {
    for (const auto& s : summaries)
      if (s.method == m) return s;
    throw std::out_of_range("method not in report");
  }
};

inline std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  return detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(episode) + 0x1234567ULL));
}

// World of suite episode `e`; identical for every method.
inline World suite_world(const BenchmarkConfig& cfg, int episode) {
  std::mt19937_64 rng(episode_seed(cfg.seed, episode) ^ 0x77ULL);
  return generate_clutter_world(cfg.clutter, rng);
}

inline MethodSummary summarize(Method m, std::span<const EpisodeRecord> records) {
  MethodSummary s;
  s.method = m;
  int coll = 0, stuck = 0, reached = 0, timeout = 0;
  double speed = 0.0;
  for (const auto& r : records) {
    if (r.method != m) continue;
    ++s.episodes;
    coll += r.result == EpisodeResult::collided;
    stuck += r.result == EpisodeResult::stuck;
    reached += r.result == EpisodeResult::reached;
    timeout += r.result == EpisodeResult::timeout;
    speed += r.avg_speed;
    s.max_speed = std::max(s.max_speed, r.max_speed);
  }
  if (s.episodes > 0) {
    const double e = s.episodes;
    s.collision_pct = 100.0 * coll / e;
    s.stuck_pct = 100.0 * stuck / e;
    s.reached_pct = 100.0 * reached / e;
    s.timeout_pct = 100.0 * timeout / e;
    s.avg_speed = speed / e;
  }
  return s;
}

// E seeded episodes per method on the suite's generated clutter worlds. Every
// method sees the same worlds and the same per-episode seeds.
template <class Progress>
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, std::span<const Method> methods, const ModelSet& models,
                              std::string config_hash, Progress&& progress) {
  if (cfg.episodes < 1) throw std::invalid_argument("benchmark needs at least one episode");
  BenchmarkReport rep;
  rep.seed = cfg.seed;
  rep.episodes = cfg.episodes;
  rep.config_hash = std::move(config_hash);
  for (int e = 0; e < cfg.episodes; ++e) {
    const World world = suite_world(cfg, e);
    for (Method m : methods) {
      const auto o = run_episode(world, m, models, cfg.camera, cfg.planner, cfg.episode, episode_seed(cfg.seed, e),
                                 cfg.sectors);
      EpisodeRecord r{m, e, o.result, o.duration, o.avg_speed, o.max_speed, o.min_true_clearance};
      progress(r);
      rep.records.push_back(r);
    }
  }
  for (Method m : methods) rep.summaries.push_back(summarize(m, rep.records));
  return rep;
}

inline BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, std::span<const Method> methods,
                                     const ModelSet& models, std::string config_hash = {}) {
  return run_benchmark(cfg, methods, models, std::move(config_hash), [](const EpisodeRecord&) {});
}

inline std::string format_table(const BenchmarkReport& rep) {
  std::ostringstream os;
  os << "Benchmark: " << rep.episodes << " episodes per method, seed " << rep.seed;
  if (!rep.config_hash.empty()) os << ", config " << rep.config_hash;
  os << "\n";
  os << std::left << std::setw(14) << "method" << std::right << std::setw(13) << "% collisions" << std::setw(10)
     << "% stuck" << std::setw(12) << "% timeout" << std::setw(12) << "% reached" << std::setw(16)
     << "avg speed m/s" << std::setw(16) << "max speed m/s" << "\n";
  os << std::fixed;
  for (const auto& s : rep.summaries) {
    os << std::left << std::setw(14) << to_string(s.method) << std::right << std::setprecision(1) << std::setw(13)
       << s.collision_pct << std::setw(10) << s.stuck_pct << std::setw(12) << s.timeout_pct << std::setw(12)
       << s.reached_pct << std::setprecision(3) << std::setw(16) << s.avg_speed << std::setw(16) << s.max_speed
       << "\n";
  }
  os << "NoMaD (pretrained vision policy) is not part of this suite.\n";
  return os.str();
}

}  // namespace clearnav

// Runs the eight acceptance criteria at their stated tolerances and prints one
// PASS/FAIL line per criterion. Exit status is the number of failures.
#include <chrono>
#include <cstdio>
#include <iostream>
#include <numeric>

#include "clearnav/clearnav.hpp"
#include "oracles.hpp"

using namespace clearnav;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Verdict& v) {
  std::printf("criterion %d %-28s %s  %s\n", id, name, v.pass ? "PASS" : "FAIL", v.detail.c_str());
  std::fflush(stdout);
  failures += !v.pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared settings for the trained models and the benchmark suite.
NoiseModel calibrated_noise() { return {0.3, 0.25, 0.05, 20, 0.05}; }

DatasetConfig desk_dataset_config() {
  DatasetConfig dc;
  dc.snapshots_per_world = 30;
  dc.controls_per_snapshot = 15;
  dc.camera.noise = calibrated_noise();
  return dc;
}
constexpr int kDeskWorlds = 100;

TrainConfig desk_train_config() {
  TrainConfig tc;
  tc.optimizer = Optimizer::adam;
  tc.arch.waypoints = 10;
  tc.epochs = 30;
  return tc;
}

BenchmarkConfig suite_config() {
  BenchmarkConfig bc;
  bc.episodes = 60;
  bc.camera.noise = calibrated_noise();
  bc.planner.iterations = 5;
  bc.planner.batch = 256;
  bc.planner.constraint_elites = 64;
  bc.planner.elites = 16;
  bc.planner.w_risk = 5000;
  return bc;
}

Verdict criterion1() {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g(0.0, 0.3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  double elapsed = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    std::vector<double> h(kDefaultRiskSamples), d(kDefaultRiskSamples);
    for (auto& x : h) x = u(rng) < 0.4 ? 0.0 : std::abs(g(rng));
    for (auto& x : d) x = g(rng) * 0.01;
    for (double width : {0.01, 0.1, 1.0}) {
      const auto t0 = Clock::now();
      const double fast = empirical_mmd(h, d, width);
      elapsed += seconds_since(t0);
      worst = std::max(worst, std::abs(fast - oracle::brute_mmd(h, d, width)));
    }
  }
  return {worst <= 1e-9 && elapsed < 10.0, fmt("max |diff| %.2e (tol 1e-9), %.3f s", worst, elapsed)};
}

Dataset make_gradient_dataset() {
  std::mt19937_64 rng(202);
  std::vector<World> ws{generate_clutter_world(ClutterConfig{}, rng)};
  DatasetConfig dc;
  dc.snapshots_per_world = 2;
  dc.controls_per_snapshot = 16;
  dc.camera.noise = calibrated_noise();
  return generate_dataset(std::span<const World>(ws), dc, 202, rng);
}

Verdict criterion2() {
  const Dataset ds = make_gradient_dataset();
  TrainConfig cfg = desk_train_config();
  cfg.arch.width = 16;
  std::mt19937_64 rng(203);
  auto theta = ModelParams::random(cfg.arch, rng);
  const auto phi = RiskHeadParams::random(cfg.risk_hidden, rng);
  theta.b3()[0] = 0.35;  // mean clearance near d_o so residuals are active
  theta.b3()[1] = inverse_softplus(0.2);
  theta.b3()[2] = inverse_softplus(0.1);
  const auto obs = featurize_snapshots(ds, cfg.arch.sectors);
  std::vector<std::size_t> idx(32);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto batch = make_batch(ds, idx, obs, cfg.arch);
  const auto noise = draw_batch_noise(rng, static_cast<std::size_t>(cfg.risk_samples), idx.size(), cfg.dirac_variance);
  double worst = 0.0;
  std::size_t checked = 0;
  for (auto mode : {TrainMode::baseline, TrainMode::augmented}) {
    for (const auto& e : check_gradient(theta, phi, batch, noise, mode, cfg, 150, rng, 1e-5)) {
      worst = std::max(worst, e.relative_error);
      ++checked;
    }
  }
  return {worst < 1e-4 && checked >= 200,
          fmt("%zu coords (NLL and NLL+CE), max rel err %.2e (tol 1e-4)", checked, worst)};
}

double risk_probability_spearman(double dirac_variance) {
  std::mt19937_64 rng(303);
  std::normal_distribution<double> g;
  std::vector<double> eps(kDefaultRiskSamples);
  for (auto& e : eps) e = g(rng);
  const auto delta = draw_dirac_samples(rng, kDefaultRiskSamples, dirac_variance);
  std::vector<double> risk, prob;
  for (double sigma : {0.01, 0.05, 0.1}) {
    for (int k = 0; k <= 30; ++k) {
      const double mu = 0.6 * k / 30.0;
      std::vector<double> h(eps.size());
      for (std::size_t i = 0; i < eps.size(); ++i) h[i] = residual(mu + sigma * eps[i], kDefaultRobotRadius);
      risk.push_back(empirical_mmd(h, delta, kDefaultLambda));
      prob.push_back(chance_probability_oracle(mu, sigma, kDefaultRobotRadius, 20000, rng));
    }
  }
  return oracle::spearman(risk, prob);
}

Verdict criterion3() {
  const double rho = risk_probability_spearman(kDiracVariance);
  const double rho_exact = risk_probability_spearman(0.0);
  return {rho > 0.95, fmt("Spearman %.4f (need > 0.95); exact-zero Dirac gives %.4f", rho, rho_exact)};
}

struct TrainedModels {
  TrainResult augmented, baseline;
};

Verdict criterion4(TrainedModels& out) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  std::vector<World> worlds;
  for (int i = 0; i < kDeskWorlds; ++i) worlds.push_back(generate_clutter_world(ClutterConfig{}, rng));
  const Dataset ds = generate_dataset(std::span<const World>(worlds), desk_dataset_config(), 404, rng);
  const TrainConfig tc = desk_train_config();
  out.baseline = train(ds, tc, TrainMode::baseline);
  out.augmented = train(ds, tc, TrainMode::augmented);
  const auto obs = featurize_snapshots(ds, tc.arch.sectors);
  const auto sb = evaluate(out.baseline.model, out.baseline.risk_head, TrainMode::baseline, ds,
                           out.baseline.heldout_indices, obs, tc, 405);
  const auto sa = evaluate(out.augmented.model, out.augmented.risk_head, TrainMode::augmented, ds,
                           out.augmented.heldout_indices, obs, tc, 405);
  const double t = seconds_since(t0);
  const bool pass = ds.samples.size() >= 20000 && sa.median_sigma < sb.median_sigma && sa.accuracy >= 0.9 &&
                    t <= 1800.0;
  return {pass, fmt("%zu samples; median sigma aug %.4g vs base %.4g (need <); aug accuracy %.3f (>= 0.9); %.0f s",
                    ds.samples.size(), sa.median_sigma, sb.median_sigma, sa.accuracy, t)};
}

ModelSet model_set(const TrainedModels& m) {
  ModelSet ms;
  ms.augmented = m.augmented.model;
  ms.baseline = m.baseline.model;
  return ms;
}

const std::vector<Method> kAblation{Method::augmented, Method::baseline_nll, Method::det, Method::raw_costmap};

Verdict criterion5(const ModelSet& ms, BenchmarkReport& rep) {
  const auto bc = suite_config();
  const auto t0 = Clock::now();
  rep = run_benchmark(bc, kAblation, ms, config_hash(json(bc)));
  std::cout << format_table(rep);
  auto pct = [&](Method m) {
    for (const auto& s : rep.summaries)
      if (s.method == m) return s;
    throw std::logic_error("missing method");
  };
  const auto a = pct(Method::augmented), b = pct(Method::baseline_nll), d = pct(Method::det),
             r = pct(Method::raw_costmap);
  const bool pass = a.collision_pct < b.collision_pct && b.collision_pct < d.collision_pct &&
                    a.collision_pct < r.collision_pct && a.stuck_pct == 0.0;
  return {pass, fmt("collision%% aug %.1f / nll %.1f / det %.1f / raw %.1f; aug stuck %.1f%%; %.0f s", a.collision_pct,
                    b.collision_pct, d.collision_pct, r.collision_pct, a.stuck_pct, seconds_since(t0))};
}

Verdict criterion6(const ModelSet& ms) {
  const auto bc = suite_config();
  int reached = 0, calls = 0, violations = 0;
  for (int e = 0; e < 20; ++e) {
    const World w =
        empty_world(Bounds{Vec2{0, 0}, Vec2{8, 5}}, RobotState{0.7, 2.5 + 0.05 * (e - 10), 0, 0, 0}, Vec2{7.3, 2.5});
    const auto model = make_predictor(Method::augmented, w, ms, bc.camera, bc.episode);
    MpcController mpc(bc.planner, bc.camera, bc.sectors, episode_seed(606, e), bc.episode.exec_horizon);
    SimState sim{w.start, 0};
    const long max_steps = static_cast<long>(std::lround(bc.episode.timeout_s / bc.planner.dt));
    while (sim.step < max_steps && goal_distance(sim.robot, w.goal) > 0.5) {
      const auto out = mpc.step(sim, w, *model, w.goal);
      ++calls;
      for (std::size_t i = 1; i < out.plan.diagnostics.size(); ++i)
        violations += out.plan.diagnostics[i].best_cost > out.plan.diagnostics[i - 1].best_cost;
      sim = out.next;
      if (out.collided) break;
    }
    reached += goal_distance(sim.robot, w.goal) <= 0.5;
  }
  return {reached == 20 && violations == 0,
          fmt("%d/20 reached within 0.5 m; %d plan calls, %d best-cost increases", reached, calls, violations)};
}

Verdict criterion7(const ModelSet& ms) {
  auto bc = suite_config();
  bc.camera.noise = {0.1, 0.15, 0.02, 20, 0.0};  // every range reads long: the obstacle looks farther than it is
  const World w = single_obstacle_world();
  World obstacle_only = w;
  obstacle_only.bounds = {Vec2{-1e3, -1e3}, Vec2{1e3, 1e3}};
  int avoided = 0;
  double near_sum = 0.0, open_sum = 0.0;
  long near_n = 0, open_n = 0;
  for (int e = 0; e < 100; ++e) {
    const auto o = run_episode(w, Method::augmented, ms, bc.camera, bc.planner, bc.episode, episode_seed(707, e),
                               bc.sectors);
    avoided += o.result != EpisodeResult::collided;
    for (std::size_t k = 0; k < o.commands.size(); ++k) {
      const auto& s = o.trace[k].state;
      if (true_clearance(Vec2{s.x, s.y}, obstacle_only) < 1.0) {
        near_sum += o.commands[k].v;
        ++near_n;
      } else {
        open_sum += o.commands[k].v;
        ++open_n;
      }
    }
  }
  const double near = near_n ? near_sum / static_cast<double>(near_n) : 0.0;
  const double open = open_n ? open_sum / static_cast<double>(open_n) : 0.0;
  return {avoided >= 95 && near_n > 0 && near < open,
          fmt("%d/100 avoided (need 95); mean v near %.3f vs open %.3f m/s", avoided, near, open)};
}

Verdict criterion8(const ModelSet& ms, const BenchmarkReport& first) {
  const auto bc = suite_config();
  const auto again = run_benchmark(bc, kAblation, ms, config_hash(json(bc)));
  const bool same = report_json(again).dump() == report_json(first).dump();
  return {same, same ? "rerun report identical" : "rerun report differs"};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  report(1, "MMD oracle equivalence", criterion1());
  report(2, "gradient fidelity", criterion2());
  report(3, "risk-probability alignment", criterion3());
  TrainedModels models;
  report(4, "training effect", criterion4(models));
  const ModelSet ms = model_set(models);
  BenchmarkReport rep;
  report(5, "ablation ordering", criterion5(ms, rep));
  report(6, "planner sanity", criterion6(ms));
  report(7, "single-obstacle avoidance", criterion7(ms));
  report(8, "determinism", criterion8(ms, rep));
  std::printf("%d of 8 criteria failed (%.0f s)\n", failures, seconds_since(t0));
  return failures;
}

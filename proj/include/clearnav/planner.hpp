#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "clearnav/collision_model.hpp"
#include "clearnav/dynamics.hpp"
#include "clearnav/mmd_risk.hpp"
#include "clearnav/world.hpp"

namespace clearnav {

inline constexpr double kMinSamplingVariance = 1e-6;

// Everything a clearance predictor may look at when scoring candidates.
struct PlanningContext {
  RobotState state;
  ObservationVector obs;
  PointCloud2D estimated_world;  // raw estimated scan in the world frame
};

class ClearancePredictor {
 public:
  virtual ~ClearancePredictor() = default;
  virtual void predict(const PlanningContext& ctx, std::span<const ControlSequence> us,
                       std::span<ClearancePrediction> out) const = 0;
};

// Learned network; optionally overrides sigma (the deterministic ablation) or lambda.
class LearnedPredictor final : public ClearancePredictor {
 public:
  explicit LearnedPredictor(ModelParams params, std::optional<double> sigma_override = std::nullopt,
                            std::optional<double> lambda_override = std::nullopt)
      : params_(std::move(params)), sigma_(sigma_override), lambda_(lambda_override) {
    params_.check_finite();
  }

  void predict(const PlanningContext& ctx, std::span<const ControlSequence> us,
               std::span<ClearancePrediction> out) const override {
    const ModelArch& arch = params_.arch();
    Eigen::MatrixXd input(arch.input_dim(), static_cast<Eigen::Index>(us.size()));
    for (std::size_t q = 0; q < us.size(); ++q)
      encode_input(ctx.obs, us[q], arch, input.col(static_cast<Eigen::Index>(q)));
    ForwardCache cache;
    forward(params_, input, cache);
    for (std::size_t q = 0; q < us.size(); ++q) {
      const auto c = static_cast<Eigen::Index>(q);
      auto p = decode_heads(cache.out(0, c), cache.out(1, c), cache.out(2, c));
      if (sigma_) p.sigma = *sigma_;
      if (lambda_) p.lambda = *lambda_;
      out[q] = p;
    }
  }

  const ModelParams& params() const { return params_; }

 private:
  ModelParams params_;
  std::optional<double> sigma_;
  std::optional<double> lambda_;
};

// Exact geometric clearance with a fixed spread.
class OraclePredictor final : public ClearancePredictor {
 public:
  OraclePredictor(const World& world, double sigma_fixed, double cap, double lambda = kDefaultLambda)
      : world_(world), sigma_(sigma_fixed), cap_(cap), lambda_(lambda) {}

  void predict(const PlanningContext& ctx, std::span<const ControlSequence> us,
               std::span<ClearancePrediction> out) const override {
    for (std::size_t q = 0; q < us.size(); ++q) out[q] = oracle_predict(world_, ctx.state, us[q], sigma_, cap_, lambda_);
  }

 private:
  World world_;
  double sigma_;
  double cap_;
  double lambda_;
};

// Trusts the estimated cloud as geometry: mu is the rollout's distance to the
// noisy points minus a fixed inflation, with negligible spread.
class RawCloudPredictor final : public ClearancePredictor {
 public:
  RawCloudPredictor(double inflation, double cap, double lambda = kDefaultLambda)
      : inflation_(inflation), cap_(cap), lambda_(lambda) {}

  void predict(const PlanningContext& ctx, std::span<const ControlSequence> us,
               std::span<ClearancePrediction> out) const override {
    for (std::size_t q = 0; q < us.size(); ++q) {
      const double d = worst_case_clearance(rollout(ctx.state, us[q]), ctx.estimated_world, cap_);
      out[q] = {d - inflation_, kSigmaFloor, lambda_};
    }
  }

 private:
  double inflation_;
  double cap_;
  double lambda_;
};

// ---------------------------------------------------------------------------
// Sampling optimizer

// Diagonal Gaussian over the flattened (v_0, omega_0, ..., v_{H-1}, omega_{H-1}) vector.
struct SamplingDistribution {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;

  static SamplingDistribution initial(std::size_t horizon, Command nominal = {0.5, 0.0}, double variance = 0.25) {
    SamplingDistribution d;
    d.mean.resize(static_cast<Eigen::Index>(2 * horizon));
    for (std::size_t k = 0; k < horizon; ++k) {
      d.mean[static_cast<Eigen::Index>(2 * k)] = nominal.v;
      d.mean[static_cast<Eigen::Index>(2 * k + 1)] = nominal.omega;
    }
    d.variance = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(2 * horizon), variance);
    return d;
  }

  std::size_t horizon() const { return static_cast<std::size_t>(mean.size() / 2); }

  // Drops the first `steps` commands and repeats the last one.
  void shift(std::size_t steps) {
    const auto h = static_cast<Eigen::Index>(horizon());
    for (std::size_t s = 0; s < steps; ++s) {
      for (Eigen::Index k = 0; k + 1 < h; ++k) mean.segment(2 * k, 2) = mean.segment(2 * k + 2, 2);
    }
  }
};

struct PlannerConfig {
  int iterations = 20;         // M
  int batch = 512;             // n
  int constraint_elites = 128; // n_c
  int elites = 32;             // n_e
  int risk_samples = static_cast<int>(kDefaultRiskSamples);  // N
  double w_state = 1.0;
  double w_risk = 200.0;
  double w_effort = 0.05;
  double smoothing = 0.7;  // beta
  // AR(1) coefficient of the sampling noise along the horizon. Marginals stay
  // N(nu_i, Sigma_ii); 0 gives i.i.d. per-step noise.
  double noise_correlation = 0.9;
  double initial_variance = 0.25;
  Command nominal{0.5, 0.0};
  double robot_radius = 0.3;
  double dirac_variance = kDiracVariance;
  int horizon = static_cast<int>(kDefaultHorizon);
  double dt = kDefaultDt;
  std::uint64_t seed = 1;
  bool keep_final_batch = false;
  // MPC: offer the previous plan's best sequence, time-shifted, as a candidate.
  bool reuse_incumbent = false;
};

inline void validate(const PlannerConfig& cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("planner needs at least one iteration");
  if (!(cfg.batch >= cfg.constraint_elites && cfg.constraint_elites >= cfg.elites && cfg.elites >= 1))
    throw std::invalid_argument("planner needs n >= n_c >= n_e >= 1");
  if (cfg.w_state < 0.0 || cfg.w_risk < 0.0 || cfg.w_effort < 0.0)
    throw std::invalid_argument("cost weights must be non-negative");
  if (!(cfg.smoothing > 0.0 && cfg.smoothing <= 1.0)) throw std::invalid_argument("smoothing must lie in (0, 1]");
  if (cfg.risk_samples < 1) throw std::invalid_argument("risk sample count must be positive");
  if (!(cfg.noise_correlation >= 0.0 && cfg.noise_correlation < 1.0))
    throw std::invalid_argument("noise correlation must lie in [0, 1)");
  if (cfg.horizon < 1) throw std::invalid_argument("horizon must be positive");
}

// Sum over trajectory points of the squared distance to the goal.
inline double state_cost(const Trajectory& traj, const Vec2& goal) {
  double c = 0.0;
  for (const auto& s : traj.states) c += (s.x - goal.x()) * (s.x - goal.x()) + (s.y - goal.y()) * (s.y - goal.y());
  return c;
}

struct CostBreakdown {
  double state = 0.0;
  double risk = 0.0;
  double effort = 0.0;
  double total = 0.0;
};

struct IterationDiagnostics {
  double best_cost = 0.0;       // best-ever after this iteration
  double iteration_best = 0.0;  // best in this iteration's elite set
  double mean_risk = 0.0;       // over valid samples of the batch
  int invalid = 0;
};

struct ScoredSample {
  ControlSequence u;
  ClearancePrediction pred;
  CostBreakdown cost;
};

struct PlanResult {
  ControlSequence best;
  Trajectory trajectory;
  CostBreakdown cost;
  ClearancePrediction prediction;
  std::vector<IterationDiagnostics> diagnostics;
  SamplingDistribution final_distribution;
  std::vector<ScoredSample> final_batch;  // constraint-elite set of the last iteration, if requested
};

// Indices of the `k` smallest values; stable sort by value, then index.
inline std::vector<std::size_t> select_lowest(std::span<const double> values, std::span<const std::size_t> candidates,
                                              std::size_t k) {
  std::vector<std::size_t> idx(candidates.begin(), candidates.end());
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

// Drops the first `steps` commands and repeats the last one.
inline ControlSequence shift_sequence(ControlSequence u, std::size_t steps) {
  if (u.commands.size() < 2) return u;
  for (std::size_t s = 0; s < steps; ++s) {
    std::rotate(u.commands.begin(), u.commands.begin() + 1, u.commands.end());
    u.commands.back() = u.commands[u.commands.size() - 2];
  }
  return u;
}

inline ControlSequence to_controls(const Eigen::VectorXd& flat, double dt) {
  ControlSequence u;
  u.dt = dt;
  u.commands.resize(static_cast<std::size_t>(flat.size() / 2));
  for (std::size_t k = 0; k < u.commands.size(); ++k)
    u.commands[k] = clip_command({flat[static_cast<Eigen::Index>(2 * k)], flat[static_cast<Eigen::Index>(2 * k + 1)]});
  return u;
}

inline CostBreakdown evaluate_cost(const Trajectory& traj, const ControlSequence& u, double risk, const Vec2& goal,
                                   const PlannerConfig& cfg) {
  CostBreakdown c;
  c.state = state_cost(traj, goal);
  c.risk = risk;
  c.effort = u.squared_norm();
  c.total = cfg.w_state * c.state + cfg.w_risk * c.risk + cfg.w_effort * c.effort;
  return c;
}

// Cross-entropy style optimizer: sample, score risk by empirical MMD, keep the
// n_c lowest-risk samples, rank them by total cost, refit to the n_e elites.
// Returns the lowest-cost sample seen in any iteration. `seeds` replace the
// first samples of the first iteration.
template <class Rng>
PlanResult plan(const PlanningContext& ctx, const ClearancePredictor& model, const Vec2& goal,
                const PlannerConfig& cfg, SamplingDistribution dist, Rng& rng,
                std::span<const ControlSequence> seeds = {}) {
  validate(cfg);
  if (dist.horizon() != static_cast<std::size_t>(cfg.horizon))
    throw std::invalid_argument("sampling distribution horizon differs from planner horizon");
  const auto n = static_cast<std::size_t>(cfg.batch);
  const auto n_risk = static_cast<std::size_t>(cfg.risk_samples);
  const MmdReference dirac(draw_dirac_samples(rng, n_risk, cfg.dirac_variance));
  std::normal_distribution<double> gauss(0.0, 1.0);

  PlanResult result;
  result.cost.total = std::numeric_limits<double>::infinity();
  std::vector<ControlSequence> us(n);
  std::vector<ClearancePrediction> preds(n);
  std::vector<double> risk(n);
  std::vector<double> cost(n, std::numeric_limits<double>::infinity());
  std::vector<Trajectory> trajs(n);
  std::vector<CostBreakdown> breakdown(n);
  std::vector<double> eps(n_risk);
  std::vector<double> hbar(n_risk);
  Eigen::VectorXd flat(dist.mean.size());

  for (int m = 0; m < cfg.iterations; ++m) {
    const Eigen::VectorXd stddev = dist.variance.cwiseSqrt();
    const double rho = cfg.noise_correlation;
    const double innov = std::sqrt(1.0 - rho * rho);
    for (std::size_t q = 0; q < n; ++q) {
      double zv = gauss(rng), zw = gauss(rng);
      for (Eigen::Index i = 0; i < flat.size(); i += 2) {
        if (i > 0) {
          zv = rho * zv + innov * gauss(rng);
          zw = rho * zw + innov * gauss(rng);
        }
        flat[i] = dist.mean[i] + stddev[i] * zv;
        flat[i + 1] = dist.mean[i + 1] + stddev[i + 1] * zw;
      }
      us[q] = to_controls(flat, cfg.dt);
    }
    if (m == 0)
      for (std::size_t q = 0; q < std::min(seeds.size(), n); ++q) us[q] = clip_controls(seeds[q]);
    model.predict(ctx, us, preds);

    std::vector<std::size_t> valid;
    valid.reserve(n);
    double risk_sum = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      const auto& p = preds[q];
      // Noise is drawn for every sample so the stream does not depend on validity.
      for (auto& e : eps) e = gauss(rng);
      if (!std::isfinite(p.mu) || !std::isfinite(p.sigma) || !std::isfinite(p.lambda) || !(p.sigma > 0.0) ||
          !(p.lambda > 0.0)) {
        risk[q] = std::numeric_limits<double>::infinity();
        continue;
      }
      for (std::size_t i = 0; i < n_risk; ++i) hbar[i] = residual(p.mu + p.sigma * eps[i], cfg.robot_radius);
      risk[q] = dirac(hbar, p.lambda);
      risk_sum += risk[q];
      valid.push_back(q);
    }
    if (valid.empty()) throw std::runtime_error("planner: every sampled control sequence had an invalid prediction");

    const auto constraint_elite = select_lowest(risk, valid, static_cast<std::size_t>(cfg.constraint_elites));
    for (std::size_t q : constraint_elite) {
      trajs[q] = rollout(ctx.state, us[q]);
      breakdown[q] = evaluate_cost(trajs[q], us[q], risk[q], goal, cfg);
      cost[q] = breakdown[q].total;
    }
    const auto elite = select_lowest(cost, constraint_elite, static_cast<std::size_t>(cfg.elites));

    if (cost[elite.front()] < result.cost.total) {
      const std::size_t q = elite.front();
      result.best = us[q];
      result.trajectory = trajs[q];
      result.cost = breakdown[q];
      result.prediction = preds[q];
    }

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dist.mean.size());
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(dist.mean.size());
    for (std::size_t q : elite) {
      for (std::size_t k = 0; k < us[q].commands.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(2 * k);
        mean[i] += us[q].commands[k].v;
        mean[i + 1] += us[q].commands[k].omega;
      }
    }
    mean /= static_cast<double>(elite.size());
    for (std::size_t q : elite) {
      for (std::size_t k = 0; k < us[q].commands.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(2 * k);
        sq[i] += (us[q].commands[k].v - mean[i]) * (us[q].commands[k].v - mean[i]);
        sq[i + 1] += (us[q].commands[k].omega - mean[i + 1]) * (us[q].commands[k].omega - mean[i + 1]);
      }
    }
    sq /= static_cast<double>(elite.size());
    dist.mean = (1.0 - cfg.smoothing) * dist.mean + cfg.smoothing * mean;
    dist.variance = ((1.0 - cfg.smoothing) * dist.variance + cfg.smoothing * sq).cwiseMax(kMinSamplingVariance);

    IterationDiagnostics diag;
    diag.best_cost = result.cost.total;
    diag.iteration_best = cost[elite.front()];
    diag.mean_risk = risk_sum / static_cast<double>(valid.size());
    diag.invalid = static_cast<int>(n - valid.size());
    result.diagnostics.push_back(diag);

    if (cfg.keep_final_batch && m + 1 == cfg.iterations) {
      for (std::size_t q : constraint_elite) result.final_batch.push_back({us[q], preds[q], breakdown[q]});
    }
    for (std::size_t q : constraint_elite) cost[q] = std::numeric_limits<double>::infinity();
  }
  result.final_distribution = std::move(dist);
  return result;
}

// ---------------------------------------------------------------------------
// Receding-horizon loop

struct SimState {
  RobotState robot;
  long step = 0;
};

struct MpcStepResult {
  SimState next;
  std::vector<Command> executed;
  std::vector<RobotState> executed_states;  // state after each executed command
  PlanResult plan;
  double risk = 0.0;  // empirical MMD of the executed plan
  bool collided = false;
};

// Owns the warm-started sampling mean, the sensor bias field, and the RNG
// stream of one episode.
class MpcController {
 public:
  MpcController(PlannerConfig cfg, SensorConfig camera, int sectors, std::uint64_t seed, int exec_horizon = 1)
      : cfg_(std::move(cfg)),
        camera_(std::move(camera)),
        sectors_(sectors),
        exec_horizon_(exec_horizon),
        rng_(seed),
        bias_(camera_.noise, camera_.fov, seed ^ 0xA5A5A5A5DEADBEEFULL),
        dist_(SamplingDistribution::initial(static_cast<std::size_t>(cfg_.horizon), cfg_.nominal, cfg_.initial_variance)) {
    validate(cfg_);
    validate(camera_);
    if (exec_horizon_ < 1 || exec_horizon_ > cfg_.horizon) throw std::invalid_argument("invalid execution horizon");
  }

  PlanningContext sense(const SimState& sim, const World& world) {
    const auto scan = estimated_scan(sim.robot, world, camera_, bias_, sim.step, rng_);
    PlanningContext ctx;
    ctx.state = sim.robot;
    ctx.obs = featurize(standardize_cloud(scan, camera_, rng_), sim.robot, camera_, sectors_);
    ctx.estimated_world = to_world_frame(scan, sim.robot);
    return ctx;
  }

  // Sense, plan, execute the first exec_horizon commands, warm-start the next call.
  MpcStepResult step(const SimState& sim, const World& world, const ClearancePredictor& model, const Vec2& goal) {
    const PlanningContext ctx = sense(sim, world);
    MpcStepResult out;
    std::vector<ControlSequence> seeds;
    if (cfg_.reuse_incumbent && incumbent_) seeds.push_back(*incumbent_);
    out.plan = plan(ctx, model, goal, cfg_, warm_start(), rng_, seeds);
    out.risk = out.plan.cost.risk;
    out.next = sim;
    for (int k = 0; k < exec_horizon_; ++k) {
      const Command c = out.plan.best.commands[static_cast<std::size_t>(k)];
      out.next.robot = clearnav::step(out.next.robot, c, cfg_.dt);
      ++out.next.step;
      out.executed.push_back(c);
      out.executed_states.push_back(out.next.robot);
      if (true_clearance(Vec2{out.next.robot.x, out.next.robot.y}, world) < cfg_.robot_radius) {
        out.collided = true;
        break;
      }
    }
    dist_.mean = out.plan.final_distribution.mean;
    dist_.shift(out.executed.size());
    incumbent_ = shift_sequence(out.plan.best, out.executed.size());
    return out;
  }

  const SamplingDistribution& distribution() const { return dist_; }
  const PlannerConfig& config() const { return cfg_; }

 private:
  SamplingDistribution warm_start() const {
    SamplingDistribution d = dist_;
    d.variance.setConstant(cfg_.initial_variance);
    return d;
  }

  PlannerConfig cfg_;
  SensorConfig camera_;
  int sectors_;
  int exec_horizon_;
  std::mt19937_64 rng_;
  BiasField bias_;
  SamplingDistribution dist_;
  std::optional<ControlSequence> incumbent_;
};

}  // namespace clearnav

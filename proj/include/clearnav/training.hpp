#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "clearnav/collision_model.hpp"
#include "clearnav/dynamics.hpp"
#include "clearnav/mmd_risk.hpp"
#include "clearnav/world.hpp"

namespace clearnav {

inline constexpr double kDefaultRobotRadius = 0.3;
inline constexpr int kCollisionClass = 0;
inline constexpr int kSafeClass = 1;

// One-hot label: [0,1] (safe) iff -d_gt + d_o <= 0, else [1,0] (collision).
using Label = std::array<double, 2>;

inline Label clearance_label(double d_gt, double robot_radius) {
  return -d_gt + robot_radius <= 0.0 ? Label{0.0, 1.0} : Label{1.0, 0.0};
}

inline int label_class(const Label& y) { return y[1] > y[0] ? kSafeClass : kCollisionClass; }

// ---------------------------------------------------------------------------
// Dataset

enum class LabelSource { reference_cloud, exact_geometry };

struct DatasetConfig {
  int snapshots_per_world = 10;
  int controls_per_snapshot = 50;
  int horizon = static_cast<int>(kDefaultHorizon);
  double dt = kDefaultDt;
  double robot_radius = kDefaultRobotRadius;
  SensorConfig camera;
  // Noise-free reference scanner for labels; shares the camera's field of view
  // at 4x the ray density.
  SensorConfig reference{kDefaultFov, 277, 5.0, {}};
  LabelSource label_source = LabelSource::reference_cloud;
  // Share of sequences drawn around a random constant command instead of
  // i.i.d. uniform per step.
  double structured_fraction = 0.5;
  double pose_margin = 0.05;
  int pose_attempts = 2000;
};

// Shared context of the controls_per_snapshot samples taken at one pose.
struct Snapshot {
  PointCloud2D cloud;  // standardized estimated scan, body frame
  RobotState state;
  std::uint32_t world_index = 0;
};

struct TrainingSample {
  std::uint32_t snapshot = 0;
  ControlSequence u;
  double d_gt = 0.0;
  Label y{};
};

struct Dataset {
  int horizon = static_cast<int>(kDefaultHorizon);
  double dt = kDefaultDt;
  double robot_radius = kDefaultRobotRadius;
  std::uint64_t seed = 0;
  SensorConfig camera;
  std::vector<Snapshot> snapshots;
  std::vector<TrainingSample> samples;

  const PointCloud2D& cloud(const TrainingSample& s) const { return snapshots.at(s.snapshot).cloud; }
  const RobotState& state(const TrainingSample& s) const { return snapshots.at(s.snapshot).state; }
};

// Sequence jittered around one random command: mean v ~ U[0,1], omega ~ U[-1,1],
// per-step Gaussian jitter with a random scale in [0, 0.5], clipped.
template <class Rng>
ControlSequence sample_structured_control(Rng& rng, std::size_t horizon, double dt) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double v_mean = unit(rng);
  const double w_mean = 2.0 * unit(rng) - 1.0;
  const double jitter = 0.5 * unit(rng);
  ControlSequence u;
  u.dt = dt;
  u.commands.resize(horizon);
  for (auto& c : u.commands) {
    const double v = v_mean + jitter * gauss(rng);
    const double w = w_mean + jitter * gauss(rng);
    c = clip_command({v, w});
  }
  return u;
}

// Uniform collision-free pose with v0, omega0 drawn from U[-1,1] and clipped.
template <class Rng>
std::optional<RobotState> sample_free_pose(const World& world, double clearance, int attempts, Rng& rng) {
  std::uniform_real_distribution<double> ux(world.bounds.lo.x(), world.bounds.hi.x());
  std::uniform_real_distribution<double> uy(world.bounds.lo.y(), world.bounds.hi.y());
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < attempts; ++i) {
    const Vec2 p{ux(rng), uy(rng)};
    if (true_clearance(p, world) < clearance) continue;
    RobotState s;
    s.x = p.x();
    s.y = p.y();
    s.psi = heading(rng);
    const Command c = clip_command({unit(rng), unit(rng)});
    s.v = c.v;
    s.omega = c.omega;
    return s;
  }
  return std::nullopt;
}

// Ground-truth worst-case clearance label for one rollout.
inline double label_clearance(const Trajectory& traj, const World& world, const PointCloud2D& reference_world,
                              const DatasetConfig& cfg) {
  if (cfg.label_source == LabelSource::exact_geometry)
    return worst_case_clearance(traj, world, cfg.reference.max_range);
  return worst_case_clearance(traj, reference_world, cfg.reference.max_range);
}

template <class Rng>
Dataset generate_dataset(std::span<const World> worlds, const DatasetConfig& cfg, std::uint64_t seed, Rng& rng) {
  validate(cfg.camera);
  validate(cfg.reference);
  Dataset ds;
  ds.horizon = cfg.horizon;
  ds.dt = cfg.dt;
  ds.robot_radius = cfg.robot_radius;
  ds.seed = seed;
  ds.camera = cfg.camera;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<long> step_dist(0, 100000);
  std::uniform_int_distribution<std::uint64_t> seed_dist;
  const auto h = static_cast<std::size_t>(cfg.horizon);

  for (std::size_t w = 0; w < worlds.size(); ++w) {
    const World& world = worlds[w];
    for (int s = 0; s < cfg.snapshots_per_world; ++s) {
      const auto pose = sample_free_pose(world, cfg.robot_radius + cfg.pose_margin, cfg.pose_attempts, rng);
      if (!pose) {
        std::cerr << "generate_dataset: world " << w << " has no free space, skipped\n";
        break;
      }
      const BiasField bias(cfg.camera.noise, cfg.camera.fov, seed_dist(rng));
      const auto estimated = estimated_scan(*pose, world, cfg.camera, bias, step_dist(rng), rng);
      Snapshot snap;
      snap.cloud = standardize_cloud(estimated, cfg.camera, rng);
      snap.state = *pose;
      snap.world_index = static_cast<std::uint32_t>(w);
      const auto snap_index = static_cast<std::uint32_t>(ds.snapshots.size());
      ds.snapshots.push_back(std::move(snap));

      const auto reference_world = to_world_frame(raycast_scan(*pose, world, cfg.reference), *pose);
      for (int j = 0; j < cfg.controls_per_snapshot; ++j) {
        TrainingSample sample;
        sample.snapshot = snap_index;
        sample.u = unit(rng) < cfg.structured_fraction ? sample_structured_control(rng, h, cfg.dt)
                                                       : sample_control(rng, h, cfg.dt);
        sample.d_gt = label_clearance(rollout(*pose, sample.u), world, reference_world, cfg);
        sample.y = clearance_label(sample.d_gt, cfg.robot_radius);
        ds.samples.push_back(std::move(sample));
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Risk head and losses

// MLP_phi: scalar risk -> tanh hidden layer -> 2 logits. Flat layout
// v1 (W x 1), c1 (W), v2 (2 x W), c2 (2).
class RiskHeadParams {
 public:
  static constexpr int kDefaultHidden = 8;

  RiskHeadParams() : RiskHeadParams(kDefaultHidden) {}
  explicit RiskHeadParams(int hidden)
      : hidden_(hidden), phi_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(4 * hidden + 2))) {}

  template <class Rng>
  static RiskHeadParams random(int hidden, Rng& rng) {
    RiskHeadParams p(hidden);
    std::uniform_real_distribution<double> in(-1.0, 1.0);
    const double limit = std::sqrt(6.0 / (hidden + 2.0));
    std::uniform_real_distribution<double> out(-limit, limit);
    for (int i = 0; i < hidden; ++i) p.v1()[i] = in(rng);
    for (Eigen::Index i = 0; i < p.v2().size(); ++i) p.v2().data()[i] = out(rng);
    return p;
  }

  int hidden() const { return hidden_; }
  Eigen::VectorXd& flat() { return phi_; }
  const Eigen::VectorXd& flat() const { return phi_; }

  Eigen::Map<Eigen::VectorXd> v1() { return {phi_.data(), hidden_}; }
  Eigen::Map<Eigen::VectorXd> c1() { return {phi_.data() + hidden_, hidden_}; }
  Eigen::Map<Eigen::MatrixXd> v2() { return {phi_.data() + 2 * hidden_, 2, hidden_}; }
  Eigen::Map<Eigen::VectorXd> c2() { return {phi_.data() + 4 * hidden_, 2}; }
  Eigen::Map<const Eigen::VectorXd> v1() const { return {phi_.data(), hidden_}; }
  Eigen::Map<const Eigen::VectorXd> c1() const { return {phi_.data() + hidden_, hidden_}; }
  Eigen::Map<const Eigen::MatrixXd> v2() const { return {phi_.data() + 2 * hidden_, 2, hidden_}; }
  Eigen::Map<const Eigen::VectorXd> c2() const { return {phi_.data() + 4 * hidden_, 2}; }

 private:
  int hidden_;
  Eigen::VectorXd phi_;
};

enum class TrainMode { baseline, augmented, variance_penalty };

inline const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::baseline: return "baseline";
    case TrainMode::augmented: return "augmented";
    case TrainMode::variance_penalty: return "variance_penalty";
  }
  return "?";
}

enum class Optimizer { momentum, adam };

struct TrainConfig {
  int risk_samples = static_cast<int>(kDefaultRiskSamples);  // N
  double robot_radius = kDefaultRobotRadius;                 // d_o
  double learning_rate = 1e-3;
  double momentum = 0.9;
  Optimizer optimizer = Optimizer::momentum;
  int epochs = 30;
  int batch_size = 64;
  double nll_weight = 1.0;
  double ce_weight = 1.0;
  double dirac_variance = kDiracVariance;
  double holdout_fraction = 0.1;
  double grad_clip = 10.0;  // global L2 norm; <= 0 disables
  double variance_penalty = 1e6;  // only in TrainMode::variance_penalty
  double initial_lambda = kDefaultLambda;
  int risk_hidden = RiskHeadParams::kDefaultHidden;
  ModelArch arch{};
  std::uint64_t seed = 1;
  bool verbose = false;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.risk_samples < 2) throw std::invalid_argument("risk sample count N must be >= 2");
  if (!(cfg.robot_radius > 0.0)) throw std::invalid_argument("robot radius must be positive");
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw std::invalid_argument("invalid batch size or epoch count");
}

// Gaussian negative log-likelihood of d_gt under N(mu, sigma^2).
inline double nll_loss(const ClearancePrediction& pred, double d_gt) {
  const double r = d_gt - pred.mu;
  return 0.5 * std::log(2.0 * std::numbers::pi * pred.sigma * pred.sigma) + r * r / (2.0 * pred.sigma * pred.sigma);
}

inline double ce_loss(const std::array<double, 2>& y_hat, const Label& y) {
  return -(y[0] * std::log(y_hat[0]) + y[1] * std::log(y_hat[1]));
}

inline std::array<double, 2> softmax(double z0, double z1) {
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m);
  const double e1 = std::exp(z1 - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

// Clearance samples mu + sigma * eps_i for recorded standard-normal draws.
inline std::vector<double> reparameterize(const ClearancePrediction& pred, std::span<const double> eps) {
  std::vector<double> d(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) d[i] = pred.mu + pred.sigma * eps[i];
  return d;
}

template <class Rng>
std::vector<double> draw_standard_normals(Rng& rng, std::size_t n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> eps(n);
  for (auto& e : eps) e = gauss(rng);
  return eps;
}

template <class Rng>
std::vector<double> reparameterize(const ClearancePrediction& pred, Rng& rng, std::size_t n) {
  return reparameterize(pred, draw_standard_normals(rng, n));
}

// Empirical MMD risk of a clearance prediction for fixed reparameterization
// noise and Dirac samples.
inline double mmd_risk(const ClearancePrediction& pred, std::span<const double> eps, std::span<const double> delta,
                       double robot_radius) {
  auto d = reparameterize(pred, eps);
  for (auto& x : d) x = residual(x, robot_radius);
  return empirical_mmd(d, delta, pred.lambda);
}

inline std::array<double, 2> risk_head_from_risk(double risk, const RiskHeadParams& phi) {
  const Eigen::VectorXd a = (phi.v1() * risk + phi.c1()).array().tanh().matrix();
  const Eigen::Vector2d z = phi.v2() * a + phi.c2();
  return softmax(z[0], z[1]);
}

// reparameterize -> residual -> empirical MMD (width pred.lambda) -> MLP_phi -> softmax.
inline std::array<double, 2> risk_head(const ClearancePrediction& pred, const RiskHeadParams& phi,
                                       std::span<const double> eps, std::span<const double> delta,
                                       double robot_radius) {
  return risk_head_from_risk(mmd_risk(pred, eps, delta, robot_radius), phi);
}

template <class Rng>
std::array<double, 2> risk_head(const ClearancePrediction& pred, const RiskHeadParams& phi, Rng& rng,
                                const TrainConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.risk_samples);
  const auto eps = draw_standard_normals(rng, n);
  const auto delta = draw_dirac_samples(rng, n, cfg.dirac_variance);
  return risk_head(pred, phi, eps, delta, cfg.robot_radius);
}

// ---------------------------------------------------------------------------
// Batched loss with reverse-mode gradients

// Network inputs and targets for a mini-batch (one column per sample).
struct Batch {
  Eigen::MatrixXd input;
  std::vector<double> d_gt;
  std::vector<Label> y;

  std::size_t size() const { return d_gt.size(); }
};

// Replayable noise: eps is N x batch, delta is shared by the batch.
struct BatchNoise {
  Eigen::MatrixXd eps;
  std::vector<double> delta;
};

template <class Rng>
BatchNoise draw_batch_noise(Rng& rng, std::size_t n_samples, std::size_t batch, double dirac_variance) {
  BatchNoise noise;
  noise.eps.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(batch));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < noise.eps.size(); ++i) noise.eps.data()[i] = gauss(rng);
  noise.delta = draw_dirac_samples(rng, n_samples, dirac_variance);
  return noise;
}

// Input columns of every sample, encoded once.
inline Eigen::MatrixXd encode_dataset(const Dataset& ds, const std::vector<ObservationVector>& observations,
                                      const ModelArch& arch) {
  Eigen::MatrixXd in(arch.input_dim(), static_cast<Eigen::Index>(ds.samples.size()));
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    encode_input(observations[ds.samples[i].snapshot], ds.samples[i].u, arch, in.col(static_cast<Eigen::Index>(i)));
  return in;
}

inline Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices, const Eigen::MatrixXd& inputs) {
  Batch b;
  b.input.resize(inputs.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& s = ds.samples[indices[k]];
    b.input.col(static_cast<Eigen::Index>(k)) = inputs.col(static_cast<Eigen::Index>(indices[k]));
    b.d_gt.push_back(s.d_gt);
    b.y.push_back(s.y);
  }
  return b;
}

inline Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices,
                        const std::vector<ObservationVector>& observations, const ModelArch& arch) {
  Batch b;
  b.input.resize(arch.input_dim(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& s = ds.samples[indices[k]];
    encode_input(observations[s.snapshot], s.u, arch, b.input.col(static_cast<Eigen::Index>(k)));
    b.d_gt.push_back(s.d_gt);
    b.y.push_back(s.y);
  }
  return b;
}

inline std::vector<ObservationVector> featurize_snapshots(const Dataset& ds, int sectors) {
  std::vector<ObservationVector> obs;
  obs.reserve(ds.snapshots.size());
  for (const auto& s : ds.snapshots) obs.push_back(featurize(s.cloud, s.state, ds.camera, sectors));
  return obs;
}

struct LossValue {
  double nll = 0.0;      // batch mean
  double ce = 0.0;       // batch mean (0 unless augmented)
  double penalty = 0.0;  // batch mean (variance_penalty mode only)
  double total = 0.0;
};

// Batch-mean loss for `mode`; when the gradient outputs are non-null they are
// overwritten with dL/dtheta and dL/dphi.
inline LossValue loss_and_gradient(const ModelParams& theta, const RiskHeadParams& phi, const Batch& batch,
                                   const BatchNoise& noise, TrainMode mode, const TrainConfig& cfg,
                                   ModelParams* grad_theta = nullptr, RiskHeadParams* grad_phi = nullptr) {
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  ForwardCache cache;
  forward(theta, batch.input, cache);
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(n));
  if (grad_phi) grad_phi->flat().setZero();
  const bool with_ce = mode == TrainMode::augmented;
  const auto n_risk = static_cast<std::size_t>(noise.eps.rows());

  LossValue lv;
  std::vector<double> hbar(n_risk);
  for (std::size_t k = 0; k < n; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    const double o_mu = cache.out(0, col), o_sigma = cache.out(1, col), o_lambda = cache.out(2, col);
    const ClearancePrediction pred = decode_heads(o_mu, o_sigma, o_lambda);
    const double sig2 = pred.sigma * pred.sigma;
    const double r = batch.d_gt[k] - pred.mu;

    const double nll = nll_loss(pred, batch.d_gt[k]);
    lv.nll += nll * inv_n;
    double d_mu = cfg.nll_weight * (-r / sig2) * inv_n;
    double d_sigma = cfg.nll_weight * (1.0 / pred.sigma - r * r / (sig2 * pred.sigma)) * inv_n;
    double d_lambda = 0.0;

    if (mode == TrainMode::variance_penalty) {
      lv.penalty += cfg.variance_penalty * std::log(pred.sigma) * inv_n;
      d_sigma += cfg.variance_penalty / pred.sigma * inv_n;
    }

    if (with_ce) {
      for (std::size_t i = 0; i < n_risk; ++i)
        hbar[i] = residual(pred.mu + pred.sigma * noise.eps(static_cast<Eigen::Index>(i), col), cfg.robot_radius);
      const MmdGradient g = empirical_mmd_with_gradient(hbar, noise.delta, pred.lambda);
      const Eigen::VectorXd pre = phi.v1() * g.value + phi.c1();
      const Eigen::VectorXd a = pre.array().tanh().matrix();
      const Eigen::Vector2d z = phi.v2() * a + phi.c2();
      const auto y_hat = softmax(z[0], z[1]);
      const Label& y = batch.y[k];
      lv.ce += ce_loss(y_hat, y) * inv_n;

      const Eigen::Vector2d d_z = cfg.ce_weight * inv_n * Eigen::Vector2d(y_hat[0] - y[0], y_hat[1] - y[1]);
      const Eigen::VectorXd d_a = phi.v2().transpose() * d_z;
      const Eigen::VectorXd d_pre = (d_a.array() * (1.0 - a.array().square())).matrix();
      const double d_risk = phi.v1().dot(d_pre);
      if (grad_phi) {
        grad_phi->v2().noalias() += d_z * a.transpose();
        grad_phi->c2() += d_z;
        grad_phi->v1() += d_pre * g.value;
        grad_phi->c1() += d_pre;
      }
      d_lambda += d_risk * g.d_width;
      for (std::size_t i = 0; i < n_risk; ++i) {
        const double e = noise.eps(static_cast<Eigen::Index>(i), col);
        const double h = cfg.robot_radius - (pred.mu + pred.sigma * e);
        if (h <= 0.0) continue;
        const double d_d = -d_risk * g.d_hbar[i];
        d_mu += d_d;
        d_sigma += d_d * e;
      }
    }

    d_out(0, col) = d_mu;
    d_out(1, col) = d_sigma * sigmoid(o_sigma);
    d_out(2, col) = d_lambda * sigmoid(o_lambda);
  }
  lv.total = cfg.nll_weight * lv.nll + cfg.ce_weight * lv.ce + lv.penalty;
  if (grad_theta) {
    grad_theta->flat().setZero();
    backward(theta, cache, d_out, *grad_theta);
  }
  return lv;
}

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradientCheckEntry {
  std::size_t index = 0;  // theta coordinates first, then phi
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

// Compares reverse-mode gradients to central differences on `coords` random
// coordinates with the batch noise held fixed.
template <class Rng>
std::vector<GradientCheckEntry> check_gradient(const ModelParams& theta, const RiskHeadParams& phi,
                                               const Batch& batch, const BatchNoise& noise, TrainMode mode,
                                               const TrainConfig& cfg, std::size_t coords, Rng& rng,
                                               double step = 1e-5) {
  ModelParams g_theta(theta.arch());
  RiskHeadParams g_phi(phi.hidden());
  loss_and_gradient(theta, phi, batch, noise, mode, cfg, &g_theta, &g_phi);

  const auto n_theta = static_cast<std::size_t>(theta.flat().size());
  const auto n_total = n_theta + static_cast<std::size_t>(phi.flat().size());
  std::vector<std::size_t> idx(n_total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(coords, n_total));

  std::vector<GradientCheckEntry> out;
  for (std::size_t i : idx) {
    ModelParams t = theta;
    RiskHeadParams p = phi;
    double* coord = i < n_theta ? &t.flat()[static_cast<Eigen::Index>(i)]
                                : &p.flat()[static_cast<Eigen::Index>(i - n_theta)];
    const double orig = *coord;
    *coord = orig + step;
    const double up = loss_and_gradient(t, p, batch, noise, mode, cfg).total;
    *coord = orig - step;
    const double down = loss_and_gradient(t, p, batch, noise, mode, cfg).total;
    GradientCheckEntry e;
    e.index = i;
    e.analytic = i < n_theta ? g_theta.flat()[static_cast<Eigen::Index>(i)]
                             : g_phi.flat()[static_cast<Eigen::Index>(i - n_theta)];
    e.numeric = (up - down) / (2.0 * step);
    e.relative_error = relative_error(e.analytic, e.numeric);
    out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochLog {
  int epoch = 0;
  double nll = 0.0;
  double ce = 0.0;
  double heldout_accuracy = 0.0;
  double heldout_mean_sigma = 0.0;
};

struct HeldoutStats {
  double accuracy = 0.0;
  double mean_sigma = 0.0;
  double median_sigma = 0.0;
  double mean_abs_error = 0.0;
  std::size_t count = 0;
};

struct TrainResult {
  ModelParams model;
  RiskHeadParams risk_head;
  TrainMode mode = TrainMode::baseline;
  std::vector<EpochLog> log;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> heldout_indices;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic split by snapshot so held-out samples never share a cloud with
// training samples.
inline void split_by_snapshot(const Dataset& ds, double holdout_fraction, std::uint64_t seed,
                              std::vector<std::size_t>& train, std::vector<std::size_t>& heldout) {
  std::vector<std::uint32_t> order(ds.snapshots.size());
  std::iota(order.begin(), order.end(), 0u);
  std::mt19937_64 rng(seed ^ 0x5851F42D4C957F2DULL);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_hold = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(order.size())));
  std::vector<char> is_hold(ds.snapshots.size(), 0);
  for (std::size_t i = 0; i < n_hold; ++i) is_hold[order[i]] = 1;
  train.clear();
  heldout.clear();
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    (is_hold[ds.samples[i].snapshot] ? heldout : train).push_back(i);
}

// Held-out accuracy uses argmax of the risk head in augmented mode and the
// sign of mu - d_o otherwise.
inline HeldoutStats evaluate(const ModelParams& theta, const RiskHeadParams& phi, TrainMode mode,
                             const Dataset& ds, std::span<const std::size_t> indices,
                             const std::vector<ObservationVector>& observations, const TrainConfig& cfg,
                             std::uint64_t noise_seed) {
  HeldoutStats st;
  if (indices.empty()) return st;
  std::mt19937_64 rng(noise_seed);
  std::vector<double> sigmas;
  sigmas.reserve(indices.size());
  std::size_t correct = 0;
  const std::size_t chunk = 512;
  const auto n_risk = static_cast<std::size_t>(cfg.risk_samples);
  for (std::size_t start = 0; start < indices.size(); start += chunk) {
    const auto part = indices.subspan(start, std::min(chunk, indices.size() - start));
    const Batch b = make_batch(ds, part, observations, theta.arch());
    ForwardCache cache;
    forward(theta, b.input, cache);
    const auto delta = draw_dirac_samples(rng, n_risk, cfg.dirac_variance);
    for (std::size_t k = 0; k < part.size(); ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      const auto pred = decode_heads(cache.out(0, col), cache.out(1, col), cache.out(2, col));
      sigmas.push_back(pred.sigma);
      st.mean_abs_error += std::abs(pred.mu - b.d_gt[k]);
      int cls;
      if (mode == TrainMode::augmented) {
        const auto eps = draw_standard_normals(rng, n_risk);
        const auto y_hat = risk_head(pred, phi, eps, delta, cfg.robot_radius);
        cls = y_hat[1] > y_hat[0] ? kSafeClass : kCollisionClass;
      } else {
        cls = pred.mu >= cfg.robot_radius ? kSafeClass : kCollisionClass;
      }
      if (cls == label_class(b.y[k])) ++correct;
    }
  }
  st.count = indices.size();
  st.accuracy = static_cast<double>(correct) / static_cast<double>(st.count);
  st.mean_abs_error /= static_cast<double>(st.count);
  st.mean_sigma = std::accumulate(sigmas.begin(), sigmas.end(), 0.0) / static_cast<double>(sigmas.size());
  std::nth_element(sigmas.begin(), sigmas.begin() + static_cast<long>(sigmas.size() / 2), sigmas.end());
  st.median_sigma = sigmas[sigmas.size() / 2];
  return st;
}

inline double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

// Mini-batch training of the clearance model (and, in augmented mode, the risk
// head) on L_NLL or L_NLL + L_CE.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg, TrainMode mode) {
  validate(cfg);
  if (ds.samples.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  if (cfg.arch.horizon != ds.horizon) throw std::invalid_argument("model horizon differs from dataset horizon");

  std::mt19937_64 rng(cfg.seed);
  TrainResult res;
  res.mode = mode;
  split_by_snapshot(ds, cfg.holdout_fraction, cfg.seed, res.train_indices, res.heldout_indices);
  if (res.train_indices.empty()) throw std::invalid_argument("hold-out split left no training samples");
  const auto observations = featurize_snapshots(ds, cfg.arch.sectors);
  const Eigen::MatrixXd inputs = encode_dataset(ds, observations, cfg.arch);

  ModelParams theta = ModelParams::random(cfg.arch, rng);
  RiskHeadParams phi = RiskHeadParams::random(cfg.risk_hidden, rng);
  {
    double mean = 0.0;
    for (auto i : res.train_indices) mean += ds.samples[i].d_gt;
    mean /= static_cast<double>(res.train_indices.size());
    double var = 0.0;
    for (auto i : res.train_indices) var += (ds.samples[i].d_gt - mean) * (ds.samples[i].d_gt - mean);
    var /= static_cast<double>(res.train_indices.size());
    theta.b3()[0] = mean;
    theta.b3()[1] = inverse_softplus(std::max(std::sqrt(var), 1e-3));
    theta.w3().row(2).setZero();
    theta.b3()[2] = inverse_softplus(cfg.initial_lambda - kLambdaFloor);
  }

  ModelParams g_theta(cfg.arch), m_theta(cfg.arch), v_theta(cfg.arch);
  RiskHeadParams g_phi(cfg.risk_hidden), m_phi(cfg.risk_hidden), v_phi(cfg.risk_hidden);
  const bool train_phi = mode == TrainMode::augmented;
  const auto n_risk = static_cast<std::size_t>(cfg.risk_samples);
  long step_count = 0;
  std::vector<std::size_t> order = res.train_indices;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double nll_sum = 0.0, ce_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto count = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const Batch batch = make_batch(ds, idx, inputs);
      const BatchNoise noise = draw_batch_noise(rng, n_risk, count, cfg.dirac_variance);
      const LossValue lv = loss_and_gradient(theta, phi, batch, noise, mode, cfg, &g_theta, &g_phi);
      if (!std::isfinite(lv.total)) {
        std::ostringstream msg;
        msg << "training diverged in epoch " << epoch << " at sample offset " << start << ": nll=" << lv.nll
            << " ce=" << lv.ce << " penalty=" << lv.penalty;
        throw TrainingDiverged(msg.str());
      }
      nll_sum += lv.nll * static_cast<double>(count);
      ce_sum += lv.ce * static_cast<double>(count);
      seen += count;

      if (cfg.grad_clip > 0.0) {
        double sq = g_theta.flat().squaredNorm();
        if (train_phi) sq += g_phi.flat().squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) {
          g_theta.flat() *= cfg.grad_clip / norm;
          g_phi.flat() *= cfg.grad_clip / norm;
        }
      }
      ++step_count;
      auto update = [&](Eigen::VectorXd& w, const Eigen::VectorXd& g, Eigen::VectorXd& m, Eigen::VectorXd& v) {
        if (cfg.optimizer == Optimizer::momentum) {
          m = cfg.momentum * m - cfg.learning_rate * g;
          w += m;
        } else {
          constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
          m = b1 * m + (1.0 - b1) * g;
          v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
          const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
          const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
          w.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        }
      };
      update(theta.flat(), g_theta.flat(), m_theta.flat(), v_theta.flat());
      if (train_phi) update(phi.flat(), g_phi.flat(), m_phi.flat(), v_phi.flat());
    }

    EpochLog log;
    log.epoch = epoch;
    log.nll = nll_sum / static_cast<double>(seen);
    log.ce = ce_sum / static_cast<double>(seen);
    const auto st = evaluate(theta, phi, mode, ds, res.heldout_indices, observations, cfg, cfg.seed + 7919);
    log.heldout_accuracy = st.accuracy;
    log.heldout_mean_sigma = st.mean_sigma;
    res.log.push_back(log);
    if (cfg.verbose)
      std::cerr << to_string(mode) << " epoch " << epoch << " nll=" << log.nll << " ce=" << log.ce
                << " acc=" << log.heldout_accuracy << " sigma=" << log.heldout_mean_sigma
                << " mae=" << st.mean_abs_error << "\n";
  }
  res.model = std::move(theta);
  res.risk_head = std::move(phi);
  return res;
}

}  // namespace clearnav

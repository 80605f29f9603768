#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "clearnav/dynamics.hpp"
#include "clearnav/world.hpp"

namespace clearnav {

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kLambdaFloor = 1e-3;
inline constexpr double kDefaultLambda = 0.1;
inline constexpr int kDefaultSectors = 32;
inline constexpr int kDefaultWidth = 64;

// Predicted worst-case clearance distribution N(mu, sigma^2) plus the MMD
// kernel width for this query.
struct ClearancePrediction {
  double mu = 0.0;
  double sigma = 1.0;
  double lambda = kDefaultLambda;
};

// Polar min-range features of a standardized cloud plus the current (v, omega).
// The body-frame cloud is kept for the waypoint encoding.
struct ObservationVector {
  std::vector<double> sectors;
  double v0 = 0.0;
  double omega0 = 0.0;
  PointCloud2D cloud;
  double max_range = 5.0;

  std::size_t size() const { return sectors.size() + 2; }
};

// Per-sector minimum range over max_range (1 for an empty sector). Invariant to
// point order.
inline ObservationVector featurize(const PointCloud2D& cloud, const RobotState& state,
                                   const SensorConfig& cfg, int sectors = kDefaultSectors) {
  if (sectors < 1) throw std::invalid_argument("featurizer needs at least one sector");
  ObservationVector obs;
  obs.sectors.assign(static_cast<std::size_t>(sectors), 1.0);
  const double half = 0.5 * cfg.fov;
  for (const auto& p : cloud) {
    const double bearing = std::atan2(p.y(), p.x());
    const double u = (bearing + half) / cfg.fov;
    const int idx = std::clamp(static_cast<int>(std::floor(u * sectors)), 0, sectors - 1);
    const double f = std::min(1.0, p.norm() / cfg.max_range);
    auto& slot = obs.sectors[static_cast<std::size_t>(idx)];
    slot = std::min(slot, f);
  }
  obs.v0 = state.v;
  obs.omega0 = state.omega;
  obs.cloud = cloud;
  obs.max_range = cfg.max_range;
  return obs;
}

// ---------------------------------------------------------------------------
// Geometric worst-case clearance

// min over trajectory points of the true clearance, capped at `cap`.
inline double worst_case_clearance(const Trajectory& traj, const World& world, double cap) {
  double d = cap;
  for (const auto& s : traj.states) d = std::min(d, true_clearance(Vec2{s.x, s.y}, world));
  return d;
}

// min over trajectory points and cloud points (world frame) of the Euclidean
// distance, capped at `cap`; `cap` for an empty cloud.
inline double worst_case_clearance(const Trajectory& traj, const PointCloud2D& world_cloud,
                                   double cap) {
  double best_sq = cap * cap;
  for (const auto& s : traj.states) {
    for (const auto& p : world_cloud) {
      const double dx = s.x - p.x();
      const double dy = s.y - p.y();
      best_sq = std::min(best_sq, dx * dx + dy * dy);
    }
  }
  return std::sqrt(best_sq);
}

// Ground-truth stand-in for the learned model.
inline ClearancePrediction oracle_predict(const World& world, const RobotState& state,
                                          const ControlSequence& u, double sigma_fixed,
                                          double cap, double lambda = kDefaultLambda) {
  return {worst_case_clearance(rollout(state, u), world, cap), sigma_fixed, lambda};
}

// ---------------------------------------------------------------------------
// Prediction network

struct ModelArch {
  int sectors = kDefaultSectors;
  int width = kDefaultWidth;
  int horizon = static_cast<int>(kDefaultHorizon);
  // Optional rollout encoding: per waypoint the body-frame (x, y) and distance to
  // the observed cloud, plus the minimum over the whole rollout. 0 disables it.
  int waypoints = 0;

  int obs_dim() const { return sectors + 2; }
  int waypoint_dim() const { return waypoints > 0 ? 3 * waypoints + 1 : 0; }
  int input_dim() const { return obs_dim() + 2 * horizon + waypoint_dim(); }
  std::size_t param_count() const {
    const auto d = static_cast<std::size_t>(input_dim());
    const auto w = static_cast<std::size_t>(width);
    return w * d + w + w * w + w + 3 * w + 3;
  }

  friend bool operator==(const ModelArch&, const ModelArch&) = default;
};

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Weights of input -> tanh(W) -> tanh(W) -> (mu, sigma, lambda) heads, stored
// flat: w1 (W x D), b1, w2 (W x W), b2, w3 (3 x W), b3.
class ModelParams {
 public:
  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using VecMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

  ModelParams() : ModelParams(ModelArch{}) {}
  explicit ModelParams(const ModelArch& arch)
      : arch_(arch), theta_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arch.param_count()))) {}

  // Glorot-uniform weights, zero biases.
  template <class Rng>
  static ModelParams random(const ModelArch& arch, Rng& rng) {
    ModelParams p(arch);
    auto fill = [&rng](MatMap m) {
      const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    };
    fill(p.w1());
    fill(p.w2());
    fill(p.w3());
    return p;
  }

  const ModelArch& arch() const { return arch_; }
  Eigen::VectorXd& flat() { return theta_; }
  const Eigen::VectorXd& flat() const { return theta_; }

  MatMap w1() { return {theta_.data() + off_w1(), width(), input()}; }
  VecMap b1() { return {theta_.data() + off_b1(), width()}; }
  MatMap w2() { return {theta_.data() + off_w2(), width(), width()}; }
  VecMap b2() { return {theta_.data() + off_b2(), width()}; }
  MatMap w3() { return {theta_.data() + off_w3(), 3, width()}; }
  VecMap b3() { return {theta_.data() + off_b3(), 3}; }
  ConstMatMap w1() const { return {theta_.data() + off_w1(), width(), input()}; }
  ConstVecMap b1() const { return {theta_.data() + off_b1(), width()}; }
  ConstMatMap w2() const { return {theta_.data() + off_w2(), width(), width()}; }
  ConstVecMap b2() const { return {theta_.data() + off_b2(), width()}; }
  ConstMatMap w3() const { return {theta_.data() + off_w3(), 3, width()}; }
  ConstVecMap b3() const { return {theta_.data() + off_b3(), 3}; }

  // Throws with the offending index if any weight is NaN or infinite.
  void check_finite() const {
    for (Eigen::Index i = 0; i < theta_.size(); ++i) {
      if (!std::isfinite(theta_[i])) {
        std::ostringstream msg;
        msg << "model parameter " << i << " of " << theta_.size() << " is not finite (" << theta_[i] << ")";
        throw std::invalid_argument(msg.str());
      }
    }
  }

 private:
  Eigen::Index width() const { return arch_.width; }
  Eigen::Index input() const { return arch_.input_dim(); }
  Eigen::Index off_w1() const { return 0; }
  Eigen::Index off_b1() const { return off_w1() + width() * input(); }
  Eigen::Index off_w2() const { return off_b1() + width(); }
  Eigen::Index off_b2() const { return off_w2() + width() * width(); }
  Eigen::Index off_w3() const { return off_b2() + width(); }
  Eigen::Index off_b3() const { return off_w3() + 3 * width(); }

  ModelArch arch_;
  Eigen::VectorXd theta_;
};

// Body-frame rollout features: for each of `waypoints` evenly spaced steps the
// scaled (x, y) and cloud distance, then the minimum cloud distance over all steps.
inline void encode_waypoints(const ObservationVector& obs, const ControlSequence& u, int waypoints,
                             Eigen::Ref<Eigen::VectorXd> out) {
  const double scale = 1.0 / obs.max_range;
  const double cap_sq = obs.max_range * obs.max_range;
  const auto h = u.commands.size();
  auto clearance = [&](double x, double y) {
    double best = cap_sq;
    for (const auto& p : obs.cloud) {
      const double dx = x - p.x(), dy = y - p.y();
      best = std::min(best, dx * dx + dy * dy);
    }
    return std::sqrt(best);
  };
  RobotState s{};
  double worst = clearance(0.0, 0.0);
  int next = 0;
  Eigen::Index k = 0;
  for (std::size_t t = 0; t < h; ++t) {
    s = step(s, u.commands[t], u.dt);
    const double d = clearance(s.x, s.y);
    worst = std::min(worst, d);
    const auto mark = static_cast<std::size_t>((static_cast<std::size_t>(next) + 1) * h / static_cast<std::size_t>(waypoints));
    if (next < waypoints && t + 1 == mark) {
      out[k++] = s.x * scale;
      out[k++] = s.y * scale;
      out[k++] = d * scale;
      ++next;
    }
  }
  out[k] = worst * scale;
}

// Writes one network input column: observation, interleaved (v_k, omega_k),
// then the optional waypoint block.
inline void encode_input(const ObservationVector& obs, const ControlSequence& u, const ModelArch& arch,
                         Eigen::Ref<Eigen::VectorXd> col) {
  if (static_cast<int>(obs.sectors.size()) != arch.sectors || static_cast<int>(u.horizon()) != arch.horizon)
    throw std::invalid_argument("observation or control sequence does not match the model architecture");
  Eigen::Index k = 0;
  for (double f : obs.sectors) col[k++] = f;
  col[k++] = obs.v0;
  col[k++] = obs.omega0;
  for (const auto& c : u.commands) {
    col[k++] = c.v;
    col[k++] = c.omega;
  }
  if (arch.waypoints > 0) encode_waypoints(obs, u, arch.waypoints, col.segment(k, arch.waypoint_dim()));
}

// Intermediate activations of a batched forward pass (one column per query).
struct ForwardCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd h1;
  Eigen::MatrixXd h2;
  Eigen::MatrixXd out;  // 3 x n raw head outputs
};

inline void forward(const ModelParams& p, const Eigen::MatrixXd& input, ForwardCache& cache) {
  cache.input = input;
  cache.h1 = ((p.w1() * input).colwise() + p.b1()).array().tanh().matrix();
  cache.h2 = ((p.w2() * cache.h1).colwise() + p.b2()).array().tanh().matrix();
  cache.out = (p.w3() * cache.h2).colwise() + p.b3();
}

inline ClearancePrediction decode_heads(double mu_raw, double sigma_raw, double lambda_raw) {
  return {mu_raw, softplus(sigma_raw) + kSigmaFloor, softplus(lambda_raw) + kLambdaFloor};
}

// Reverse pass: given dL/d(raw head outputs) (3 x n), accumulates dL/dtheta
// into `grad` (same flat layout as the parameters).
inline void backward(const ModelParams& p, const ForwardCache& cache, const Eigen::MatrixXd& d_out,
                     ModelParams& grad) {
  grad.w3().noalias() += d_out * cache.h2.transpose();
  grad.b3() += d_out.rowwise().sum();
  Eigen::MatrixXd d_h2 = p.w3().transpose() * d_out;
  d_h2.array() *= 1.0 - cache.h2.array().square();
  grad.w2().noalias() += d_h2 * cache.h1.transpose();
  grad.b2() += d_h2.rowwise().sum();
  Eigen::MatrixXd d_h1 = p.w2().transpose() * d_h2;
  d_h1.array() *= 1.0 - cache.h1.array().square();
  grad.w1().noalias() += d_h1 * cache.input.transpose();
  grad.b1() += d_h1.rowwise().sum();
}

// Batched prediction for one observation and many control sequences.
inline std::vector<ClearancePrediction> predict_batch(const ModelParams& p, const ObservationVector& obs,
                                                      std::span<const ControlSequence> us) {
  p.check_finite();
  const ModelArch& arch = p.arch();
  Eigen::MatrixXd input(arch.input_dim(), static_cast<Eigen::Index>(us.size()));
  for (std::size_t q = 0; q < us.size(); ++q) encode_input(obs, us[q], arch, input.col(static_cast<Eigen::Index>(q)));
  ForwardCache cache;
  forward(p, input, cache);
  std::vector<ClearancePrediction> out(us.size());
  for (std::size_t q = 0; q < us.size(); ++q) {
    const auto c = static_cast<Eigen::Index>(q);
    out[q] = decode_heads(cache.out(0, c), cache.out(1, c), cache.out(2, c));
  }
  return out;
}

inline ClearancePrediction predict(const ModelParams& p, const ObservationVector& obs, const ControlSequence& u) {
  return predict_batch(p, obs, std::span<const ControlSequence>(&u, 1)).front();
}

}  // namespace clearnav

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace clearnav {

// Operating envelope of the unicycle.
inline constexpr double kVMin = 0.0;
inline constexpr double kVMax = 1.0;
inline constexpr double kOmegaMin = -1.0;
inline constexpr double kOmegaMax = 1.0;

inline constexpr std::size_t kDefaultHorizon = 50;
inline constexpr double kDefaultDt = 0.1;

struct RobotState {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  double v = 0.0;
  double omega = 0.0;

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct Command {
  double v = 0.0;
  double omega = 0.0;

  friend bool operator==(const Command&, const Command&) = default;
};

// Horizon-length sequence of (v, omega) commands applied every `dt` seconds.
struct ControlSequence {
  std::vector<Command> commands;
  double dt = kDefaultDt;

  std::size_t horizon() const { return commands.size(); }

  // Squared Euclidean norm of the stacked command vector.
  double squared_norm() const {
    double s = 0.0;
    for (const auto& c : commands) s += c.v * c.v + c.omega * c.omega;
    return s;
  }

  friend bool operator==(const ControlSequence&, const ControlSequence&) = default;
};

struct Trajectory {
  std::vector<RobotState> states;  // horizon + 1 entries, states[0] is the initial state
};

inline Command clip_command(Command c) {
  return {std::clamp(c.v, kVMin, kVMax), std::clamp(c.omega, kOmegaMin, kOmegaMax)};
}

inline bool within_bounds(const Command& c) {
  return c.v >= kVMin && c.v <= kVMax && c.omega >= kOmegaMin && c.omega <= kOmegaMax;
}

inline bool within_bounds(const ControlSequence& u) {
  return std::all_of(u.commands.begin(), u.commands.end(),
                     [](const Command& c) { return within_bounds(c); });
}

// Componentwise clamp to [0,1] x [-1,1].
inline ControlSequence clip_controls(ControlSequence u) {
  for (auto& c : u.commands) c = clip_command(c);
  return u;
}

// Single unicycle step. The returned state carries the applied command.
inline RobotState step(const RobotState& s, const Command& c, double dt) {
  RobotState n;
  n.x = s.x + c.v * std::cos(s.psi) * dt;
  n.y = s.y + c.v * std::sin(s.psi) * dt;
  n.psi = s.psi + c.omega * dt;
  n.v = c.v;
  n.omega = c.omega;
  return n;
}

inline Trajectory rollout(const RobotState& initial, const ControlSequence& u) {
  Trajectory traj;
  traj.states.reserve(u.horizon() + 1);
  traj.states.push_back(initial);
  for (const auto& c : u.commands) traj.states.push_back(step(traj.states.back(), c, u.dt));
  return traj;
}

// Draws each (v_k, omega_k) uniformly on [-1,1] and clamps v_k to [0,1]. The
// clamp leaves a point mass of 1/2 at v = 0.
template <class Rng>
ControlSequence sample_control(Rng& rng, std::size_t horizon = kDefaultHorizon,
                               double dt = kDefaultDt) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ControlSequence u;
  u.dt = dt;
  u.commands.resize(horizon);
  for (auto& c : u.commands) {
    const double v = unit(rng);
    const double w = unit(rng);
    c = clip_command({v, w});
  }
  return u;
}

template <class Rng>
std::vector<ControlSequence> sample_controls(Rng& rng, std::size_t n,
                                             std::size_t horizon = kDefaultHorizon,
                                             double dt = kDefaultDt) {
  std::vector<ControlSequence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_control(rng, horizon, dt));
  return out;
}

inline ControlSequence constant_controls(Command c, std::size_t horizon = kDefaultHorizon,
                                         double dt = kDefaultDt) {
  ControlSequence u;
  u.dt = dt;
  u.commands.assign(horizon, c);
  return u;
}

}  // namespace clearnav

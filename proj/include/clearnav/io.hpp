#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "clearnav/bench.hpp"
#include "clearnav/collision_model.hpp"
#include "clearnav/planner.hpp"
#include "clearnav/scenarios.hpp"
#include "clearnav/training.hpp"
#include "clearnav/world.hpp"

namespace clearnav {

using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

inline json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }
inline Vec2 vec(const json& j) {
  if (!j.is_array() || j.size() != 2) throw IoError("expected a [x, y] pair, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace io

// ---------------------------------------------------------------------------
// JSON mappings. Readers accept partial objects and keep defaults for missing keys.

inline void to_json(json& j, const RobotState& s) {
  j = {{"x", s.x}, {"y", s.y}, {"psi", s.psi}, {"v", s.v}, {"omega", s.omega}};
}
inline void from_json(const json& j, RobotState& s) {
  io::read_opt(j, "x", s.x);
  io::read_opt(j, "y", s.y);
  io::read_opt(j, "psi", s.psi);
  io::read_opt(j, "v", s.v);
  io::read_opt(j, "omega", s.omega);
}

inline void to_json(json& j, const Obstacle& o) {
  if (const auto* c = std::get_if<Circle>(&o))
    j = {{"type", "circle"}, {"center", io::vec(c->center)}, {"radius", c->radius}};
  else {
    const auto& b = std::get<Box>(o);
    j = {{"type", "box"}, {"lo", io::vec(b.lo)}, {"hi", io::vec(b.hi)}};
  }
}
inline void from_json(const json& j, Obstacle& o) {
  const auto type = j.at("type").get<std::string>();
  if (type == "circle")
    o = Circle{io::vec(j.at("center")), j.at("radius").get<double>()};
  else if (type == "box")
    o = Box{io::vec(j.at("lo")), io::vec(j.at("hi"))};
  else
    throw IoError("unknown obstacle type '" + type + "'");
}

inline void to_json(json& j, const Bounds& b) { j = {{"lo", io::vec(b.lo)}, {"hi", io::vec(b.hi)}}; }
inline void from_json(const json& j, Bounds& b) {
  b.lo = io::vec(j.at("lo"));
  b.hi = io::vec(j.at("hi"));
}

inline void to_json(json& j, const World& w) {
  j = {{"bounds", w.bounds}, {"start", w.start}, {"goal", io::vec(w.goal)}, {"obstacles", w.obstacles}};
}
inline void from_json(const json& j, World& w) {
  w.bounds = j.at("bounds").get<Bounds>();
  w.start = j.at("start").get<RobotState>();
  w.goal = io::vec(j.at("goal"));
  w.obstacles = j.value("obstacles", json::array()).get<std::vector<Obstacle>>();
}

inline void to_json(json& j, const NoiseModel& n) {
  j = {{"range_bias_scale", n.range_bias_scale}, {"bias_mean", n.bias_mean}, {"additive_sigma", n.additive_sigma},
       {"drift_timescale", n.drift_timescale},   {"dropout_prob", n.dropout_prob}};
}
inline void from_json(const json& j, NoiseModel& n) {
  io::read_opt(j, "range_bias_scale", n.range_bias_scale);
  io::read_opt(j, "bias_mean", n.bias_mean);
  io::read_opt(j, "additive_sigma", n.additive_sigma);
  io::read_opt(j, "drift_timescale", n.drift_timescale);
  io::read_opt(j, "dropout_prob", n.dropout_prob);
}

inline void to_json(json& j, const SensorConfig& s) {
  j = {{"fov_deg", s.fov * 180.0 / std::numbers::pi}, {"n_rays", s.n_rays}, {"max_range", s.max_range},
       {"noise", s.noise}};
}
inline void from_json(const json& j, SensorConfig& s) {
  if (j.contains("fov_deg")) s.fov = j.at("fov_deg").get<double>() * std::numbers::pi / 180.0;
  io::read_opt(j, "n_rays", s.n_rays);
  io::read_opt(j, "max_range", s.max_range);
  io::read_opt(j, "noise", s.noise);
}

inline void to_json(json& j, const PlannerConfig& c) {
  j = {{"iterations", c.iterations},
       {"batch", c.batch},
       {"constraint_elites", c.constraint_elites},
       {"elites", c.elites},
       {"risk_samples", c.risk_samples},
       {"w_state", c.w_state},
       {"w_risk", c.w_risk},
       {"w_effort", c.w_effort},
       {"smoothing", c.smoothing},
       {"noise_correlation", c.noise_correlation},
       {"reuse_incumbent", c.reuse_incumbent},
       {"initial_variance", c.initial_variance},
       {"nominal", {c.nominal.v, c.nominal.omega}},
       {"robot_radius", c.robot_radius},
       {"dirac_variance", c.dirac_variance},
       {"horizon", c.horizon},
       {"dt", c.dt},
       {"seed", c.seed}};
}
inline void from_json(const json& j, PlannerConfig& c) {
  io::read_opt(j, "iterations", c.iterations);
  io::read_opt(j, "batch", c.batch);
  io::read_opt(j, "constraint_elites", c.constraint_elites);
  io::read_opt(j, "elites", c.elites);
  io::read_opt(j, "risk_samples", c.risk_samples);
  io::read_opt(j, "w_state", c.w_state);
  io::read_opt(j, "w_risk", c.w_risk);
  io::read_opt(j, "w_effort", c.w_effort);
  io::read_opt(j, "smoothing", c.smoothing);
  io::read_opt(j, "noise_correlation", c.noise_correlation);
  io::read_opt(j, "reuse_incumbent", c.reuse_incumbent);
  io::read_opt(j, "initial_variance", c.initial_variance);
  if (j.contains("nominal")) {
    const Vec2 n = io::vec(j.at("nominal"));
    c.nominal = {n.x(), n.y()};
  }
  io::read_opt(j, "robot_radius", c.robot_radius);
  io::read_opt(j, "dirac_variance", c.dirac_variance);
  io::read_opt(j, "horizon", c.horizon);
  io::read_opt(j, "dt", c.dt);
  io::read_opt(j, "seed", c.seed);
}

inline void to_json(json& j, const ClutterConfig& c) {
  j = {{"bounds", c.bounds},
       {"start", io::vec(c.start)},
       {"goal", io::vec(c.goal)},
       {"min_obstacles", c.min_obstacles},
       {"max_obstacles", c.max_obstacles},
       {"min_size", c.min_size},
       {"max_size", c.max_size},
       {"circle_fraction", c.circle_fraction},
       {"keep_out", c.keep_out},
       {"grid_resolution", c.grid_resolution},
       {"corridor_clearance", c.corridor_clearance},
       {"max_attempts", c.max_attempts}};
}
inline void from_json(const json& j, ClutterConfig& c) {
  io::read_opt(j, "bounds", c.bounds);
  if (j.contains("start")) c.start = io::vec(j.at("start"));
  if (j.contains("goal")) c.goal = io::vec(j.at("goal"));
  io::read_opt(j, "min_obstacles", c.min_obstacles);
  io::read_opt(j, "max_obstacles", c.max_obstacles);
  io::read_opt(j, "min_size", c.min_size);
  io::read_opt(j, "max_size", c.max_size);
  io::read_opt(j, "circle_fraction", c.circle_fraction);
  io::read_opt(j, "keep_out", c.keep_out);
  io::read_opt(j, "grid_resolution", c.grid_resolution);
  io::read_opt(j, "corridor_clearance", c.corridor_clearance);
  io::read_opt(j, "max_attempts", c.max_attempts);
}

inline void to_json(json& j, const EpisodeConfig& c) {
  j = {{"timeout_s", c.timeout_s},         {"stuck_window_s", c.stuck_window_s}, {"stuck_distance", c.stuck_distance},
       {"goal_tolerance", c.goal_tolerance}, {"exec_horizon", c.exec_horizon},     {"raw_inflation", c.raw_inflation},
       {"oracle_sigma", c.oracle_sigma},     {"det_sigma", c.det_sigma}};
}
inline void from_json(const json& j, EpisodeConfig& c) {
  io::read_opt(j, "timeout_s", c.timeout_s);
  io::read_opt(j, "stuck_window_s", c.stuck_window_s);
  io::read_opt(j, "stuck_distance", c.stuck_distance);
  io::read_opt(j, "goal_tolerance", c.goal_tolerance);
  io::read_opt(j, "exec_horizon", c.exec_horizon);
  io::read_opt(j, "raw_inflation", c.raw_inflation);
  io::read_opt(j, "oracle_sigma", c.oracle_sigma);
  io::read_opt(j, "det_sigma", c.det_sigma);
}

inline void to_json(json& j, const BenchmarkConfig& c) {
  j = {{"episodes", c.episodes}, {"seed", c.seed},       {"clutter", c.clutter}, {"camera", c.camera},
       {"planner", c.planner},   {"episode", c.episode}, {"sectors", c.sectors}};
}
inline void from_json(const json& j, BenchmarkConfig& c) {
  io::read_opt(j, "episodes", c.episodes);
  io::read_opt(j, "seed", c.seed);
  io::read_opt(j, "clutter", c.clutter);
  io::read_opt(j, "camera", c.camera);
  io::read_opt(j, "planner", c.planner);
  io::read_opt(j, "episode", c.episode);
  io::read_opt(j, "sectors", c.sectors);
}

inline void to_json(json& j, const DatasetConfig& c) {
  j = {{"snapshots_per_world", c.snapshots_per_world},
       {"controls_per_snapshot", c.controls_per_snapshot},
       {"horizon", c.horizon},
       {"dt", c.dt},
       {"robot_radius", c.robot_radius},
       {"camera", c.camera},
       {"reference", c.reference},
       {"label_source", c.label_source == LabelSource::reference_cloud ? "reference_cloud" : "exact_geometry"},
       {"structured_fraction", c.structured_fraction},
       {"pose_margin", c.pose_margin},
       {"pose_attempts", c.pose_attempts}};
}
inline void from_json(const json& j, DatasetConfig& c) {
  io::read_opt(j, "snapshots_per_world", c.snapshots_per_world);
  io::read_opt(j, "controls_per_snapshot", c.controls_per_snapshot);
  io::read_opt(j, "horizon", c.horizon);
  io::read_opt(j, "dt", c.dt);
  io::read_opt(j, "robot_radius", c.robot_radius);
  io::read_opt(j, "camera", c.camera);
  io::read_opt(j, "reference", c.reference);
  if (j.contains("label_source")) {
    const auto s = j.at("label_source").get<std::string>();
    if (s == "reference_cloud") c.label_source = LabelSource::reference_cloud;
    else if (s == "exact_geometry") c.label_source = LabelSource::exact_geometry;
    else throw IoError("unknown label_source '" + s + "'");
  }
  io::read_opt(j, "structured_fraction", c.structured_fraction);
  io::read_opt(j, "pose_margin", c.pose_margin);
  io::read_opt(j, "pose_attempts", c.pose_attempts);
}

inline void to_json(json& j, const TrainConfig& c) {
  j = {{"risk_samples", c.risk_samples},
       {"robot_radius", c.robot_radius},
       {"learning_rate", c.learning_rate},
       {"momentum", c.momentum},
       {"optimizer", c.optimizer == Optimizer::adam ? "adam" : "momentum"},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"nll_weight", c.nll_weight},
       {"ce_weight", c.ce_weight},
       {"dirac_variance", c.dirac_variance},
       {"holdout_fraction", c.holdout_fraction},
       {"grad_clip", c.grad_clip},
       {"initial_lambda", c.initial_lambda},
       {"risk_hidden", c.risk_hidden},
       {"sectors", c.arch.sectors},
       {"width", c.arch.width},
       {"horizon", c.arch.horizon},
       {"waypoints", c.arch.waypoints},
       {"seed", c.seed}};
}
inline void from_json(const json& j, TrainConfig& c) {
  io::read_opt(j, "risk_samples", c.risk_samples);
  io::read_opt(j, "robot_radius", c.robot_radius);
  io::read_opt(j, "learning_rate", c.learning_rate);
  io::read_opt(j, "momentum", c.momentum);
  if (j.contains("optimizer")) {
    const auto s = j.at("optimizer").get<std::string>();
    if (s == "adam") c.optimizer = Optimizer::adam;
    else if (s == "momentum") c.optimizer = Optimizer::momentum;
    else throw IoError("unknown optimizer '" + s + "'");
  }
  io::read_opt(j, "epochs", c.epochs);
  io::read_opt(j, "batch_size", c.batch_size);
  io::read_opt(j, "nll_weight", c.nll_weight);
  io::read_opt(j, "ce_weight", c.ce_weight);
  io::read_opt(j, "dirac_variance", c.dirac_variance);
  io::read_opt(j, "holdout_fraction", c.holdout_fraction);
  io::read_opt(j, "grad_clip", c.grad_clip);
  io::read_opt(j, "initial_lambda", c.initial_lambda);
  io::read_opt(j, "risk_hidden", c.risk_hidden);
  io::read_opt(j, "sectors", c.arch.sectors);
  io::read_opt(j, "width", c.arch.width);
  io::read_opt(j, "horizon", c.arch.horizon);
  io::read_opt(j, "waypoints", c.arch.waypoints);
  io::read_opt(j, "seed", c.seed);
}

// ---------------------------------------------------------------------------
// Files

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

// FNV-1a over the canonical dump; used to tag reports with their configuration.
inline std::string config_hash(const json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Model checkpoints

inline constexpr int kCheckpointVersion = 1;

inline json checkpoint_json(const ModelParams& model, const RiskHeadParams& head, TrainMode mode) {
  const auto& a = model.arch();
  const auto& t = model.flat();
  const auto& p = head.flat();
  return {{"format", "clearnav-model"},
          {"version", kCheckpointVersion},
          {"mode", to_string(mode)},
          {"sectors", a.sectors},
          {"width", a.width},
          {"horizon", a.horizon},
          {"waypoints", a.waypoints},
          {"risk_hidden", head.hidden()},
          {"theta", std::vector<double>(t.data(), t.data() + t.size())},
          {"phi", std::vector<double>(p.data(), p.data() + p.size())}};
}

struct Checkpoint {
  ModelParams model;
  RiskHeadParams risk_head;
  TrainMode mode = TrainMode::baseline;
};

inline Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", "") != "clearnav-model") throw IoError("not a model checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  Checkpoint c;
  const ModelArch arch{j.at("sectors").get<int>(), j.at("width").get<int>(), j.at("horizon").get<int>(),
                       j.value("waypoints", 0)};
  c.model = ModelParams(arch);
  const auto theta = j.at("theta").get<std::vector<double>>();
  if (theta.size() != arch.param_count())
    throw IoError("checkpoint has " + std::to_string(theta.size()) + " weights, architecture needs " +
                  std::to_string(arch.param_count()));
  std::copy(theta.begin(), theta.end(), c.model.flat().data());
  c.risk_head = RiskHeadParams(j.at("risk_hidden").get<int>());
  const auto phi = j.at("phi").get<std::vector<double>>();
  if (phi.size() != static_cast<std::size_t>(c.risk_head.flat().size())) throw IoError("risk head size mismatch");
  std::copy(phi.begin(), phi.end(), c.risk_head.flat().data());
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "baseline") c.mode = TrainMode::baseline;
  else if (mode == "augmented") c.mode = TrainMode::augmented;
  else if (mode == "variance_penalty") c.mode = TrainMode::variance_penalty;
  else throw IoError("unknown training mode '" + mode + "'");
  c.model.check_finite();
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& model, const RiskHeadParams& head,
                            TrainMode mode) {
  write_text_file(path, checkpoint_json(model, head, mode).dump());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Dataset file: little-endian binary with a fixed header, then snapshots and samples.

namespace io {

inline constexpr char kDatasetMagic[8] = {'C', 'N', 'D', 'S', 'E', 'T', '0', '1'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("dataset file is truncated");
  return v;
}

}  // namespace io

inline void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(io::kDatasetMagic, sizeof(io::kDatasetMagic));
  io::put<std::uint64_t>(out, ds.snapshots.size());
  io::put<std::uint64_t>(out, ds.samples.size());
  io::put<std::int32_t>(out, ds.horizon);
  io::put<double>(out, ds.dt);
  io::put<double>(out, ds.robot_radius);
  io::put<std::uint64_t>(out, ds.seed);
  const std::string camera = json(ds.camera).dump();
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(camera.size()));
  out.write(camera.data(), static_cast<std::streamsize>(camera.size()));
  for (const auto& s : ds.snapshots) {
    for (double v : {s.state.x, s.state.y, s.state.psi, s.state.v, s.state.omega}) io::put<double>(out, v);
    io::put<std::uint32_t>(out, s.world_index);
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.cloud.size()));
    for (const auto& p : s.cloud) {
      io::put<double>(out, p.x());
      io::put<double>(out, p.y());
    }
  }
  for (const auto& s : ds.samples) {
    if (static_cast<int>(s.u.horizon()) != ds.horizon) throw IoError("sample horizon differs from dataset horizon");
    io::put<std::uint32_t>(out, s.snapshot);
    for (const auto& c : s.u.commands) {
      io::put<double>(out, c.v);
      io::put<double>(out, c.omega);
    }
    io::put<double>(out, s.d_gt);
    io::put<double>(out, s.y[0]);
    io::put<double>(out, s.y[1]);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[sizeof(io::kDatasetMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, io::kDatasetMagic, sizeof(magic)) != 0)
    throw IoError(path.string() + " is not a dataset file");
  Dataset ds;
  const auto n_snap = io::get<std::uint64_t>(in);
  const auto n_samp = io::get<std::uint64_t>(in);
  ds.horizon = io::get<std::int32_t>(in);
  ds.dt = io::get<double>(in);
  ds.robot_radius = io::get<double>(in);
  ds.seed = io::get<std::uint64_t>(in);
  std::string camera(io::get<std::uint32_t>(in), '\0');
  in.read(camera.data(), static_cast<std::streamsize>(camera.size()));
  ds.camera = json::parse(camera).get<SensorConfig>();
  ds.snapshots.resize(n_snap);
  for (auto& s : ds.snapshots) {
    s.state.x = io::get<double>(in);
    s.state.y = io::get<double>(in);
    s.state.psi = io::get<double>(in);
    s.state.v = io::get<double>(in);
    s.state.omega = io::get<double>(in);
    s.world_index = io::get<std::uint32_t>(in);
    s.cloud.resize(io::get<std::uint32_t>(in));
    for (auto& p : s.cloud) {
      p.x() = io::get<double>(in);
      p.y() = io::get<double>(in);
    }
  }
  ds.samples.resize(n_samp);
  for (auto& s : ds.samples) {
    s.snapshot = io::get<std::uint32_t>(in);
    if (s.snapshot >= n_snap) throw IoError("sample refers to a missing snapshot");
    s.u.dt = ds.dt;
    s.u.commands.resize(static_cast<std::size_t>(ds.horizon));
    for (auto& c : s.u.commands) {
      c.v = io::get<double>(in);
      c.omega = io::get<double>(in);
    }
    s.d_gt = io::get<double>(in);
    s.y[0] = io::get<double>(in);
    s.y[1] = io::get<double>(in);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// CSV outputs

inline std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "epoch,nll,ce,heldout_accuracy,heldout_mean_sigma\n";
  for (const auto& e : log)
    os << e.epoch << ',' << e.nll << ',' << e.ce << ',' << e.heldout_accuracy << ',' << e.heldout_mean_sigma << '\n';
  return os.str();
}

inline std::string trace_csv(const EpisodeOutcome& o) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "t,x,y,psi,v,omega,mu,sigma,lambda,r_mmd,true_clearance\n";
  for (const auto& r : o.trace) {
    os << r.t << ',' << r.state.x << ',' << r.state.y << ',' << r.state.psi << ',' << r.state.v << ','
       << r.state.omega << ',' << r.pred.mu << ',' << r.pred.sigma << ',' << r.pred.lambda << ',' << r.risk << ','
       << r.true_clearance << '\n';
  }
  return os.str();
}

struct ReplayInfo {
  World world;
  SensorConfig camera;
  double dt = kDefaultDt;
  double robot_radius = kDefaultRobotRadius;
  std::string method;
  std::uint64_t seed = 0;
};

inline json replay_json(const EpisodeOutcome& o, const ReplayInfo& info) {
  json cmds = json::array();
  for (const auto& c : o.commands) cmds.push_back({c.v, c.omega});
  return {{"format", "clearnav-replay"},
          {"version", 1},
          {"method", info.method},
          {"seed", info.seed},
          {"dt", info.dt},
          {"robot_radius", info.robot_radius},
          {"world", info.world},
          {"camera", info.camera},
          {"result", to_string(o.result)},
          {"commands", cmds}};
}

// Writes <dir>/<stem>.csv and <dir>/<stem>.json.
inline void emit_traces(const EpisodeOutcome& o, const ReplayInfo& info, const std::filesystem::path& dir,
                        const std::string& stem) {
  try {
    write_text_file(dir / (stem + ".csv"), trace_csv(o));
    write_text_file(dir / (stem + ".json"), replay_json(o, info).dump(1));
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(std::string("emitting traces: ") + e.what());
  }
}

struct Replay {
  ReplayInfo info;
  std::vector<Command> commands;
  std::string result;
  std::vector<RobotState> states;  // re-simulated, initial state first
  bool collided = false;
};

// Re-simulates the recorded commands from the recorded start state.
inline Replay replay(const json& j) {
  if (j.value("format", "") != "clearnav-replay") throw IoError("not a replay file");
  Replay r;
  r.info.world = j.at("world").get<World>();
  r.info.camera = j.at("camera").get<SensorConfig>();
  r.info.dt = j.at("dt").get<double>();
  r.info.robot_radius = j.at("robot_radius").get<double>();
  r.info.method = j.at("method").get<std::string>();
  r.info.seed = j.at("seed").get<std::uint64_t>();
  r.result = j.at("result").get<std::string>();
  for (const auto& c : j.at("commands")) r.commands.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  RobotState s = r.info.world.start;
  r.states.push_back(s);
  auto check = [&](const RobotState& st) {
    if (true_clearance(Vec2{st.x, st.y}, r.info.world) < r.info.robot_radius) r.collided = true;
  };
  check(s);
  for (const auto& c : r.commands) {
    s = step(s, c, r.info.dt);
    r.states.push_back(s);
    check(s);
  }
  return r;
}

inline json report_json(const BenchmarkReport& rep) {
  json methods = json::array();
  for (const auto& s : rep.summaries)
    methods.push_back({{"method", to_string(s.method)},
                       {"episodes", s.episodes},
                       {"collision_pct", s.collision_pct},
                       {"stuck_pct", s.stuck_pct},
                       {"timeout_pct", s.timeout_pct},
                       {"reached_pct", s.reached_pct},
                       {"avg_speed", s.avg_speed},
                       {"max_speed", s.max_speed}});
  json episodes = json::array();
  for (const auto& r : rep.records)
    episodes.push_back({{"method", to_string(r.method)},
                        {"episode", r.episode},
                        {"result", to_string(r.result)},
                        {"duration", r.duration},
                        {"avg_speed", r.avg_speed},
                        {"max_speed", r.max_speed},
                        {"min_true_clearance", r.min_true_clearance}});
  return {{"seed", rep.seed},
          {"episodes", rep.episodes},
          {"config_hash", rep.config_hash},
          {"methods", methods},
          {"per_episode", episodes},
          {"not_evaluated", "NoMaD (pretrained vision policy)"}};
}

}  // namespace clearnav

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

#include "clearnav/clearnav.hpp"

using namespace clearnav;
namespace fs = std::filesystem;

namespace {

// gen-data config: {"worlds": 100, "clutter": {...}, "dataset": {...}}
struct GenDataConfig {
  int worlds = 100;
  ClutterConfig clutter;
  DatasetConfig dataset;
};

GenDataConfig read_gen_config(const std::string& path) {
  GenDataConfig c;
  c.dataset.snapshots_per_world = 30;
  c.dataset.controls_per_snapshot = 15;
  if (path.empty()) return c;
  const json j = read_json_file(path);
  c.worlds = j.value("worlds", c.worlds);
  if (j.contains("clutter")) c.clutter = j.at("clutter").get<ClutterConfig>();
  if (j.contains("dataset")) c.dataset = j.at("dataset").get<DatasetConfig>();
  return c;
}

TrainMode parse_mode(const std::string& s) {
  for (TrainMode m : {TrainMode::baseline, TrainMode::augmented, TrainMode::variance_penalty})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown training mode '" + s + "'");
}

template <class T>
T read_config(const std::string& path) {
  return path.empty() ? T{} : read_json_file(path).get<T>();
}

ModelSet load_models(const std::string& augmented, const std::string& baseline) {
  ModelSet ms;
  if (!augmented.empty()) ms.augmented = load_checkpoint(augmented).model;
  if (!baseline.empty()) ms.baseline = load_checkpoint(baseline).model;
  return ms;
}

int gen_data(const std::string& config, std::uint64_t seed, const std::string& out) {
  const auto c = read_gen_config(config);
  std::mt19937_64 rng(seed);
  std::vector<World> worlds;
  for (int i = 0; i < c.worlds; ++i) worlds.push_back(generate_clutter_world(c.clutter, rng));
  const auto ds = generate_dataset(std::span<const World>(worlds), c.dataset, seed, rng);
  save_dataset(out, ds);
  std::cout << ds.samples.size() << " samples from " << ds.snapshots.size() << " snapshots -> " << out << "\n";
  return 0;
}

int train_cmd(const std::string& data, const std::string& config, const std::string& mode_name,
              std::uint64_t seed, const std::string& out_dir, bool verbose) {
  const Dataset ds = load_dataset(data);
  TrainConfig tc = config.empty() ? TrainConfig{} : read_json_file(config).get<TrainConfig>();
  if (config.empty()) {
    tc.optimizer = Optimizer::adam;
    tc.arch.waypoints = 10;
  }
  tc.seed = seed;
  tc.verbose = verbose;
  const TrainMode mode = parse_mode(mode_name);
  const auto r = train(ds, tc, mode);
  fs::create_directories(out_dir);
  save_checkpoint(fs::path(out_dir) / (std::string(to_string(mode)) + ".json"), r.model, r.risk_head, mode);
  write_text_file(fs::path(out_dir) / (std::string(to_string(mode)) + "_log.csv"), training_log_csv(r.log));
  const auto obs = featurize_snapshots(ds, tc.arch.sectors);
  const auto st = evaluate(r.model, r.risk_head, mode, ds, r.heldout_indices, obs, tc, seed);
  std::cout << to_string(mode) << ": held-out accuracy " << st.accuracy << ", median sigma " << st.median_sigma
            << ", mean |mu - d| " << st.mean_abs_error << " over " << st.count << " samples\n";
  return 0;
}

World scenario_world(const BenchmarkConfig& bc, const std::string& scenario, int episode) {
  if (scenario == "suite") return suite_world(bc, episode);
  if (scenario == "single") return single_obstacle_world();
  if (scenario == "empty")
    return empty_world(Bounds{Vec2{0, 0}, Vec2{8, 5}}, RobotState{0.7, 2.5, 0, 0, 0}, Vec2{7.3, 2.5});
  throw std::invalid_argument("unknown scenario '" + scenario + "' (suite, single, empty)");
}

int episode_cmd(const std::string& config, const std::string& method_name, const std::string& scenario, int episode,
                std::uint64_t seed, const ModelSet& ms, const std::string& out_dir) {
  const auto bc = read_config<BenchmarkConfig>(config);
  const World w = scenario_world(bc, scenario, episode);
  const Method m = parse_method(method_name);
  const auto o = run_episode(w, m, ms, bc.camera, bc.planner, bc.episode, seed, bc.sectors);
  std::cout << to_string(m) << " " << to_string(o.result) << " after " << o.duration << " s, avg speed "
            << o.avg_speed << ", min clearance " << o.min_true_clearance << "\n";
  if (!out_dir.empty()) {
    const std::string stem = std::string(to_string(m)) + "_" + scenario + "_" + std::to_string(episode);
    emit_traces(o, ReplayInfo{w, bc.camera, kDefaultDt, bc.planner.robot_radius, std::string(to_string(m)), seed},
                out_dir, stem);
    std::cout << "traces -> " << (fs::path(out_dir) / stem).string() << ".{csv,json}\n";
  }
  return 0;
}

int bench_cmd(const std::string& config, const std::vector<std::string>& method_names, std::uint64_t seed,
              bool seed_set, const ModelSet& ms, const std::string& out_dir) {
  auto bc = read_config<BenchmarkConfig>(config);
  if (seed_set) bc.seed = seed;
  std::vector<Method> methods;
  for (const auto& n : method_names) methods.push_back(parse_method(n));
  if (methods.empty()) methods.assign(kAllMethods.begin(), kAllMethods.end());
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = run_benchmark(bc, methods, ms, config_hash(json(bc)), [&](const EpisodeRecord& r) {
    std::cerr << "episode " << r.episode << " " << to_string(r.method) << ": " << to_string(r.result) << " ("
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)\n";
  });
  const std::string table = format_table(rep);
  std::cout << table;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "report.json", report_json(rep).dump(1));
    write_text_file(fs::path(out_dir) / "report.txt", table);
  }
  return 0;
}

int replay_cmd(const std::string& trace, const std::string& out) {
  const auto r = replay(read_json_file(trace));
  const bool agrees = r.collided == (r.result == "collided");
  std::cout << r.info.method << " seed " << r.info.seed << ": " << r.commands.size() << " commands, recorded "
            << r.result << ", re-simulated " << (r.collided ? "collision" : "no collision")
            << (agrees ? "" : " (MISMATCH)") << "\n";
  if (!out.empty()) {
    std::ostringstream os;
    os << std::setprecision(17) << "t,x,y,psi\n";
    for (std::size_t k = 0; k < r.states.size(); ++k)
      os << static_cast<double>(k) * r.info.dt << "," << r.states[k].x << "," << r.states[k].y << ","
         << r.states[k].psi << "\n";
    write_text_file(out, os.str());
  }
  return agrees ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clearnav: learned clearance and MMD risk for sampling-based MPC"};
  app.require_subcommand(1);

  std::string config, out, method = "augmented", mode = "augmented", data, scenario = "suite", trace;
  std::string aug_ckpt, base_ckpt;
  std::vector<std::string> methods;
  std::uint64_t seed = 1;
  int episode = 0;
  bool verbose = false;

  auto* gen = app.add_subcommand("gen-data", "generate a labelled dataset from clutter worlds");
  gen->add_option("-c,--config", config, "JSON with worlds, clutter, dataset")->check(CLI::ExistingFile);
  gen->add_option("-s,--seed", seed);
  gen->add_option("-o,--out", out, "dataset file")->required();

  auto* tr = app.add_subcommand("train", "train one model on a dataset");
  tr->add_option("-d,--data", data)->required()->check(CLI::ExistingFile);
  tr->add_option("-c,--config", config, "TrainConfig JSON")->check(CLI::ExistingFile);
  tr->add_option("-m,--mode", mode, "baseline | augmented | variance_penalty");
  tr->add_option("-s,--seed", seed);
  tr->add_option("-o,--out", out, "output directory")->required();
  tr->add_flag("-v,--verbose", verbose);

  auto add_models = [&](CLI::App* sub) {
    sub->add_option("--augmented", aug_ckpt, "augmented checkpoint")->check(CLI::ExistingFile);
    sub->add_option("--baseline", base_ckpt, "baseline checkpoint (used by baseline_nll and det)")
        ->check(CLI::ExistingFile);
  };

  auto* ep = app.add_subcommand("episode", "run one episode and write its traces");
  ep->add_option("-c,--config", config, "BenchmarkConfig JSON")->check(CLI::ExistingFile);
  ep->add_option("-m,--method", method);
  ep->add_option("--scenario", scenario, "suite | single | empty");
  ep->add_option("-e,--episode", episode, "suite world index");
  ep->add_option("-s,--seed", seed);
  ep->add_option("-o,--out", out, "trace directory");
  add_models(ep);

  auto* be = app.add_subcommand("bench", "run the seeded benchmark suite");
  be->add_option("-c,--config", config, "BenchmarkConfig JSON")->check(CLI::ExistingFile);
  be->add_option("-m,--method", methods, "methods to run (default all)")->delimiter(',');
  auto* seed_opt = be->add_option("-s,--seed", seed, "overrides the config seed");
  be->add_option("-o,--out", out, "report directory");
  add_models(be);

  auto* rp = app.add_subcommand("replay", "re-simulate a recorded trace");
  rp->add_option("trace", trace, "replay JSON written by episode")->required()->check(CLI::ExistingFile);
  rp->add_option("-o,--out", out, "CSV of re-simulated states");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_data(config, seed, out);
    if (*tr) return train_cmd(data, config, mode, seed, out, verbose);
    if (*ep) return episode_cmd(config, method, scenario, episode, seed, load_models(aug_ckpt, base_ckpt), out);
    if (*be) return bench_cmd(config, methods, seed, seed_opt->count() > 0, load_models(aug_ckpt, base_ckpt), out);
    if (*rp) return replay_cmd(trace, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "clearnav/collision_model.hpp"
#include "clearnav/training.hpp"

using namespace clearnav;

namespace {

PointCloud2D random_cloud(std::mt19937_64& rng, std::size_t n = kStandardCloudSize) {
  std::uniform_real_distribution<double> r(0.2, 5.0), b(-0.5 * kDefaultFov, 0.5 * kDefaultFov);
  PointCloud2D c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(polar_point(r(rng), b(rng)));
  return c;
}

// Plain-loop forward pass.
std::array<double, 3> reference_forward(const ModelParams& p, const std::vector<double>& x) {
  const int w = p.arch().width;
  const int d = p.arch().input_dim();
  const auto& t = p.flat();
  std::size_t o = 0;
  auto at = [&](std::size_t i) { return t[static_cast<Eigen::Index>(i)]; };
  std::vector<double> h1(static_cast<std::size_t>(w)), h2(static_cast<std::size_t>(w));
  const std::size_t ow1 = o, ob1 = ow1 + static_cast<std::size_t>(w * d), ow2 = ob1 + static_cast<std::size_t>(w),
                    ob2 = ow2 + static_cast<std::size_t>(w * w), ow3 = ob2 + static_cast<std::size_t>(w),
                    ob3 = ow3 + static_cast<std::size_t>(3 * w);
  // column-major storage: element (r, c) of an R-row matrix is at r + c * R
  for (int r = 0; r < w; ++r) {
    double s = at(ob1 + static_cast<std::size_t>(r));
    for (int c = 0; c < d; ++c) s += at(ow1 + static_cast<std::size_t>(r + c * w)) * x[static_cast<std::size_t>(c)];
    h1[static_cast<std::size_t>(r)] = std::tanh(s);
  }
  for (int r = 0; r < w; ++r) {
    double s = at(ob2 + static_cast<std::size_t>(r));
    for (int c = 0; c < w; ++c) s += at(ow2 + static_cast<std::size_t>(r + c * w)) * h1[static_cast<std::size_t>(c)];
    h2[static_cast<std::size_t>(r)] = std::tanh(s);
  }
  std::array<double, 3> out{};
  for (int r = 0; r < 3; ++r) {
    double s = at(ob3 + static_cast<std::size_t>(r));
    for (int c = 0; c < w; ++c) s += at(ow3 + static_cast<std::size_t>(r + c * 3)) * h2[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = s;
  }
  return {out[0], std::log1p(std::exp(out[1])) + 1e-6, std::log1p(std::exp(out[2])) + 1e-3};
}

std::vector<double> flat_input(const ObservationVector& obs, const ControlSequence& u) {
  std::vector<double> x(obs.sectors.begin(), obs.sectors.end());
  x.push_back(obs.v0);
  x.push_back(obs.omega0);
  for (const auto& c : u.commands) {
    x.push_back(c.v);
    x.push_back(c.omega);
  }
  return x;
}

}  // namespace

TEST(Featurize, SentinelCloudSaturates) {
  std::mt19937_64 rng(1);
  SensorConfig cfg;
  const auto cloud = standardize_cloud({}, cfg, rng);
  const auto obs = featurize(cloud, {0, 0, 0, 0.4, -0.2}, cfg);
  ASSERT_EQ(obs.sectors.size(), 32u);
  EXPECT_EQ(obs.size(), 34u);
  for (double f : obs.sectors) EXPECT_DOUBLE_EQ(f, 1.0);
  EXPECT_EQ(obs.v0, 0.4);
  EXPECT_EQ(obs.omega0, -0.2);
}

TEST(Featurize, SinglePointSector) {
  SensorConfig cfg;
  const double bearing = -0.5 * cfg.fov + cfg.fov * (5.5 / 32.0);  // middle of sector 5
  PointCloud2D cloud(kStandardCloudSize, polar_point(1.0, bearing));
  const auto obs = featurize(cloud, {}, cfg);
  for (std::size_t j = 0; j < 32; ++j) EXPECT_NEAR(obs.sectors[j], j == 5 ? 0.2 : 1.0, 1e-12);
}

TEST(Featurize, PermutationInvariantAndBounded) {
  std::mt19937_64 rng(2);
  SensorConfig cfg;
  const auto cloud = random_cloud(rng);
  const auto ref = featurize(cloud, {}, cfg).sectors;
  for (double f : ref) {
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
  auto shuffled = cloud;
  for (int i = 0; i < 100; ++i) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(featurize(shuffled, {}, cfg).sectors, ref);
  }
}

TEST(Predict, PositiveHeads) {
  std::mt19937_64 rng(3);
  SensorConfig cfg;
  ModelArch arch;
  for (int trial = 0; trial < 20; ++trial) {
    auto p = ModelParams::random(arch, rng);
    p.flat() *= 5.0;  // push heads into saturation
    const auto obs = featurize(random_cloud(rng), {}, cfg);
    for (const auto& pred : predict_batch(p, obs, sample_controls(rng, 20))) {
      EXPECT_GT(pred.sigma, 0.0);
      EXPECT_GE(pred.lambda, kLambdaFloor);
    }
  }
}

TEST(Predict, ZeroWeightsGiveBias) {
  std::mt19937_64 rng(4);
  ModelParams p(ModelArch{});
  p.b3() << 0.7, 0.0, 0.0;
  SensorConfig cfg;
  const auto obs = featurize(random_cloud(rng), {}, cfg);
  for (const auto& u : sample_controls(rng, 10)) {
    const auto pred = predict(p, obs, u);
    EXPECT_EQ(pred.mu, 0.7);
    EXPECT_NEAR(pred.sigma, std::log(2.0) + kSigmaFloor, 1e-15);
    EXPECT_NEAR(pred.lambda, std::log(2.0) + kLambdaFloor, 1e-15);
  }
}

TEST(Predict, MatchesLoopImplementation) {
  std::mt19937_64 rng(5);
  SensorConfig cfg;
  ModelArch arch;
  arch.width = 16;
  const auto p = ModelParams::random(arch, rng);
  const auto obs = featurize(random_cloud(rng), {0, 0, 0, 0.5, 0.1}, cfg, arch.sectors);
  for (const auto& u : sample_controls(rng, 25)) {
    const auto pred = predict(p, obs, u);
    const auto ref = reference_forward(p, flat_input(obs, u));
    EXPECT_NEAR(pred.mu, ref[0], 1e-10);
    EXPECT_NEAR(pred.sigma, ref[1], 1e-10);
    EXPECT_NEAR(pred.lambda, ref[2], 1e-10);
  }
}

TEST(Predict, SmoothInInputs) {
  std::mt19937_64 rng(6);
  ModelArch arch;
  arch.width = 16;
  const auto p = ModelParams::random(arch, rng);
  SensorConfig cfg;
  auto obs = featurize(random_cloud(rng), {}, cfg);
  const auto u = sample_control(rng);
  const auto base = predict(p, obs, u);
  const double delta = 1e-6;
  for (std::size_t j = 0; j < obs.sectors.size(); ++j) {
    auto o2 = obs;
    o2.sectors[j] += delta;
    const auto moved = predict(p, o2, u);
    EXPECT_LT(std::abs(moved.mu - base.mu), 100 * delta);
    EXPECT_LT(std::abs(moved.sigma - base.sigma), 100 * delta);
    EXPECT_LT(std::abs(moved.lambda - base.lambda), 100 * delta);
  }
  EXPECT_EQ(predict(p, obs, u).mu, base.mu);
}

TEST(Predict, RejectsNonFiniteAndShapeMismatch) {
  std::mt19937_64 rng(7);
  auto p = ModelParams::random(ModelArch{}, rng);
  SensorConfig cfg;
  const auto obs = featurize(random_cloud(rng), {}, cfg);
  const auto u = sample_control(rng);
  p.flat()[17] = std::numeric_limits<double>::quiet_NaN();
  try {
    predict(p, obs, u);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
  }
  p.flat()[17] = 0.0;
  EXPECT_THROW(predict(p, obs, constant_controls({0.5, 0}, 10)), std::invalid_argument);
}

TEST(Waypoints, EncodingMatchesRollout) {
  std::mt19937_64 rng(8);
  SensorConfig cfg;
  const auto cloud = random_cloud(rng, 40);
  const auto obs = featurize(cloud, {}, cfg);
  const auto u = sample_control(rng);
  ModelArch arch;
  arch.waypoints = 5;
  Eigen::VectorXd col(arch.input_dim());
  encode_input(obs, u, arch, col);
  const auto traj = rollout({}, u);
  const Eigen::Index base = arch.obs_dim() + 2 * arch.horizon;
  for (int k = 0; k < 5; ++k) {
    const auto& s = traj.states[static_cast<std::size_t>(10 * (k + 1))];
    EXPECT_NEAR(col[base + 3 * k], s.x / 5.0, 1e-12);
    EXPECT_NEAR(col[base + 3 * k + 1], s.y / 5.0, 1e-12);
    double best = 5.0;
    for (const auto& p : cloud) best = std::min(best, std::hypot(s.x - p.x(), s.y - p.y()));
    EXPECT_NEAR(col[base + 3 * k + 2], best / 5.0, 1e-12);
  }
  EXPECT_NEAR(col[base + 15], worst_case_clearance(traj, cloud, 5.0) / 5.0, 1e-12);
}

TEST(OraclePredict, EmptyWorldAndPassthrough) {
  World w;
  w.bounds = {Vec2{0, 0}, Vec2{10, 4}};
  const RobotState s{2, 2, 0, 0, 0};
  const auto pred = oracle_predict(w, s, constant_controls({1.0, 0.0}), 0.05, 5.0);
  EXPECT_NEAR(pred.mu, 2.0, 1e-12);  // side walls stay 2 m away along the straight path
  EXPECT_EQ(pred.sigma, 0.05);
  EXPECT_EQ(pred.lambda, kDefaultLambda);
  World big;
  big.bounds = {Vec2{-50, -50}, Vec2{50, 50}};
  EXPECT_EQ(oracle_predict(big, {}, constant_controls({1.0, 0.0}), 0.05, 5.0).mu, 5.0);
}

TEST(OraclePredict, MatchesLabelGenerator) {
  std::mt19937_64 rng(9);
  World w;
  w.bounds = {Vec2{0, 0}, Vec2{8, 5}};
  w.obstacles = {Circle{{3, 2.5}, 0.5}, Box{{5, 1}, {6, 2}}, Circle{{6.5, 4}, 0.3}};
  DatasetConfig dc;
  dc.label_source = LabelSource::exact_geometry;
  for (int i = 0; i < 1000; ++i) {
    const auto pose = sample_free_pose(w, 0.35, 1000, rng);
    ASSERT_TRUE(pose.has_value());
    const auto u = sample_control(rng);
    const double label = label_clearance(rollout(*pose, u), w, {}, dc);
    EXPECT_NEAR(oracle_predict(w, *pose, u, 0.05, dc.reference.max_range).mu, label, 1e-9);
  }
}

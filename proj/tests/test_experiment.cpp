#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "trackbench/experiment.hpp"

using namespace trackbench;
using nlohmann::json;

namespace {

json small_generator(int frames = 6) {
  return {{"seed", 1},
          {"motion", "sideways"},
          {"frames", frames},
          {"baseline", 0.3},
          {"intrinsics", {{"fx", 250.0}, {"fy", 250.0}, {"cx", 159.5}, {"cy", 119.5}, {"width", 320}, {"height", 240}}}};
}

json oracle_spec() {
  return {{"input", {{"generator", small_generator()}, {"scenes", 2}}},
          {"protocol", "age"},
          {"trackers", {{{"kind", "oracle"}, {"label", "exact"}, {"grid_step", 30}}}},
          {"min_count", 1}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

}  // namespace

TEST(Spec, DefaultsAndNormalization) {
  json j = oracle_spec();
  j["speeds"] = {4, 1, 2, 2};
  j["trackers"].push_back({{"kind", "differential"}});
  const ExperimentSpec s = validate_spec(j);
  EXPECT_EQ(s.speeds, (std::vector<int>{1, 2, 4}));
  EXPECT_EQ(s.trackers[1].label, "differential");
  EXPECT_EQ(s.percentile, 90.0);
  EXPECT_EQ(s.protocol, Protocol::age);
  EXPECT_FALSE(s.generator->keyframe);

  j["protocol"] = "timestep";
  j["input"]["generator"]["frames"] = 20;
  const ExperimentSpec t = validate_spec(j);
  ASSERT_TRUE(t.generator->keyframe);
  EXPECT_EQ(*t.generator->keyframe % 4, 0);
  EXPECT_EQ(*t.generator->keyframe, 8);
}

TEST(Spec, Rejections) {
  json j = oracle_spec();
  j["trackers"] = {{{"kind", "optical-magic"}}};
  EXPECT_THROW(validate_spec(j), FormatError);

  j = oracle_spec();
  j["trackers"].push_back({{"kind", "oracle"}, {"label", "exact"}});
  EXPECT_THROW(validate_spec(j), InvalidSpec);

  j = oracle_spec();
  j["trackers"][0]["label"] = "has space";
  EXPECT_THROW(validate_spec(j), InvalidSpec);

  j = oracle_spec();
  j["speeds"] = {0};
  EXPECT_THROW(validate_spec(j), InvalidSpec);

  j = oracle_spec();
  j["protocol"] = "timestep";
  j["speeds"] = {1, 2};
  j["input"]["generator"]["keyframe"] = 3;
  EXPECT_THROW(validate_spec(j), KeyframeSkipped);

  j = oracle_spec();
  j["input"]["datasets"] = json::array({"x"});
  EXPECT_THROW(validate_spec(j), FormatError);

  j = oracle_spec();
  j["trackers"][0]["noise"] = {{"covariance", {{1, 2}, {2, 1}}}};
  EXPECT_THROW(validate_spec(j), InvalidSpec);

  EXPECT_THROW(validate_spec(json::array()), FormatError);
}

TEST(Spec, ProtocolMismatch) {
  tbtest::TempDir tmp;
  SequenceBundle seq = tbtest::plane_sequence(3);
  // cloud only: valid input for the timestep protocol, not for the age protocol
  SequenceBundle cloud_only = seq;
  for (auto& f : cloud_only.frames) f.depth.reset();
  cloud_only.keyframe_cloud = KeyframeCloud{1, {Point3(0, 0, 5), Point3(1, 0, 5)}};
  save_sequence(cloud_only, tmp.path() / "cloud");
  save_sequence(seq, tmp.path() / "depth");

  json j = {{"input", {{"datasets", {(tmp.path() / "cloud").string()}}}},
            {"protocol", "age"},
            {"trackers", {{{"kind", "differential"}}}}};
  EXPECT_THROW(validate_spec(j), ProtocolMismatch);
  j["protocol"] = "timestep";
  EXPECT_NO_THROW(validate_spec(j));

  j["input"]["datasets"] = {(tmp.path() / "depth").string()};
  EXPECT_THROW(validate_spec(j), ProtocolMismatch);
  j["protocol"] = "age";
  EXPECT_NO_THROW(validate_spec(j));

  j["input"]["datasets"] = {(tmp.path() / "absent").string()};
  EXPECT_THROW(validate_spec(j), MissingStream);
}

TEST(Spec, HashIgnoresOutput) {
  json j = oracle_spec();
  const std::string h = config_hash(validate_spec(j));
  EXPECT_EQ(h.size(), 16u);
  j["output"] = "/somewhere/else";
  EXPECT_EQ(config_hash(validate_spec(j)), h);
  j["seed"] = 5;
  EXPECT_NE(config_hash(validate_spec(j)), h);
  // the canonical form re-parses to the same hash
  EXPECT_EQ(config_hash(validate_spec(spec_to_json(validate_spec(j)))), config_hash(validate_spec(j)));
}

TEST(Experiment, ExactOracleHasZeroStatistics) {
  const ExperimentReport r = run_experiment(validate_spec(oracle_spec()));
  ASSERT_EQ(r.cells.size(), 1u);
  const CellReport& c = r.cells[0];
  EXPECT_EQ(c.scenes.size(), 2u);
  EXPECT_GT(c.tracks, 100u);
  EXPECT_EQ(c.anchored, c.tracks);
  ASSERT_FALSE(c.age.empty());
  for (const auto& a : c.age) {
    EXPECT_LT(a.m.mean.norm(), 1e-6);
    EXPECT_LT(a.m.mean_abs.norm(), 1e-6);
    if (a.m.second_moment) {
      EXPECT_LT(a.m.second_moment->norm(), 1e-10);
    }
  }
  EXPECT_TRUE(c.outliers.empty());
  EXPECT_FALSE(c.mean_outlier_ratio);
}

TEST(Experiment, SpeedsProduceTaggedCells) {
  json j = oracle_spec();
  j["speeds"] = {1, 2, 4};
  j["input"]["generator"]["frames"] = 9;
  const ExperimentReport r = run_experiment(validate_spec(j), 2);
  ASSERT_EQ(r.cells.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.cells[i].speed, 1 << i);
    EXPECT_NEAR(r.cells[i].dt, (1 << i) / 30.0, 1e-12);
    EXPECT_EQ(r.cells[i].scenes.size(), 2u);
  }
  // fewer frames survive subsampling, so fewer age indices are reported
  EXPECT_GT(r.cells[0].age.size(), r.cells[2].age.size());
}

TEST(Experiment, TimestepProtocolWithCloud) {
  json j = oracle_spec();
  j["protocol"] = "timestep";
  j["input"]["generator"]["cloud_density"] = 2.0;
  const ExperimentReport r = run_experiment(validate_spec(j));
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_GT(r.cells[0].anchored, 0u);
  EXPECT_FALSE(r.cells[0].timestep.empty());
  // cloud points lie within the 0.25 px association radius of the exact feature
  const int kf = *validate_spec(j).generator->keyframe;
  for (const auto& s : r.cells[0].timestep) {
    EXPECT_LT(s.m.mean_abs.norm(), 0.3);
    if (s.t == kf) {
      EXPECT_LT(s.m.mean_abs.x(), 0.25);
      EXPECT_LT(s.m.mean_abs.y(), 0.25);
    }
  }
}

TEST(Experiment, RealTrackersRun) {
  json j = oracle_spec();
  j["trackers"] = {{{"kind", "differential"}, {"label", "lk"}}, {{"kind", "correspondence"}, {"label", "desc"}}};
  j["input"]["scenes"] = 1;
  const ExperimentReport r = run_experiment(validate_spec(j), 2);
  ASSERT_EQ(r.cells.size(), 2u);
  for (const auto& c : r.cells) {
    EXPECT_GT(c.tracks, 0u);
    EXPECT_FALSE(c.outliers.empty());
    EXPECT_GT(c.lifetimes.total(), 0);
  }
}

TEST(Experiment, ReproducibleOutputs) {
  json j = oracle_spec();
  j["trackers"].push_back({{"kind", "oracle"}, {"label", "noisy"}, {"noise", {{"covariance", {1, 1}}}}});
  tbtest::TempDir a, b;
  write_experiment(run_experiment(validate_spec(j), 1), a.path());
  write_experiment(run_experiment(validate_spec(j), 3), b.path());
  EXPECT_EQ(slurp(a.path() / "report.json"), slurp(b.path() / "report.json"));
  EXPECT_EQ(slurp(a.path() / "plots" / "plot_data.csv"), slurp(b.path() / "plots" / "plot_data.csv"));

  const auto cell = a.path() / "sideways" / "noisy" / "speed_1";
  EXPECT_TRUE(std::filesystem::exists(cell / "age_stats.csv"));
  EXPECT_TRUE(std::filesystem::exists(cell / "outliers.csv"));
  EXPECT_TRUE(std::filesystem::exists(cell / "lifetimes.csv"));
  EXPECT_TRUE(std::filesystem::exists(a.path() / "plots" / "box_stats.csv"));
  EXPECT_TRUE(std::filesystem::exists(a.path() / "plots" / "sideways_noisy_sig_uu_line.svg"));
  EXPECT_TRUE(std::filesystem::exists(a.path() / "plots" / "sideways_noisy_mu_u_box.svg"));

  const json report = json::parse(slurp(a.path() / "report.json"));
  EXPECT_EQ(report.at("config_hash").get<std::string>(), config_hash(validate_spec(j)));
  EXPECT_EQ(report.at("cells").size(), 2u);
}

TEST(Plots, MalformedReport) {
  tbtest::TempDir tmp;
  EXPECT_THROW(write_plots(json{{"cells", json::array()}}, tmp.path()), FormatError);
  EXPECT_NO_THROW(write_plots(json{{"protocol", "age"}, {"cells", json::array()}}, tmp.path()));
}

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "test_support.hpp"
#include "trackbench/experiment.hpp"
#include "trackbench/ransac.hpp"

#ifndef TRACKBENCH_CLI
#define TRACKBENCH_CLI "trackbench"
#endif

using namespace trackbench;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(4);
  o << v;
  return o.str();
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * double(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Synthetic 800x600 scenes at the statistics regime used for the tracker findings.
json tracker_spec(const std::string& motion, int frames, json trackers, std::vector<int> speeds = {1},
                  int direction = 1, bool rotate = false) {
  return {{"input",
           {{"generator", {{"seed", 100}, {"motion", motion}, {"frames", frames}, {"direction", direction},
                           {"rotate", rotate ? 90 : 0}}},
            {"scenes", 3}}},
          {"protocol", "age"},
          {"trackers", trackers},
          {"speeds", speeds},
          {"percentile", 80},
          {"min_count", 500},
          {"seed", 7}};
}

const json kLK = {{"kind", "differential"}, {"label", "lk"}};
const json kDesc = {{"kind", "correspondence"}, {"label", "desc"}};

const CellReport& cell(const ExperimentReport& r, const std::string& tracker, int speed = 1) {
  for (const auto& c : r.cells)
    if (c.tracker == tracker && c.speed == speed) return c;
  throw std::runtime_error("missing cell " + tracker);
}

std::vector<const AgeStats*> included(const CellReport& c, int from = 0) {
  std::vector<const AgeStats*> out;
  for (const auto& a : c.age)
    if (a.m.included && a.k >= from) out.push_back(&a);
  return out;
}

ExperimentReport run(const json& spec) { return run_experiment(validate_spec(spec), workers()); }

// ------------------------------------------------------------------ criteria

Outcome estimator_oracle() {
  SequenceBundle seq;
  seq.intrinsics = {500, 500, 399.5, 299.5, 800, 600};
  for (int i = 0; i <= 10; ++i) {
    Frame f;
    f.index = i;
    f.timestamp = i / 30.0;
    f.image = std::make_shared<const GrayImage>(800, 600);
    f.depth = std::make_shared<const DepthMap>(800, 600, 5.0f);
    seq.frames.push_back(f);
    seq.poses.push_back(RigidPose::from_translation({0.01 * i, 0.005 * i, 0}));
  }
  auto planted = plant_grid_points(seq, 5, 50);
  planted.resize(10000);
  const Vec2 b(2, -1);
  Mat2 S;
  S << 4, 0, 0, 1;
  const auto tracks = oracle_tracker(seq, planted, OracleNoise{b, S, 2024});
  const auto st = age_stats(error_series(ground_truth_from_depth(tracks, seq), "oracle"), 1);
  const Mat2 target = S + b * b.transpose();
  bool ok = true;
  std::string d;
  for (int k : {1, 5, 10}) {
    const MomentStats& m = st.at(k).m;
    const double dn = (m.mean - b).cwiseAbs().maxCoeff();
    const double dp = (*m.second_moment - target).norm() / target.norm();
    ok = ok && m.count == 10000 && dn < 0.06 && dp < 0.10;
    d += " k=" + std::to_string(k) + ": n=" + std::to_string(m.count) + " |nu-b|max=" + fmt(dn) + " relPhi=" + fmt(dp);
  }
  return {ok, d};
}

Outcome geometry_round_trips() {
  const CameraIntrinsics K{500, 510, 399.5, 299.5, 800, 600};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-400, 1200), Z(0.05, 200), P(-20, 20);
  std::normal_distribution<double> N;
  double worst_px = 0, worst_pose = 0;
  for (int i = 0; i < 1000000; ++i) {
    const Pixel p{U(rng), U(rng)};
    const Pixel q = project(K, backproject(K, p, Z(rng)));
    worst_px = std::max({worst_px, std::abs(q.u - p.u), std::abs(q.v - p.v)});
    const RigidPose g(Eigen::Quaterniond(N(rng), N(rng), N(rng), N(rng)), Eigen::Vector3d(P(rng), P(rng), P(rng)));
    const Point3 X(P(rng), P(rng), P(rng));
    worst_pose = std::max(worst_pose, (transform(inverse(g), transform(g, X)) - X).cwiseAbs().maxCoeff());
  }
  return {worst_px < 1e-9 && worst_pose < 1e-9, " max pixel err=" + fmt(worst_px) + " max pose err=" + fmt(worst_pose)};
}

Outcome anchoring_identity() {
  GeneratorConfig g;
  g.seed = 5;
  g.scene_seed = 5;
  g.trajectory.frames = 12;
  const SequenceBundle seq = generate_sequence(g, workers());
  std::size_t n = 0, bad = 0;
  double worst = 0;
  for (TrackerKind kind : {TrackerKind::differential, TrackerKind::correspondence}) {
    TrackerConfig cfg;
    cfg.kind = kind;
    const auto tracks = run_tracker(seq, cfg, 3).tracks;
    for (const auto& gt : ground_truth_from_depth(tracks, seq)) {
      ++n;
      const double e = gt.errors.front() ? gt.errors.front()->norm() : INFINITY;
      worst = std::max(worst, e);
      if (!(e <= 1e-9)) ++bad;
    }
  }
  return {n > 0 && bad == 0, " anchored=" + std::to_string(n) + " max |e(t0)|=" + fmt(worst)};
}

struct DriftRuns {
  ExperimentReport forward, reversed, rotated;
};

Outcome drift_finding(const DriftRuns& r) {
  const CellReport& lk = cell(r.forward, "lk");
  const CellReport& desc = cell(r.forward, "desc");
  const auto ages = included(lk);
  std::vector<double> k, mag;
  int nonneg = 0;
  double max_v = 0, min_u = INFINITY, max_u = -INFINITY;
  for (const AgeStats* a : ages) {
    k.push_back(a->k);
    mag.push_back(std::abs(a->m.mean.x()));
    max_v = std::max(max_v, std::abs(a->m.mean.y()));
    if (a->k >= 1) {
      if (!(a->m.mean.x() < 0)) ++nonneg;
      min_u = std::min(min_u, a->m.mean.x());
      max_u = std::max(max_u, a->m.mean.x());
    }
  }
  const double rho = ages.size() >= 3 ? spearman(mag, k) : NAN;
  double desc_u = 0;
  for (const AgeStats* a : included(desc)) desc_u = std::max(desc_u, std::abs(a->m.mean.x()));
  const bool sign = nonneg == 0 && ages.size() >= 2;
  const bool ok = sign && rho > 0.8 && max_v < 0.5 && desc_u < 0.5;
  return {ok, " lk ages=" + std::to_string(ages.size()) + " nu_u in [" + fmt(min_u) + ", " + fmt(max_u) +
                  "] non-negative at " + std::to_string(nonneg) + " ages, spearman=" + fmt(rho) +
                  " max|nu_v|=" + fmt(max_v) + " desc max|nu_u|=" + fmt(desc_u)};
}

Outcome drift_reversal(const DriftRuns& r) {
  const CellReport& a = cell(r.forward, "lk");
  const CellReport& b = cell(r.reversed, "lk");
  int total = 0, flipped = 0;
  for (const AgeStats* x : included(a, 1))
    for (const AgeStats* y : included(b, 1))
      if (x->k == y->k) {
        ++total;
        if (x->m.mean.x() * y->m.mean.x() < 0) ++flipped;
      }
  return {total > 0 && flipped >= 0.9 * total, " flipped " + std::to_string(flipped) + "/" + std::to_string(total) + " ages"};
}

Outcome anisotropy(const DriftRuns& r) {
  const CellReport& a = cell(r.forward, "lk");
  const CellReport& b = cell(r.rotated, "lk");
  int total = 0, swapped = 0;
  for (const AgeStats* x : included(a, 1))
    for (const AgeStats* y : included(b, 1))
      if (x->k == y->k) {
        ++total;
        const Mat2& P = *x->m.second_moment;
        const Mat2& Q = *y->m.second_moment;
        if (P(0, 0) > P(1, 1) && Q(1, 1) > Q(0, 0)) ++swapped;
      }
  return {total > 0 && swapped == total,
          " u-dominant then v-dominant at " + std::to_string(swapped) + "/" + std::to_string(total) + " ages"};
}

Outcome outlier_trend(const ExperimentReport& sideways, const ExperimentReport& arvr) {
  bool ok = true;
  std::string d;
  for (const auto* r : {&sideways, &arvr}) {
    std::vector<double> q;
    for (int v : {1, 2, 4}) q.push_back(cell(*r, "lk", v).mean_outlier_ratio.value_or(0.0));
    int inversions = 0;
    bool small = true;
    for (std::size_t i = 1; i < q.size(); ++i)
      if (q[i] < q[i - 1]) {
        ++inversions;
        small = small && q[i - 1] - q[i] <= 0.02;
      }
    ok = ok && (inversions == 0 || (inversions == 1 && small));
    d += " " + r->cells.front().motion + ": " + fmt(q[0]) + " " + fmt(q[1]) + " " + fmt(q[2]);
  }
  return {ok, d};
}

Outcome lifetime_ordering(const std::vector<const ExperimentReport*>& reports) {
  bool ok = true;
  std::string d;
  for (const auto* r : reports) {
    const double lk = cell(*r, "lk").lifetimes.median(), desc = cell(*r, "desc").lifetimes.median();
    ok = ok && lk > desc;
    d += " " + r->cells.front().motion + ": " + fmt(lk) + " vs " + fmt(desc);
  }
  return {ok, d};
}

Outcome ransac_gate_criterion() {
  const CameraIntrinsics K{500, 500, 399.5, 299.5, 800, 600};
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(-1, 1), Z(3, 12), ang(0, 2 * std::numbers::pi), mag(15, 45), rot(0.01, 0.1);
  TrackerConfig cfg;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const RigidPose second = RigidPose::from_axis_angle(Eigen::Vector3d(U(rng), U(rng), U(rng)).normalized(), rot(rng),
                                                        {U(rng) * 0.5, U(rng) * 0.2, U(rng) * 0.2});
    std::vector<Pixel> prev, next;
    while (prev.size() < 100) {
      const double z = Z(rng);
      const Point3 X(U(rng) * 0.7 * z, U(rng) * 0.5 * z, z);
      const Point3 X2 = transform(inverse(second), X);
      if (X2.z() < 1) continue;
      const Pixel a = project(K, X), b = project(K, X2);
      if (!K.contains(a) || !K.contains(b)) continue;
      prev.push_back(a);
      next.push_back(b);
    }
    std::vector<int> idx(100);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<bool> outlier(100, false);
    for (int k = 0; k < 30; ++k) {
      const int i = idx[k];
      const double a = ang(rng), m = mag(rng);
      next[i].u += m * std::cos(a);
      next[i].v += m * std::sin(a);
      outlier[i] = true;
    }
    const GateResult g = ransac_gate(prev, next, cfg, rng);
    for (int i = 0; i < 100; ++i) {
      const bool rejected = !g.inlier[i];
      if (rejected && outlier[i]) ++tp;
      if (rejected && !outlier[i]) ++fp;
      if (!rejected && outlier[i]) ++fn;
    }
  }
  const double precision = double(tp) / double(tp + fp), recall = double(tp) / double(tp + fn);
  const int n = adaptive_iterations(0.995, 0.5, 8, 1000000);
  return {precision >= 0.9 && recall >= 0.9 && n == 1354,
          " precision=" + fmt(precision) + " recall=" + fmt(recall) + " N(0.995,0.5,8)=" + std::to_string(n)};
}

Outcome cloud_association() {
  const CameraIntrinsics K{500, 500, 399.5, 299.5, 800, 600};
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> U(40, 760), V(40, 560), off(-0.6, 0.6), Z(1, 30), S(-1, 1);
  std::uniform_int_distribution<int> count(1, 40);
  int agree = 0, associated = 0, boundary = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    SequenceBundle seq;
    seq.intrinsics = K;
    seq.poses = {RigidPose::identity(),
                 RigidPose::from_axis_angle(Eigen::Vector3d(S(rng), S(rng), S(rng)).normalized(), S(rng), {S(rng), S(rng), S(rng)})};
    KeyframeCloud cloud;
    cloud.frame = 1;
    const Pixel p{U(rng), V(rng)};
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      Pixel q{p.u + off(rng), p.v + off(rng)};
      if (i == 0 && trial % 4 == 0) {
        // points right at the threshold in both directions
        const double r = 0.25 + (trial % 8 == 0 ? -1e-9 : 1e-9), a = S(rng) * std::numbers::pi;
        q = {p.u + r * std::cos(a), p.v + r * std::sin(a)};
        ++boundary;
      }
      cloud.points.push_back(backproject(K, q, Z(rng)));
    }
    seq.keyframe_cloud = cloud;
    FeatureTrack t;
    t.observations = {{0, p}, {1, p}};
    const auto got = anchor_from_cloud(std::span<const FeatureTrack>(&t, 1), seq).front();

    std::optional<std::size_t> best;
    double best_d = INFINITY;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      const Point3& P = cloud.points[i];
      const double d = std::hypot(K.fx * P.x() / P.z() + K.cx - p.u, K.fy * P.y() / P.z() + K.cy - p.v);
      if (d < best_d) best_d = d, best = i;
    }
    const bool expect = best_d < 0.25;
    bool same = expect == got.has_value();
    if (same && got) {
      ++associated;
      same = got->cloud_index == *best && (got->X_s - transform(seq.poses[1], cloud.points[*best])).norm() < 1e-9;
    }
    if (same) ++agree;
  }
  return {agree == 1000, " agree=" + std::to_string(agree) + "/1000 associated=" + std::to_string(associated) +
                             " boundary fixtures=" + std::to_string(boundary)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

Outcome cli_determinism() {
  tbtest::TempDir tmp;
  const json spec = {{"input",
                      {{"generator", {{"seed", 3}, {"motion", "sideways"}, {"frames", 10}, {"baseline", 0.4}}},
                       {"scenes", 2}, {"motions", {"sideways", "arvr"}}}},
                     {"protocol", "age"},
                     {"trackers", {kLK, kDesc, {{"kind", "oracle"}, {"label", "noisy"}, {"noise", {{"covariance", {1, 2}}}}}}},
                     {"speeds", {1, 2}},
                     {"min_count", 20},
                     {"seed", 11}};
  std::ofstream(tmp.path() / "spec.json") << spec.dump(2);
  std::string reports[2];
  int i = 0;
  for (int w : {1, 4}) {
    const auto out = tmp.path() / ("out" + std::to_string(w));
    const std::string cmd = std::string("\"") + TRACKBENCH_CLI + "\" run \"" + (tmp.path() / "spec.json").string() +
                            "\" -o \"" + out.string() + "\" --workers " + std::to_string(w) + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, " command failed: " + cmd};
    reports[i++] = slurp(out / "report.json");
  }
  return {!reports[0].empty() && reports[0] == reports[1],
          " report.json " + std::to_string(reports[0].size()) + " bytes, identical=" + (reports[0] == reports[1] ? "yes" : "no")};
}

Outcome percentile_rejection() {
  std::vector<GroundTruthTrack> g;
  for (int i = 1; i <= 10; ++i) {
    GroundTruthTrack t;
    t.track_id = i;
    t.errors = {Vec2::Zero(), Vec2(i, 0)};
    g.push_back(t);
  }
  const auto a = percentile_reject(g, 90).size(), b = percentile_reject(g, 80).size();
  return {a == 9 && b == 8, " q=90 keeps " + std::to_string(a) + ", q=80 keeps " + std::to_string(b)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string(" exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ":" << o.detail << " ("
              << fmt(s) << " s)" << std::endl;
  };

  report(1, "estimator oracle", estimator_oracle);
  report(2, "geometry round-trips", geometry_round_trips);
  report(3, "anchoring identity", anchoring_identity);

  DriftRuns drift;
  std::optional<ExperimentReport> arvr_speeds, sideways_speeds, fixating, forwards, arvr;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    drift.forward = run(tracker_spec("sideways", 60, {kLK, kDesc}));
    drift.reversed = run(tracker_spec("sideways", 60, {kLK}, {1}, -1));
    drift.rotated = run(tracker_spec("sideways", 60, {kLK}, {1}, 1, true));
    sideways_speeds = run(tracker_spec("sideways", 60, {kLK}, {1, 2, 4}));
    arvr_speeds = run(tracker_spec("arvr", 200, {kLK}, {1, 2, 4}));
    fixating = run(tracker_spec("fixating", 60, {kLK, kDesc}));
    forwards = run(tracker_spec("forwards", 60, {kLK, kDesc}));
    arvr = run(tracker_spec("arvr", 200, {kLK, kDesc}));
  } catch (const std::exception& e) {
    std::cout << "experiment runs failed: " << e.what() << std::endl;
  }
  std::cout << "tracker experiments took "
            << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) << " s" << std::endl;

  report(4, "differential drift", [&] { return drift_finding(drift); });
  report(5, "drift reversal", [&] { return drift_reversal(drift); });
  report(6, "motion-axis anisotropy", [&] { return anisotropy(drift); });
  report(7, "outlier ratio vs speed", [&] { return outlier_trend(sideways_speeds.value(), arvr_speeds.value()); });
  report(8, "lifetime ordering",
         [&] { return lifetime_ordering({&drift.forward, &fixating.value(), &forwards.value(), &arvr.value()}); });
  report(9, "RANSAC gate", ransac_gate_criterion);
  report(10, "keyframe-cloud association", cloud_association);
  report(11, "determinism", cli_determinism);
  report(12, "percentile rejection", percentile_rejection);

  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failures ? 1 : 0;
}

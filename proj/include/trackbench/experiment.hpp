#pragma once

// Batch experiments: spec parsing and validation, the (motion, tracker,
// speed) sweep over scenes, cross-scene aggregation, and report emission.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "trackbench/errors.hpp"
#include "trackbench/groundtruth.hpp"
#include "trackbench/parallel.hpp"
#include "trackbench/sequence.hpp"
#include "trackbench/statistics.hpp"
#include "trackbench/svg.hpp"
#include "trackbench/synth.hpp"
#include "trackbench/tracker.hpp"

namespace trackbench {

enum class Protocol {
  timestep,  // keyframe-cloud anchoring, statistics per frame
  age,       // depth-at-birth anchoring, statistics per track age
};

inline std::string to_string(Protocol p) { return p == Protocol::timestep ? "timestep" : "age"; }

inline Protocol protocol_from_string(const std::string& s) {
  if (s == "timestep" || s == "keyframe") return Protocol::timestep;
  if (s == "age" || s == "depth") return Protocol::age;
  throw FormatError("unknown protocol '" + s + "'");
}

struct TrackerEntry {
  std::string label;
  bool oracle = false;
  TrackerConfig config;  // unused by the oracle
  OracleNoise noise;     // oracle only
  int grid_step = 20;    // oracle only: pixel spacing of planted points
};

struct ExperimentSpec {
  std::optional<GeneratorConfig> generator;
  std::vector<MotionKind> motions;  // generator only
  int scenes = 1;                   // generator only
  std::vector<std::string> datasets;
  Protocol protocol = Protocol::age;
  std::vector<TrackerEntry> trackers;
  std::vector<int> speeds{1};
  double percentile = 90.0;
  int min_count = kDefaultMinCount;
  std::uint64_t seed = 0;
  std::string output;
};

// ---------------------------------------------------------------- spec json

inline TrackerConfig tracker_config_from_json(const nlohmann::json& j, TrackerConfig c = {}) {
  c.kind = tracker_kind_from_string(j.at("kind").get<std::string>());
  c.min_features = j.value("min_features", c.min_features);
  c.max_features = j.value("max_features", c.max_features);
  c.detector_threshold = j.value("detector_threshold", c.detector_threshold);
  c.nms_radius = j.value("nms_radius", c.nms_radius);
  c.exclusion_radius = j.value("exclusion_radius", c.exclusion_radius);
  c.pyramid_levels = j.value("pyramid_levels", c.pyramid_levels);
  c.window_radius = j.value("window_radius", c.window_radius);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.min_eigen_threshold = j.value("min_eigen_threshold", c.min_eigen_threshold);
  c.max_residual = j.value("max_residual", c.max_residual);
  c.match_threshold = j.value("match_threshold", c.match_threshold);
  c.ransac_p = j.value("ransac_p", c.ransac_p);
  c.ransac_threshold = j.value("ransac_threshold", c.ransac_threshold);
  c.ransac_max_iterations = j.value("ransac_max_iterations", c.ransac_max_iterations);
  c.validate();
  return c;
}

inline nlohmann::json tracker_config_to_json(const TrackerConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"min_features", c.min_features},
          {"max_features", c.max_features},
          {"detector_threshold", c.detector_threshold},
          {"nms_radius", c.nms_radius},
          {"exclusion_radius", c.exclusion_radius},
          {"pyramid_levels", c.pyramid_levels},
          {"window_radius", c.window_radius},
          {"max_iterations", c.max_iterations},
          {"epsilon", c.epsilon},
          {"min_eigen_threshold", c.min_eigen_threshold},
          {"max_residual", c.max_residual},
          {"match_threshold", c.match_threshold},
          {"ransac_p", c.ransac_p},
          {"ransac_threshold", c.ransac_threshold},
          {"ransac_max_iterations", c.ransac_max_iterations}};
}

inline nlohmann::json tracker_entry_to_json(const TrackerEntry& e) {
  if (e.oracle)
    return {{"kind", "oracle"}, {"label", e.label}, {"noise", oracle_noise_to_json(e.noise)}, {"grid_step", e.grid_step}};
  nlohmann::json j = tracker_config_to_json(e.config);
  j["label"] = e.label;
  return j;
}

inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
  nlohmann::json input;
  if (s.generator) {
    input["generator"] = generator_config_to_json(*s.generator);
    input["scenes"] = s.scenes;
    std::vector<std::string> motions;
    for (MotionKind m : s.motions) motions.push_back(to_string(m));
    input["motions"] = motions;
  } else {
    input["datasets"] = s.datasets;
  }
  nlohmann::json trackers = nlohmann::json::array();
  for (const auto& t : s.trackers) trackers.push_back(tracker_entry_to_json(t));
  return {{"input", input},         {"protocol", to_string(s.protocol)}, {"trackers", trackers},
          {"speeds", s.speeds},     {"percentile", s.percentile},        {"min_count", s.min_count},
          {"seed", s.seed},         {"output", s.output}};
}

namespace detail {

inline bool has_depth_everywhere(const std::filesystem::path& dir) {
  std::ifstream in(dir / "poses.csv");
  std::string line;
  int n = 0;
  while (std::getline(in, line))
    if (!line.empty() && line != "\r" && detail::parse_double(detail::split(line)[0])) ++n;
  if (n == 0) return false;
  for (int i = 0; i < n; ++i)
    if (!std::filesystem::exists(dir / "depth" / frame_name(i, "pfm"))) return false;
  return true;
}

inline int lcm_of(const std::vector<int>& v) {
  int l = 1;
  for (int x : v) l = std::lcm(l, x);
  return l;
}

}  // namespace detail

/// Parses and validates a spec; fills defaults. Ground-truth sources must
/// match the protocol: keyframe clouds for timestep mode, per-frame depth for
/// age mode.
inline ExperimentSpec validate_spec(const nlohmann::json& j) {
  ExperimentSpec s;
  try {
    if (!j.is_object()) throw FormatError("experiment spec must be a JSON object");
    const nlohmann::json& input = j.at("input");
    if (input.contains("generator") == input.contains("datasets"))
      throw FormatError("input needs exactly one of 'generator' or 'datasets'");
    s.protocol = protocol_from_string(j.value("protocol", std::string("age")));
    if (j.contains("speeds")) s.speeds = j.at("speeds").get<std::vector<int>>();
    s.percentile = j.value("percentile", s.percentile);
    s.min_count = j.value("min_count", s.min_count);
    s.seed = j.value("seed", s.seed);
    s.output = j.value("output", std::string());

    if (input.contains("generator")) {
      s.generator = generator_config_from_json(input.at("generator"));
      s.scenes = input.value("scenes", 1);
      if (input.contains("motions"))
        for (const auto& m : input.at("motions")) s.motions.push_back(motion_from_string(m.get<std::string>()));
      if (s.motions.empty()) s.motions.push_back(s.generator->trajectory.motion);
    } else {
      s.datasets = input.at("datasets").get<std::vector<std::string>>();
    }

    if (!j.contains("trackers") || !j.at("trackers").is_array() || j.at("trackers").empty())
      throw FormatError("'trackers' must be a non-empty array");
    for (const auto& t : j.at("trackers")) {
      TrackerEntry e;
      const std::string kind = t.at("kind").get<std::string>();
      if (kind == "oracle") {
        e.oracle = true;
        e.noise = t.contains("noise") ? oracle_noise_from_json(t.at("noise"), s.seed) : OracleNoise{};
        if (!t.contains("noise")) e.noise.seed = s.seed;
        e.grid_step = t.value("grid_step", e.grid_step);
        if (e.grid_step < 1) throw InvalidSpec("grid_step must be positive");
      } else {
        e.config = tracker_config_from_json(t);
      }
      e.label = t.value("label", kind == "oracle" ? std::string("oracle") : to_string(e.config.kind));
      s.trackers.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("experiment spec: ") + e.what());
  }

  static const std::regex label_re("[A-Za-z0-9_.-]+");
  for (std::size_t i = 0; i < s.trackers.size(); ++i) {
    if (!std::regex_match(s.trackers[i].label, label_re))
      throw InvalidSpec("tracker label '" + s.trackers[i].label + "' must match [A-Za-z0-9_.-]+");
    for (std::size_t k = 0; k < i; ++k)
      if (s.trackers[k].label == s.trackers[i].label) throw InvalidSpec("duplicate tracker label '" + s.trackers[i].label + "'");
  }
  if (s.speeds.empty()) throw InvalidSpec("speeds must not be empty");
  for (int v : s.speeds) (void)SpeedFactor(v);
  std::sort(s.speeds.begin(), s.speeds.end());
  s.speeds.erase(std::unique(s.speeds.begin(), s.speeds.end()), s.speeds.end());
  if (!(s.percentile > 0 && s.percentile <= 100)) throw InvalidSpec("percentile must lie in (0, 100]");
  if (s.min_count < 1) throw InvalidSpec("min_count must be at least 1");

  if (s.generator) {
    if (s.scenes < 1) throw InvalidSpec("scenes must be at least 1");
    GeneratorConfig& g = *s.generator;
    if (s.protocol == Protocol::timestep) {
      const int l = detail::lcm_of(s.speeds);
      if (!g.keyframe) {
        g.keyframe = ((g.trajectory.frames - 1) / 2) / l * l;
      } else if (*g.keyframe % l != 0) {
        throw KeyframeSkipped("keyframe " + std::to_string(*g.keyframe) + " is not kept by every speed");
      }
    }
  } else {
    if (s.datasets.empty()) throw InvalidSpec("datasets must not be empty");
    for (const auto& d : s.datasets) {
      const std::filesystem::path dir(d);
      if (!std::filesystem::is_directory(dir)) throw MissingStream("dataset " + d + " is not a directory");
      if (s.protocol == Protocol::timestep && !std::filesystem::exists(dir / "cloud.csv"))
        throw ProtocolMismatch("dataset " + d + " has no keyframe cloud; the timestep protocol needs one");
      if (s.protocol == Protocol::age && !detail::has_depth_everywhere(dir))
        throw ProtocolMismatch("dataset " + d + " lacks per-frame depth; the age protocol needs it");
    }
  }
  return s;
}

inline ExperimentSpec validate_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingStream("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return validate_spec(j);
}

/// 64-bit FNV-1a of the canonical spec (output location excluded), as hex.
inline std::string config_hash(const ExperimentSpec& s) {
  nlohmann::json j = spec_to_json(s);
  j.erase("output");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream o;
  o << std::hex;
  o.width(16);
  o.fill('0');
  o << h;
  return o.str();
}

// ---------------------------------------------------------------- running

struct CellReport {
  std::string motion;
  std::string tracker;
  std::string kind;
  int speed = 1;
  double dt = 0.0;  // seconds per timestep after subsampling
  std::vector<std::string> scenes;
  std::size_t tracks = 0;
  std::size_t anchored = 0;
  std::size_t retained = 0;
  std::vector<TimestepStats> timestep;
  std::vector<AgeStats> age;
  std::vector<FrameAttribution> outliers;  // summed over scenes per frame
  std::optional<double> mean_outlier_ratio;
  LifetimeHistogram lifetimes;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::string config_hash;
  std::vector<CellReport> cells;
};

namespace detail {

struct SceneResult {
  std::string scene;
  double dt = 0.0;
  std::vector<ErrorSeries> series;
  std::vector<FrameAttribution> attributions;
  LifetimeHistogram lifetimes;
  std::size_t tracks = 0, anchored = 0, retained = 0;
};

struct SceneSource {
  std::string label;
  std::uint64_t index = 0;
  std::optional<GeneratorConfig> generator;
  std::string dataset;
};

inline std::vector<SceneSource> scene_sources(const ExperimentSpec& spec) {
  std::vector<SceneSource> out;
  if (spec.generator) {
    for (MotionKind m : spec.motions)
      for (int i = 0; i < spec.scenes; ++i) {
        GeneratorConfig g = *spec.generator;
        g.trajectory.motion = m;
        g.scene_seed = spec.generator->scene_seed + static_cast<std::uint64_t>(i);
        g.seed = spec.generator->seed + static_cast<std::uint64_t>(i);
        out.push_back({"synth-" + std::to_string(g.scene_seed), out.size(), g, {}});
      }
  } else {
    for (const auto& d : spec.datasets) out.push_back({d, out.size(), std::nullopt, d});
  }
  return out;
}

template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(context + ": " + e.what());
  }
}

inline SceneResult run_cell(const ExperimentSpec& spec, const SequenceBundle& seq, const SceneSource& src,
                            std::size_t tracker_index, int speed) {
  const TrackerEntry& entry = spec.trackers[tracker_index];
  const SequenceBundle sub = speed == 1 ? seq : apply_speed(seq, SpeedFactor(speed));
  const std::uint64_t cell_seed = hash_combine(
      hash_combine(hash_combine(spec.seed, src.index), tracker_index), static_cast<std::uint64_t>(speed));

  SceneResult r;
  r.scene = sub.metadata.scene_id.empty() ? src.label : sub.metadata.scene_id;
  if (sub.size() >= 2) r.dt = sub.frames[1].timestamp - sub.frames[0].timestamp;

  std::vector<FeatureTrack> tracks;
  if (entry.oracle) {
    OracleNoise noise = entry.noise;
    noise.seed = hash_combine(noise.seed, cell_seed);
    tracks = oracle_tracker(sub, plant_grid_points(sub, entry.grid_step), noise);
  } else {
    TrackingRun run = run_tracker(sub, entry.config, cell_seed);
    tracks = std::move(run.tracks);
    r.attributions = std::move(run.attributions);
  }
  r.tracks = tracks.size();
  r.lifetimes = lifetimes(tracks);

  auto gts = spec.protocol == Protocol::age ? ground_truth_from_depth(tracks, sub) : ground_truth_from_cloud(tracks, sub);
  r.anchored = gts.size();
  gts = percentile_reject(std::move(gts), spec.percentile);
  r.retained = gts.size();
  r.series = error_series(gts, r.scene);
  return r;
}

}  // namespace detail

/// Runs every (scene, tracker, speed) cell and aggregates across scenes per
/// (motion, tracker, speed). Scenes are processed one at a time; the cells of
/// a scene share its frames and run on up to `workers` threads.
inline ExperimentReport run_experiment(const ExperimentSpec& spec, int workers = 1) {
  using Key = std::tuple<std::string, std::size_t, int>;  // motion, tracker index, speed
  std::map<Key, std::vector<detail::SceneResult>> results;

  for (const auto& src : detail::scene_sources(spec)) {
    const SequenceBundle seq = detail::with_context("scene " + src.label, [&] {
      SequenceBundle s = src.generator ? generate_sequence(*src.generator, workers) : load_sequence(src.dataset);
      if (s.metadata.motion.empty()) s.metadata.motion = "unknown";
      return s;
    });
    struct Cell {
      std::size_t tracker;
      int speed;
    };
    std::vector<Cell> cells;
    for (std::size_t t = 0; t < spec.trackers.size(); ++t)
      for (int v : spec.speeds) cells.push_back({t, v});
    std::vector<detail::SceneResult> out(cells.size());
    parallel_for(cells.size(), workers, [&](std::size_t i) {
      const Cell& c = cells[i];
      out[i] = detail::with_context(
          "scene " + src.label + ", tracker " + spec.trackers[c.tracker].label + ", speed " + std::to_string(c.speed),
          [&] { return detail::run_cell(spec, seq, src, c.tracker, c.speed); });
    });
    for (std::size_t i = 0; i < cells.size(); ++i)
      results[{seq.metadata.motion, cells[i].tracker, cells[i].speed}].push_back(std::move(out[i]));
  }

  ExperimentReport report;
  report.spec = spec;
  report.config_hash = config_hash(spec);
  for (auto& [key, scenes] : results) {
    std::sort(scenes.begin(), scenes.end(), [](const auto& a, const auto& b) { return a.scene < b.scene; });
    CellReport c;
    c.motion = std::get<0>(key);
    const TrackerEntry& entry = spec.trackers[std::get<1>(key)];
    c.tracker = entry.label;
    c.kind = entry.oracle ? "oracle" : to_string(entry.config.kind);
    c.speed = std::get<2>(key);
    std::vector<ErrorSeries> series;
    std::map<int, FrameAttribution> per_frame;
    double ratio_sum = 0.0;
    std::size_t ratio_n = 0;
    for (const auto& r : scenes) {
      c.scenes.push_back(r.scene);
      c.dt = r.dt;
      c.tracks += r.tracks;
      c.anchored += r.anchored;
      c.retained += r.retained;
      series.insert(series.end(), r.series.begin(), r.series.end());
      c.lifetimes.merge(r.lifetimes);
      for (const auto& a : r.attributions) {
        FrameAttribution& acc = per_frame.try_emplace(a.frame, FrameAttribution{a.frame, 0, 0, 0, 0}).first->second;
        acc.f0 += a.f0;
        acc.f1 += a.f1;
        acc.f2 += a.f2;
        acc.F_prev += a.F_prev;
        if (const auto q = a.outlier_ratio()) {
          ratio_sum += *q;
          ++ratio_n;
        }
      }
    }
    if (spec.protocol == Protocol::age)
      c.age = age_stats(series, spec.min_count);
    else
      c.timestep = timestep_stats(series, spec.min_count);
    for (const auto& [f, a] : per_frame) c.outliers.push_back(a);
    if (ratio_n) c.mean_outlier_ratio = ratio_sum / static_cast<double>(ratio_n);
    report.cells.push_back(std::move(c));
  }
  return report;
}

// ---------------------------------------------------------------- output

namespace detail {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json moments_to_json(int index, const MomentStats& m) {
  nlohmann::json j = {{"index", index},
                      {"count", m.count},
                      {"mu", {m.mean.x(), m.mean.y()}},
                      {"kappa", {m.mean_abs.x(), m.mean_abs.y()}},
                      {"included", m.included}};
  if (m.second_moment) {
    const Mat2& S = *m.second_moment;
    j["sigma"] = {{S(0, 0), S(0, 1)}, {S(1, 0), S(1, 1)}};
  } else {
    j["sigma"] = nullptr;
  }
  return j;
}

inline void write_stats_csv(std::ostream& out, const char* index_name, const nlohmann::json& stats) {
  out << index_name << ",count,mu_u,mu_v,kappa_u,kappa_v,sig_uu,sig_uv,sig_vv,included\n";
  for (const auto& s : stats) {
    out << s.at("index").get<int>() << ',' << s.at("count").get<int>();
    for (const char* key : {"mu", "kappa"})
      for (int i = 0; i < 2; ++i) out << ',' << fmt_double(s.at(key).at(i).get<double>());
    if (s.at("sigma").is_null()) {
      out << ",nan,nan,nan";
    } else {
      const auto& S = s.at("sigma");
      out << ',' << fmt_double(S[0][0].get<double>()) << ',' << fmt_double(S[0][1].get<double>()) << ','
          << fmt_double(S[1][1].get<double>());
    }
    out << ',' << (s.at("included").get<bool>() ? 1 : 0) << '\n';
  }
}

inline std::filesystem::path cell_dir(const nlohmann::json& cell) {
  return std::filesystem::path(cell.at("motion").get<std::string>()) / cell.at("tracker").get<std::string>() /
         ("speed_" + std::to_string(cell.at("speed").get<int>()));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace detail

inline nlohmann::json report_to_json(const ExperimentReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& s : c.timestep) stats.push_back(detail::moments_to_json(s.t, s.m));
    for (const auto& s : c.age) stats.push_back(detail::moments_to_json(s.k, s.m));
    nlohmann::json outliers = nlohmann::json::array();
    for (const auto& a : c.outliers) {
      const auto q = a.outlier_ratio();
      outliers.push_back({{"frame", a.frame}, {"f0", a.f0}, {"f1", a.f1}, {"f2", a.f2}, {"F_prev", a.F_prev},
                          {"ratio", q ? nlohmann::json(*q) : nlohmann::json(nullptr)}});
    }
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& [l, n] : c.lifetimes.counts) hist.push_back({l, n});
    cells.push_back({{"motion", c.motion},
                     {"tracker", c.tracker},
                     {"kind", c.kind},
                     {"speed", c.speed},
                     {"dt", detail::finite_or_null(c.dt)},
                     {"scenes", c.scenes},
                     {"tracks", c.tracks},
                     {"anchored_tracks", c.anchored},
                     {"retained_tracks", c.retained},
                     {"stats", stats},
                     {"outliers", outliers},
                     {"mean_outlier_ratio", c.mean_outlier_ratio ? nlohmann::json(*c.mean_outlier_ratio) : nlohmann::json(nullptr)},
                     {"lifetimes", hist},
                     {"median_lifetime", c.lifetimes.median()}});
  }
  nlohmann::json spec = spec_to_json(r.spec);
  spec.erase("output");
  return {{"config_hash", r.config_hash},
          {"protocol", to_string(r.spec.protocol)},
          {"index", r.spec.protocol == Protocol::age ? "k" : "t"},
          {"seed", r.spec.seed},
          {"percentile", r.spec.percentile},
          {"min_count", r.spec.min_count},
          {"spec", spec},
          {"cells", cells}};
}

/// Line plots (statistic vs. index, one line per speed) and box plots
/// (per-speed distribution over included indices) for every motion and
/// tracker, plus the CSVs holding exactly the plotted numbers.
inline void write_plots(const nlohmann::json& report, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  try {
    const bool age = report.at("protocol").get<std::string>() == "age";
    const std::string idx = age ? "k" : "t";
    struct Stat {
      const char* name;
      const char* symbol;
      const char* key;
      int i, j;  // j < 0: vector component
    };
    const Stat stats[] = {{"mu_u", age ? "ν_u" : "μ_u", "mu", 0, -1},          {"mu_v", age ? "ν_v" : "μ_v", "mu", 1, -1},
                          {"kappa_u", age ? "η_u" : "κ_u", "kappa", 0, -1},    {"kappa_v", age ? "η_v" : "κ_v", "kappa", 1, -1},
                          {"sig_uu", age ? "Φ_uu" : "Σ_uu", "sigma", 0, 0}, {"sig_vv", age ? "Φ_vv" : "Σ_vv", "sigma", 1, 1}};

    std::map<std::pair<std::string, std::string>, std::vector<const nlohmann::json*>> groups;
    for (const auto& c : report.at("cells"))
      groups[{c.at("motion").get<std::string>(), c.at("tracker").get<std::string>()}].push_back(&c);

    std::ostringstream lines, boxes;
    lines << "motion,tracker,speed," << idx << ",stat,value\n";
    boxes << "motion,tracker,speed,stat,n,median,mean,q1,q3,whisker_lo,whisker_hi\n";
    for (const auto& [key, cells] : groups) {
      for (const Stat& st : stats) {
        std::vector<svg::Series> series;
        std::vector<svg::BoxItem> items;
        for (const nlohmann::json* c : cells) {
          const int speed = c->at("speed").get<int>();
          svg::Series s;
          s.name = "speed " + std::to_string(speed);
          for (const auto& row : c->at("stats")) {
            if (!row.at("included").get<bool>()) continue;
            const auto& v = row.at(st.key);
            if (v.is_null()) continue;
            const double y = st.j < 0 ? v.at(st.i).get<double>() : v.at(st.i).at(st.j).get<double>();
            s.x.push_back(row.at("index").get<int>());
            s.y.push_back(y);
            lines << key.first << ',' << key.second << ',' << speed << ',' << row.at("index").get<int>() << ','
                  << st.name << ',' << detail::fmt_double(y) << '\n';
          }
          const BoxSummary b = summarize_box(s.y);
          boxes << key.first << ',' << key.second << ',' << speed << ',' << st.name << ',' << b.n;
          for (double v : {b.median, b.mean, b.q1, b.q3, b.whisker_lo, b.whisker_hi}) boxes << ',' << detail::fmt_double(v);
          boxes << '\n';
          items.push_back({"speed " + std::to_string(speed), b});
          series.push_back(std::move(s));
        }
        const std::string stem = key.first + "_" + key.second + "_" + st.name;
        const std::string title = key.first + " / " + key.second + ": " + st.symbol + "(" + idx + ")";
        detail::write_text(dir / "plots" / (stem + "_line.svg"),
                           svg::line_plot(title, age ? "track age k [frames]" : "frame t", std::string(st.symbol) + " [px]", series));
        detail::write_text(dir / "plots" / (stem + "_box.svg"),
                           svg::box_plot(title, std::string(st.symbol) + " [px]", items));
      }
    }
    detail::write_text(dir / "plots" / "plot_data.csv", lines.str());
    detail::write_text(dir / "plots" / "box_stats.csv", boxes.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

/// report.json, per-cell CSVs and plots under `dir`.
inline void write_experiment(const ExperimentReport& r, const std::filesystem::path& dir) {
  const nlohmann::json j = report_to_json(r);
  detail::write_text(dir / "report.json", j.dump(2) + "\n");
  const bool age = r.spec.protocol == Protocol::age;
  for (const auto& c : j.at("cells")) {
    const auto cd = dir / detail::cell_dir(c);
    std::ostringstream stats, outliers, lifes;
    detail::write_stats_csv(stats, age ? "k" : "t", c.at("stats"));
    detail::write_text(cd / (age ? "age_stats.csv" : "timestep_stats.csv"), stats.str());
    outliers << "frame,f0,f1,f2,F_prev,ratio\n";
    for (const auto& a : c.at("outliers"))
      outliers << a.at("frame").get<int>() << ',' << a.at("f0").get<int>() << ',' << a.at("f1").get<int>() << ','
               << a.at("f2").get<int>() << ',' << a.at("F_prev").get<int>() << ','
               << (a.at("ratio").is_null() ? std::string("nan") : detail::fmt_double(a.at("ratio").get<double>())) << '\n';
    detail::write_text(cd / "outliers.csv", outliers.str());
    lifes << "lifetime,count\n";
    for (const auto& h : c.at("lifetimes")) lifes << h.at(0).get<int>() << ',' << h.at(1).get<std::int64_t>() << '\n';
    detail::write_text(cd / "lifetimes.csv", lifes.str());
  }
  write_plots(j, dir);
}

}  // namespace trackbench

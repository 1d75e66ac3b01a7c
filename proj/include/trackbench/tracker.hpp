#pragma once

// Track lifecycle: detection, frame-to-frame continuation with either
// tracker family, RANSAC gating of continuations, and refilling the feature
// band. Also the track dump CSV.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <vector>

#include "trackbench/descriptor.hpp"
#include "trackbench/detector.hpp"
#include "trackbench/lucas_kanade.hpp"
#include "trackbench/ransac.hpp"
#include "trackbench/sequence.hpp"
#include "trackbench/tracker_types.hpp"

namespace trackbench {

/// Descriptor-correspondence continuation: fresh corners in `next` are
/// described and matched (mutual nearest, thresholded) against each track's
/// birth descriptor. Unmatched tracks are lost.
inline std::vector<std::optional<Pixel>> track_correspondence(const Frame& next,
                                                              std::span<const FeatureTrack> tracks,
                                                              const TrackerConfig& cfg) {
  const GrayImage& img = *next.image;
  const int border = static_cast<int>(std::ceil(kDescriptorReach)) + 1;
  std::vector<Corner> corners = detect_segment_test(img, cfg.detector_threshold, cfg.nms_radius, border);
  std::vector<Pixel> cand_px;
  std::vector<Descriptor> cand_desc;
  cand_px.reserve(corners.size());
  cand_desc.reserve(corners.size());
  for (const Corner& c : corners) {
    const Pixel p{static_cast<double>(c.x), static_cast<double>(c.y)};
    if (!descriptor_fits(img, p)) continue;
    cand_px.push_back(p);
    cand_desc.push_back(compute_descriptor(img, p));
  }
  std::vector<Descriptor> queries;
  queries.reserve(tracks.size());
  for (const auto& t : tracks) queries.push_back(t.descriptor);
  const auto match = match_mutual_nearest(queries, cand_desc, cfg.match_threshold);
  std::vector<std::optional<Pixel>> out(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i)
    if (match[i]) out[i] = cand_px[static_cast<std::size_t>(*match[i])];
  return out;
}

/// Per-sequence tracker state. step() must be called once per frame, in order.
class FeatureTracker {
 public:
  FeatureTracker(TrackerConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) { cfg_.validate(); }

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<FeatureTrack>& live() const { return live_; }
  const std::vector<FrameAttribution>& attributions() const { return attributions_; }
  bool initialized() const { return initialized_; }

  /// Finished and live tracks, ordered by id.
  std::vector<FeatureTrack> tracks() const {
    std::vector<FeatureTrack> all = finished_;
    all.insert(all.end(), live_.begin(), live_.end());
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return all;
  }

  FrameAttribution initialize(const Frame& first) {
    live_.clear();
    finished_.clear();
    attributions_.clear();
    initialized_ = true;
    frame_ = first.index;
    prepare(first);
    FrameAttribution attr{first.index, 0, 0, 0, 0};
    attr.f2 = refill(first);
    attributions_.push_back(attr);
    return attr;
  }

  FrameAttribution step(const Frame& next) {
    if (!initialized_) return initialize(next);
    frame_ = next.index;
    FrameAttribution attr{next.index, 0, 0, 0, static_cast<int>(live_.size())};

    std::vector<Pixel> prev_px;
    prev_px.reserve(live_.size());
    for (const auto& t : live_) prev_px.push_back(t.last_pixel());

    std::vector<std::optional<Pixel>> moved;
    std::vector<PyramidLevel> next_pyr;
    if (cfg_.kind == TrackerKind::differential) {
      next_pyr = build_pyramid(*next.image, cfg_.pyramid_levels);
      moved = track_differential(prev_pyr_, next_pyr, prev_px, cfg_);
    } else {
      moved = track_correspondence(next, live_, cfg_);
    }

    std::vector<std::size_t> continued;
    std::vector<Pixel> from, to;
    for (std::size_t i = 0; i < live_.size(); ++i) {
      if (moved[i] && std::isfinite(moved[i]->u) && std::isfinite(moved[i]->v)) {
        continued.push_back(i);
        from.push_back(prev_px[i]);
        to.push_back(*moved[i]);
      } else {
        live_[i].alive = false;
      }
    }
    const GateResult gate = ransac_gate(std::span<const Pixel>(from), std::span<const Pixel>(to), cfg_, rng_);
    for (std::size_t k = 0; k < continued.size(); ++k) {
      FeatureTrack& t = live_[continued[k]];
      if (gate.inlier[k]) {
        t.observations.push_back({next.index, to[k]});
        ++attr.f0;
      } else {
        t.rejected = Observation{next.index, to[k]};
        t.alive = false;
        ++attr.f1;
      }
    }
    std::vector<FeatureTrack> still_live;
    still_live.reserve(live_.size());
    for (auto& t : live_) (t.alive ? still_live : finished_).push_back(std::move(t));
    live_ = std::move(still_live);

    if (cfg_.kind == TrackerKind::differential) prev_pyr_ = std::move(next_pyr);
    attr.f2 = refill(next);
    attributions_.push_back(attr);
    return attr;
  }

  /// Ends every live track, e.g. at the end of a sequence.
  void finish() {
    for (auto& t : live_) finished_.push_back(std::move(t));
    live_.clear();
  }

 private:
  void prepare(const Frame& f) {
    if (cfg_.kind == TrackerKind::differential) prev_pyr_ = build_pyramid(*f.image, cfg_.pyramid_levels);
  }

  int border() const {
    return cfg_.kind == TrackerKind::differential ? cfg_.window_radius + 1
                                                  : static_cast<int>(std::ceil(kDescriptorReach)) + 1;
  }

  // Adds corners away from live tracks when the band has fallen below its minimum.
  int refill(const Frame& f) {
    if (static_cast<int>(live_.size()) >= cfg_.min_features) return 0;
    const GrayImage& img = *f.image;
    std::vector<Pixel> occupied;
    occupied.reserve(live_.size());
    for (const auto& t : live_) occupied.push_back(t.last_pixel());
    const GrayImage mask = make_occupancy_mask(img.width(), img.height(), occupied, cfg_.exclusion_radius);
    const auto corners = detect_corners(img, cfg_, &mask, static_cast<int>(live_.size()), border());
    int added = 0;
    for (const Pixel& p : corners) {
      FeatureTrack t;
      if (cfg_.kind == TrackerKind::correspondence) {
        if (!descriptor_fits(img, p)) continue;
        t.descriptor = compute_descriptor(img, p);
        if (is_zero_descriptor(t.descriptor)) continue;
      }
      t.id = next_id_++;
      t.birth_frame = f.index;
      t.observations.push_back({f.index, p});
      live_.push_back(std::move(t));
      ++added;
    }
    return added;
  }

  TrackerConfig cfg_;
  std::mt19937_64 rng_;
  bool initialized_ = false;
  int frame_ = 0;
  std::int64_t next_id_ = 0;
  std::vector<FeatureTrack> live_;
  std::vector<FeatureTrack> finished_;
  std::vector<FrameAttribution> attributions_;
  std::vector<PyramidLevel> prev_pyr_;
};

/// Advances the tracker by one frame (initializing on the first call).
inline FrameAttribution step_tracker(FeatureTracker& state, const Frame& next) { return state.step(next); }

struct TrackingRun {
  std::vector<FeatureTrack> tracks;
  std::vector<FrameAttribution> attributions;
};

inline TrackingRun run_tracker(const SequenceBundle& seq, const TrackerConfig& cfg, std::uint64_t seed) {
  FeatureTracker tracker(cfg, seed);
  for (const Frame& f : seq.frames) tracker.step(f);
  TrackingRun run;
  run.attributions = tracker.attributions();
  tracker.finish();
  run.tracks = tracker.tracks();
  return run;
}

// track_id,birth_frame,frame,u,v,ransac_outlier
inline void write_tracks_csv(std::ostream& out, std::span<const FeatureTrack> tracks) {
  out << "track_id,birth_frame,frame,u,v,ransac_outlier\n";
  for (const auto& t : tracks) {
    for (const auto& o : t.observations)
      out << t.id << ',' << t.birth_frame << ',' << o.frame << ',' << detail::fmt_double(o.pixel.u) << ','
          << detail::fmt_double(o.pixel.v) << ",0\n";
    if (t.rejected)
      out << t.id << ',' << t.birth_frame << ',' << t.rejected->frame << ',' << detail::fmt_double(t.rejected->pixel.u)
          << ',' << detail::fmt_double(t.rejected->pixel.v) << ",1\n";
  }
}

inline std::vector<FeatureTrack> read_tracks_csv(std::istream& in) {
  std::map<std::int64_t, FeatureTrack> by_id;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("track_id", 0) == 0)) continue;
    const auto tok = detail::split(line);
    if (tok.size() != 6) throw FormatError("tracks csv line " + std::to_string(lineno) + ": expected 6 fields");
    double v[6];
    for (int i = 0; i < 6; ++i) {
      const auto d = detail::parse_double(tok[i]);
      if (!d) throw FormatError("tracks csv line " + std::to_string(lineno) + ": bad number");
      v[i] = *d;
    }
    FeatureTrack& t = by_id[static_cast<std::int64_t>(v[0])];
    t.id = static_cast<std::int64_t>(v[0]);
    t.birth_frame = static_cast<int>(v[1]);
    const Observation o{static_cast<int>(v[2]), {v[3], v[4]}};
    if (v[5] != 0) {
      t.rejected = o;
      t.alive = false;
    } else {
      if (o.frame != t.birth_frame + t.lifetime())
        throw FormatError("tracks csv line " + std::to_string(lineno) + ": observations must be consecutive");
      t.observations.push_back(o);
    }
  }
  std::vector<FeatureTrack> out;
  for (auto& [id, t] : by_id) out.push_back(std::move(t));
  return out;
}

}  // namespace trackbench

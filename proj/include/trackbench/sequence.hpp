#pragma once

// Image sequences with poses, depth and keyframe point clouds: in-memory
// representation, the on-disk directory layout, and frame skipping.
//
// Directory layout:
//   intrinsics.json       {fx, fy, cx, cy, width, height}
//   frames/NNNNNN.pgm     8-bit binary PGM
//   depth/NNNNNN.pfm      optional single-channel PFM, little-endian, meters
//   poses.csv             index,timestamp,tx,ty,tz,qw,qx,qy,qz  (camera-to-spatial)
//   cloud.csv             optional; "keyframe,<index>" then x,y,z per point
//   metadata.json         optional; {motion, scene_id, curated}

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trackbench/errors.hpp"
#include "trackbench/geometry.hpp"
#include "trackbench/image.hpp"

namespace trackbench {

struct Frame {
  int index = 0;
  double timestamp = 0.0;
  std::shared_ptr<const GrayImage> image;
  std::shared_ptr<const DepthMap> depth;  // null when the frame has no depth

  bool has_depth() const { return depth != nullptr; }
};

struct KeyframeCloud {
  int frame = 0;  // frame index the cloud is expressed in
  std::vector<Point3> points;
};

struct SequenceMetadata {
  std::string motion;
  std::string scene_id;
  bool curated = false;           // still frames already removed by the dataset curator
  std::vector<int> original_indices;  // original index of each retained frame
  int speed = 1;
};

struct SequenceBundle {
  std::vector<Frame> frames;
  CameraIntrinsics intrinsics;
  std::vector<RigidPose> poses;
  std::optional<KeyframeCloud> keyframe_cloud;
  SequenceMetadata metadata;

  std::size_t size() const { return frames.size(); }

  bool has_depth_everywhere() const {
    if (frames.empty()) return false;
    for (const auto& f : frames)
      if (!f.has_depth()) return false;
    return true;
  }
};

/// Integer frame-skip rate. 1 is nominal speed.
class SpeedFactor {
 public:
  explicit SpeedFactor(int value) : value_(value) {
    if (value < 1) throw InvalidSpec("speed factor must be a positive integer, got " + std::to_string(value));
  }
  int value() const { return value_; }

 private:
  int value_;
};

/// Checks every bundle invariant; throws FormatError / DimensionMismatch / MissingStream.
inline void validate_sequence(const SequenceBundle& seq, bool require_ground_truth_source = true) {
  if (!seq.intrinsics.valid()) throw FormatError("invalid camera intrinsics");
  if (seq.frames.empty()) throw FormatError("sequence has no frames");
  if (seq.poses.size() != seq.frames.size())
    throw MissingStream("expected " + std::to_string(seq.frames.size()) + " poses, got " +
                        std::to_string(seq.poses.size()));
  const int w = seq.intrinsics.width, h = seq.intrinsics.height;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const Frame& f = seq.frames[i];
    if (!f.image) throw MissingStream("frame " + std::to_string(i) + " has no image");
    if (!f.image->same_size(w, h))
      throw DimensionMismatch("frame " + std::to_string(i) + " image is " +
                              std::to_string(f.image->width()) + "x" + std::to_string(f.image->height()) +
                              ", intrinsics say " + std::to_string(w) + "x" + std::to_string(h));
    if (f.depth && !f.depth->same_size(w, h))
      throw DimensionMismatch("frame " + std::to_string(i) + " depth is " +
                              std::to_string(f.depth->width()) + "x" + std::to_string(f.depth->height()) +
                              ", images are " + std::to_string(w) + "x" + std::to_string(h));
    if (i > 0 && !(f.timestamp > seq.frames[i - 1].timestamp))
      throw FormatError("timestamps not strictly increasing at frame " + std::to_string(i));
  }
  if (seq.keyframe_cloud &&
      (seq.keyframe_cloud->frame < 0 || seq.keyframe_cloud->frame >= static_cast<int>(seq.size())))
    throw FormatError("keyframe index " + std::to_string(seq.keyframe_cloud->frame) + " out of range");
  if (require_ground_truth_source && !seq.has_depth_everywhere() && !seq.keyframe_cloud)
    throw MissingStream("sequence has neither per-frame depth nor a keyframe cloud");
}

namespace detail {

inline std::string frame_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.%s", index, ext);
  return buf;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    std::string_view tok = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
    out.push_back(tok);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string read_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

inline int parse_positive_int(const std::string& tok, const std::string& what) {
  int v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || v <= 0) throw FormatError("bad " + what + " '" + tok + "'");
  return v;
}

}  // namespace detail

inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingStream("cannot open " + path.string());
  if (detail::read_token(in) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  const int w = detail::parse_positive_int(detail::read_token(in), "PGM width");
  const int h = detail::parse_positive_int(detail::read_token(in), "PGM height");
  const int maxval = detail::parse_positive_int(detail::read_token(in), "PGM maxval");
  if (maxval > 255) throw FormatError(path.string() + ": only 8-bit PGM is supported");
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.values().size()));
  if (in.gcount() != static_cast<std::streamsize>(img.values().size()))
    throw FormatError(path.string() + ": truncated pixel data");
  return img;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.values().size()));
}

// PFM stores rows bottom-to-top; a negative scale marks little-endian data.
inline DepthMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingStream("cannot open " + path.string());
  if (detail::read_token(in) != "Pf") throw FormatError(path.string() + ": not a grayscale PFM (Pf)");
  const int w = detail::parse_positive_int(detail::read_token(in), "PFM width");
  const int h = detail::parse_positive_int(detail::read_token(in), "PFM height");
  const auto scale = detail::parse_double(detail::read_token(in));
  if (!scale || *scale == 0.0) throw FormatError(path.string() + ": bad PFM scale");
  if (*scale > 0) throw FormatError(path.string() + ": big-endian PFM is not supported");
  DepthMap depth(w, h);
  std::vector<float> row(static_cast<std::size_t>(w));
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(w * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(w * sizeof(float)))
      throw FormatError(path.string() + ": truncated PFM data");
    std::memcpy(&depth(0, y), row.data(), w * sizeof(float));
  }
  return depth;
}

inline void write_pfm(const std::filesystem::path& path, const DepthMap& depth) {
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "Pf\n" << depth.width() << ' ' << depth.height() << "\n-1.0\n";
  for (int y = depth.height() - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(&depth(0, y)), static_cast<std::streamsize>(depth.width() * sizeof(float)));
}

inline nlohmann::json intrinsics_to_json(const CameraIntrinsics& K) {
  return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

inline CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  CameraIntrinsics K;
  try {
    K.fx = j.at("fx").get<double>();
    K.fy = j.at("fy").get<double>();
    K.cx = j.at("cx").get<double>();
    K.cy = j.at("cy").get<double>();
    K.width = j.at("width").get<int>();
    K.height = j.at("height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("intrinsics: ") + e.what());
  }
  if (!K.valid()) throw FormatError("intrinsics violate fx,fy > 0 and 0 <= c < size");
  return K;
}

inline SequenceBundle load_sequence(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw MissingStream(dir.string() + " is not a directory");
  SequenceBundle seq;

  const fs::path intr = dir / "intrinsics.json";
  if (!fs::exists(intr)) throw MissingStream("missing " + intr.string());
  {
    std::ifstream in(intr);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(intr.string() + ": " + e.what());
    }
    seq.intrinsics = intrinsics_from_json(j);
  }

  const fs::path poses = dir / "poses.csv";
  if (!fs::exists(poses)) throw MissingStream("missing " + poses.string());
  {
    std::ifstream in(poses);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      const auto tok = detail::split(line);
      if (lineno == 1 && !detail::parse_double(tok[0])) continue;  // header
      if (tok.size() != 9) throw FormatError(poses.string() + ":" + std::to_string(lineno) + ": expected 9 fields");
      double v[9];
      for (int i = 0; i < 9; ++i) {
        const auto d = detail::parse_double(tok[i]);
        if (!d || !std::isfinite(*d))
          throw FormatError(poses.string() + ":" + std::to_string(lineno) + ": bad number '" + std::string(tok[i]) + "'");
        v[i] = *d;
      }
      const int index = static_cast<int>(v[0]);
      if (index != static_cast<int>(seq.frames.size()))
        throw FormatError(poses.string() + ":" + std::to_string(lineno) + ": frame indices must be 0,1,2,...");
      Frame f;
      f.index = index;
      f.timestamp = v[1];
      seq.frames.push_back(std::move(f));
      seq.poses.emplace_back(Eigen::Quaterniond(v[5], v[6], v[7], v[8]), Eigen::Vector3d(v[2], v[3], v[4]));
    }
  }
  if (seq.frames.empty()) throw MissingStream(poses.string() + " lists no frames");

  for (auto& f : seq.frames) {
    const fs::path img = dir / "frames" / detail::frame_name(f.index, "pgm");
    if (!fs::exists(img)) throw MissingStream("missing " + img.string());
    f.image = std::make_shared<const GrayImage>(read_pgm(img));
    const fs::path dep = dir / "depth" / detail::frame_name(f.index, "pfm");
    if (fs::exists(dep)) f.depth = std::make_shared<const DepthMap>(read_pfm(dep));
  }

  const fs::path cloud = dir / "cloud.csv";
  if (fs::exists(cloud)) {
    std::ifstream in(cloud);
    std::string line;
    KeyframeCloud kc;
    if (!std::getline(in, line)) throw FormatError(cloud.string() + ": empty");
    const auto head = detail::split(line);
    const auto kidx = head.size() == 2 ? detail::parse_double(head[1]) : std::nullopt;
    if (head[0] != "keyframe" || !kidx) throw FormatError(cloud.string() + ": first row must be keyframe,<index>");
    kc.frame = static_cast<int>(*kidx);
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      const auto tok = detail::split(line);
      if (tok.size() != 3) throw FormatError(cloud.string() + ":" + std::to_string(lineno) + ": expected x,y,z");
      Point3 p;
      for (int i = 0; i < 3; ++i) {
        const auto d = detail::parse_double(tok[i]);
        if (!d) throw FormatError(cloud.string() + ":" + std::to_string(lineno) + ": bad number");
        p[i] = *d;
      }
      kc.points.push_back(p);
    }
    seq.keyframe_cloud = std::move(kc);
  }

  const fs::path meta = dir / "metadata.json";
  if (fs::exists(meta)) {
    std::ifstream in(meta);
    try {
      nlohmann::json j;
      in >> j;
      seq.metadata.motion = j.value("motion", "");
      seq.metadata.scene_id = j.value("scene_id", "");
      seq.metadata.curated = j.value("curated", false);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(meta.string() + ": " + e.what());
    }
  }
  if (seq.metadata.scene_id.empty()) seq.metadata.scene_id = dir.filename().string();
  seq.metadata.original_indices.resize(seq.frames.size());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) seq.metadata.original_indices[i] = static_cast<int>(i);

  validate_sequence(seq);
  return seq;
}

inline void save_sequence(const SequenceBundle& seq, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  {
    std::ofstream out(dir / "intrinsics.json");
    out << intrinsics_to_json(seq.intrinsics).dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "poses.csv");
    out << "index,timestamp,tx,ty,tz,qw,qx,qy,qz\n";
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const auto& P = seq.poses[i];
      const auto& q = P.rotation();
      const auto& t = P.translation();
      out << i << ',' << detail::fmt_double(seq.frames[i].timestamp);
      for (double v : {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()}) out << ',' << detail::fmt_double(v);
      out << '\n';
    }
  }
  bool any_depth = false;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    write_pgm(dir / "frames" / detail::frame_name(static_cast<int>(i), "pgm"), *seq.frames[i].image);
    if (seq.frames[i].depth) {
      if (!any_depth) fs::create_directories(dir / "depth");
      any_depth = true;
      write_pfm(dir / "depth" / detail::frame_name(static_cast<int>(i), "pfm"), *seq.frames[i].depth);
    }
  }
  if (seq.keyframe_cloud) {
    std::ofstream out(dir / "cloud.csv");
    out << "keyframe," << seq.keyframe_cloud->frame << '\n';
    for (const auto& p : seq.keyframe_cloud->points)
      out << detail::fmt_double(p.x()) << ',' << detail::fmt_double(p.y()) << ',' << detail::fmt_double(p.z()) << '\n';
  }
  {
    std::ofstream out(dir / "metadata.json");
    nlohmann::json j = {{"motion", seq.metadata.motion},
                        {"scene_id", seq.metadata.scene_id},
                        {"curated", seq.metadata.curated}};
    out << j.dump(2) << '\n';
  }
}

/// Keeps frames at indices 0, s, 2s, ... and renumbers them 0..n-1. Original
/// indices accumulate in metadata so repeated subsampling composes.
inline SequenceBundle apply_speed(const SequenceBundle& seq, SpeedFactor speed) {
  const int s = speed.value();
  SequenceBundle out;
  out.intrinsics = seq.intrinsics;
  out.metadata = seq.metadata;
  out.metadata.original_indices.clear();
  out.metadata.speed = seq.metadata.speed * s;
  for (std::size_t i = 0; i < seq.size(); i += static_cast<std::size_t>(s)) {
    Frame f = seq.frames[i];
    f.index = static_cast<int>(out.frames.size());
    out.frames.push_back(std::move(f));
    out.poses.push_back(seq.poses[i]);
    out.metadata.original_indices.push_back(
        seq.metadata.original_indices.empty() ? static_cast<int>(i) : seq.metadata.original_indices[i]);
  }
  if (seq.keyframe_cloud) {
    const int k = seq.keyframe_cloud->frame;
    if (k % s != 0) {
      const int orig = seq.metadata.original_indices.empty() ? k : seq.metadata.original_indices[static_cast<std::size_t>(k)];
      throw KeyframeSkipped("keyframe at original index " + std::to_string(orig) + " is dropped by speed " +
                            std::to_string(s));
    }
    out.keyframe_cloud = KeyframeCloud{k / s, seq.keyframe_cloud->points};
  }
  return out;
}

/// Rotates every image 90 degrees counterclockwise and adjusts intrinsics,
/// poses and the keyframe cloud so that the geometry is unchanged. The new
/// camera frame is the old one rolled about the optical axis.
inline SequenceBundle rotate_ccw(const SequenceBundle& seq) {
  const CameraIntrinsics& K = seq.intrinsics;
  const int W = K.width, H = K.height;
  SequenceBundle out = seq;
  out.intrinsics = CameraIntrinsics{K.fy, K.fx, K.cy, (W - 1) - K.cx, H, W};
  // x' = y, y' = -x, z' = z
  Eigen::Matrix3d roll;
  roll << 0, 1, 0, -1, 0, 0, 0, 0, 1;
  const RigidPose roll_inv(Eigen::Quaterniond(roll.transpose()), Eigen::Vector3d::Zero());

  auto rotate_raster = [W, H](const auto& src) {
    using R = std::decay_t<decltype(src)>;
    R dst(H, W);
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) dst(v, W - 1 - u) = src(u, v);
    return dst;
  };
  for (auto& f : out.frames) {
    f.image = std::make_shared<const GrayImage>(rotate_raster(*f.image));
    if (f.depth) f.depth = std::make_shared<const DepthMap>(rotate_raster(*f.depth));
  }
  for (auto& P : out.poses) P = compose(P, roll_inv);
  if (out.keyframe_cloud)
    for (auto& p : out.keyframe_cloud->points) p = roll * p;
  return out;
}

}  // namespace trackbench

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "rfseg/error.hpp"
#include "rfseg/image.hpp"
#include "rfseg/parallel.hpp"
#include "rfseg/rng.hpp"
#include "rfseg/sample.hpp"

namespace rfseg {

enum class SynthKind { Blobs, Vessels };

inline const char* to_string(SynthKind k) { return k == SynthKind::Blobs ? "blobs" : "vessels"; }

inline SynthKind parse_synth_kind(const std::string& s) {
  if (s == "blobs") return SynthKind::Blobs;
  if (s == "vessels") return SynthKind::Vessels;
  throw Error(ErrorCode::InvalidArgument, "unknown synth kind '" + s + "' (blobs|vessels)");
}

struct SynthSpec {
  SynthKind kind = SynthKind::Blobs;
  int n_images = 40;
  int width = 128;
  int height = 128;
  std::uint64_t seed = 0;
  double noise_sigma = 0.05;
  // blobs
  int blob_count_min = 1, blob_count_max = 3;
  double blob_axis_min = 8.0;  // semi-axis, pixels; max is min(w, h) / 4
  // vessels
  int branch_count_min = 2, branch_count_max = 5;
  int vessel_width_min = 1, vessel_width_max = 3;
  double vessel_contrast = 0.15;

  void validate() const {
    if (width < 32 || height < 32) throw Error(ErrorCode::InvalidArgument, "synth dimensions must be >= 32");
    if (n_images < 1) throw Error(ErrorCode::InvalidArgument, "synth n_images must be >= 1");
    if (noise_sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
    if (blob_count_min < 1 || blob_count_min > blob_count_max)
      throw Error(ErrorCode::InvalidArgument, "bad blob count range");
    if (branch_count_min < 1 || branch_count_min > branch_count_max)
      throw Error(ErrorCode::InvalidArgument, "bad branch count range");
    if (vessel_width_min < 1 || vessel_width_min > vessel_width_max)
      throw Error(ErrorCode::InvalidArgument, "bad vessel width range");
  }

  double blob_axis_max() const { return std::max(blob_axis_min, std::min(width, height) / 4.0); }
};

namespace detail {

// Smooth background: base level plus a few random low-frequency waves.
inline GrayImage textured_background(int w, int h, double base, double amplitude, Rng& rng) {
  constexpr int kWaves = 4;
  struct Wave {
    double fx, fy, phase;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < kWaves; ++i) {
    const double freq = rng.uniform(0.5, 3.0) * 2.0 * std::numbers::pi;
    const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
    waves.push_back({freq * std::cos(dir) / w, freq * std::sin(dir) / h, rng.uniform(0.0, 2.0 * std::numbers::pi)});
  }
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (const auto& wv : waves) v += std::sin(wv.fx * x + wv.fy * y + wv.phase);
      img.at(x, y) = base + amplitude * v / kWaves;
    }
  return img;
}

inline void add_noise_and_clamp(GrayImage& img, double sigma, Rng& rng) {
  for (double& v : img.data) {
    if (sigma > 0.0) v += rng.normal(0.0, sigma);
    v = std::clamp(v, 0.0, 1.0);
  }
}

struct Ellipse {
  double cx, cy, a, b, theta, intensity;

  bool contains(double x, double y) const {
    const double c = std::cos(theta), s = std::sin(theta);
    const double u = (x - cx) * c + (y - cy) * s;
    const double v = -(x - cx) * s + (y - cy) * c;
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  }
};

inline SamplePair synth_blobs(const SynthSpec& spec, const std::string& id, Rng& rng) {
  const int w = spec.width, h = spec.height;
  GrayImage img = textured_background(w, h, rng.uniform(0.25, 0.35), 0.05, rng);
  LabelMask mask(w, h, 0, 2);
  const int count = static_cast<int>(rng.integer(spec.blob_count_min, spec.blob_count_max));
  std::vector<Ellipse> blobs;
  for (int i = 0; i < count; ++i) {
    Ellipse e{};
    e.a = rng.uniform(spec.blob_axis_min, spec.blob_axis_max());
    e.b = rng.uniform(spec.blob_axis_min, spec.blob_axis_max());
    e.theta = rng.uniform(0.0, std::numbers::pi);
    const double r = std::max(e.a, e.b);
    e.cx = rng.uniform(std::min(r, w / 2.0), std::max(w - r, w / 2.0));
    e.cy = rng.uniform(std::min(r, h / 2.0), std::max(h - r, h / 2.0));
    e.intensity = rng.uniform(0.6, 0.8);
    blobs.push_back(e);
  }
  // 4x4 supersampling for the anti-aliased edge; the mask uses pixel centres.
  constexpr int kSub = 4;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double& px = img.at(x, y);
      for (const auto& e : blobs) {
        int inside = 0;
        for (int sy = 0; sy < kSub; ++sy)
          for (int sx = 0; sx < kSub; ++sx)
            inside += e.contains(x + (sx + 0.5) / kSub, y + (sy + 0.5) / kSub);
        const double cover = inside / double(kSub * kSub);
        px = px * (1.0 - cover) + e.intensity * cover;
        if (e.contains(x + 0.5, y + 0.5)) mask.at(x, y) = 1;
      }
    }
  add_noise_and_clamp(img, spec.noise_sigma, rng);
  return SamplePair(std::move(img), std::move(mask), id);
}

inline SamplePair synth_vessels(const SynthSpec& spec, const std::string& id, Rng& rng) {
  const int w = spec.width, h = spec.height;
  GrayImage img = textured_background(w, h, rng.uniform(0.45, 0.55), 0.05, rng);
  LabelMask mask(w, h, 0, 2);
  struct Pt {
    double x, y;
  };
  std::vector<Pt> trunk_points;
  const int branches = static_cast<int>(rng.integer(spec.branch_count_min, spec.branch_count_max));
  for (int b = 0; b < branches; ++b) {
    Pt p;
    double angle;
    if (b == 0 || trunk_points.empty()) {
      // First walk enters from a random border towards the interior.
      const auto side = rng.index(4);
      const double t = rng.uniform(0.1, 0.9);
      switch (side) {
        case 0: p = {t * w, 0.0}; angle = std::numbers::pi / 2; break;
        case 1: p = {t * w, h - 1.0}; angle = -std::numbers::pi / 2; break;
        case 2: p = {0.0, t * h}; angle = 0.0; break;
        default: p = {w - 1.0, t * h}; angle = std::numbers::pi; break;
      }
      angle += rng.uniform(-0.5, 0.5);
    } else {
      p = trunk_points[rng.index(trunk_points.size())];
      angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    const int width = static_cast<int>(rng.integer(spec.vessel_width_min, spec.vessel_width_max));
    const int steps = static_cast<int>(rng.integer(w / 2, 3 * w / 2));
    for (int s = 0; s < steps; ++s) {
      const int cx = static_cast<int>(std::floor(p.x)), cy = static_cast<int>(std::floor(p.y));
      for (int dy = -(width - 1) / 2; dy <= width / 2; ++dy)
        for (int dx = -(width - 1) / 2; dx <= width / 2; ++dx) {
          const int x = cx + dx, y = cy + dy;
          if (x >= 0 && y >= 0 && x < w && y < h) mask.at(x, y) = 1;
        }
      trunk_points.push_back(p);
      angle += rng.normal(0.0, 0.15);
      p.x += std::cos(angle);
      p.y += std::sin(angle);
      if (p.x < 0 || p.y < 0 || p.x >= w || p.y >= h) break;
    }
  }
  for (std::size_t i = 0; i < img.data.size(); ++i)
    if (mask.data[i]) img.data[i] -= spec.vessel_contrast;
  add_noise_and_clamp(img, spec.noise_sigma, rng);
  return SamplePair(std::move(img), std::move(mask), id);
}

}  // namespace detail

inline std::string synth_id(SynthKind kind, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04d", kind == SynthKind::Blobs ? "blob" : "vessel", index);
  return buf;
}

/// Generates the dataset in memory; image i uses a stream keyed by
/// (seed, kind, i), so results do not depend on the thread count.
inline std::vector<SamplePair> generate_synth(const SynthSpec& spec) {
  spec.validate();
  std::vector<SamplePair> out(static_cast<std::size_t>(spec.n_images));
  parallel_for(out.size(), [&](std::size_t i) {
    Rng rng(stream_seed(spec.seed, {hash_string(to_string(spec.kind)), i}));
    const auto id = synth_id(spec.kind, static_cast<int>(i));
    out[i] = spec.kind == SynthKind::Blobs ? detail::synth_blobs(spec, id, rng) : detail::synth_vessels(spec, id, rng);
  });
  return out;
}

}  // namespace rfseg

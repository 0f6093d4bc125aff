#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "rfseg/error.hpp"
#include "rfseg/image.hpp"
#include "rfseg/parallel.hpp"
#include "rfseg/rng.hpp"
#include "rfseg/sample.hpp"

namespace rfseg {

/// Parameters of the x`factor` augmentation. Every variant draws each
/// transform independently with `include_probability` (flips use
/// `flip_probability` per axis) and samples its parameters uniformly from the
/// ranges below.
struct AugmentConfig {
  std::uint64_t seed = 0;
  int factor = 10;
  double include_probability = 0.5;
  double brightness_min = -0.2, brightness_max = 0.2;
  double contrast_min = 0.8, contrast_max = 1.2;
  double gamma_min = 0.7, gamma_max = 1.3;
  double rotation_min = -30.0, rotation_max = 30.0;  // degrees
  double flip_probability = 0.5;
  double elastic_alpha = 34.0;
  double elastic_sigma = 4.0;
  double optical_k_min = -0.05, optical_k_max = 0.05;
  int quality_min = 50, quality_max = 95;
  // Switches leave the random draws untouched, so disabling one family does
  // not perturb the parameters drawn for the other.
  bool geometric = true;
  bool photometric = true;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, "augment config: " + msg); };
    if (factor < 1) fail("factor must be >= 1");
    auto prob = [&](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) fail(std::string(name) + " must be in [0,1]");
    };
    prob(include_probability, "include_probability");
    prob(flip_probability, "flip_probability");
    auto range = [&](double lo, double hi, const char* name) {
      if (!(lo <= hi)) fail(std::string(name) + " range is empty");
    };
    range(brightness_min, brightness_max, "brightness");
    range(contrast_min, contrast_max, "contrast");
    range(gamma_min, gamma_max, "gamma");
    range(rotation_min, rotation_max, "rotation");
    range(optical_k_min, optical_k_max, "optical_k");
    range(quality_min, quality_max, "quality");
    if (gamma_min <= 0.0) fail("gamma must be positive");
    if (contrast_min < 0.0) fail("contrast must be non-negative");
    if (quality_min < 1 || quality_max > 100) fail("quality must be in [1,100]");
    if (elastic_alpha < 0.0 || elastic_sigma < 0.0) fail("elastic parameters must be non-negative");
  }

  /// Flat key=value representation, one entry per field.
  std::map<std::string, std::string> to_key_values() const {
    std::map<std::string, std::string> kv;
    auto num = [](double v) {
      std::ostringstream os;
      os.precision(17);
      os << v;
      return os.str();
    };
    kv["seed"] = std::to_string(seed);
    kv["factor"] = std::to_string(factor);
    kv["include_probability"] = num(include_probability);
    kv["brightness_min"] = num(brightness_min);
    kv["brightness_max"] = num(brightness_max);
    kv["contrast_min"] = num(contrast_min);
    kv["contrast_max"] = num(contrast_max);
    kv["gamma_min"] = num(gamma_min);
    kv["gamma_max"] = num(gamma_max);
    kv["rotation_min"] = num(rotation_min);
    kv["rotation_max"] = num(rotation_max);
    kv["flip_probability"] = num(flip_probability);
    kv["elastic_alpha"] = num(elastic_alpha);
    kv["elastic_sigma"] = num(elastic_sigma);
    kv["optical_k_min"] = num(optical_k_min);
    kv["optical_k_max"] = num(optical_k_max);
    kv["quality_min"] = std::to_string(quality_min);
    kv["quality_max"] = std::to_string(quality_max);
    kv["geometric"] = geometric ? "true" : "false";
    kv["photometric"] = photometric ? "true" : "false";
    return kv;
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : to_key_values()) out += k + "=" + v + "\n";
    return out;
  }

  /// Applies entries over the current values; unknown keys are rejected.
  void apply_key_values(const std::map<std::string, std::string>& kv) {
    auto as_double = [](const std::string& key, const std::string& v) {
      std::size_t used = 0;
      double d = 0;
      try {
        d = std::stod(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != v.size() || v.empty()) throw Error(ErrorCode::InvalidArgument, "bad number for " + key + ": " + v);
      return d;
    };
    auto as_int = [&](const std::string& key, const std::string& v) {
      long long out = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc{} || p != v.data() + v.size())
        throw Error(ErrorCode::InvalidArgument, "bad integer for " + key + ": " + v);
      return out;
    };
    auto as_bool = [](const std::string& key, const std::string& v) {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw Error(ErrorCode::InvalidArgument, "bad boolean for " + key + ": " + v);
    };
    for (const auto& [k, v] : kv) {
      if (k == "seed") {
        std::uint64_t s = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
        if (ec != std::errc{} || p != v.data() + v.size()) throw Error(ErrorCode::InvalidArgument, "bad seed: " + v);
        seed = s;
      } else if (k == "factor") factor = static_cast<int>(as_int(k, v));
      else if (k == "include_probability") include_probability = as_double(k, v);
      else if (k == "brightness_min") brightness_min = as_double(k, v);
      else if (k == "brightness_max") brightness_max = as_double(k, v);
      else if (k == "contrast_min") contrast_min = as_double(k, v);
      else if (k == "contrast_max") contrast_max = as_double(k, v);
      else if (k == "gamma_min") gamma_min = as_double(k, v);
      else if (k == "gamma_max") gamma_max = as_double(k, v);
      else if (k == "rotation_min") rotation_min = as_double(k, v);
      else if (k == "rotation_max") rotation_max = as_double(k, v);
      else if (k == "flip_probability") flip_probability = as_double(k, v);
      else if (k == "elastic_alpha") elastic_alpha = as_double(k, v);
      else if (k == "elastic_sigma") elastic_sigma = as_double(k, v);
      else if (k == "optical_k_min") optical_k_min = as_double(k, v);
      else if (k == "optical_k_max") optical_k_max = as_double(k, v);
      else if (k == "quality_min") quality_min = static_cast<int>(as_int(k, v));
      else if (k == "quality_max") quality_max = static_cast<int>(as_int(k, v));
      else if (k == "geometric") geometric = as_bool(k, v);
      else if (k == "photometric") photometric = as_bool(k, v);
      else throw Error(ErrorCode::UnknownConfigKey, "unknown augment key: " + k);
    }
    validate();
  }

  static AugmentConfig from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "expected key=value: " + line);
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    AugmentConfig cfg;
    cfg.apply_key_values(kv);
    return cfg;
  }
};

// --- photometric -----------------------------------------------------------

inline GrayImage adjust_brightness(const GrayImage& img, double delta) {
  GrayImage out = img;
  for (double& v : out.data) v = std::clamp(v + delta, 0.0, 1.0);
  return out;
}

inline GrayImage adjust_contrast(const GrayImage& img, double factor) {
  double mean = 0.0;
  for (double v : img.data) mean += v;
  mean /= static_cast<double>(img.data.size());
  GrayImage out = img;
  for (double& v : out.data) v = std::clamp(mean + factor * (v - mean), 0.0, 1.0);
  return out;
}

inline GrayImage adjust_gamma(const GrayImage& img, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
  GrayImage out = img;
  for (double& v : out.data) v = std::pow(v, gamma);
  return out;
}

namespace detail {

inline constexpr std::array<int, 64> kJpegLuminance = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

// IJG quality scaling.
inline std::array<double, 64> quant_table(int quality) {
  quality = std::clamp(quality, 1, 100);
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<double, 64> q{};
  for (int i = 0; i < 64; ++i) q[i] = std::clamp((kJpegLuminance[i] * scale + 50) / 100, 1, 255);
  return q;
}

inline const std::array<double, 64>& dct_basis() {
  static const std::array<double, 64> basis = [] {
    std::array<double, 64> b{};
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x)
        b[u * 8 + x] = (u == 0 ? std::sqrt(0.125) : 0.5) * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    return b;
  }();
  return basis;
}

}  // namespace detail

/// Lossy 8x8 block-DCT round trip with JPEG luminance quantization scaled by
/// `quality` (1..100). Partial edge blocks are filled by edge replication.
inline GrayImage compression_artifact(const GrayImage& img, int quality) {
  if (quality < 1 || quality > 100) throw Error(ErrorCode::InvalidArgument, "quality must be in [1,100]");
  const auto q = detail::quant_table(quality);
  const auto& basis = detail::dct_basis();
  GrayImage out(img.width, img.height);
  std::array<double, 64> block{}, tmp{}, coef{};
  for (int by = 0; by < img.height; by += 8) {
    for (int bx = 0; bx < img.width; bx += 8) {
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          block[y * 8 + x] =
              img.at(std::min(bx + x, img.width - 1), std::min(by + y, img.height - 1)) * 255.0 - 128.0;
      // Forward: rows then columns.
      for (int y = 0; y < 8; ++y)
        for (int u = 0; u < 8; ++u) {
          double s = 0.0;
          for (int x = 0; x < 8; ++x) s += basis[u * 8 + x] * block[y * 8 + x];
          tmp[y * 8 + u] = s;
        }
      for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
          double s = 0.0;
          for (int y = 0; y < 8; ++y) s += basis[v * 8 + y] * tmp[y * 8 + u];
          coef[v * 8 + u] = std::round(s / q[v * 8 + u]) * q[v * 8 + u];
        }
      // Inverse.
      for (int v = 0; v < 8; ++v)
        for (int x = 0; x < 8; ++x) {
          double s = 0.0;
          for (int u = 0; u < 8; ++u) s += basis[u * 8 + x] * coef[v * 8 + u];
          tmp[v * 8 + x] = s;
        }
      for (int y = 0; y < 8 && by + y < img.height; ++y)
        for (int x = 0; x < 8 && bx + x < img.width; ++x) {
          double s = 0.0;
          for (int v = 0; v < 8; ++v) s += basis[v * 8 + y] * tmp[v * 8 + x];
          out.at(bx + x, by + y) = std::clamp((s + 128.0) / 255.0, 0.0, 1.0);
        }
    }
  }
  return out;
}

// --- geometric -------------------------------------------------------------

struct Point {
  double x = 0.0, y = 0.0;
};

/// Rotation about the image center. Maps a destination pixel to its source
/// position: src = c + R(-theta) (dst - c).
struct RotationMap {
  double cx, cy, cos_t, sin_t;

  RotationMap(int width, int height, double degrees)
      : cx((width - 1) / 2.0),
        cy((height - 1) / 2.0),
        cos_t(std::cos(degrees * std::numbers::pi / 180.0)),
        sin_t(std::sin(degrees * std::numbers::pi / 180.0)) {}

  Point source(Point p) const {
    const double dx = p.x - cx, dy = p.y - cy;
    return {cx + cos_t * dx + sin_t * dy, cy - sin_t * dx + cos_t * dy};
  }
};

enum class FlipAxis { Horizontal, Vertical };

struct FlipMap {
  int width, height;
  FlipAxis axis;

  Point source(Point p) const {
    if (axis == FlipAxis::Horizontal) return {width - 1 - p.x, p.y};
    return {p.x, height - 1 - p.y};
  }
};

/// Dense displacement field: uniform [-1,1]^2 noise, Gaussian-smoothed
/// (reflect-101 borders, kernel truncated at 4 sigma), scaled by alpha.
/// Between grid points the displacement is bilinearly interpolated.
struct ElasticMap {
  int width = 0, height = 0;
  std::vector<double> dx, dy;

  ElasticMap(int w, int h, double alpha, double sigma, std::uint64_t stream)
      : width(w), height(h), dx(static_cast<std::size_t>(w) * h), dy(dx.size()) {
    Rng rng(stream);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] = rng.uniform(-1.0, 1.0);
      dy[i] = rng.uniform(-1.0, 1.0);
    }
    if (sigma > 0.0) {
      smooth(dx, sigma);
      smooth(dy, sigma);
    }
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] *= alpha;
      dy[i] *= alpha;
    }
  }

  Point source(Point p) const {
    const double fx = std::clamp(p.x, 0.0, static_cast<double>(width - 1));
    const double fy = std::clamp(p.y, 0.0, static_cast<double>(height - 1));
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
    const double tx = fx - x0, ty = fy - y0;
    auto lerp = [&](const std::vector<double>& f) {
      const double top = f[idx(x0, y0)] * (1 - tx) + f[idx(x1, y0)] * tx;
      const double bottom = f[idx(x0, y1)] * (1 - tx) + f[idx(x1, y1)] * tx;
      return top * (1 - ty) + bottom * ty;
    };
    return {p.x + lerp(dx), p.y + lerp(dy)};
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

  static int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  }

  void smooth(std::vector<double>& f, double sigma) const {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) total += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& k : kernel) k /= total;
    std::vector<double> tmp(f.size());
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) s += kernel[i + radius] * f[idx(reflect101(x + i, width), y)];
        tmp[idx(x, y)] = s;
      }
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) s += kernel[i + radius] * tmp[idx(x, reflect101(y + i, height))];
        f[idx(x, y)] = s;
      }
  }
};

/// Radial distortion about the image center. With r the distance to the
/// center divided by max(cx, cy), a destination pixel samples the source at
/// radius r * (1 + k r^2).
struct OpticalMap {
  double cx, cy, norm, k;

  OpticalMap(int width, int height, double coefficient)
      : cx((width - 1) / 2.0), cy((height - 1) / 2.0), norm(std::max({cx, cy, 1.0})), k(coefficient) {}

  Point source(Point p) const {
    const double dx = p.x - cx, dy = p.y - cy;
    const double r2 = (dx * dx + dy * dy) / (norm * norm);
    const double scale = 1.0 + k * r2;
    return {cx + dx * scale, cy + dy * scale};
  }
};

using GeometricMap = std::variant<RotationMap, FlipMap, ElasticMap, OpticalMap>;

/// Destination -> source mapping of a sequence of geometric transforms, given
/// in the order they are applied to the image.
class WarpChain {
 public:
  void add(GeometricMap m) { maps_.push_back(std::move(m)); }
  bool empty() const { return maps_.empty(); }

  Point source(Point p) const {
    for (auto it = maps_.rbegin(); it != maps_.rend(); ++it)
      p = std::visit([&](const auto& m) { return m.source(p); }, *it);
    return p;
  }

 private:
  std::vector<GeometricMap> maps_;
};

namespace detail {

inline double sample_bilinear_zero(const GrayImage& img, Point s) {
  const double fx = std::floor(s.x), fy = std::floor(s.y);
  if (fx < -1.0 || fy < -1.0 || fx > img.width || fy > img.height) return 0.0;
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const double tx = s.x - fx, ty = s.y - fy;
  auto px = [&](int x, int y) {
    return (x < 0 || y < 0 || x >= img.width || y >= img.height) ? 0.0 : img.at(x, y);
  };
  // Skip zero-weight taps so exact grid positions reproduce the source exactly.
  double top = px(x0, y0) * (1.0 - tx);
  if (tx != 0.0) top += px(x0 + 1, y0) * tx;
  double bottom = 0.0;
  if (ty != 0.0) {
    bottom = px(x0, y0 + 1) * (1.0 - tx);
    if (tx != 0.0) bottom += px(x0 + 1, y0 + 1) * tx;
  }
  return std::clamp(ty != 0.0 ? top * (1.0 - ty) + bottom * ty : top, 0.0, 1.0);
}

inline std::uint8_t sample_nearest_zero(const LabelMask& mask, Point s) {
  const double rx = std::floor(s.x + 0.5), ry = std::floor(s.y + 0.5);
  if (rx < 0 || ry < 0 || rx >= mask.width || ry >= mask.height) return 0;
  return mask.at(static_cast<int>(rx), static_cast<int>(ry));
}

}  // namespace detail

/// Resamples image (bilinear) and mask (nearest) through the same mapping.
/// Positions outside the source read as 0 / class 0.
template <typename Map>
std::pair<GrayImage, LabelMask> warp(const GrayImage& img, const LabelMask& mask, const Map& map) {
  if (img.width != mask.width || img.height != mask.height)
    throw Error(ErrorCode::DimensionMismatch, "image/mask dimensions differ");
  GrayImage out_img(img.width, img.height);
  LabelMask out_mask(mask.width, mask.height, 0, mask.n_classes);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const Point s = map.source(Point{static_cast<double>(x), static_cast<double>(y)});
      out_img.at(x, y) = detail::sample_bilinear_zero(img, s);
      out_mask.at(x, y) = detail::sample_nearest_zero(mask, s);
    }
  return {std::move(out_img), std::move(out_mask)};
}

inline std::pair<GrayImage, LabelMask> rotate(const GrayImage& img, const LabelMask& mask, double degrees) {
  return warp(img, mask, RotationMap(img.width, img.height, degrees));
}

/// Exact index mirror.
inline std::pair<GrayImage, LabelMask> flip(const GrayImage& img, const LabelMask& mask, FlipAxis axis) {
  if (img.width != mask.width || img.height != mask.height)
    throw Error(ErrorCode::DimensionMismatch, "image/mask dimensions differ");
  GrayImage out_img(img.width, img.height);
  LabelMask out_mask(mask.width, mask.height, 0, mask.n_classes);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const int sx = axis == FlipAxis::Horizontal ? img.width - 1 - x : x;
      const int sy = axis == FlipAxis::Vertical ? img.height - 1 - y : y;
      out_img.at(x, y) = img.at(sx, sy);
      out_mask.at(x, y) = mask.at(sx, sy);
    }
  return {std::move(out_img), std::move(out_mask)};
}

inline std::pair<GrayImage, LabelMask> elastic_transform(const GrayImage& img, const LabelMask& mask, double alpha,
                                                         double sigma, std::uint64_t stream) {
  return warp(img, mask, ElasticMap(img.width, img.height, alpha, sigma, stream));
}

inline std::pair<GrayImage, LabelMask> optical_distortion(const GrayImage& img, const LabelMask& mask, double k) {
  return warp(img, mask, OpticalMap(img.width, img.height, k));
}

// --- dataset augmentation --------------------------------------------------

/// Parameters drawn for one augmented variant; unset members were not drawn.
struct VariantPlan {
  std::optional<double> rotation;
  bool flip_horizontal = false;
  bool flip_vertical = false;
  std::optional<std::uint64_t> elastic_stream;
  std::optional<double> optical_k;
  std::optional<double> brightness;
  std::optional<double> contrast;
  std::optional<double> gamma;
  std::optional<int> quality;
};

/// Draws the plan for variant `variant` of pair `id`. The stream is keyed by
/// (seed, id, variant) only.
inline VariantPlan plan_variant(const AugmentConfig& cfg, const std::string& id, int variant) {
  Rng rng(stream_seed(cfg.seed, {hash_string(id), static_cast<std::uint64_t>(variant)}));
  VariantPlan plan;
  const double p = cfg.include_probability;
  if (rng.bernoulli(p)) plan.rotation = rng.uniform(cfg.rotation_min, cfg.rotation_max);
  plan.flip_horizontal = rng.bernoulli(cfg.flip_probability);
  plan.flip_vertical = rng.bernoulli(cfg.flip_probability);
  if (rng.bernoulli(p)) plan.elastic_stream = rng.next_u64();
  if (rng.bernoulli(p)) plan.optical_k = rng.uniform(cfg.optical_k_min, cfg.optical_k_max);
  if (rng.bernoulli(p)) plan.brightness = rng.uniform(cfg.brightness_min, cfg.brightness_max);
  if (rng.bernoulli(p)) plan.contrast = rng.uniform(cfg.contrast_min, cfg.contrast_max);
  if (rng.bernoulli(p)) plan.gamma = rng.uniform(cfg.gamma_min, cfg.gamma_max);
  if (rng.bernoulli(p)) plan.quality = static_cast<int>(rng.integer(cfg.quality_min, cfg.quality_max));
  return plan;
}

/// Geometric steps (rotate, flip, elastic, optical) are composed into one
/// mapping and resampled once; photometric steps (brightness, contrast,
/// gamma, compression) then touch the image only.
inline SamplePair apply_plan(const SamplePair& pair, const VariantPlan& plan, const AugmentConfig& cfg, int variant) {
  const int w = pair.image.width, h = pair.image.height;
  GrayImage img = pair.image;
  LabelMask mask = pair.mask;
  if (cfg.geometric) {
    WarpChain chain;
    if (plan.rotation) chain.add(RotationMap(w, h, *plan.rotation));
    if (plan.flip_horizontal) chain.add(FlipMap{w, h, FlipAxis::Horizontal});
    if (plan.flip_vertical) chain.add(FlipMap{w, h, FlipAxis::Vertical});
    if (plan.elastic_stream) chain.add(ElasticMap(w, h, cfg.elastic_alpha, cfg.elastic_sigma, *plan.elastic_stream));
    if (plan.optical_k) chain.add(OpticalMap(w, h, *plan.optical_k));
    if (!chain.empty()) std::tie(img, mask) = warp(img, mask, chain);
  }
  if (cfg.photometric) {
    if (plan.brightness) img = adjust_brightness(img, *plan.brightness);
    if (plan.contrast) img = adjust_contrast(img, *plan.contrast);
    if (plan.gamma) img = adjust_gamma(img, *plan.gamma);
    if (plan.quality) img = compression_artifact(img, *plan.quality);
  }
  return SamplePair(std::move(img), std::move(mask), pair.id + "_aug" + std::to_string(variant),
                    Provenance{pair.root_id(), variant});
}

inline SamplePair augment_variant(const SamplePair& pair, const AugmentConfig& cfg, int variant) {
  return apply_plan(pair, plan_variant(cfg, pair.root_id(), variant), cfg, variant);
}

/// Each input pair followed by its (factor - 1) variants; |out| = factor * |in|.
inline std::vector<SamplePair> augment_dataset(const std::vector<SamplePair>& pairs, const AugmentConfig& cfg) {
  cfg.validate();
  const std::size_t per = static_cast<std::size_t>(cfg.factor);
  std::vector<SamplePair> out(pairs.size() * per);
  parallel_for(out.size(), [&](std::size_t i) {
    const SamplePair& src = pairs[i / per];
    const int variant = static_cast<int>(i % per);
    out[i] = variant == 0 ? src : augment_variant(src, cfg, variant);
  });
  return out;
}

}  // namespace rfseg

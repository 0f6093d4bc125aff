#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rfseg/error.hpp"
#include "rfseg/image.hpp"
#include "rfseg/parallel.hpp"
#include "rfseg/rng.hpp"
#include "rfseg/sample.hpp"

namespace rfseg {

/// Gradient magnitude image; values >= 0, up to 4*sqrt(2) for [0,1] input.
struct SobelImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Summed-area table with a zero first row and column:
/// at(i, j) = sum of source pixels with row < i and col < j.
struct IntegralImage {
  int width = 0;   // source width
  int height = 0;  // source height
  std::vector<double> table;  // (height + 1) x (width + 1), row-major

  double at(int row, int col) const { return table[static_cast<std::size_t>(row) * (width + 1) + col]; }

  /// Sum over the half-open source rectangle [x0, x1) x [y0, y1).
  double rect_sum(int x0, int y0, int x1, int y1) const {
    return at(y1, x1) - at(y0, x1) - at(y1, x0) + at(y0, x0);
  }
};

/// Column layout of a pixel feature vector:
/// [intensity, window mean of intensity, window mean of Sobel, k*k patch].
struct FeatureLayout {
  int window = 13;

  int patch_size() const { return window * window; }
  int total_columns() const { return 3 + patch_size(); }
  int patch_offset() const { return 3; }
  int patch_center_column() const { return patch_offset() + (window / 2) * window + window / 2; }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names = {"intensity", "mean" + std::to_string(window) + "_intensity",
                                      "mean" + std::to_string(window) + "_sobel"};
    for (int dy = 0; dy < window; ++dy)
      for (int dx = 0; dx < window; ++dx)
        names.push_back("patch_" + std::to_string(dy) + "_" + std::to_string(dx));
    return names;
  }
};

inline constexpr int kFeatureLayoutVersion = 1;

/// Sobel gradient magnitude with replicate-edge borders.
inline SobelImage sobel_magnitude(const GrayImage& img) {
  SobelImage out{img.width, img.height, std::vector<double>(img.data.size())};
  const int w = img.width, h = img.height;
  auto px = [&](int x, int y) { return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double a = px(x - 1, y - 1), b = px(x, y - 1), c = px(x + 1, y - 1);
      const double d = px(x - 1, y), f = px(x + 1, y);
      const double g = px(x - 1, y + 1), hh = px(x, y + 1), i = px(x + 1, y + 1);
      const double gx = (c + 2 * f + i) - (a + 2 * d + g);
      const double gy = (g + 2 * hh + i) - (a + 2 * b + c);
      out.data[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
    }
  return out;
}

inline IntegralImage integral_image(std::span<const double> values, int width, int height) {
  IntegralImage t{width, height, std::vector<double>(static_cast<std::size_t>(width + 1) * (height + 1), 0.0)};
  for (int y = 0; y < height; ++y) {
    double row = 0.0;
    for (int x = 0; x < width; ++x) {
      row += values[static_cast<std::size_t>(y) * width + x];
      t.table[static_cast<std::size_t>(y + 1) * (width + 1) + x + 1] =
          t.table[static_cast<std::size_t>(y) * (width + 1) + x + 1] + row;
    }
  }
  return t;
}

inline IntegralImage integral_image(const GrayImage& img) { return integral_image(img.data, img.width, img.height); }
inline IntegralImage integral_image(const SobelImage& img) { return integral_image(img.data, img.width, img.height); }

/// Mean of the k x k window centered on (x, y). Cells outside the image count
/// as 0 and the divisor is always k*k.
inline double window_mean(const IntegralImage& t, int x, int y, int k = 13) {
  if (k < 1 || k % 2 == 0) throw Error(ErrorCode::InvalidArgument, "window size must be odd");
  const int r = k / 2;
  const int x0 = std::max(0, x - r), y0 = std::max(0, y - r);
  const int x1 = std::min(t.width, x + r + 1), y1 = std::min(t.height, y + r + 1);
  return t.rect_sum(x0, y0, x1, y1) / static_cast<double>(k * k);
}

/// Row-major k x k neighbourhood of (x, y); outside cells are 0.
inline std::vector<double> extract_patch(const GrayImage& img, int x, int y, int k = 13) {
  if (k < 1 || k % 2 == 0) throw Error(ErrorCode::InvalidArgument, "window size must be odd");
  std::vector<double> patch(static_cast<std::size_t>(k) * k, 0.0);
  const int r = k / 2;
  for (int dy = -r; dy <= r; ++dy) {
    const int sy = y + dy;
    if (sy < 0 || sy >= img.height) continue;
    for (int dx = -r; dx <= r; ++dx) {
      const int sx = x + dx;
      if (sx < 0 || sx >= img.width) continue;
      patch[static_cast<std::size_t>(dy + r) * k + (dx + r)] = img.at(sx, sy);
    }
  }
  return patch;
}

namespace detail {
template <typename Out>
void write_pixel_features(const GrayImage& img, const IntegralImage& ti, const IntegralImage& ts, int x, int y,
                          int k, Out* out) {
  out[0] = static_cast<Out>(img.at(x, y));
  out[1] = static_cast<Out>(window_mean(ti, x, y, k));
  out[2] = static_cast<Out>(window_mean(ts, x, y, k));
  const int r = k / 2;
  Out* patch = out + 3;
  for (int dy = -r; dy <= r; ++dy) {
    const int sy = y + dy;
    for (int dx = -r; dx <= r; ++dx) {
      const int sx = x + dx;
      const bool inside = sy >= 0 && sy < img.height && sx >= 0 && sx < img.width;
      *patch++ = inside ? static_cast<Out>(img.at(sx, sy)) : Out{0};
    }
  }
}
}  // namespace detail

/// Feature vector of one pixel in FeatureLayout order. The Sobel image only
/// contributes through its integral image `ts`.
inline std::vector<double> pixel_features(const GrayImage& img, const SobelImage& sob, const IntegralImage& ti,
                                          const IntegralImage& ts, int x, int y, int k = 13) {
  if (sob.width != img.width || sob.height != img.height)
    throw Error(ErrorCode::DimensionMismatch, "Sobel image does not match intensity image");
  std::vector<double> out(static_cast<std::size_t>(FeatureLayout{k}.total_columns()));
  detail::write_pixel_features(img, ti, ts, x, y, k, out.data());
  return out;
}

struct PixelRef {
  std::uint32_t image = 0;  // index into FeatureMatrix::image_ids
  std::uint16_t x = 0;
  std::uint16_t y = 0;
};

/// Per-pixel training table. Values are stored as 32-bit floats, row-major.
struct FeatureMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  int n_classes = 2;
  std::vector<float> values;
  std::vector<std::uint8_t> labels;
  std::vector<PixelRef> provenance;
  std::vector<std::string> image_ids;

  std::span<const float> row(std::size_t r) const { return {values.data() + r * n_cols, n_cols}; }
  float at(std::size_t r, std::size_t c) const { return values[r * n_cols + c]; }
};

struct Sampling {
  enum class Kind { All, PerImageCount, Balanced };
  Kind kind = Kind::All;
  std::size_t count = 0;

  static Sampling all() { return {Kind::All, 0}; }
  static Sampling per_image(std::size_t n) { return {Kind::PerImageCount, n}; }
  static Sampling balanced(std::size_t n) { return {Kind::Balanced, n}; }
};

namespace detail {

// Partial Fisher-Yates: first m entries of a seeded permutation.
inline void draw_without_replacement(std::vector<std::uint32_t>& pool, std::size_t m, Rng& rng,
                                     std::vector<std::uint32_t>& out) {
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.index(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
}

inline std::vector<std::uint32_t> select_pixels(const LabelMask& mask, const Sampling& sampling, Rng& rng,
                                                int n_classes) {
  const auto n = static_cast<std::uint32_t>(mask.size());
  std::vector<std::uint32_t> picked;
  switch (sampling.kind) {
    case Sampling::Kind::All:
      picked.resize(n);
      std::iota(picked.begin(), picked.end(), 0u);
      break;
    case Sampling::Kind::PerImageCount: {
      std::vector<std::uint32_t> pool(n);
      std::iota(pool.begin(), pool.end(), 0u);
      draw_without_replacement(pool, std::min<std::size_t>(sampling.count, n), rng, picked);
      break;
    }
    case Sampling::Kind::Balanced: {
      const std::size_t per_class = sampling.count / static_cast<std::size_t>(n_classes);
      std::vector<std::vector<std::uint32_t>> by_class(static_cast<std::size_t>(n_classes));
      for (std::uint32_t i = 0; i < n; ++i) by_class[mask.data[i]].push_back(i);
      for (auto& pool : by_class) {
        if (pool.empty()) continue;
        if (pool.size() >= per_class) {
          draw_without_replacement(pool, per_class, rng, picked);
        } else {
          for (std::size_t i = 0; i < per_class; ++i) picked.push_back(pool[rng.index(pool.size())]);
        }
      }
      break;
    }
  }
  return picked;
}

}  // namespace detail

/// Builds the per-pixel feature table over all pairs. Rows are grouped by
/// input order, then by scan order (All) or seeded draw order. Each image
/// draws from its own stream keyed by (seed, image index).
inline FeatureMatrix build_feature_matrix(const std::vector<SamplePair>& pairs, const Sampling& sampling,
                                          std::uint64_t seed, int window = 13) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyDataset, "no images to extract features from");
  const int w = pairs.front().image.width, h = pairs.front().image.height;
  int n_classes = 2;
  for (const auto& p : pairs) {
    if (p.image.width != w || p.image.height != h || p.mask.width != w || p.mask.height != h)
      throw Error(ErrorCode::DimensionMismatch, "all pairs must share dimensions; " + p.id + " differs");
    n_classes = std::max(n_classes, p.mask.n_classes);
  }
  if (w > 65535 || h > 65535) throw Error(ErrorCode::InvalidArgument, "image too large for pixel provenance");

  std::vector<std::vector<std::uint32_t>> selections(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    Rng rng(stream_seed(seed, {0x5a3d1e, i}));
    selections[i] = detail::select_pixels(pairs[i].mask, sampling, rng, n_classes);
  });
  std::vector<std::size_t> offsets(pairs.size() + 1, 0);
  for (std::size_t i = 0; i < pairs.size(); ++i) offsets[i + 1] = offsets[i] + selections[i].size();

  const FeatureLayout layout{window};
  FeatureMatrix fm;
  fm.n_rows = offsets.back();
  fm.n_cols = static_cast<std::size_t>(layout.total_columns());
  fm.n_classes = n_classes;
  fm.values.resize(fm.n_rows * fm.n_cols);
  fm.labels.resize(fm.n_rows);
  fm.provenance.resize(fm.n_rows);
  fm.image_ids.reserve(pairs.size());
  for (const auto& p : pairs) fm.image_ids.push_back(p.id);

  parallel_for(pairs.size(), [&](std::size_t i) {
    const GrayImage& img = pairs[i].image;
    const SobelImage sob = sobel_magnitude(img);
    const IntegralImage ti = integral_image(img);
    const IntegralImage ts = integral_image(sob);
    std::size_t row = offsets[i];
    for (std::uint32_t pix : selections[i]) {
      const int x = static_cast<int>(pix % static_cast<std::uint32_t>(w));
      const int y = static_cast<int>(pix / static_cast<std::uint32_t>(w));
      detail::write_pixel_features(img, ti, ts, x, y, window, fm.values.data() + row * fm.n_cols);
      fm.labels[row] = pairs[i].mask.data[pix];
      fm.provenance[row] = {static_cast<std::uint32_t>(i), static_cast<std::uint16_t>(x),
                            static_cast<std::uint16_t>(y)};
      ++row;
    }
  });
  return fm;
}

/// Row-major flatten of a Sobel image into a whole-image feature vector.
inline std::vector<float> flatten_whole_image(const SobelImage& sob) {
  std::vector<float> out(sob.data.size());
  std::transform(sob.data.begin(), sob.data.end(), out.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

inline std::vector<std::uint8_t> flatten_mask(const LabelMask& mask) { return mask.data; }

// --- PFMX binary persistence -----------------------------------------------
//
// Little-endian:
//   "PFMX" | u32 version = 1 | u64 n_rows | u32 n_cols
//   | f32 values[n_rows * n_cols] (row-major) | u8 labels[n_rows]

inline constexpr std::uint32_t kFeatureMatrixVersion = 1;

namespace detail {
inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t& pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) throw Error(ErrorCode::TruncatedData, "unexpected end of data");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}
}  // namespace detail

inline std::vector<std::uint8_t> serialize_feature_matrix(const FeatureMatrix& fm) {
  std::vector<std::uint8_t> out{'P', 'F', 'M', 'X'};
  out.reserve(24 + fm.values.size() * 4 + fm.labels.size());
  detail::put_le(out, kFeatureMatrixVersion, 4);
  detail::put_le(out, fm.n_rows, 8);
  detail::put_le(out, fm.n_cols, 4);
  for (float v : fm.values) detail::put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  out.insert(out.end(), fm.labels.begin(), fm.labels.end());
  return out;
}

inline FeatureMatrix deserialize_feature_matrix(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), "PFMX", 4) != 0) throw Error(ErrorCode::BadMagic, "not a PFMX file");
  std::size_t pos = 4;
  const auto version = detail::get_le(in, pos, 4);
  if (version != kFeatureMatrixVersion)
    throw Error(ErrorCode::UnsupportedVersion, "PFMX version " + std::to_string(version));
  FeatureMatrix fm;
  fm.n_rows = detail::get_le(in, pos, 8);
  fm.n_cols = detail::get_le(in, pos, 4);
  const std::size_t count = fm.n_rows * fm.n_cols;
  if (fm.n_cols == 0 || (fm.n_rows != 0 && count / fm.n_rows != fm.n_cols))
    throw Error(ErrorCode::CorruptData, "PFMX header dimensions invalid");
  if (in.size() - pos != count * 4 + fm.n_rows) throw Error(ErrorCode::TruncatedData, "PFMX payload size mismatch");
  fm.values.resize(count);
  for (auto& v : fm.values) v = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(in, pos, 4)));
  fm.labels.assign(in.begin() + static_cast<std::ptrdiff_t>(pos), in.end());
  int max_label = 1;
  for (auto l : fm.labels) max_label = std::max<int>(max_label, l);
  fm.n_classes = max_label + 1;
  return fm;
}

inline void save_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& path) {
  const auto bytes = serialize_feature_matrix(fm);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

inline FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_feature_matrix(bytes);
}

}  // namespace rfseg

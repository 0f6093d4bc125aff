#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rfseg/error.hpp"

namespace rfseg {

namespace detail {
inline void check_dims(int width, int height, std::size_t size) {
  if (width <= 0 || height <= 0)
    throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
  if (size != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw Error(ErrorCode::DimensionMismatch, "pixel count does not match width*height");
}
}  // namespace detail

/// Single-channel intensity image, row-major, values in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    detail::check_dims(w, h, data.size());
  }
  GrayImage(int w, int h, std::vector<double> values) : width(w), height(h), data(std::move(values)) {
    detail::check_dims(w, h, data.size());
  }

  std::size_t size() const { return data.size(); }
  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Per-pixel class ids aligned with a GrayImage.
struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
  int n_classes = 2;

  LabelMask() = default;
  LabelMask(int w, int h, std::uint8_t fill = 0, int classes = 2)
      : width(w),
        height(h),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill),
        n_classes(classes) {
    detail::check_dims(w, h, data.size());
    validate();
  }
  LabelMask(int w, int h, std::vector<std::uint8_t> values, int classes)
      : width(w), height(h), data(std::move(values)), n_classes(classes) {
    detail::check_dims(w, h, data.size());
    validate();
  }

  void validate() const {
    if (n_classes < 2 || n_classes > 256)
      throw Error(ErrorCode::InvalidArgument, "n_classes must be in [2, 256]");
    for (auto v : data)
      if (v >= n_classes) throw Error(ErrorCode::InvalidArgument, "class id out of range");
  }

  std::size_t size() const { return data.size(); }
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> data;

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {})
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    detail::check_dims(w, h, data.size());
  }

  std::size_t size() const { return data.size(); }
  Rgb& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const Rgb& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// BT.601 luma.
inline GrayImage to_grayscale(const RgbImage& img) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const Rgb& p = img.data[i];
    out.data[i] = std::clamp(0.299 * p.r + 0.587 * p.g + 0.114 * p.b, 0.0, 1.0);
  }
  return out;
}

inline RgbImage to_rgb(const GrayImage& img) {
  RgbImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = {img.data[i], img.data[i], img.data[i]};
  return out;
}

namespace detail {
inline void check_pad(int width, int height, int target_w, int target_h) {
  if (target_w < width || target_h < height)
    throw Error(ErrorCode::TargetSmallerThanSource,
                "pad target " + std::to_string(target_w) + "x" + std::to_string(target_h) +
                    " is smaller than source " + std::to_string(width) + "x" +
                    std::to_string(height));
}

template <typename Image>
void copy_top_left(const Image& src, Image& dst) {
  for (int y = 0; y < src.height; ++y)
    std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>(y) * src.width, src.width,
                dst.data.begin() + static_cast<std::ptrdiff_t>(y) * dst.width);
}
}  // namespace detail

/// Pads to the target size; original content stays anchored top-left.
inline GrayImage pad_to(const GrayImage& img, int target_w, int target_h, double fill = 0.0) {
  detail::check_pad(img.width, img.height, target_w, target_h);
  GrayImage out(target_w, target_h, fill);
  detail::copy_top_left(img, out);
  return out;
}

inline LabelMask pad_to(const LabelMask& mask, int target_w, int target_h, std::uint8_t fill = 0) {
  detail::check_pad(mask.width, mask.height, target_w, target_h);
  LabelMask out(target_w, target_h, fill, mask.n_classes);
  detail::copy_top_left(mask, out);
  return out;
}

/// Top-left w x h region.
template <typename Image>
Image crop_top_left(const Image& img, int w, int h) {
  if (w > img.width || h > img.height || w <= 0 || h <= 0)
    throw Error(ErrorCode::InvalidArgument, "crop outside image");
  Image out = img;
  out.width = w;
  out.height = h;
  out.data.resize(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    std::copy_n(img.data.begin() + static_cast<std::ptrdiff_t>(y) * img.width, w,
                out.data.begin() + static_cast<std::ptrdiff_t>(y) * w);
  return out;
}

/// Bilinear resize with half-pixel-center mapping: src = (dst + 0.5) * scale - 0.5,
/// clamped to the source grid.
inline GrayImage resize_bilinear(const GrayImage& img, int w, int h) {
  if (w < 1 || h < 1) throw Error(ErrorCode::InvalidArgument, "resize target must be >= 1x1");
  if (w == img.width && h == img.height) return img;
  GrayImage out(w, h);
  const double sx = static_cast<double>(img.width) / w;
  const double sy = static_cast<double>(img.height) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double tx = fx - x0;
      const double top = img.at(x0, y0) * (1.0 - tx) + img.at(x1, y0) * tx;
      const double bottom = img.at(x0, y1) * (1.0 - tx) + img.at(x1, y1) * tx;
      out.at(x, y) = std::clamp(top * (1.0 - ty) + bottom * ty, 0.0, 1.0);
    }
  }
  return out;
}

/// Nearest-neighbour resize using the same half-pixel-center mapping, so class
/// ids stay categorical.
inline LabelMask resize_nearest(const LabelMask& mask, int w, int h) {
  if (w < 1 || h < 1) throw Error(ErrorCode::InvalidArgument, "resize target must be >= 1x1");
  if (w == mask.width && h == mask.height) return mask;
  LabelMask out(w, h, 0, mask.n_classes);
  const double sx = static_cast<double>(mask.width) / w;
  const double sy = static_cast<double>(mask.height) / h;
  for (int y = 0; y < h; ++y) {
    const int ys = std::min(static_cast<int>(std::floor((y + 0.5) * sy)), mask.height - 1);
    for (int x = 0; x < w; ++x) {
      const int xs = std::min(static_cast<int>(std::floor((x + 0.5) * sx)), mask.width - 1);
      out.at(x, y) = mask.at(xs, ys);
    }
  }
  return out;
}

}  // namespace rfseg

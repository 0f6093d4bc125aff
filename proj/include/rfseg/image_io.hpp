#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "rfseg/error.hpp"
#include "rfseg/image.hpp"

namespace rfseg {

/// Decoded pixels before normalization: 1 (gray) or 3 (rgb) channels,
/// integer samples in [0, max_value].
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::uint32_t max_value = 255;
  std::vector<std::uint16_t> samples;
};

namespace detail {

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path))
      throw Error(ErrorCode::FileNotFound, path.string());
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// --- PNM (P5/P6) ---------------------------------------------------------

inline RawImage decode_pnm(const std::vector<unsigned char>& bytes, const std::string& name) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::uint32_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw Error(ErrorCode::CorruptImage, "bad PNM header in " + name);
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 0xFFFFFFFFu) throw Error(ErrorCode::CorruptImage, "bad PNM header in " + name);
    }
    return static_cast<std::uint32_t>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw Error(ErrorCode::UnsupportedFormat, "only binary P5/P6 PNM supported: " + name);
  RawImage raw;
  raw.channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const std::uint32_t w = read_uint();
  const std::uint32_t h = read_uint();
  raw.max_value = read_uint();
  if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16 || raw.max_value == 0 || raw.max_value > 65535)
    throw Error(ErrorCode::CorruptImage, "bad PNM header values in " + name);
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw Error(ErrorCode::CorruptImage, "bad PNM header in " + name);
  ++pos;  // single whitespace before raster
  raw.width = static_cast<int>(w);
  raw.height = static_cast<int>(h);
  const std::size_t count = static_cast<std::size_t>(w) * h * raw.channels;
  const std::size_t bytes_per = raw.max_value > 255 ? 2 : 1;
  if (bytes.size() - pos < count * bytes_per)
    throw Error(ErrorCode::CorruptImage, "truncated PNM raster in " + name);
  raw.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint16_t v = bytes_per == 2
                          ? static_cast<std::uint16_t>((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1])
                          : bytes[pos + i];
    if (v > raw.max_value) throw Error(ErrorCode::CorruptImage, "sample above maxval in " + name);
    raw.samples[i] = v;
  }
  return raw;
}

inline void write_pnm(const std::filesystem::path& path, int width, int height, int channels,
                      const std::vector<std::uint8_t>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << (channels == 1 ? "P5" : "P6") << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(samples.data()), static_cast<std::streamsize>(samples.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

// --- PNG -----------------------------------------------------------------

struct PngReadBuffer {
  const std::vector<unsigned char>* bytes;
  std::size_t offset;
};

inline void png_read_from_buffer(png_structp png, png_bytep out, png_size_t length) {
  auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
  if (buf->offset + length > buf->bytes->size()) png_error(png, "truncated PNG stream");
  std::copy_n(buf->bytes->data() + buf->offset, length, out);
  buf->offset += length;
}

inline void png_error_handler(png_structp png, png_const_charp) { std::longjmp(png_jmpbuf(png), 1); }
inline void png_warning_handler(png_structp, png_const_charp) {}

inline RawImage decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw Error(ErrorCode::UnsupportedFormat, "not a PNG file: " + name);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                           png_warning_handler);
  if (!png) throw Error(ErrorCode::IoError, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::IoError, "libpng init failed");
  }
  // Everything touched after setjmp lives in heap storage owned outside the
  // jump region.
  auto raw = std::make_unique<RawImage>();
  auto rows = std::make_unique<std::vector<png_bytep>>();
  auto pixels = std::make_unique<std::vector<unsigned char>>();
  PngReadBuffer buffer{&bytes, 8};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::CorruptImage, "PNG decode failed: " + name);
  }
  png_set_read_fn(png, &buffer, png_read_from_buffer);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  raw->width = static_cast<int>(png_get_image_width(png, info));
  raw->height = static_cast<int>(png_get_image_height(png, info));
  raw->channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  raw->max_value = out_depth == 16 ? 65535 : 255;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  pixels->resize(rowbytes * raw->height);
  rows->resize(raw->height);
  for (int y = 0; y < raw->height; ++y) (*rows)[y] = pixels->data() + rowbytes * y;
  png_read_image(png, rows->data());
  png_destroy_read_struct(&png, &info, nullptr);

  if (raw->channels != 1 && raw->channels != 3)
    throw Error(ErrorCode::UnsupportedFormat, "unexpected PNG channel layout: " + name);
  const std::size_t count = static_cast<std::size_t>(raw->width) * raw->height * raw->channels;
  raw->samples.resize(count);
  if (out_depth == 16) {
    for (std::size_t i = 0; i < count; ++i)
      raw->samples[i] = static_cast<std::uint16_t>((*pixels)[2 * i] | ((*pixels)[2 * i + 1] << 8));
  } else {
    for (std::size_t i = 0; i < count; ++i) raw->samples[i] = (*pixels)[i];
  }
  return std::move(*raw);
}

inline void write_png(const std::filesystem::path& path, int width, int height, int channels,
                      const std::vector<std::uint8_t>& samples) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.string().c_str(), "wb"),
                                                       &std::fclose);
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                            png_warning_handler);
  if (!png) throw Error(ErrorCode::IoError, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  auto rows = std::make_unique<std::vector<png_const_bytep>>(height);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "PNG encode failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) (*rows)[y] = samples.data() + stride * y;
  png_write_rows(png, const_cast<png_bytepp>(rows->data()), static_cast<png_uint_32>(height));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline void write_samples(const std::filesystem::path& path, int width, int height, int channels,
                          const std::vector<std::uint8_t>& samples) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_png(path, width, height, channels, samples);
  } else if ((ext == ".pgm" && channels == 1) || (ext == ".ppm" && channels == 3)) {
    write_pnm(path, width, height, channels, samples);
  } else if (ext == ".ppm" || ext == ".pgm") {
    throw Error(ErrorCode::UnsupportedFormat, "channel count does not match " + ext);
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "unsupported output extension: " + path.string());
  }
}

inline std::uint8_t quantize8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

/// Decodes PNG (1/2/4/8/16-bit, gray/rgb/palette; alpha dropped) or binary PGM/PPM.
inline RawImage load_raw(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return detail::decode_png(bytes, path.string());
  if (bytes.size() >= 2 && bytes[0] == 'P') return detail::decode_pnm(bytes, path.string());
  throw Error(ErrorCode::UnsupportedFormat, "unrecognized image format: " + path.string());
}

/// Loads an image with channels normalized by the format maximum into [0, 1].
inline RgbImage load_image(const std::filesystem::path& path) {
  const RawImage raw = load_raw(path);
  RgbImage out(raw.width, raw.height);
  const double scale = 1.0 / raw.max_value;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (raw.channels == 1) {
      const double v = raw.samples[i] * scale;
      out.data[i] = {v, v, v};
    } else {
      out.data[i] = {raw.samples[3 * i] * scale, raw.samples[3 * i + 1] * scale,
                     raw.samples[3 * i + 2] * scale};
    }
  }
  return out;
}

inline GrayImage load_gray(const std::filesystem::path& path) { return to_grayscale(load_image(path)); }

enum class MaskValues {
  ClassIds,  // pixel value is the class id
  Binarize,  // any non-zero value becomes class 1
};

/// Loads a mask stored as a single-channel 8-bit image. n_classes = 0 infers
/// max(id) + 1 (at least 2).
inline LabelMask load_mask(const std::filesystem::path& path, int n_classes = 0,
                           MaskValues mode = MaskValues::ClassIds) {
  const RawImage raw = load_raw(path);
  if (raw.channels != 1)
    throw Error(ErrorCode::UnsupportedFormat, "mask must be single-channel: " + path.string());
  std::vector<std::uint8_t> ids(raw.samples.size());
  int max_id = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::uint32_t v = raw.samples[i];
    if (mode == MaskValues::Binarize) v = v != 0 ? 1 : 0;
    if (v > 255) throw Error(ErrorCode::CorruptImage, "class id above 255 in " + path.string());
    ids[i] = static_cast<std::uint8_t>(v);
    max_id = std::max(max_id, static_cast<int>(v));
  }
  const int classes = n_classes > 0 ? n_classes : std::max(2, max_id + 1);
  if (max_id >= classes)
    throw Error(ErrorCode::CorruptImage, "class id " + std::to_string(max_id) +
                                             " exceeds n_classes in " + path.string());
  return LabelMask(raw.width, raw.height, std::move(ids), classes);
}

/// Writes 8-bit PNG (.png) or PGM (.pgm).
inline void save_image(const GrayImage& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> samples(img.data.size());
  std::transform(img.data.begin(), img.data.end(), samples.begin(), detail::quantize8);
  detail::write_samples(path, img.width, img.height, 1, samples);
}

/// Writes 8-bit PNG (.png) or PPM (.ppm).
inline void save_image(const RgbImage& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> samples(img.data.size() * 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    samples[3 * i] = detail::quantize8(img.data[i].r);
    samples[3 * i + 1] = detail::quantize8(img.data[i].g);
    samples[3 * i + 2] = detail::quantize8(img.data[i].b);
  }
  detail::write_samples(path, img.width, img.height, 3, samples);
}

/// Writes a mask with pixel value = class id.
inline void save_mask(const LabelMask& mask, const std::filesystem::path& path) {
  detail::write_samples(path, mask.width, mask.height, 1, mask.data);
}

}  // namespace rfseg

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rfseg/image.hpp"
#include "rfseg/sample.hpp"

namespace fixtures {

inline rfseg::GrayImage random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  rfseg::GrayImage img(w, h);
  for (double& v : img.data) v = u(gen);
  return img;
}

inline rfseg::LabelMask random_mask(int w, int h, std::uint64_t seed, int n_classes = 2, double p = 0.5) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cls(1, n_classes - 1);
  rfseg::LabelMask m(w, h, 0, n_classes);
  for (auto& v : m.data) v = u(gen) < p ? static_cast<std::uint8_t>(cls(gen)) : 0;
  return m;
}

inline rfseg::GrayImage ramp_x(int w, int h) {
  rfseg::GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<double>(x) / (w - 1);
  return img;
}

inline rfseg::GrayImage ramp_y(int w, int h) {
  rfseg::GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<double>(y) / (h - 1);
  return img;
}

// Class id encodes (x mod 16, y mod 16).
inline rfseg::LabelMask index_mask(int w, int h) {
  rfseg::LabelMask m(w, h, 0, 256);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at(x, y) = static_cast<std::uint8_t>((x % 16) + 16 * (y % 16));
  return m;
}

/// Directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("rfseg_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures

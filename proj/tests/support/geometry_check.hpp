#pragma once
// Image/mask agreement after a geometric warp. Two runs of the same warp on
// ramp_x and ramp_y images recover the source coordinate of every output
// pixel. Bilinear sampling of a linear ramp is exact only when all four taps
// are inside, which is what a warped all-ones image reports. The mask warped
// alongside an index mask must then carry the class of the nearest source
// pixel.

#include <cmath>
#include <cstdint>

#include "rfseg/image.hpp"

namespace geometry_check {

struct Result {
  std::size_t checked = 0;
  std::size_t mismatched = 0;
};

inline Result compare(const rfseg::GrayImage& warped_x, const rfseg::GrayImage& warped_y,
                      const rfseg::GrayImage& warped_ones, const rfseg::LabelMask& warped_mask, int src_w,
                      int src_h) {
  Result r;
  for (int y = 0; y < warped_mask.height; ++y)
    for (int x = 0; x < warped_mask.width; ++x) {
      if (std::abs(warped_ones.at(x, y) - 1.0) > 1e-12) continue;
      const double sx = warped_x.at(x, y) * (src_w - 1), sy = warped_y.at(x, y) * (src_h - 1);
      if (sx < 1.0 || sy < 1.0 || sx > src_w - 2.0 || sy > src_h - 2.0) continue;
      const double fx = sx - std::floor(sx), fy = sy - std::floor(sy);
      if (std::abs(fx - 0.5) < 1e-6 || std::abs(fy - 0.5) < 1e-6) continue;  // rounding ambiguous
      const int nx = static_cast<int>(std::floor(sx + 0.5)), ny = static_cast<int>(std::floor(sy + 0.5));
      const int expect = (nx % 16) + 16 * (ny % 16);
      ++r.checked;
      r.mismatched += warped_mask.at(x, y) != expect;
    }
  return r;
}

}  // namespace geometry_check

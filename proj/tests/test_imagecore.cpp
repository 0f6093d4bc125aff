#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <string>

#include "rfseg/image.hpp"
#include "rfseg/image_io.hpp"
#include "support/fixtures.hpp"

using namespace rfseg;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no rfseg::Error thrown";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(LoadImage, PgmMaxValueIsWhite) {
  fixtures::TempDir dir("io");
  write_bytes(dir / "a.pgm", std::string("P5\n1 1\n255\n") + char(255));
  const RgbImage img = load_image(dir / "a.pgm");
  ASSERT_EQ(img.width, 1);
  EXPECT_EQ(img.data[0], (Rgb{1.0, 1.0, 1.0}));
}

TEST(LoadImage, Pgm128NormalizedByMax) {
  fixtures::TempDir dir("io");
  write_bytes(dir / "a.pgm", std::string("P5\n1 1\n255\n") + char(128));
  EXPECT_DOUBLE_EQ(load_image(dir / "a.pgm").data[0].r, 128.0 / 255.0);
}

TEST(LoadImage, SixteenBitPgm) {
  fixtures::TempDir dir("io");
  write_bytes(dir / "a.pgm", std::string("P5\n2 1\n65535\n") + char(0xff) + char(0xff) + char(0x80) + char(0x00));
  const auto img = load_image(dir / "a.pgm");
  EXPECT_DOUBLE_EQ(img.data[0].g, 1.0);
  EXPECT_DOUBLE_EQ(img.data[1].g, 32768.0 / 65535.0);
}

TEST(LoadImage, ZeroPngRoundTrip) {
  fixtures::TempDir dir("io");
  save_image(GrayImage(2, 2, 0.0), dir / "z.png");
  const auto img = load_image(dir / "z.png");
  ASSERT_EQ(img.size(), 4u);
  for (const auto& p : img.data) EXPECT_EQ(p, (Rgb{0, 0, 0}));
}

TEST(LoadImage, PngAndPpmRoundTripQuantized) {
  fixtures::TempDir dir("io");
  RgbImage rgb(3, 2);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = {i / 10.0, 0.5, 1.0 - i / 10.0};
  for (const char* name : {"c.png", "c.ppm"}) {
    save_image(rgb, dir / name);
    const auto back = load_image(dir / name);
    ASSERT_EQ(back.width, 3);
    for (std::size_t i = 0; i < rgb.data.size(); ++i) {
      EXPECT_NEAR(back.data[i].r, rgb.data[i].r, 0.5 / 255 + 1e-12) << name;
      EXPECT_NEAR(back.data[i].b, rgb.data[i].b, 0.5 / 255 + 1e-12) << name;
    }
  }
}

TEST(LoadImage, Errors) {
  fixtures::TempDir dir("io");
  EXPECT_EQ(code_of([&] { load_image(dir / "missing.png"); }), ErrorCode::FileNotFound);
  write_bytes(dir / "x.bmp", "BM nonsense");
  EXPECT_EQ(code_of([&] { load_image(dir / "x.bmp"); }), ErrorCode::UnsupportedFormat);
  write_bytes(dir / "t.pgm", "P5\n4 4\n255\nabc");
  EXPECT_EQ(code_of([&] { load_image(dir / "t.pgm"); }), ErrorCode::CorruptImage);
  // valid signature, garbage body
  write_bytes(dir / "b.png", std::string("\x89PNG\r\n\x1a\n", 8) + "garbage garbage garbage");
  EXPECT_EQ(code_of([&] { load_image(dir / "b.png"); }), ErrorCode::CorruptImage);
}

TEST(LoadMask, ClassIdsAndBinarize) {
  fixtures::TempDir dir("io");
  LabelMask m(2, 2, std::vector<std::uint8_t>{0, 1, 2, 0}, 3);
  save_mask(m, dir / "m.png");
  const auto back = load_mask(dir / "m.png");
  EXPECT_EQ(back.n_classes, 3);
  EXPECT_EQ(back.data, m.data);
  const auto bin = load_mask(dir / "m.png", 0, MaskValues::Binarize);
  EXPECT_EQ(bin.data, (std::vector<std::uint8_t>{0, 1, 1, 0}));
  EXPECT_EQ(code_of([&] { load_mask(dir / "m.png", 2); }), ErrorCode::CorruptImage);
}

TEST(Grayscale, Bt601Weights) {
  RgbImage img(3, 1);
  img.data = {{1, 1, 1}, {0, 0, 0}, {1, 0, 0}};
  const auto g = to_grayscale(img);
  EXPECT_NEAR(g.data[0], 1.0, 1e-15);
  EXPECT_EQ(g.data[1], 0.0);
  EXPECT_DOUBLE_EQ(g.data[2], 0.299);
}

TEST(PadTo, IdentityFillAndMask) {
  const auto img = fixtures::random_image(2, 2, 1);
  EXPECT_EQ(pad_to(img, 2, 2), img);

  const GrayImage one(1, 1, 0.5);
  const auto tall = pad_to(one, 1, 2);
  EXPECT_EQ(tall.data, (std::vector<double>{0.5, 0.0}));

  LabelMask m(2, 1, std::vector<std::uint8_t>{1, 1}, 2);
  const auto pm = pad_to(m, 3, 2);
  EXPECT_EQ(pm.data, (std::vector<std::uint8_t>{1, 1, 0, 0, 0, 0}));
}

TEST(PadTo, SmallerTargetRejected) {
  EXPECT_EQ(code_of([] { pad_to(GrayImage(4, 4), 3, 4); }), ErrorCode::TargetSmallerThanSource);
  EXPECT_EQ(code_of([] { pad_to(LabelMask(4, 4), 4, 3); }), ErrorCode::TargetSmallerThanSource);
}

TEST(ResizeBilinear, IdentityAndConstant) {
  const auto img = fixtures::random_image(7, 5, 3);
  EXPECT_EQ(resize_bilinear(img, 7, 5), img);
  const GrayImage c(6, 4, 0.7);
  for (auto [w, h] : {std::pair{3, 3}, {13, 9}, {1, 1}}) {
    const auto r = resize_bilinear(c, w, h);
    for (double v : r.data) EXPECT_NEAR(v, 0.7, 1e-15);
  }
}

TEST(ResizeBilinear, MatchesScalarFormula) {
  // 2x1 {0, 1} -> 4x1: src = (dst + 0.5) * 0.5 - 0.5, clamped to [0, 1]
  const GrayImage img(2, 1, std::vector<double>{0.0, 1.0});
  const auto r = resize_bilinear(img, 4, 1);
  for (int x = 0; x < 4; ++x) {
    const double s = std::clamp((x + 0.5) * 0.5 - 0.5, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(r.data[static_cast<std::size_t>(x)], s) << x;
  }
  EXPECT_EQ(r.data, (std::vector<double>{0.0, 0.25, 0.75, 1.0}));
}

TEST(ResizeBilinear, RandomAgainstScalarOracle) {
  const auto img = fixtures::random_image(9, 6, 11);
  const int w = 14, h = 4;
  const auto r = resize_bilinear(img, w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * 9.0 / w - 0.5, 0.0, 8.0);
      const double fy = std::clamp((y + 0.5) * 6.0 / h - 0.5, 0.0, 5.0);
      const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
      const int x1 = std::min(x0 + 1, 8), y1 = std::min(y0 + 1, 5);
      const double a = fx - x0, b = fy - y0;
      const double expect = (1 - a) * (1 - b) * img.at(x0, y0) + a * (1 - b) * img.at(x1, y0) +
                            (1 - a) * b * img.at(x0, y1) + a * b * img.at(x1, y1);
      EXPECT_NEAR(r.at(x, y), expect, 1e-12);
    }
}

TEST(ResizeNearest, KeepsClassIds) {
  const auto m = fixtures::random_mask(5, 5, 2, 4);
  const auto up = resize_nearest(m, 10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) EXPECT_EQ(up.at(x, y), m.at(x / 2, y / 2));
  EXPECT_EQ(resize_nearest(up, 5, 5), m);
  EXPECT_EQ(up.n_classes, 4);
}

TEST(LabelMaskInvariant, RejectsOutOfRangeIds) {
  EXPECT_EQ(code_of([] { LabelMask(1, 1, std::vector<std::uint8_t>{2}, 2); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { LabelMask(1, 1, 0, 1); }), ErrorCode::InvalidArgument);
}

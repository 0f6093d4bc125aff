#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "rfseg/evaluate.hpp"
#include "rfseg/resource.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace rfseg;

namespace {

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

std::vector<SamplePair> test_set(int n, int size = 16) {
  std::vector<SamplePair> v;
  for (int i = 0; i < n; ++i)
    v.emplace_back(fixtures::random_image(size, size, i), fixtures::random_mask(size, size, 500 + i, 2, 0.4),
                   "t" + std::to_string(i));
  return v;
}

}  // namespace

TEST(Confusion, IdentityAndSimpleCount) {
  const auto m = fixtures::random_mask(8, 8, 1, 3);
  const auto c = confusion(m, m, 3);
  for (const auto& k : c.classes) {
    EXPECT_EQ(k.fp, 0u);
    EXPECT_EQ(k.fn, 0u);
  }
  const LabelMask bg(2, 2, 0, 2);
  const LabelMask half(2, 2, std::vector<std::uint8_t>{1, 1, 0, 0}, 2);
  const auto k = confusion(bg, half, 2).classes[1];
  EXPECT_EQ(k.tp, 0u);
  EXPECT_EQ(k.fn, 2u);
  EXPECT_EQ(k.fp, 0u);
  EXPECT_EQ(k.tn, 2u);
  EXPECT_THROW(confusion(bg, LabelMask(3, 2), 2), Error);
}

TEST(Metrics, WorkedExample) {
  ConfusionCounts c;
  c.total = 16;
  c.classes = {ClassCounts{11, 1, 1, 3}, ClassCounts{3, 1, 1, 11}};
  const auto s = metrics(c)[1];
  EXPECT_NEAR(*s.dice, 0.75, 1e-15);
  EXPECT_NEAR(*s.iou, 0.6, 1e-15);
  EXPECT_NEAR(*s.sensitivity, 0.75, 1e-15);
  EXPECT_NEAR(*s.accuracy, 0.875, 1e-15);
}

TEST(Metrics, PerfectDisjointAndUndefined) {
  const LabelMask gt(4, 1, std::vector<std::uint8_t>{0, 1, 1, 0}, 2);
  for (const auto& s : metrics(confusion(gt, gt, 2))) {
    EXPECT_EQ(*s.accuracy, 1.0);
    EXPECT_EQ(*s.dice, 1.0);
  }
  const LabelMask inv(4, 1, std::vector<std::uint8_t>{1, 0, 0, 1}, 2);
  const auto d = metrics(confusion(inv, gt, 2))[1];
  EXPECT_EQ(*d.dice, 0.0);
  EXPECT_EQ(*d.iou, 0.0);
  EXPECT_EQ(*d.sensitivity, 0.0);
  // class absent from both: overlap metrics undefined
  const LabelMask bg(4, 1, 0, 2);
  const auto u = metrics(confusion(bg, bg, 2))[1];
  EXPECT_FALSE(u.dice);
  EXPECT_FALSE(u.sensitivity);
  EXPECT_TRUE(u.accuracy);
}

TEST(Metrics, MatchNaiveOracleAndIdentities) {
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + t % 3;
    const auto pred = fixtures::random_mask(16, 16, 1000 + t, k, 0.5);
    const auto gt = fixtures::random_mask(16, 16, 2000 + t, k, 0.3 + 0.01 * t);
    const auto counts = confusion(pred, gt, k);
    const auto scores = metrics(counts);
    std::uint64_t correct = 0, tp_sum = 0;
    for (std::size_t i = 0; i < gt.data.size(); ++i) correct += pred.data[i] == gt.data[i];
    for (int c = 0; c < k; ++c) {
      const auto ref = oracle::count_class(pred, gt, c);
      const auto& got = counts.classes[static_cast<std::size_t>(c)];
      EXPECT_EQ(got.tp, ref.tp);
      EXPECT_EQ(got.fp, ref.fp);
      EXPECT_EQ(got.fn, ref.fn);
      EXPECT_EQ(got.tn, ref.tn);
      tp_sum += got.tp;
      const auto& s = scores[static_cast<std::size_t>(c)];
      const double tp = static_cast<double>(ref.tp), fp = static_cast<double>(ref.fp), fn = static_cast<double>(ref.fn);
      if (ref.tp + ref.fp + ref.fn == 0) continue;
      EXPECT_NEAR(*s.dice, 2 * tp / (2 * tp + fp + fn), 1e-12);
      EXPECT_NEAR(*s.iou, tp / (tp + fp + fn), 1e-12);
      EXPECT_NEAR(*s.iou, *s.dice / (2 - *s.dice), 1e-9);
      EXPECT_GE(*s.dice, *s.iou);
      EXPECT_NEAR(*s.accuracy, static_cast<double>(ref.tp + ref.tn) / 256.0, 1e-12);
    }
    EXPECT_EQ(tp_sum, correct);
    if (k == 2) {
      ImageScores img{"x", scores, counts};
      EXPECT_NEAR(*img.macro_accuracy(), static_cast<double>(correct) / 256.0, 1e-15);
    }
  }
}

TEST(Summary, Quantiles) {
  const auto s = summarize({4, 1, 3, 2});
  ASSERT_TRUE(s);
  EXPECT_DOUBLE_EQ(s->mean, 2.5);
  EXPECT_DOUBLE_EQ(s->median, 2.5);
  EXPECT_DOUBLE_EQ(s->q1, 1.75);
  EXPECT_DOUBLE_EQ(s->q3, 3.25);
  EXPECT_EQ(s->min, 1);
  EXPECT_EQ(s->max, 4);
  EXPECT_FALSE(summarize({}));
}

TEST(EvaluateModel, IdentityPredictorHeadlineIsOne) {
  const auto test = test_set(5);
  const auto report = evaluate_predictions([&] {
    std::vector<LabelMask> v;
    for (const auto& p : test) v.push_back(p.mask);
    return v;
  }(), test, 2);
  const auto h = report.headline();
  EXPECT_EQ(*h.macro_accuracy, 1.0);
  EXPECT_EQ(*h.dice, 1.0);
  EXPECT_EQ(*h.iou, 1.0);
  EXPECT_EQ(*h.sensitivity, 1.0);
}

TEST(EvaluateModel, BackgroundPredictorZeroDiceHighAccuracy) {
  std::vector<SamplePair> test;
  for (int i = 0; i < 3; ++i) test.emplace_back(GrayImage(20, 20), fixtures::random_mask(20, 20, 40 + i, 2, 0.05), "v" + std::to_string(i));
  const auto report = evaluate_model([](const GrayImage& g) { return LabelMask(g.width, g.height, 0, 2); }, test, 2);
  const auto h = report.headline();
  EXPECT_EQ(*h.dice, 0.0);
  EXPECT_GT(*h.macro_accuracy, 0.85);
  EXPECT_THROW(evaluate_model([](const GrayImage& g) { return LabelMask(g.width, g.height); }, {}, 2), Error);
}

TEST(EvaluateModel, TwoImageMeanAndPooled) {
  const auto test = test_set(2);
  const auto preds = std::vector<LabelMask>{fixtures::random_mask(16, 16, 7), fixtures::random_mask(16, 16, 8)};
  const auto r = evaluate_predictions(preds, test, 2);
  const double d0 = *r.images[0].classes[1].dice, d1 = *r.images[1].classes[1].dice;
  EXPECT_NEAR(*r.headline().dice, (d0 + d1) / 2, 1e-15);
  EXPECT_NEAR(r.aggregate(Metric::Dice, 1)->mean, (d0 + d1) / 2, 1e-15);
  auto pooled = r.images[0].counts;
  pooled += r.images[1].counts;
  const auto& k = pooled.classes[1];
  EXPECT_NEAR(*r.pooled_headline().dice, 2.0 * k.tp / (2.0 * k.tp + k.fp + k.fn), 1e-15);
}

TEST(Csv, ReportRowsAndRoundTrip) {
  const auto test = test_set(7);
  std::vector<LabelMask> preds;
  for (int i = 0; i < 7; ++i) preds.push_back(fixtures::random_mask(16, 16, 900 + i));
  const auto r = evaluate_predictions(preds, test, 2, "m");
  fixtures::TempDir dir("csv");
  emit_report_csv(r, dir / "r.csv");
  EXPECT_EQ(line_count(dir / "r.csv"), 1u + 14u + 6u * 2u);
  const auto back = read_report_csv(dir / "r.csv");
  ASSERT_EQ(back.images.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i)
    for (int c = 0; c < 2; ++c)
      for (Metric m : kMetrics) {
        const auto a = r.images[i].classes[static_cast<std::size_t>(c)].get(m);
        const auto b = back.images[i].classes[static_cast<std::size_t>(c)].get(m);
        ASSERT_EQ(a.has_value(), b.has_value());
        if (a) { EXPECT_NEAR(*a, *b, 5e-7); }
      }
}

TEST(Csv, BoxplotAndScatter) {
  const auto test = test_set(7);
  std::vector<LabelMask> pa, pb;
  for (int i = 0; i < 7; ++i) {
    pa.push_back(fixtures::random_mask(16, 16, 10 + i));
    pb.push_back(fixtures::random_mask(16, 16, 20 + i));
  }
  const auto a = evaluate_predictions(pa, test, 2, "a"), b = evaluate_predictions(pb, test, 2, "b");
  fixtures::TempDir dir("csv");
  emit_boxplot_csv({a, b}, dir / "box.csv");
  EXPECT_EQ(line_count(dir / "box.csv"), 1u + 2u * 4u * 2u * 7u);
  EXPECT_THROW(emit_boxplot_csv({}, dir / "x.csv"), Error);
  EXPECT_THROW(emit_boxplot_csv({EvalReport{}}, dir / "x.csv"), Error);

  emit_scatter_csv(a, b, dir / "sc.csv");
  EXPECT_EQ(line_count(dir / "sc.csv"), 1u + 28u);
  emit_scatter_csv(a, a, dir / "same.csv");
  std::ifstream in(dir / "same.csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto f = detail::split_csv_line(line);
    EXPECT_EQ(f[2], f[3]);
  }

  auto other = b;
  for (auto& img : other.images) img.image_id += "_x";
  try {
    emit_scatter_csv(a, other, dir / "no.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoCommonImages);
  }
}

TEST(Overlay, TintFormulaAndContour) {
  const auto img = fixtures::random_image(6, 5, 3);
  const auto pred = fixtures::random_mask(6, 5, 4);
  const auto out = overlay_prediction(img, pred);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) {
      const double g = img.at(x, y);
      const Rgb expect = pred.at(x, y) ? Rgb{0.5 * g + 0.5, 0.5 * g, 0.5 * g} : Rgb{g, g, g};
      EXPECT_NEAR(out.at(x, y).r, expect.r, 1e-15);
      EXPECT_NEAR(out.at(x, y).g, expect.g, 1e-15);
      EXPECT_NEAR(out.at(x, y).b, expect.b, 1e-15);
    }

  // empty prediction: base unchanged except the gt contour
  LabelMask gt(6, 5, 0, 2);
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 4; ++x) gt.at(x, y) = 1;
  const auto c = overlay_prediction(img, LabelMask(6, 5), &gt);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) {
      const bool border = gt.at(x, y) && (x == 1 || x == 4 || y == 1 || y == 3);
      if (border) EXPECT_EQ(c.at(x, y), (Rgb{0, 1, 0}));
      else EXPECT_EQ(c.at(x, y).r, img.at(x, y));
    }
  EXPECT_THROW(overlay_prediction(img, LabelMask(5, 5)), Error);
}

TEST(Resources, SamplerAndCsv) {
  std::vector<PhaseRecord> records;
  const int v = measure_phase(records, "fe", "train", [] {
    std::vector<char> block(32 << 20, 1);
    std::this_thread::sleep_for(std::chrono::milliseconds(120));
    return static_cast<int>(block[12345]);
  });
  EXPECT_EQ(v, 1);
  measure_phase(records, "fe", "predict", [] {});
  ASSERT_EQ(records.size(), 2u);
  EXPECT_GE(records[0].wall_seconds, 0.1);
  EXPECT_GE(records[0].peak_resident_bytes, 32u << 20);
  EXPECT_GE(records[0].samples, 2u);
  EXPECT_GE(records[1].wall_seconds, 0.0);
  fixtures::TempDir dir("res");
  emit_resource_csv(records, dir / "r.csv");
  EXPECT_EQ(line_count(dir / "r.csv"), 3u);
  EXPECT_THROW(ResourceSampler(std::chrono::milliseconds(0)), Error);
  EXPECT_THROW(ResourceSampler(std::chrono::milliseconds(200)), Error);
}

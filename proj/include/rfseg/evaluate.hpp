#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rfseg/error.hpp"
#include "rfseg/image.hpp"
#include "rfseg/parallel.hpp"
#include "rfseg/sample.hpp"

namespace rfseg {

struct ClassCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// One-vs-rest pixel counts per class.
struct ConfusionCounts {
  std::uint64_t total = 0;
  std::vector<ClassCounts> classes;

  ConfusionCounts& operator+=(const ConfusionCounts& other) {
    if (classes.size() != other.classes.size()) throw Error(ErrorCode::DimensionMismatch, "class count differs");
    total += other.total;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      classes[c].tp += other.classes[c].tp;
      classes[c].fp += other.classes[c].fp;
      classes[c].fn += other.classes[c].fn;
      classes[c].tn += other.classes[c].tn;
    }
    return *this;
  }
};

inline ConfusionCounts confusion(const LabelMask& pred, const LabelMask& gt, int n_classes) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw Error(ErrorCode::DimensionMismatch, "prediction and ground truth dimensions differ");
  if (n_classes < 2) throw Error(ErrorCode::InvalidArgument, "n_classes must be >= 2");
  const auto k = static_cast<std::size_t>(n_classes);
  std::vector<std::uint64_t> matrix(k * k, 0);  // [gt][pred]
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    if (gt.data[i] >= k || pred.data[i] >= k) throw Error(ErrorCode::InvalidArgument, "class id >= n_classes");
    ++matrix[gt.data[i] * k + pred.data[i]];
  }
  ConfusionCounts out;
  out.total = gt.data.size();
  out.classes.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += matrix[c * k + j];
      col += matrix[j * k + c];
    }
    auto& cc = out.classes[c];
    cc.tp = matrix[c * k + c];
    cc.fn = row - cc.tp;
    cc.fp = col - cc.tp;
    cc.tn = out.total - cc.tp - cc.fn - cc.fp;
  }
  return out;
}

enum class Metric { Accuracy, Dice, IoU, Sensitivity };
inline constexpr Metric kMetrics[] = {Metric::Accuracy, Metric::Dice, Metric::IoU, Metric::Sensitivity};

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::Accuracy: return "accuracy";
    case Metric::Dice: return "dice";
    case Metric::IoU: return "iou";
    case Metric::Sensitivity: return "sensitivity";
  }
  return "?";
}

/// Scores of one class; std::nullopt marks an undefined value (0 denominator).
struct ClassScores {
  std::optional<double> accuracy, dice, iou, sensitivity;

  std::optional<double> get(Metric m) const {
    switch (m) {
      case Metric::Accuracy: return accuracy;
      case Metric::Dice: return dice;
      case Metric::IoU: return iou;
      case Metric::Sensitivity: return sensitivity;
    }
    return std::nullopt;
  }
  void set(Metric m, std::optional<double> v) {
    switch (m) {
      case Metric::Accuracy: accuracy = v; break;
      case Metric::Dice: dice = v; break;
      case Metric::IoU: iou = v; break;
      case Metric::Sensitivity: sensitivity = v; break;
    }
  }
};

struct ImageScores {
  std::string image_id;
  std::vector<ClassScores> classes;
  ConfusionCounts counts;

  /// Mean over classes of the one-vs-rest accuracies.
  std::optional<double> macro_accuracy() const {
    double sum = 0.0;
    int n = 0;
    for (const auto& c : classes)
      if (c.accuracy) {
        sum += *c.accuracy;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return sum / n;
  }
};

namespace detail {
inline std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}
}  // namespace detail

inline std::vector<ClassScores> metrics(const ConfusionCounts& counts) {
  std::vector<ClassScores> out(counts.classes.size());
  for (std::size_t c = 0; c < counts.classes.size(); ++c) {
    const auto& k = counts.classes[c];
    const auto tp = static_cast<double>(k.tp), fp = static_cast<double>(k.fp);
    const auto fn = static_cast<double>(k.fn), tn = static_cast<double>(k.tn);
    out[c].accuracy = detail::ratio(tp + tn, static_cast<double>(counts.total));
    out[c].dice = detail::ratio(2.0 * tp, 2.0 * tp + fp + fn);
    out[c].iou = detail::ratio(tp, tp + fp + fn);
    out[c].sensitivity = detail::ratio(tp, tp + fn);
  }
  return out;
}

struct Summary {
  std::size_t count = 0;  // defined values
  double mean = 0, median = 0, q1 = 0, q3 = 0, min = 0, max = 0;
};

/// Quartiles use linear interpolation between order statistics.
inline std::optional<Summary> summarize(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
  };
  Summary s;
  s.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.median = quantile(0.5);
  s.q1 = quantile(0.25);
  s.q3 = quantile(0.75);
  s.min = values.front();
  s.max = values.back();
  return s;
}

struct Headline {
  std::optional<double> macro_accuracy, dice, iou, sensitivity;

  std::optional<double> get(Metric m) const {
    switch (m) {
      case Metric::Accuracy: return macro_accuracy;
      case Metric::Dice: return dice;
      case Metric::IoU: return iou;
      case Metric::Sensitivity: return sensitivity;
    }
    return std::nullopt;
  }
};

struct EvalReport {
  std::string model_label;
  int n_classes = 2;
  std::vector<ImageScores> images;

  /// Summary over images of one metric for one class; undefined values skipped.
  std::optional<Summary> aggregate(Metric m, int cls) const {
    std::vector<double> values;
    for (const auto& img : images)
      if (auto v = img.classes.at(static_cast<std::size_t>(cls)).get(m)) values.push_back(*v);
    return summarize(std::move(values));
  }

  /// Per-image value used in the headline: macro accuracy, or the foreground
  /// (class 1) score for the overlap metrics.
  static std::optional<double> headline_value(const ImageScores& img, Metric m) {
    if (m == Metric::Accuracy) return img.macro_accuracy();
    return img.classes.at(1).get(m);
  }

  /// Per-image means of the headline values.
  Headline headline() const {
    Headline h;
    for (Metric m : kMetrics) {
      std::vector<double> values;
      for (const auto& img : images)
        if (auto v = headline_value(img, m)) values.push_back(*v);
      auto s = summarize(std::move(values));
      std::optional<double> mean = s ? std::optional<double>(s->mean) : std::nullopt;
      switch (m) {
        case Metric::Accuracy: h.macro_accuracy = mean; break;
        case Metric::Dice: h.dice = mean; break;
        case Metric::IoU: h.iou = mean; break;
        case Metric::Sensitivity: h.sensitivity = mean; break;
      }
    }
    return h;
  }

  /// Headline computed from pixel counts pooled over all images.
  Headline pooled_headline() const {
    Headline h;
    if (images.empty() || images.front().counts.classes.empty()) return h;
    ConfusionCounts pooled = images.front().counts;
    for (std::size_t i = 1; i < images.size(); ++i) pooled += images[i].counts;
    const auto scores = metrics(pooled);
    ImageScores tmp{"pooled", scores, pooled};
    h.macro_accuracy = tmp.macro_accuracy();
    h.dice = scores.at(1).dice;
    h.iou = scores.at(1).iou;
    h.sensitivity = scores.at(1).sensitivity;
    return h;
  }
};

using PredictFn = std::function<LabelMask(const GrayImage&)>;

/// Scores every test pair; images keep test-set order.
inline EvalReport evaluate_model(const PredictFn& predict_fn, const std::vector<SamplePair>& test, int n_classes,
                                 std::string label = "model") {
  if (test.empty()) throw Error(ErrorCode::EmptyTestSet, "no test images");
  EvalReport report;
  report.model_label = std::move(label);
  report.n_classes = n_classes;
  report.images.resize(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    const LabelMask pred = predict_fn(test[i].image);
    auto counts = confusion(pred, test[i].mask, n_classes);
    report.images[i] = ImageScores{test[i].id, metrics(counts), std::move(counts)};
  });
  return report;
}

/// Scores already-computed predictions (e.g. masks from an external model).
inline EvalReport evaluate_predictions(const std::vector<LabelMask>& predictions, const std::vector<SamplePair>& test,
                                       int n_classes, std::string label = "external") {
  if (test.empty()) throw Error(ErrorCode::EmptyTestSet, "no test images");
  if (predictions.size() != test.size()) throw Error(ErrorCode::DimensionMismatch, "prediction count differs from test set");
  EvalReport report;
  report.model_label = std::move(label);
  report.n_classes = n_classes;
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto counts = confusion(predictions[i], test[i].mask, n_classes);
    report.images.push_back(ImageScores{test[i].id, metrics(counts), std::move(counts)});
  }
  return report;
}

// --- CSV emission -----------------------------------------------------------

namespace detail {

inline std::string fmt6(std::optional<double> v) {
  if (!v) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

inline std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

inline void finish_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace detail

/// Rows: image_id,class,accuracy,dice,iou,sensitivity per image and class,
/// then aggregate rows whose image_id is one of __mean__, __median__,
/// __q1__, __q3__, __min__, __max__.
inline void emit_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  if (report.n_classes < 2) throw Error(ErrorCode::InvalidArgument, "report has no classes");
  auto out = detail::open_csv(path);
  out << "image_id,class,accuracy,dice,iou,sensitivity\n";
  for (const auto& img : report.images)
    for (std::size_t c = 0; c < img.classes.size(); ++c) {
      const auto& s = img.classes[c];
      out << img.image_id << ',' << c << ',' << detail::fmt6(s.accuracy) << ',' << detail::fmt6(s.dice) << ','
          << detail::fmt6(s.iou) << ',' << detail::fmt6(s.sensitivity) << '\n';
    }
  const std::pair<const char*, double Summary::*> stats[] = {{"__mean__", &Summary::mean}, {"__median__", &Summary::median},
                                                             {"__q1__", &Summary::q1},     {"__q3__", &Summary::q3},
                                                             {"__min__", &Summary::min},   {"__max__", &Summary::max}};
  for (const auto& [name, member] : stats)
    for (int c = 0; c < report.n_classes; ++c) {
      out << name << ',' << c;
      for (Metric m : kMetrics) {
        const auto s = report.aggregate(m, c);
        out << ',' << detail::fmt6(s ? std::optional<double>((*s).*member) : std::nullopt);
      }
      out << '\n';
    }
  detail::finish_csv(out, path);
}

/// Reads the per-image rows of a report CSV (aggregate rows are skipped).
inline EvalReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::string line;
  if (!std::getline(in, line) || line != "image_id,class,accuracy,dice,iou,sensitivity")
    throw Error(ErrorCode::CorruptData, "not a report CSV: " + path.string());
  EvalReport report;
  report.model_label = path.stem().string();
  std::map<std::string, std::size_t> index;
  auto parse = [&](const std::string& f) -> std::optional<double> {
    if (f == "NA") return std::nullopt;
    try {
      return std::stod(f);
    } catch (const std::exception&) {
      throw Error(ErrorCode::CorruptData, "bad number in report: " + f);
    }
  };
  int max_class = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw Error(ErrorCode::CorruptData, "bad report row: " + line);
    if (f[0].rfind("__", 0) == 0) continue;
    const int cls = std::stoi(f[1]);
    if (cls < 0 || cls > 255) throw Error(ErrorCode::CorruptData, "bad class in report row: " + line);
    max_class = std::max(max_class, cls);
    auto [it, inserted] = index.try_emplace(f[0], report.images.size());
    if (inserted) report.images.push_back(ImageScores{f[0], {}, {}});
    auto& img = report.images[it->second];
    if (img.classes.size() <= static_cast<std::size_t>(cls)) img.classes.resize(static_cast<std::size_t>(cls) + 1);
    img.classes[static_cast<std::size_t>(cls)] = ClassScores{parse(f[2]), parse(f[3]), parse(f[4]), parse(f[5])};
  }
  report.n_classes = max_class + 1;
  for (auto& img : report.images) img.classes.resize(static_cast<std::size_t>(report.n_classes));
  return report;
}

/// Long format for boxplots: model,metric,class,image_id,value (defined values only).
inline void emit_boxplot_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
  if (reports.empty()) throw Error(ErrorCode::InvalidArgument, "no reports for boxplot");
  for (const auto& r : reports)
    if (r.images.empty()) throw Error(ErrorCode::EmptyTestSet, "report '" + r.model_label + "' has no images");
  auto out = detail::open_csv(path);
  out << "model,metric,class,image_id,value\n";
  for (const auto& r : reports)
    for (Metric m : kMetrics)
      for (int c = 0; c < r.n_classes; ++c)
        for (const auto& img : r.images)
          if (auto v = img.classes.at(static_cast<std::size_t>(c)).get(m))
            out << r.model_label << ',' << metric_name(m) << ',' << c << ',' << img.image_id << ',' << detail::fmt6(v)
                << '\n';
  detail::finish_csv(out, path);
}

/// Pairs headline values of two reports per common image:
/// metric,image_id,value_a,value_b. Points on value_a == value_b mean equal
/// performance.
inline void emit_scatter_csv(const EvalReport& a, const EvalReport& b, const std::filesystem::path& path) {
  std::map<std::string, const ImageScores*> in_b;
  for (const auto& img : b.images) in_b[img.image_id] = &img;
  std::vector<std::pair<const ImageScores*, const ImageScores*>> common;
  for (const auto& img : a.images)
    if (auto it = in_b.find(img.image_id); it != in_b.end()) common.emplace_back(&img, it->second);
  if (common.empty()) throw Error(ErrorCode::NoCommonImages, "reports share no image ids");
  auto out = detail::open_csv(path);
  out << "metric,image_id,value_a,value_b\n";
  for (Metric m : kMetrics)
    for (const auto& [ia, ib] : common)
      out << metric_name(m) << ',' << ia->image_id << ',' << detail::fmt6(EvalReport::headline_value(*ia, m)) << ','
          << detail::fmt6(EvalReport::headline_value(*ib, m)) << '\n';
  detail::finish_csv(out, path);
}

// --- overlays -----------------------------------------------------------

/// Gray base; predicted foreground blended 50% towards red; ground-truth
/// foreground boundary (4-neighbourhood, image edge counts as background)
/// drawn in green.
inline RgbImage overlay_prediction(const GrayImage& img, const LabelMask& pred, const LabelMask* gt = nullptr) {
  if (pred.width != img.width || pred.height != img.height ||
      (gt && (gt->width != img.width || gt->height != img.height)))
    throw Error(ErrorCode::DimensionMismatch, "overlay inputs differ in size");
  RgbImage out = to_rgb(img);
  constexpr double kAlpha = 0.5;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    if (pred.data[i] != 0) {
      Rgb& p = out.data[i];
      p = {(1 - kAlpha) * p.r + kAlpha * 1.0, (1 - kAlpha) * p.g, (1 - kAlpha) * p.b};
    }
  if (gt) {
    auto fg = [&](int x, int y) {
      return x >= 0 && y >= 0 && x < gt->width && y < gt->height && gt->at(x, y) != 0;
    };
    for (int y = 0; y < gt->height; ++y)
      for (int x = 0; x < gt->width; ++x)
        if (fg(x, y) && (!fg(x - 1, y) || !fg(x + 1, y) || !fg(x, y - 1) || !fg(x, y + 1))) out.at(x, y) = {0.0, 1.0, 0.0};
  }
  return out;
}

}  // namespace rfseg

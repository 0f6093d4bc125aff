#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfseg/augment.hpp"
#include "rfseg/dataset.hpp"
#include "rfseg/error.hpp"
#include "rfseg/features.hpp"
#include "rfseg/forest.hpp"
#include "rfseg/image.hpp"
#include "rfseg/parallel.hpp"
#include "rfseg/resource.hpp"
#include "rfseg/rng.hpp"
#include "rfseg/sample.hpp"

namespace rfseg {

// --- splitting --------------------------------------------------------------

struct DatasetSplit {
  std::vector<SamplePair> train;
  std::vector<SamplePair> test;
  std::uint64_t seed = 0;
  double ratio = 0.8;

  std::vector<ManifestEntry> manifest() const {
    std::vector<ManifestEntry> out;
    for (const auto& p : train) out.push_back({p.id, "train"});
    for (const auto& p : test) out.push_back({p.id, "test"});
    return out;
  }
};

namespace detail {

/// Seeded permutation of [0, n); the first `n_train` entries (sorted) go to
/// train, the rest (sorted) to test.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double ratio,
                                                                                    std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::InsufficientSamples, "splitting needs at least 2 pairs");
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidArgument, "split ratio must be in (0, 1)");
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(stream_seed(seed, {0x5911d}));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

inline void check_unique_ids(const std::vector<SamplePair>& pairs) {
  std::set<std::string> seen;
  for (const auto& p : pairs)
    if (!seen.insert(p.id).second) throw Error(ErrorCode::InvalidArgument, "duplicate pair id: " + p.id);
}

}  // namespace detail

/// Splits original (non-augmented) pairs: round(ratio * n) to train, clamped
/// so both sides are non-empty. Both sides keep input order.
inline DatasetSplit split_dataset(const std::vector<SamplePair>& pairs, double ratio = 0.8, std::uint64_t seed = 0) {
  for (const auto& p : pairs)
    if (p.provenance.is_augmented())
      throw Error(ErrorCode::InvalidArgument, "split_dataset expects original pairs; " + p.id + " is augmented");
  detail::check_unique_ids(pairs);
  const auto [train, test] = detail::split_indices(pairs.size(), ratio, seed);
  DatasetSplit out;
  out.seed = seed;
  out.ratio = ratio;
  for (auto i : train) out.train.push_back(pairs[i]);
  for (auto i : test) out.test.push_back(pairs[i]);
  return out;
}

/// Ids of training pairs whose root (original) id is also a test root id.
inline std::vector<std::string> leak_audit(const std::vector<SamplePair>& train, const std::vector<SamplePair>& test) {
  std::set<std::string> test_roots;
  for (const auto& p : test) test_roots.insert(p.root_id());
  std::vector<std::string> leaks;
  for (const auto& p : train)
    if (test_roots.count(p.root_id())) leaks.push_back(p.id);
  return leaks;
}

inline std::vector<std::string> leak_audit(const std::vector<SamplePair>& train, const std::vector<ManifestEntry>& manifest) {
  std::set<std::string> test_ids;
  for (const auto& e : manifest)
    if (e.split == "test") test_ids.insert(e.id);
  std::vector<std::string> leaks;
  for (const auto& p : train)
    if (test_ids.count(p.root_id())) leaks.push_back(p.id);
  return leaks;
}

// --- preprocessing chain ----------------------------------------------------

/// Componentwise maximum of the pair dimensions.
inline std::pair<int, int> max_dimensions(const std::vector<SamplePair>& pairs) {
  int w = 0, h = 0;
  for (const auto& p : pairs) {
    w = std::max(w, p.image.width);
    h = std::max(h, p.image.height);
  }
  return {w, h};
}

struct ChainOptions {
  int target_w = 512;
  int target_h = 512;
  // Pad size; 0 means the componentwise maximum over the given pairs. Pass
  // the whole-dataset maximum when train and test are processed separately.
  int pad_w = 0;
  int pad_h = 0;
  std::optional<AugmentConfig> augment;
};

/// Pad (top-left anchored, zero fill) -> augment -> resize (bilinear image,
/// nearest mask). Input images are already grayscale.
inline std::vector<SamplePair> preprocess_chain(const std::vector<SamplePair>& pairs, const ChainOptions& opts) {
  if (opts.target_w < 1 || opts.target_h < 1) throw Error(ErrorCode::InvalidArgument, "target size must be positive");
  auto [pw, ph] = max_dimensions(pairs);
  if (opts.pad_w > 0) pw = opts.pad_w;
  if (opts.pad_h > 0) ph = opts.pad_h;
  std::vector<SamplePair> padded(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto& p = pairs[i];
    padded[i] = SamplePair(pad_to(p.image, pw, ph), pad_to(p.mask, pw, ph), p.id, p.provenance);
  });
  if (opts.augment) padded = augment_dataset(padded, *opts.augment);
  parallel_for(padded.size(), [&](std::size_t i) {
    auto& p = padded[i];
    p.image = resize_bilinear(p.image, opts.target_w, opts.target_h);
    p.mask = resize_nearest(p.mask, opts.target_w, opts.target_h);
  });
  return padded;
}

inline std::vector<SamplePair> preprocess_chain(const std::vector<SamplePair>& pairs, int target_w, int target_h,
                                                std::optional<AugmentConfig> augment = std::nullopt) {
  ChainOptions opts;
  opts.target_w = target_w;
  opts.target_h = target_h;
  opts.augment = std::move(augment);
  return preprocess_chain(pairs, opts);
}

// --- trained model ----------------------------------------------------------

enum class Architecture : std::uint32_t { RfFe = 0, RfWi = 1 };

inline const char* to_string(Architecture a) { return a == Architecture::RfFe ? "rf_fe" : "rf_wi"; }

inline Architecture parse_architecture(const std::string& s) {
  if (s == "fe" || s == "rf_fe") return Architecture::RfFe;
  if (s == "wi" || s == "rf_wi") return Architecture::RfWi;
  throw Error(ErrorCode::InvalidArgument, "unknown architecture '" + s + "' (fe|wi)");
}

/// Everything prediction must reproduce from training.
struct PreprocessSettings {
  int target_w = 0, target_h = 0;  // working resolution
  int pad_w = 0, pad_h = 0;        // pad size applied before resizing (0 = none recorded)
  int window = 13;
  std::uint32_t layout_version = kFeatureLayoutVersion;
  int wi_w = 0, wi_h = 0;  // whole-image model input/output size
  int n_classes = 2;

  friend bool operator==(const PreprocessSettings&, const PreprocessSettings&) = default;
};

struct TrainingMetadata {
  double wall_seconds = 0.0;               // not persisted
  std::uint64_t peak_resident_bytes = 0;   // not persisted
  std::uint64_t n_train_images = 0;
  std::uint64_t n_samples = 0;  // feature rows (rf_fe) or images (rf_wi)
};

struct TrainedModel {
  Architecture architecture = Architecture::RfFe;
  RandomForest forest;
  PreprocessSettings preprocess;
  TrainingMetadata meta;
};

namespace detail {

inline void check_training_set(const std::vector<SamplePair>& train) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training pairs");
  const int w = train.front().image.width, h = train.front().image.height;
  for (const auto& p : train)
    if (p.image.width != w || p.image.height != h)
      throw Error(ErrorCode::DimensionMismatch, "training images must share dimensions; " + p.id + " differs");
}

inline int dataset_classes(const std::vector<SamplePair>& pairs) {
  int k = 2;
  for (const auto& p : pairs) k = std::max(k, p.mask.n_classes);
  return k;
}

inline void require(const TrainedModel& m, Architecture a) {
  if (m.architecture != a)
    throw Error(ErrorCode::ArchitectureMismatch,
                std::string("model is ") + to_string(m.architecture) + ", expected " + to_string(a));
}

inline GrayImage to_working_size(const TrainedModel& m, const GrayImage& img) {
  const auto& s = m.preprocess;
  if (img.width == s.target_w && img.height == s.target_h) return img;
  return resize_bilinear(img, s.target_w, s.target_h);
}

}  // namespace detail

/// Pixel-wise model: per-pixel feature rows sampled from every training
/// image, one single-output forest over them.
inline TrainedModel train_rf_fe(const std::vector<SamplePair>& train, const ForestParams& params,
                                const Sampling& sampling, PreprocessSettings settings = {}) {
  detail::check_training_set(train);
  const auto t0 = std::chrono::steady_clock::now();
  ResourceSampler sampler;
  sampler.start();

  TrainedModel model;
  model.architecture = Architecture::RfFe;
  settings.target_w = train.front().image.width;
  settings.target_h = train.front().image.height;
  settings.layout_version = kFeatureLayoutVersion;
  settings.wi_w = settings.wi_h = 0;
  settings.n_classes = detail::dataset_classes(train);
  model.preprocess = settings;

  std::vector<std::uint8_t> labels;
  ColumnStore x;
  {
    FeatureMatrix fm = build_feature_matrix(train, sampling, params.seed, settings.window);
    if (fm.n_rows == 0) throw Error(ErrorCode::EmptyTrainingSet, "sampling selected no pixels");
    x = ColumnStore::from_rows(fm.values, fm.n_rows, fm.n_cols);
    labels = std::move(fm.labels);
  }
  model.forest = fit_forest(x, labels, static_cast<std::uint32_t>(settings.n_classes), params);
  model.meta.n_train_images = train.size();
  model.meta.n_samples = x.n_rows;
  model.meta.peak_resident_bytes = sampler.stop();
  model.meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return model;
}

/// Per-pixel prediction at the model's working resolution.
inline LabelMask predict_rf_fe(const TrainedModel& model, const GrayImage& image) {
  detail::require(model, Architecture::RfFe);
  const auto& s = model.preprocess;
  if (s.layout_version != kFeatureLayoutVersion)
    throw Error(ErrorCode::UnsupportedVersion, "model feature layout version " + std::to_string(s.layout_version));
  const GrayImage img = detail::to_working_size(model, image);
  const SobelImage sob = sobel_magnitude(img);
  const IntegralImage ti = integral_image(img), ts = integral_image(sob);
  const std::size_t n_cols = static_cast<std::size_t>(FeatureLayout{s.window}.total_columns());
  if (n_cols != model.forest.n_cols) throw Error(ErrorCode::DimensionMismatch, "feature width differs from forest");
  LabelMask out(img.width, img.height, 0, static_cast<int>(model.forest.n_classes));
  parallel_for(static_cast<std::size_t>(img.height), [&](std::size_t row) {
    std::vector<float> feat(n_cols);
    const int y = static_cast<int>(row);
    for (int x = 0; x < img.width; ++x) {
      detail::write_pixel_features(img, ti, ts, x, y, s.window, feat.data());
      out.at(x, y) = predict(model.forest, feat);
    }
  });
  return out;
}

struct WholeImageOptions {
  int wi_w = 64, wi_h = 64;               // 0 keeps the working resolution
  std::optional<std::size_t> max_images;  // seeded cap on the training images
};

/// Seeded uniform choice of `cap` indices out of n, returned sorted.
inline std::vector<std::size_t> cap_indices(std::size_t n, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (cap >= n) return idx;
  Rng rng(stream_seed(seed, {0xc4a9}));
  for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace detail {

inline std::vector<float> whole_image_input(const GrayImage& img, int wi_w, int wi_h) {
  const GrayImage small = (img.width == wi_w && img.height == wi_h) ? img : resize_bilinear(img, wi_w, wi_h);
  return flatten_whole_image(sobel_magnitude(small));
}

}  // namespace detail

/// Whole-image model: one sample per image (flattened Sobel magnitude),
/// one multi-output forest predicting every mask pixel.
inline TrainedModel train_rf_wi(const std::vector<SamplePair>& train, const ForestParams& params,
                                const WholeImageOptions& opts = {}, PreprocessSettings settings = {}) {
  detail::check_training_set(train);
  if (opts.max_images && *opts.max_images == 0) throw Error(ErrorCode::EmptyTrainingSet, "max_images is 0");
  const auto t0 = std::chrono::steady_clock::now();
  ResourceSampler sampler;
  sampler.start();

  TrainedModel model;
  model.architecture = Architecture::RfWi;
  settings.target_w = train.front().image.width;
  settings.target_h = train.front().image.height;
  settings.wi_w = opts.wi_w > 0 ? opts.wi_w : settings.target_w;
  settings.wi_h = opts.wi_h > 0 ? opts.wi_h : settings.target_h;
  settings.n_classes = detail::dataset_classes(train);
  model.preprocess = settings;

  const auto chosen =
      cap_indices(train.size(), opts.max_images.value_or(train.size()), params.seed);
  std::vector<std::vector<float>> xs(chosen.size());
  std::vector<std::vector<std::uint8_t>> ys(chosen.size());
  parallel_for(chosen.size(), [&](std::size_t i) {
    const auto& p = train[chosen[i]];
    xs[i] = detail::whole_image_input(p.image, settings.wi_w, settings.wi_h);
    const LabelMask m =
        (p.mask.width == settings.wi_w && p.mask.height == settings.wi_h) ? p.mask
                                                                          : resize_nearest(p.mask, settings.wi_w, settings.wi_h);
    ys[i] = flatten_mask(m);
  });
  model.forest = fit_forest_multi(xs, ys, static_cast<std::uint32_t>(settings.n_classes), params);
  model.meta.n_train_images = chosen.size();
  model.meta.n_samples = chosen.size();
  model.meta.peak_resident_bytes = sampler.stop();
  model.meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return model;
}

/// Predicts at wi size, then nearest-upscales to the working resolution.
inline LabelMask predict_rf_wi(const TrainedModel& model, const GrayImage& image) {
  detail::require(model, Architecture::RfWi);
  const auto& s = model.preprocess;
  const GrayImage img = detail::to_working_size(model, image);
  const auto x = detail::whole_image_input(img, s.wi_w, s.wi_h);
  const LabelMask small = predict_multi(model.forest, x, s.wi_w, s.wi_h);
  return resize_nearest(small, s.target_w, s.target_h);
}

inline LabelMask predict_mask(const TrainedModel& model, const GrayImage& image) {
  return model.architecture == Architecture::RfFe ? predict_rf_fe(model, image) : predict_rf_wi(model, image);
}

/// Raw grayscale image -> working resolution, replaying the training chain
/// (pad to the recorded size when the image fits, then resize).
inline GrayImage prepare_image(const TrainedModel& model, const GrayImage& raw) {
  const auto& s = model.preprocess;
  GrayImage img = raw;
  if (s.pad_w >= raw.width && s.pad_h >= raw.height) img = pad_to(raw, s.pad_w, s.pad_h);
  return resize_bilinear(img, s.target_w, s.target_h);
}

inline LabelMask prepare_mask(const TrainedModel& model, const LabelMask& raw) {
  const auto& s = model.preprocess;
  LabelMask m = raw;
  if (s.pad_w >= raw.width && s.pad_h >= raw.height) m = pad_to(raw, s.pad_w, s.pad_h);
  return resize_nearest(m, s.target_w, s.target_h);
}

/// Inverse of prepare_*: working-resolution mask back to a raw w x h frame.
inline LabelMask restore_mask(const TrainedModel& model, const LabelMask& mask, int raw_w, int raw_h) {
  const auto& s = model.preprocess;
  if (s.pad_w >= raw_w && s.pad_h >= raw_h)
    return crop_top_left(resize_nearest(mask, s.pad_w, s.pad_h), raw_w, raw_h);
  return resize_nearest(mask, raw_w, raw_h);
}

// --- model file -------------------------------------------------------------
//
// Little-endian:
//   "PSMD" | u32 version = 1 | u32 architecture (0 rf_fe, 1 rf_wi)
//   u32 target_w | u32 target_h | u32 pad_w | u32 pad_h | u32 window
//   u32 layout_version | u32 wi_w | u32 wi_h | u32 n_classes
//   u64 n_train_images | u64 n_samples
//   u64 forest_bytes | PFRF forest
// Timings are left out so identical training yields identical files.

inline constexpr std::uint32_t kModelFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_model(const TrainedModel& model) {
  using detail::put_le;
  std::vector<std::uint8_t> out = {'P', 'S', 'M', 'D'};
  put_le(out, kModelFormatVersion, 4);
  put_le(out, static_cast<std::uint32_t>(model.architecture), 4);
  const auto& s = model.preprocess;
  for (int v : {s.target_w, s.target_h, s.pad_w, s.pad_h, s.window}) put_le(out, static_cast<std::uint32_t>(v), 4);
  put_le(out, s.layout_version, 4);
  for (int v : {s.wi_w, s.wi_h, s.n_classes}) put_le(out, static_cast<std::uint32_t>(v), 4);
  put_le(out, model.meta.n_train_images, 8);
  put_le(out, model.meta.n_samples, 8);
  const auto forest = serialize(model.forest);
  put_le(out, forest.size(), 8);
  out.insert(out.end(), forest.begin(), forest.end());
  return out;
}

inline TrainedModel deserialize_model(std::span<const std::uint8_t> in) {
  if (in.size() < 8) throw Error(ErrorCode::TruncatedData, "model file too short");
  if (!std::equal(in.begin(), in.begin() + 4, "PSMD")) throw Error(ErrorCode::BadMagic, "not a model file");
  std::size_t pos = 4;
  auto get = [&](int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > in.size()) throw Error(ErrorCode::TruncatedData, "model file truncated");
    return detail::get_le(in, pos, bytes);
  };
  if (const auto v = get(4); v != kModelFormatVersion)
    throw Error(ErrorCode::UnsupportedVersion, "model format version " + std::to_string(v));
  TrainedModel m;
  const auto arch = get(4);
  if (arch > 1) throw Error(ErrorCode::CorruptData, "unknown architecture tag");
  m.architecture = static_cast<Architecture>(arch);
  auto& s = m.preprocess;
  auto get_int = [&] {
    const auto v = get(4);
    if (v > 1u << 20) throw Error(ErrorCode::CorruptData, "implausible preprocess value");
    return static_cast<int>(v);
  };
  s.target_w = get_int();
  s.target_h = get_int();
  s.pad_w = get_int();
  s.pad_h = get_int();
  s.window = get_int();
  s.layout_version = static_cast<std::uint32_t>(get(4));
  s.wi_w = get_int();
  s.wi_h = get_int();
  s.n_classes = get_int();
  m.meta.n_train_images = get(8);
  m.meta.n_samples = get(8);
  const auto n = get(8);
  if (n != in.size() - pos) throw Error(n > in.size() - pos ? ErrorCode::TruncatedData : ErrorCode::CorruptData,
                                        "forest payload size mismatch");
  m.forest = deserialize(in.subspan(pos));

  const bool multi = m.forest.mode == OutputMode::Multi;
  if (s.target_w < 1 || s.target_h < 1 || multi != (m.architecture == Architecture::RfWi) ||
      static_cast<int>(m.forest.n_classes) != s.n_classes ||
      (multi && static_cast<std::uint64_t>(s.wi_w) * static_cast<std::uint64_t>(s.wi_h) != m.forest.n_outputs) ||
      (!multi && (s.window < 1 || s.window % 2 == 0)))
    throw Error(ErrorCode::CorruptData, "model header inconsistent with forest");
  return m;
}

inline void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return deserialize_model(bytes);
}

// --- end-to-end protocol ----------------------------------------------------

struct ProtocolOptions {
  double ratio = 0.8;
  std::uint64_t seed = 0;
  int target_w = 512, target_h = 512;
  std::optional<AugmentConfig> augment;
  // Literal reading: augment every image, then split the augmented set.
  // Leaky by construction; exists for comparison only.
  bool augment_before_split = false;
};

struct PreparedData {
  std::vector<SamplePair> train;  // working resolution, augmented
  std::vector<SamplePair> test;   // working resolution
  std::vector<ManifestEntry> manifest;
  int pad_w = 0, pad_h = 0;

  PreprocessSettings settings() const {
    PreprocessSettings s;
    s.pad_w = pad_w;
    s.pad_h = pad_h;
    return s;
  }
};

inline PreparedData prepare_protocol(const std::vector<SamplePair>& pairs, const ProtocolOptions& opts) {
  PreparedData out;
  std::tie(out.pad_w, out.pad_h) = max_dimensions(pairs);
  ChainOptions chain;
  chain.target_w = opts.target_w;
  chain.target_h = opts.target_h;
  chain.pad_w = out.pad_w;
  chain.pad_h = out.pad_h;
  if (opts.augment_before_split) {
    chain.augment = opts.augment;
    auto all = preprocess_chain(pairs, chain);
    detail::check_unique_ids(all);
    const auto [tr, te] = detail::split_indices(all.size(), opts.ratio, opts.seed);
    for (auto i : tr) out.train.push_back(std::move(all[i]));
    for (auto i : te) out.test.push_back(std::move(all[i]));
  } else {
    const DatasetSplit split = split_dataset(pairs, opts.ratio, opts.seed);
    chain.augment = opts.augment;
    out.train = preprocess_chain(split.train, chain);
    chain.augment.reset();
    out.test = preprocess_chain(split.test, chain);
  }
  for (const auto& p : out.train)
    if (!p.provenance.is_augmented()) out.manifest.push_back({p.id, "train"});
  for (const auto& p : out.test)
    if (!p.provenance.is_augmented()) out.manifest.push_back({p.id, "test"});
  return out;
}

}  // namespace rfseg

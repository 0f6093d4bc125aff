#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rfseg/error.hpp"
#include "rfseg/image_io.hpp"
#include "rfseg/parallel.hpp"
#include "rfseg/sample.hpp"

// On-disk layout:
//   <root>/images/<id>.{png,pgm,ppm}
//   <root>/masks/<id>.{png,pgm}     pixel value = class id

namespace rfseg {

namespace detail {

inline bool is_image_file(const std::filesystem::path& p) {
  const auto ext = lower_extension(p);
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

/// Maps stem -> file for every image file in `dir`; duplicate stems are an error.
inline std::map<std::string, std::filesystem::path> index_images(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    const auto stem = entry.path().stem().string();
    if (!out.emplace(stem, entry.path()).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate image stem '" + stem + "' in " + dir.string());
  }
  return out;
}

}  // namespace detail

struct DatasetOptions {
  int n_classes = 0;  // 0 = infer from the masks (at least 2)
  MaskValues mask_values = MaskValues::ClassIds;
};

/// Loads every image with a same-stem mask, sorted by id. Images are
/// converted to grayscale on load. All masks share the dataset's n_classes.
inline std::vector<SamplePair> load_dataset(const std::filesystem::path& root, const DatasetOptions& opts = {}) {
  const auto images_dir = root / "images", masks_dir = root / "masks";
  for (const auto& d : {root, images_dir, masks_dir})
    if (!std::filesystem::is_directory(d)) throw Error(ErrorCode::FileNotFound, "missing dataset directory: " + d.string());
  const auto images = detail::index_images(images_dir);
  const auto masks = detail::index_images(masks_dir);
  std::vector<std::string> missing;
  for (const auto& [id, _] : images)
    if (!masks.count(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(ErrorCode::FileNotFound, "images without masks: " + list);
  }
  if (images.empty()) throw Error(ErrorCode::EmptyDataset, "no images in " + images_dir.string());

  std::vector<std::string> ids;
  for (const auto& [id, _] : images) ids.push_back(id);
  std::vector<SamplePair> pairs(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    GrayImage img = load_gray(images.at(ids[i]));
    LabelMask mask = load_mask(masks.at(ids[i]), opts.n_classes, opts.mask_values);
    pairs[i] = SamplePair(std::move(img), std::move(mask), ids[i]);
  });
  if (opts.n_classes == 0) {
    int k = 2;
    for (const auto& p : pairs) k = std::max(k, p.mask.n_classes);
    for (auto& p : pairs) p.mask.n_classes = k;
  }
  return pairs;
}

inline void save_dataset(const std::vector<SamplePair>& pairs, const std::filesystem::path& root) {
  std::error_code ec;
  std::filesystem::create_directories(root / "images", ec);
  std::filesystem::create_directories(root / "masks", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create dataset directories under " + root.string());
  parallel_for(pairs.size(), [&](std::size_t i) {
    save_image(pairs[i].image, root / "images" / (pairs[i].id + ".png"));
    save_mask(pairs[i].mask, root / "masks" / (pairs[i].id + ".png"));
  });
}

// --- split manifest ---------------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::string split;  // train | test
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// One "<id> <split>" line per entry.
inline void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& e : entries) out << e.id << ' ' << e.split << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot read manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string extra;
    if (!(ls >> e.id >> e.split) || (ls >> extra) || (e.split != "train" && e.split != "test"))
      throw Error(ErrorCode::CorruptData, "bad manifest line: " + line);
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<std::string> manifest_ids(const std::vector<ManifestEntry>& entries, const std::string& split) {
  std::vector<std::string> ids;
  for (const auto& e : entries)
    if (e.split == split) ids.push_back(e.id);
  return ids;
}

/// Pairs whose id is in `ids`, in `ids` order; missing ids are reported together.
inline std::vector<SamplePair> select_pairs(const std::vector<SamplePair>& pairs, const std::vector<std::string>& ids) {
  std::map<std::string, const SamplePair*> by_id;
  for (const auto& p : pairs) by_id[p.id] = &p;
  std::vector<SamplePair> out;
  std::string missing;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      missing += (missing.empty() ? "" : ", ") + id;
    else
      out.push_back(*it->second);
  }
  if (!missing.empty()) throw Error(ErrorCode::FileNotFound, "ids not in dataset: " + missing);
  return out;
}

}  // namespace rfseg

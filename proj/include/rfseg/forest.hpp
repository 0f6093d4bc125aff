#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfseg/error.hpp"
#include "rfseg/features.hpp"
#include "rfseg/parallel.hpp"
#include "rfseg/rng.hpp"

namespace rfseg {

enum class Criterion : std::uint32_t { Entropy = 0 };
enum class OutputMode : std::uint32_t { Single = 0, Multi = 1 };

struct ForestParams {
  std::uint32_t n_trees = 100;
  std::uint32_t max_depth = 40;
  Criterion criterion = Criterion::Entropy;
  std::uint32_t mtry = 0;  // 0 = floor(sqrt(n_cols))
  bool bootstrap = true;
  std::uint32_t min_samples_split = 2;
  std::uint32_t min_samples_leaf = 1;
  std::uint64_t seed = 0;

  std::uint32_t resolved_mtry(std::size_t n_cols) const {
    if (mtry != 0) return mtry;
    auto m = static_cast<std::uint32_t>(std::sqrt(static_cast<double>(n_cols)));
    while (static_cast<std::size_t>(m + 1) * (m + 1) <= n_cols) ++m;
    while (static_cast<std::size_t>(m) * m > n_cols) --m;
    return std::max<std::uint32_t>(1, m);
  }

  void validate(std::size_t n_cols) const {
    if (n_trees < 1) throw Error(ErrorCode::InvalidArgument, "n_trees must be >= 1");
    if (max_depth < 1) throw Error(ErrorCode::InvalidArgument, "max_depth must be >= 1");
    if (min_samples_leaf < 1) throw Error(ErrorCode::InvalidArgument, "min_samples_leaf must be >= 1");
    if (n_cols == 0) throw Error(ErrorCode::InvalidArgument, "no feature columns");
    if (resolved_mtry(n_cols) > n_cols) throw Error(ErrorCode::InvalidArgument, "mtry exceeds column count");
  }

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// Shannon entropy in bits of a class-count vector; 0 for an empty vector.
inline double entropy(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

inline double entropy(std::initializer_list<std::uint64_t> counts) {
  return entropy(std::span<const std::uint64_t>(counts.begin(), counts.size()));
}

/// Split candidates whose gains differ by less than this are ties.
inline constexpr double kGainEpsilon = 1e-12;

struct TreeNode {
  bool is_leaf = true;
  std::uint32_t feature = 0;
  double threshold = 0.0;   // value <= threshold goes left
  std::uint32_t left = 0;   // node indices, splits only
  std::uint32_t right = 0;
  std::uint32_t leaf = 0;   // leaf index, leaves only

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Binary tree stored in preorder (nodes[0] is the root). Single-output
/// leaves keep weighted class counts; multi-output leaves keep one class id
/// per output.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::vector<std::uint64_t> leaf_counts;   // n_leaves x n_classes
  std::vector<std::uint16_t> leaf_outputs;  // n_leaves x n_outputs
  std::uint32_t depth = 0;
  std::uint32_t n_cols = 0;
  std::uint32_t n_classes = 2;
  OutputMode mode = OutputMode::Single;
  std::uint32_t n_outputs = 1;

  const TreeNode& find_leaf(std::span<const float> x) const {
    const TreeNode* node = &nodes[0];
    while (!node->is_leaf)
      node = &nodes[static_cast<double>(x[node->feature]) <= node->threshold ? node->left : node->right];
    return *node;
  }

  std::span<const std::uint64_t> counts(const TreeNode& leaf) const {
    return {leaf_counts.data() + static_cast<std::size_t>(leaf.leaf) * n_classes, n_classes};
  }

  std::span<const std::uint16_t> outputs(const TreeNode& leaf) const {
    return {leaf_outputs.data() + static_cast<std::size_t>(leaf.leaf) * n_outputs, n_outputs};
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf; }));
  }
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  ForestParams params;
  std::uint32_t n_cols = 0;
  std::uint32_t n_classes = 2;
  OutputMode mode = OutputMode::Single;
  std::uint32_t n_outputs = 1;
};

/// Column-major float feature table used for training.
struct ColumnStore {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<float> data;

  std::span<const float> column(std::size_t c) const { return {data.data() + c * n_rows, n_rows}; }

  static ColumnStore from_rows(std::span<const float> row_major, std::size_t n_rows, std::size_t n_cols) {
    ColumnStore cs{n_rows, n_cols, std::vector<float>(n_rows * n_cols)};
    constexpr std::size_t kBlock = 256;
    for (std::size_t r0 = 0; r0 < n_rows; r0 += kBlock) {
      const std::size_t r1 = std::min(n_rows, r0 + kBlock);
      for (std::size_t c = 0; c < n_cols; ++c)
        for (std::size_t r = r0; r < r1; ++r) {
          float v = row_major[r * n_cols + c];
          if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite feature value");
          cs.data[c * n_rows + r] = v == 0.0f ? 0.0f : v;  // folds -0 into +0
        }
    }
    return cs;
  }
};

namespace detail {

// x * log2(x) for integer x, tabulated up to the largest node weight.
class XLogX {
 public:
  explicit XLogX(std::size_t max_value) : table_(max_value + 1, 0.0) {
    for (std::size_t i = 2; i <= max_value; ++i) table_[i] = static_cast<double>(i) * std::log2(static_cast<double>(i));
  }
  double operator()(std::uint64_t x) const {
    return x < table_.size() ? table_[x] : static_cast<double>(x) * std::log2(static_cast<double>(x));
  }

 private:
  std::vector<double> table_;
};

// Maps floats to unsigned keys with the same ordering.
inline std::uint32_t sortable_key(float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  return (bits & 0x80000000u) ? ~bits : bits | 0x80000000u;
}
inline float key_value(std::uint32_t key) {
  return std::bit_cast<float>((key & 0x80000000u) ? key & 0x7fffffffu : ~key);
}

struct KeyRecord {
  std::uint32_t key;
  std::uint32_t payload;
};

// LSD radix sort on 32-bit keys (11/11/10-bit digits); passes whose digit is
// constant are skipped.
inline void radix_sort(KeyRecord* a, KeyRecord* tmp, std::size_t n) {
  if (n < 256) {
    std::sort(a, a + n, [](const KeyRecord& l, const KeyRecord& r) { return l.key < r.key; });
    return;
  }
  constexpr int kShifts[3] = {0, 11, 22};
  // All three histograms in one read pass.
  std::array<std::array<std::uint32_t, 2048>, 3> count{};
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t k = a[i].key;
    ++count[0][k & 2047u];
    ++count[1][(k >> 11) & 2047u];
    ++count[2][(k >> 22) & 2047u];
  }
  KeyRecord* src = a;
  KeyRecord* dst = tmp;
  for (int pass = 0; pass < 3; ++pass) {
    const int shift = kShifts[pass];
    auto& c = count[static_cast<std::size_t>(pass)];
    if (c[(src[0].key >> shift) & 2047u] == n) continue;
    std::uint32_t sum = 0;
    for (auto& v : c) {
      const std::uint32_t old = v;
      v = sum;
      sum += old;
    }
    for (std::size_t i = 0; i < n; ++i) dst[c[(src[i].key >> shift) & 2047u]++] = src[i];
    std::swap(src, dst);
  }
  if (src != a) std::copy(src, src + n, a);
}

struct SplitChoice {
  std::uint32_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

// Rows reaching a node with their bootstrap multiplicities.
struct WeightedRow {
  std::uint32_t row;
  std::uint32_t weight;
};

inline std::vector<std::uint32_t> draw_features(std::size_t n_cols, std::uint32_t mtry, std::uint64_t seed) {
  std::vector<std::uint32_t> all(n_cols);
  std::iota(all.begin(), all.end(), 0u);
  if (mtry >= n_cols) return all;
  Rng rng(seed);
  for (std::uint32_t i = 0; i < mtry; ++i) std::swap(all[i], all[i + rng.index(n_cols - i)]);
  all.resize(mtry);
  std::sort(all.begin(), all.end());
  return all;
}

inline std::vector<WeightedRow> bootstrap_rows(std::size_t n, bool bootstrap, std::uint64_t seed) {
  std::vector<std::uint32_t> weight(n, bootstrap ? 0u : 1u);
  if (bootstrap) {
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) ++weight[rng.index(n)];
  }
  std::vector<WeightedRow> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (weight[i] > 0) rows.push_back({static_cast<std::uint32_t>(i), weight[i]});
  return rows;
}

// Stable in-place partition of rows by column value <= threshold.
inline std::size_t partition_rows(std::span<WeightedRow> rows, std::span<const float> column, double threshold,
                                  std::vector<WeightedRow>& scratch) {
  scratch.clear();
  std::size_t out = 0;
  for (const auto& r : rows) {
    if (static_cast<double>(column[r.row]) <= threshold) rows[out++] = r;
    else scratch.push_back(r);
  }
  std::copy(scratch.begin(), scratch.end(), rows.begin() + static_cast<std::ptrdiff_t>(out));
  return out;
}

inline std::uint64_t node_path_child(std::uint64_t path, bool right) { return path * 2 + (right ? 1 : 0); }

// Single-output CART growth with entropy gain.
class SingleTreeBuilder {
 public:
  SingleTreeBuilder(const ColumnStore& x, std::span<const std::uint8_t> y, std::uint32_t n_classes,
                    const ForestParams& params, std::uint64_t tree_seed, const XLogX& xlogx)
      : x_(x), y_(y), k_(n_classes), params_(params), seed_(tree_seed), xlogx_(xlogx),
        mtry_(params.resolved_mtry(x.n_cols)) {}

  DecisionTree build(std::vector<WeightedRow> rows) {
    if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
    for (const auto& r : rows)
      if (r.weight >= (1u << 24)) throw Error(ErrorCode::InvalidArgument, "row weight too large");
    rows_ = std::move(rows);
    records_.resize(rows_.size());
    tmp_.resize(rows_.size());
    tree_ = DecisionTree{};
    tree_.n_cols = static_cast<std::uint32_t>(x_.n_cols);
    tree_.n_classes = k_;
    tree_.mode = OutputMode::Single;
    grow(0, rows_.size(), 0, 1);
    return std::move(tree_);
  }

  std::optional<SplitChoice> split_rows(std::vector<WeightedRow> rows, const std::vector<std::uint32_t>& features) {
    rows_ = std::move(rows);
    records_.resize(rows_.size());
    tmp_.resize(rows_.size());
    std::vector<std::uint64_t> counts(k_, 0);
    std::uint64_t total = 0;
    for (const auto& r : rows_) {
      counts[y_[r.row]] += r.weight;
      total += r.weight;
    }
    return best_split(0, rows_.size(), counts, total, features);
  }

 private:
  std::uint32_t grow(std::size_t begin, std::size_t end, std::uint32_t depth, std::uint64_t path) {
    std::vector<std::uint64_t> counts(k_, 0);
    std::uint64_t total = 0;
    for (std::size_t i = begin; i < end; ++i) {
      counts[y_[rows_[i].row]] += rows_[i].weight;
      total += rows_[i].weight;
    }
    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    std::optional<SplitChoice> split;
    if (depth < params_.max_depth && !pure && total >= params_.min_samples_split)
      split = best_split(begin, end, counts, total, draw_features(x_.n_cols, mtry_, stream_seed(seed_, {path})));

    const auto index = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    if (!split) {
      TreeNode& leaf = tree_.nodes[index];
      leaf.is_leaf = true;
      leaf.leaf = static_cast<std::uint32_t>(tree_.leaf_counts.size() / k_);
      tree_.leaf_counts.insert(tree_.leaf_counts.end(), counts.begin(), counts.end());
      tree_.depth = std::max(tree_.depth, depth);
      return index;
    }
    const std::size_t n_left =
        partition_rows(std::span(rows_).subspan(begin, end - begin), x_.column(split->feature), split->threshold, scratch_);
    const std::uint32_t left = grow(begin, begin + n_left, depth + 1, node_path_child(path, false));
    const std::uint32_t right = grow(begin + n_left, end, depth + 1, node_path_child(path, true));
    TreeNode& node = tree_.nodes[index];
    node.is_leaf = false;
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  double node_score(std::uint64_t total, const std::uint64_t* counts) const {
    double s = xlogx_(total);
    for (std::uint32_t c = 0; c < k_; ++c) s -= xlogx_(counts[c]);
    return s;
  }

  // Candidate features must be sorted ascending for the tie-break order.
  std::optional<SplitChoice> best_split(std::size_t begin, std::size_t end, const std::vector<std::uint64_t>& counts,
                                        std::uint64_t total, const std::vector<std::uint32_t>& features) {
    const double parent_score = node_score(total, counts.data());
    const std::size_t n = end - begin;
    std::optional<SplitChoice> best;
    std::vector<std::uint64_t> left(k_), right(k_);
    for (std::uint32_t f : features) {
      const auto column = x_.column(f);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& r = rows_[begin + i];
        records_[i] = {sortable_key(column[r.row]), (r.weight << 8) | y_[r.row]};
      }
      radix_sort(records_.data(), tmp_.data(), n);
      if (records_[0].key == records_[n - 1].key) continue;
      std::fill(left.begin(), left.end(), 0);
      std::uint64_t w_left = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::uint32_t w = records_[i].payload >> 8;
        left[records_[i].payload & 0xffu] += w;
        w_left += w;
        if (records_[i].key == records_[i + 1].key) continue;
        const std::uint64_t w_right = total - w_left;
        if (w_left < params_.min_samples_leaf || w_right < params_.min_samples_leaf) continue;
        for (std::uint32_t c = 0; c < k_; ++c) right[c] = counts[c] - left[c];
        const double gain =
            (parent_score - node_score(w_left, left.data()) - node_score(w_right, right.data())) / static_cast<double>(total);
        if (gain > kGainEpsilon && (!best || gain > best->gain + kGainEpsilon)) {
          const double lo = key_value(records_[i].key), hi = key_value(records_[i + 1].key);
          best = SplitChoice{f, (lo + hi) / 2.0, gain};
        }
      }
    }
    return best;
  }

  const ColumnStore& x_;
  std::span<const std::uint8_t> y_;
  std::uint32_t k_;
  const ForestParams& params_;
  std::uint64_t seed_;
  const XLogX& xlogx_;
  std::uint32_t mtry_;
  std::vector<WeightedRow> rows_, scratch_;
  std::vector<KeyRecord> records_, tmp_;
  DecisionTree tree_;
};

// Multi-output growth: the criterion is the mean over outputs of the
// per-output entropy gain; leaves hold the per-output majority class.
class MultiTreeBuilder {
 public:
  MultiTreeBuilder(const ColumnStore& x, std::span<const std::uint8_t> y, std::uint32_t n_outputs,
                   std::uint32_t n_classes, const ForestParams& params, std::uint64_t tree_seed, const XLogX& xlogx)
      : x_(x), y_(y), p_(n_outputs), k_(n_classes), params_(params), seed_(tree_seed), xlogx_(xlogx),
        mtry_(params.resolved_mtry(x.n_cols)) {}

  DecisionTree build(std::vector<WeightedRow> rows) {
    if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
    rows_ = std::move(rows);
    tree_ = DecisionTree{};
    tree_.n_cols = static_cast<std::uint32_t>(x_.n_cols);
    tree_.n_classes = k_;
    tree_.mode = OutputMode::Multi;
    tree_.n_outputs = p_;
    grow(0, rows_.size(), 0, 1);
    return std::move(tree_);
  }

 private:
  std::uint8_t label(std::uint32_t row, std::uint32_t output) const {
    return y_[static_cast<std::size_t>(row) * p_ + output];
  }

  std::uint32_t grow(std::size_t begin, std::size_t end, std::uint32_t depth, std::uint64_t path) {
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(p_) * k_, 0);
    std::uint64_t total = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& r = rows_[i];
      total += r.weight;
      for (std::uint32_t o = 0; o < p_; ++o) counts[static_cast<std::size_t>(o) * k_ + label(r.row, o)] += r.weight;
    }
    // Outputs already pure here stay pure in every descendant and add no gain.
    std::vector<std::uint32_t> impure;
    for (std::uint32_t o = 0; o < p_; ++o) {
      const auto* c = &counts[static_cast<std::size_t>(o) * k_];
      if (std::count_if(c, c + k_, [](auto v) { return v > 0; }) > 1) impure.push_back(o);
    }
    std::optional<SplitChoice> split;
    if (depth < params_.max_depth && !impure.empty() && total >= params_.min_samples_split)
      split = best_split(begin, end, counts, impure, total, stream_seed(seed_, {path}));

    const auto index = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    if (!split) {
      TreeNode& leaf = tree_.nodes[index];
      leaf.is_leaf = true;
      leaf.leaf = static_cast<std::uint32_t>(tree_.leaf_outputs.size() / p_);
      for (std::uint32_t o = 0; o < p_; ++o) {
        const auto* c = &counts[static_cast<std::size_t>(o) * k_];
        tree_.leaf_outputs.push_back(static_cast<std::uint16_t>(std::max_element(c, c + k_) - c));
      }
      tree_.depth = std::max(tree_.depth, depth);
      return index;
    }
    const std::size_t n_left =
        partition_rows(std::span(rows_).subspan(begin, end - begin), x_.column(split->feature), split->threshold, scratch_);
    const std::uint32_t left = grow(begin, begin + n_left, depth + 1, node_path_child(path, false));
    const std::uint32_t right = grow(begin + n_left, end, depth + 1, node_path_child(path, true));
    TreeNode& node = tree_.nodes[index];
    node.is_leaf = false;
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  std::optional<SplitChoice> best_split(std::size_t begin, std::size_t end, const std::vector<std::uint32_t>& counts,
                                        const std::vector<std::uint32_t>& impure, std::uint64_t total,
                                        std::uint64_t node_seed) {
    const std::size_t n = end - begin;
    double parent_score = 0.0;
    for (std::uint32_t o : impure) {
      parent_score += xlogx_(total);
      for (std::uint32_t c = 0; c < k_; ++c) parent_score -= xlogx_(counts[static_cast<std::size_t>(o) * k_ + c]);
    }
    const double denom = static_cast<double>(total) * static_cast<double>(p_);
    std::vector<std::uint32_t> left(counts.size());
    std::vector<std::pair<float, std::uint32_t>> order(n);
    std::optional<SplitChoice> best;
    for (std::uint32_t f : draw_features(x_.n_cols, mtry_, node_seed)) {
      const auto column = x_.column(f);
      for (std::size_t i = 0; i < n; ++i) order[i] = {column[rows_[begin + i].row], static_cast<std::uint32_t>(begin + i)};
      std::sort(order.begin(), order.end());
      if (order.front().first == order.back().first) continue;
      std::fill(left.begin(), left.end(), 0);
      std::uint64_t w_left = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto& r = rows_[order[i].second];
        w_left += r.weight;
        for (std::uint32_t o : impure) left[static_cast<std::size_t>(o) * k_ + label(r.row, o)] += r.weight;
        if (order[i].first == order[i + 1].first) continue;
        const std::uint64_t w_right = total - w_left;
        if (w_left < params_.min_samples_leaf || w_right < params_.min_samples_leaf) continue;
        double child_score = 0.0;
        const double base = xlogx_(w_left) + xlogx_(w_right);
        for (std::uint32_t o : impure) {
          child_score += base;
          const std::size_t off = static_cast<std::size_t>(o) * k_;
          for (std::uint32_t c = 0; c < k_; ++c)
            child_score -= xlogx_(left[off + c]) + xlogx_(counts[off + c] - left[off + c]);
        }
        const double gain = (parent_score - child_score) / denom;
        if (gain > kGainEpsilon && (!best || gain > best->gain + kGainEpsilon))
          best = SplitChoice{f, (static_cast<double>(order[i].first) + static_cast<double>(order[i + 1].first)) / 2.0, gain};
      }
    }
    return best;
  }

  const ColumnStore& x_;
  std::span<const std::uint8_t> y_;
  std::uint32_t p_;
  std::uint32_t k_;
  const ForestParams& params_;
  std::uint64_t seed_;
  const XLogX& xlogx_;
  std::uint32_t mtry_;
  std::vector<WeightedRow> rows_, scratch_;
  DecisionTree tree_;
};

inline std::uint64_t tree_seed(std::uint64_t seed, std::size_t t) { return stream_seed(seed, {0x7ee5, t}); }
inline std::uint64_t bootstrap_seed(std::uint64_t seed, std::size_t t) { return stream_seed(seed, {0xb0075, t}); }

inline void check_labels(std::span<const std::uint8_t> y, std::uint32_t n_classes) {
  if (n_classes < 2 || n_classes > 256) throw Error(ErrorCode::InvalidArgument, "n_classes must be in [2, 256]");
  for (auto v : y)
    if (v >= n_classes) throw Error(ErrorCode::InvalidArgument, "label out of range");
}

}  // namespace detail

using SplitChoice = detail::SplitChoice;

// --- best split (exposed for testing and reference comparisons) -------------

/// Best split over the candidate features for unit-weight rows. Thresholds
/// are midpoints between consecutive distinct values; gain is parent entropy
/// minus the size-weighted child entropies. Ties go to the lowest feature
/// index, then the lowest threshold. Empty when no split has positive gain.
inline std::optional<SplitChoice> best_split(std::span<const std::uint32_t> rows, const ColumnStore& x,
                                                     std::span<const std::uint8_t> y, std::uint32_t n_classes,
                                                     std::span<const std::uint32_t> candidate_features,
                                                     std::uint32_t min_samples_leaf = 1) {
  if (rows.size() < 2) return std::nullopt;
  detail::check_labels(y, n_classes);
  std::vector<std::uint32_t> features(candidate_features.begin(), candidate_features.end());
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  for (auto f : features)
    if (f >= x.n_cols) throw Error(ErrorCode::InvalidArgument, "feature index out of range");
  std::vector<detail::WeightedRow> weighted;
  weighted.reserve(rows.size());
  for (auto r : rows) {
    if (r >= x.n_rows) throw Error(ErrorCode::InvalidArgument, "row index out of range");
    weighted.push_back({r, 1});
  }
  ForestParams params;
  params.min_samples_leaf = min_samples_leaf;
  const detail::XLogX xlogx(rows.size());
  return detail::SingleTreeBuilder(x, y, n_classes, params, 0, xlogx).split_rows(std::move(weighted), features);
}

// --- training -------------------------------------------------------------

/// Grows one single-output tree. `weights` (optional) gives per-row
/// multiplicities; rows with weight 0 are excluded.
inline DecisionTree grow_tree(const ColumnStore& x, std::span<const std::uint8_t> y, std::uint32_t n_classes,
                              const ForestParams& params, std::uint64_t tree_seed,
                              std::span<const std::uint32_t> weights = {}) {
  if (x.n_rows == 0 || y.size() != x.n_rows) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
  params.validate(x.n_cols);
  detail::check_labels(y, n_classes);
  std::vector<detail::WeightedRow> rows;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < x.n_rows; ++i) {
    const std::uint32_t w = weights.empty() ? 1u : weights[i];
    if (w > 0) rows.push_back({static_cast<std::uint32_t>(i), w});
    total += w;
  }
  const detail::XLogX xlogx(total);
  return detail::SingleTreeBuilder(x, y, n_classes, params, tree_seed, xlogx).build(std::move(rows));
}

/// Trains n_trees independent trees; tree t uses bootstrap and feature
/// streams keyed by (params.seed, t), so the result does not depend on the
/// thread count.
inline RandomForest fit_forest(const ColumnStore& x, std::span<const std::uint8_t> y, std::uint32_t n_classes,
                               const ForestParams& params) {
  if (x.n_rows == 0 || y.size() != x.n_rows) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
  params.validate(x.n_cols);
  detail::check_labels(y, n_classes);
  RandomForest forest;
  forest.params = params;
  forest.n_cols = static_cast<std::uint32_t>(x.n_cols);
  forest.n_classes = n_classes;
  forest.mode = OutputMode::Single;
  forest.trees.resize(params.n_trees);
  const detail::XLogX xlogx(x.n_rows);
  parallel_for(params.n_trees, [&](std::size_t t) {
    auto rows = detail::bootstrap_rows(x.n_rows, params.bootstrap, detail::bootstrap_seed(params.seed, t));
    forest.trees[t] =
        detail::SingleTreeBuilder(x, y, n_classes, params, detail::tree_seed(params.seed, t), xlogx).build(std::move(rows));
  });
  return forest;
}

inline RandomForest fit_forest(const FeatureMatrix& fm, const ForestParams& params) {
  if (fm.n_rows == 0) throw Error(ErrorCode::EmptyTrainingSet, "feature matrix is empty");
  const ColumnStore x = ColumnStore::from_rows(fm.values, fm.n_rows, fm.n_cols);
  return fit_forest(x, fm.labels, static_cast<std::uint32_t>(fm.n_classes), params);
}

/// Whole-image forest: one sample per image, `features[i]` of length D and
/// `labels[i]` of length P (one class id per output pixel).
inline RandomForest fit_forest_multi(const std::vector<std::vector<float>>& features,
                                     const std::vector<std::vector<std::uint8_t>>& labels, std::uint32_t n_classes,
                                     const ForestParams& params) {
  if (features.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training images");
  if (labels.size() != features.size()) throw Error(ErrorCode::DimensionMismatch, "features/labels count differ");
  if (features.size() < 2)
    std::clog << "warning: " << to_string(ErrorCode::InsufficientSamples)
              << ": whole-image forest trained on fewer than 2 images\n";
  const std::size_t d = features.front().size();
  const std::size_t p = labels.front().size();
  if (d == 0 || p == 0) throw Error(ErrorCode::InvalidArgument, "empty feature or label vector");
  std::vector<float> rows;
  std::vector<std::uint8_t> y;
  rows.reserve(features.size() * d);
  y.reserve(features.size() * p);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != d || labels[i].size() != p)
      throw Error(ErrorCode::DimensionMismatch, "inconsistent whole-image vector lengths");
    rows.insert(rows.end(), features[i].begin(), features[i].end());
    y.insert(y.end(), labels[i].begin(), labels[i].end());
  }
  detail::check_labels(y, n_classes);
  params.validate(d);
  const ColumnStore x = ColumnStore::from_rows(rows, features.size(), d);
  RandomForest forest;
  forest.params = params;
  forest.n_cols = static_cast<std::uint32_t>(d);
  forest.n_classes = n_classes;
  forest.mode = OutputMode::Multi;
  forest.n_outputs = static_cast<std::uint32_t>(p);
  forest.trees.resize(params.n_trees);
  const detail::XLogX xlogx(x.n_rows);
  parallel_for(params.n_trees, [&](std::size_t t) {
    auto sample = detail::bootstrap_rows(x.n_rows, params.bootstrap, detail::bootstrap_seed(params.seed, t));
    forest.trees[t] = detail::MultiTreeBuilder(x, y, forest.n_outputs, n_classes, params,
                                               detail::tree_seed(params.seed, t), xlogx)
                          .build(std::move(sample));
  });
  return forest;
}

// --- prediction -----------------------------------------------------------

/// Mean of the trees' normalized leaf distributions.
inline std::vector<double> predict_proba(const RandomForest& forest, std::span<const float> x) {
  if (forest.mode != OutputMode::Single) throw Error(ErrorCode::InvalidArgument, "predict_proba needs a single-output forest");
  if (x.size() != forest.n_cols) throw Error(ErrorCode::DimensionMismatch, "feature vector length mismatch");
  std::vector<double> proba(forest.n_classes, 0.0);
  for (const auto& tree : forest.trees) {
    const auto counts = tree.counts(tree.find_leaf(x));
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) continue;
    for (std::size_t c = 0; c < counts.size(); ++c) proba[c] += static_cast<double>(counts[c]) / static_cast<double>(total);
  }
  for (double& p : proba) p /= static_cast<double>(forest.trees.size());
  return proba;
}

/// Argmax of predict_proba; ties go to the lowest class id.
inline std::uint8_t predict(const RandomForest& forest, std::span<const float> x) {
  const auto proba = predict_proba(forest, x);
  return static_cast<std::uint8_t>(std::max_element(proba.begin(), proba.end()) - proba.begin());
}

/// Per-output majority vote across trees (lowest id on ties), shaped as a mask.
inline LabelMask predict_multi(const RandomForest& forest, std::span<const float> x, int width, int height) {
  if (forest.mode != OutputMode::Multi) throw Error(ErrorCode::InvalidArgument, "predict_multi needs a multi-output forest");
  if (x.size() != forest.n_cols) throw Error(ErrorCode::DimensionMismatch, "feature vector length mismatch");
  if (static_cast<std::size_t>(width) * height != forest.n_outputs)
    throw Error(ErrorCode::DimensionMismatch, "mask shape does not match forest outputs");
  std::vector<std::uint32_t> votes(static_cast<std::size_t>(forest.n_outputs) * forest.n_classes, 0);
  for (const auto& tree : forest.trees) {
    const auto out = tree.outputs(tree.find_leaf(x));
    for (std::uint32_t o = 0; o < forest.n_outputs; ++o) ++votes[static_cast<std::size_t>(o) * forest.n_classes + out[o]];
  }
  std::vector<std::uint8_t> ids(forest.n_outputs);
  for (std::uint32_t o = 0; o < forest.n_outputs; ++o) {
    const auto* v = &votes[static_cast<std::size_t>(o) * forest.n_classes];
    ids[o] = static_cast<std::uint8_t>(std::max_element(v, v + forest.n_classes) - v);
  }
  return LabelMask(width, height, std::move(ids), static_cast<int>(forest.n_classes));
}

// --- PFRF serialization ---------------------------------------------------
//
// Little-endian:
//   "PFRF" | u32 version = 1
//   params: u32 n_trees | u32 max_depth | u32 criterion | u32 mtry | u8 bootstrap
//           | u32 min_samples_split | u32 min_samples_leaf | u64 seed
//   u32 n_cols | u32 n_classes | u32 output_mode (0 single, 1 multi) | u32 n_outputs
//   u32 tree_count, then per tree: u32 node_count and the nodes in preorder:
//     u8 tag 0 (split): u32 feature | f64 threshold
//     u8 tag 1 (leaf):  n_classes x u64 counts (single) | n_outputs x u16 class ids (multi)

inline constexpr std::uint32_t kForestFormatVersion = 1;

namespace detail {

inline void serialize_subtree(const DecisionTree& tree, std::uint32_t index, std::vector<std::uint8_t>& out) {
  const TreeNode& node = tree.nodes[index];
  if (node.is_leaf) {
    out.push_back(1);
    if (tree.mode == OutputMode::Single) {
      for (auto c : tree.counts(node)) put_le(out, c, 8);
    } else {
      for (auto c : tree.outputs(node)) put_le(out, c, 2);
    }
    return;
  }
  out.push_back(0);
  put_le(out, node.feature, 4);
  put_le(out, std::bit_cast<std::uint64_t>(node.threshold), 8);
  serialize_subtree(tree, node.left, out);
  serialize_subtree(tree, node.right, out);
}

class TreeReader {
 public:
  TreeReader(std::span<const std::uint8_t> in, std::size_t& pos, DecisionTree& tree, std::uint32_t node_budget)
      : in_(in), pos_(pos), tree_(tree), budget_(node_budget) {}

  std::uint32_t read(std::uint32_t depth) {
    if (tree_.nodes.size() >= budget_) throw Error(ErrorCode::CorruptData, "tree has more nodes than declared");
    if (depth > 4096) throw Error(ErrorCode::CorruptData, "tree too deep");
    const auto tag = get_le(in_, pos_, 1);
    const auto index = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    if (tag == 1) {
      TreeNode& leaf = tree_.nodes[index];
      leaf.is_leaf = true;
      if (tree_.mode == OutputMode::Single) {
        leaf.leaf = static_cast<std::uint32_t>(tree_.leaf_counts.size() / tree_.n_classes);
        for (std::uint32_t c = 0; c < tree_.n_classes; ++c) tree_.leaf_counts.push_back(get_le(in_, pos_, 8));
      } else {
        leaf.leaf = static_cast<std::uint32_t>(tree_.leaf_outputs.size() / tree_.n_outputs);
        for (std::uint32_t o = 0; o < tree_.n_outputs; ++o) {
          const auto id = static_cast<std::uint16_t>(get_le(in_, pos_, 2));
          if (id >= tree_.n_classes) throw Error(ErrorCode::CorruptData, "leaf class id out of range");
          tree_.leaf_outputs.push_back(id);
        }
      }
      tree_.depth = std::max(tree_.depth, depth);
      return index;
    }
    if (tag != 0) throw Error(ErrorCode::CorruptData, "unknown node tag");
    const auto feature = static_cast<std::uint32_t>(get_le(in_, pos_, 4));
    const double threshold = std::bit_cast<double>(get_le(in_, pos_, 8));
    if (feature >= tree_.n_cols) throw Error(ErrorCode::CorruptData, "split feature out of range");
    const std::uint32_t left = read(depth + 1);
    const std::uint32_t right = read(depth + 1);
    TreeNode& node = tree_.nodes[index];
    node.is_leaf = false;
    node.feature = feature;
    node.threshold = threshold;
    node.left = left;
    node.right = right;
    return index;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t& pos_;
  DecisionTree& tree_;
  std::uint32_t budget_;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const RandomForest& forest) {
  std::vector<std::uint8_t> out{'P', 'F', 'R', 'F'};
  using detail::put_le;
  put_le(out, kForestFormatVersion, 4);
  const ForestParams& p = forest.params;
  put_le(out, p.n_trees, 4);
  put_le(out, p.max_depth, 4);
  put_le(out, static_cast<std::uint32_t>(p.criterion), 4);
  put_le(out, p.mtry, 4);
  put_le(out, p.bootstrap ? 1 : 0, 1);
  put_le(out, p.min_samples_split, 4);
  put_le(out, p.min_samples_leaf, 4);
  put_le(out, p.seed, 8);
  put_le(out, forest.n_cols, 4);
  put_le(out, forest.n_classes, 4);
  put_le(out, static_cast<std::uint32_t>(forest.mode), 4);
  put_le(out, forest.n_outputs, 4);
  put_le(out, forest.trees.size(), 4);
  for (const auto& tree : forest.trees) {
    put_le(out, tree.nodes.size(), 4);
    detail::serialize_subtree(tree, 0, out);
  }
  return out;
}

inline RandomForest deserialize(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), "PFRF", 4) != 0) throw Error(ErrorCode::BadMagic, "not a PFRF model");
  std::size_t pos = 4;
  using detail::get_le;
  const auto version = get_le(in, pos, 4);
  if (version != kForestFormatVersion)
    throw Error(ErrorCode::UnsupportedVersion, "PFRF version " + std::to_string(version));
  RandomForest forest;
  ForestParams& p = forest.params;
  p.n_trees = static_cast<std::uint32_t>(get_le(in, pos, 4));
  p.max_depth = static_cast<std::uint32_t>(get_le(in, pos, 4));
  const auto criterion = get_le(in, pos, 4);
  if (criterion != 0) throw Error(ErrorCode::CorruptData, "unknown split criterion");
  p.criterion = Criterion::Entropy;
  p.mtry = static_cast<std::uint32_t>(get_le(in, pos, 4));
  p.bootstrap = get_le(in, pos, 1) != 0;
  p.min_samples_split = static_cast<std::uint32_t>(get_le(in, pos, 4));
  p.min_samples_leaf = static_cast<std::uint32_t>(get_le(in, pos, 4));
  p.seed = get_le(in, pos, 8);
  forest.n_cols = static_cast<std::uint32_t>(get_le(in, pos, 4));
  forest.n_classes = static_cast<std::uint32_t>(get_le(in, pos, 4));
  const auto mode = get_le(in, pos, 4);
  forest.n_outputs = static_cast<std::uint32_t>(get_le(in, pos, 4));
  if (mode > 1) throw Error(ErrorCode::CorruptData, "unknown output mode");
  forest.mode = static_cast<OutputMode>(mode);
  if (forest.n_classes < 2 || forest.n_classes > 256 || forest.n_cols == 0 || forest.n_outputs == 0 ||
      (forest.mode == OutputMode::Single && forest.n_outputs != 1))
    throw Error(ErrorCode::CorruptData, "invalid forest header");
  const auto tree_count = get_le(in, pos, 4);
  if (tree_count != p.n_trees) throw Error(ErrorCode::CorruptData, "tree count does not match parameters");
  forest.trees.reserve(tree_count);
  for (std::uint64_t t = 0; t < tree_count; ++t) {
    const auto node_count = static_cast<std::uint32_t>(get_le(in, pos, 4));
    DecisionTree tree;
    tree.n_cols = forest.n_cols;
    tree.n_classes = forest.n_classes;
    tree.mode = forest.mode;
    tree.n_outputs = forest.n_outputs;
    tree.nodes.reserve(std::min<std::uint32_t>(node_count, 1u << 20));
    detail::TreeReader(in, pos, tree, node_count).read(0);
    if (tree.nodes.size() != node_count) throw Error(ErrorCode::CorruptData, "node count mismatch");
    forest.trees.push_back(std::move(tree));
  }
  if (pos != in.size()) throw Error(ErrorCode::CorruptData, "trailing bytes after forest");
  return forest;
}

}  // namespace rfseg

#pragma once

// Bagged ensemble of depth-limited binary CART trees (Gini criterion).
//
// Pinned choices: bootstrap sampling of n rows per tree, floor(sqrt(width))
// candidate features per node drawn without replacement, min_samples_split
// = 2, soft vote (mean leaf TP fraction), and threshold ties resolving to
// TP. Every tree draws from its own stream derived from (seed, tree index),
// so training is reproducible bit for bit.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "alert_sift/error.hpp"
#include "alert_sift/features.hpp"
#include "alert_sift/rng.hpp"

namespace alert_sift {

inline constexpr int kModelFormatVersion = 1;

struct ForestParams {
  std::size_t n_estimators = 100;
  std::size_t max_depth = 6;
  /// Candidate features per node; unset means floor(sqrt(width)).
  std::optional<std::size_t> max_features;
  std::size_t min_samples_split = 2;
  std::uint64_t seed = 42;

  void validate() const {
    if (n_estimators < 1) throw ValidationError("n_estimators must be positive");
    if (max_depth < 1) throw ValidationError("max_depth must be positive");
    if (max_features && *max_features < 1) throw ValidationError("max_features must be positive");
    if (min_samples_split < 2) throw ValidationError("min_samples_split must be at least 2");
  }

  std::size_t candidates_for(std::size_t width) const {
    const std::size_t rule = max_features ? *max_features
                                          : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(width))));
    return std::clamp<std::size_t>(rule, 1, std::max<std::size_t>(width, 1));
  }

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// Class counts at a node. Under bagging these are bootstrap multiplicities.
struct ClassCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;

  std::uint64_t total() const noexcept { return tp + fp; }
  double tp_fraction() const noexcept { return total() ? static_cast<double>(tp) / static_cast<double>(total()) : 0.0; }

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

inline double gini(ClassCounts c) {
  if (c.total() == 0) throw ValidationError("gini of an empty node");
  const double n = static_cast<double>(c.total());
  const double p = static_cast<double>(c.tp) / n;
  const double q = static_cast<double>(c.fp) / n;
  return 1.0 - p * p - q * q;
}

/// Node of a flattened tree. A node with `feature < 0` is a leaf; otherwise
/// rows with value <= threshold go to `left`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  ClassCounts counts;

  bool is_leaf() const noexcept { return feature < 0; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// A tree stored as a node array with the root at index 0.
struct Tree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(std::span<const double> x) const {
    const TreeNode* node = &nodes.front();
    while (!node->is_leaf())
      node = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] <= node->threshold
                                                 ? node->left
                                                 : node->right)];
    return *node;
  }

  /// Longest root-to-leaf path, counted in edges.
  std::size_t depth() const { return nodes.empty() ? 0 : depth_from(0); }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  std::size_t depth_from(int i) const {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

/// Read-only view of training data: rows, labels (1 = TP), and the sample
/// multiset (row indices, repeats allowed) a node is grown from.
struct TrainingView {
  const std::vector<std::vector<double>>& rows;
  const std::vector<int>& labels;

  std::size_t width() const noexcept { return rows.empty() ? 0 : rows.front().size(); }

  ClassCounts count(std::span<const std::size_t> samples) const {
    ClassCounts c;
    for (const auto i : samples) (labels[i] == 1 ? c.tp : c.fp) += 1;
    return c;
  }
};

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double decrease = 0.0;
};

/// Decreases closer than this are treated as ties.
inline constexpr double kSplitTieTolerance = 1e-12;

/// Impurity decrease of splitting `parent` into `left` and the remainder.
inline double gini_decrease(ClassCounts parent, ClassCounts left) {
  const ClassCounts right{parent.tp - left.tp, parent.fp - left.fp};
  const double n = static_cast<double>(parent.total());
  return gini(parent) - static_cast<double>(left.total()) / n * gini(left) -
         static_cast<double>(right.total()) / n * gini(right);
}

/// Midpoint threshold between consecutive distinct values, nudged down when
/// rounding would land it on the upper value.
inline double midpoint(double lo, double hi) {
  const double m = lo + (hi - lo) / 2.0;
  return m >= hi ? lo : m;
}

/// Best Gini split over the candidate features. Thresholds are midpoints
/// between consecutive distinct values. Ties go to the lower feature index,
/// then the lower threshold. Returns nullopt if no split lowers impurity.
inline std::optional<Split> best_split(const TrainingView& data, std::span<const std::size_t> samples,
                                       std::vector<std::size_t> candidate_features) {
  if (samples.empty()) return std::nullopt;
  std::sort(candidate_features.begin(), candidate_features.end());
  const ClassCounts parent = data.count(samples);
  if (parent.tp == 0 || parent.fp == 0) return std::nullopt;

  std::optional<Split> best;
  std::vector<std::size_t> order(samples.begin(), samples.end());
  for (const auto f : candidate_features) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.rows[a][f] < data.rows[b][f]; });
    ClassCounts left;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      (data.labels[order[i]] == 1 ? left.tp : left.fp) += 1;
      const double lo = data.rows[order[i]][f];
      const double hi = data.rows[order[i + 1]][f];
      if (!(lo < hi)) continue;
      const double decrease = gini_decrease(parent, left);
      if (decrease > kSplitTieTolerance && (!best || decrease > best->decrease + kSplitTieTolerance))
        best = Split{f, midpoint(lo, hi), decrease};
    }
  }
  return best;
}

namespace detail {

inline std::vector<std::size_t> draw_candidates(std::size_t width, std::size_t count, Rng& rng) {
  std::vector<std::size_t> all(width);
  for (std::size_t i = 0; i < width; ++i) all[i] = i;
  if (count >= width) return all;
  for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + rng.below(width - i)]);
  all.resize(count);
  return all;
}

inline int grow_node(const TrainingView& data, std::vector<std::size_t> samples, const ForestParams& params,
                     std::size_t depth, Rng& rng, Tree& tree) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(TreeNode{});
  const ClassCounts counts = data.count(samples);
  tree.nodes.back().counts = counts;

  if (depth >= params.max_depth || counts.tp == 0 || counts.fp == 0 || samples.size() < params.min_samples_split)
    return id;
  const auto candidates = draw_candidates(data.width(), params.candidates_for(data.width()), rng);
  const auto split = best_split(data, samples, candidates);
  if (!split) return id;

  std::vector<std::size_t> left, right;
  for (const auto i : samples) (data.rows[i][split->feature] <= split->threshold ? left : right).push_back(i);
  assert(!left.empty() && !right.empty() && left.size() + right.size() == samples.size());
  samples.clear();
  samples.shrink_to_fit();

  const int l = grow_node(data, std::move(left), params, depth + 1, rng, tree);
  const int r = grow_node(data, std::move(right), params, depth + 1, rng, tree);
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  node.feature = static_cast<int>(split->feature);
  node.threshold = split->threshold;
  node.left = l;
  node.right = r;
  assert(tree.nodes[static_cast<std::size_t>(l)].counts.total() + tree.nodes[static_cast<std::size_t>(r)].counts.total() ==
         node.counts.total());
  return id;
}

}  // namespace detail

/// Grows one tree on the sample multiset. Nodes are numbered depth-first,
/// left subtree first.
inline Tree grow_tree(const TrainingView& data, std::vector<std::size_t> samples, const ForestParams& params, Rng& rng) {
  if (samples.empty()) throw ValidationError("cannot grow a tree from no samples");
  Tree tree;
  detail::grow_node(data, std::move(samples), params, 0, rng, tree);
  return tree;
}

struct Forest {
  std::vector<Tree> trees;
  ForestParams params;
  FeatureProfile profile = FeatureProfile::Core20;
  std::vector<std::string> feature_names;

  std::size_t width() const noexcept { return feature_names.size(); }

  void check_width(std::span<const double> x) const {
    if (x.size() != width())
      throw ValidationError("vector width " + std::to_string(x.size()) + " does not match model width " +
                            std::to_string(width()));
  }

  friend bool operator==(const Forest&, const Forest&) = default;
};

inline Forest train_forest(const FeatureMatrix& data, const ForestParams& params = {},
                           FeatureProfile profile = FeatureProfile::Core20) {
  params.validate();
  data.validate();
  if (data.size() < 2) throw ValidationError("training needs at least two rows");
  const auto tp = std::count(data.labels.begin(), data.labels.end(), 1);
  if (tp == 0 || tp == static_cast<std::ptrdiff_t>(data.size()))
    throw ValidationError("training data must contain both classes");

  const TrainingView view{data.rows, data.labels};
  Forest forest{{}, params, profile, data.names};
  forest.trees.reserve(params.n_estimators);
  const std::size_t n = data.size();
  for (std::size_t t = 0; t < params.n_estimators; ++t) {
    Rng rng(derive_seed(params.seed, t));
    std::vector<std::size_t> bootstrap(n);
    for (auto& i : bootstrap) i = static_cast<std::size_t>(rng.below(n));
    forest.trees.push_back(grow_tree(view, std::move(bootstrap), params, rng));
  }
  return forest;
}

/// Mean over trees of the TP fraction at the leaf reached by `x`.
inline double predict_proba(const Forest& forest, std::span<const double> x) {
  forest.check_width(x);
  if (forest.trees.empty()) throw ValidationError("forest has no trees");
  double sum = 0;
  for (const auto& t : forest.trees) sum += t.leaf_for(x).counts.tp_fraction();
  return sum / static_cast<double>(forest.trees.size());
}

inline Label predict(const Forest& forest, std::span<const double> x, double threshold = 0.5) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
  return predict_proba(forest, x) >= threshold ? Label::TP : Label::FP;
}

// ---- persistence ---------------------------------------------------------

namespace detail {

inline nlohmann::json node_to_json(const Tree& tree, int i) {
  const auto& n = tree.nodes[static_cast<std::size_t>(i)];
  nlohmann::json j;
  j["counts"] = {n.counts.tp, n.counts.fp};
  if (!n.is_leaf()) {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = node_to_json(tree, n.left);
    j["right"] = node_to_json(tree, n.right);
  }
  return j;
}

inline int node_from_json(const nlohmann::json& j, Tree& tree, std::size_t width) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(TreeNode{});
  const auto& counts = j.at("counts");
  if (!counts.is_array() || counts.size() != 2) throw ParseError("node counts must be [tp, fp]");
  ClassCounts c{counts[0].get<std::uint64_t>(), counts[1].get<std::uint64_t>()};
  tree.nodes.back().counts = c;
  if (j.contains("feature")) {
    const int feature = j.at("feature").get<int>();
    if (feature < 0 || static_cast<std::size_t>(feature) >= width) throw ParseError("node feature out of range");
    const double threshold = j.at("threshold").get<double>();
    const int l = node_from_json(j.at("left"), tree, width);
    const int r = node_from_json(j.at("right"), tree, width);
    auto& n = tree.nodes[static_cast<std::size_t>(id)];
    n.feature = feature;
    n.threshold = threshold;
    n.left = l;
    n.right = r;
  } else if (c.total() == 0) {
    throw ParseError("leaf with no samples");
  }
  return id;
}

}  // namespace detail

inline nlohmann::json forest_to_json(const Forest& f) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["params"] = {{"n_estimators", f.params.n_estimators},
                 {"max_depth", f.params.max_depth},
                 {"max_features", f.params.max_features ? nlohmann::json(*f.params.max_features) : nlohmann::json()},
                 {"min_samples_split", f.params.min_samples_split},
                 {"seed", f.params.seed}};
  j["profile"] = to_string(f.profile);
  j["feature_names"] = f.feature_names;
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const auto& t : f.trees) trees.push_back(detail::node_to_json(t, 0));
  return j;
}

inline Forest forest_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("format_version")) throw ParseError("model has no format_version");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw ParseError("unsupported model format_version " + std::to_string(version));
    Forest f;
    const auto& p = j.at("params");
    f.params.n_estimators = p.at("n_estimators").get<std::size_t>();
    f.params.max_depth = p.at("max_depth").get<std::size_t>();
    if (!p.at("max_features").is_null()) f.params.max_features = p.at("max_features").get<std::size_t>();
    f.params.min_samples_split = p.at("min_samples_split").get<std::size_t>();
    f.params.seed = p.at("seed").get<std::uint64_t>();
    f.profile = parse_profile(j.at("profile").get<std::string>());
    f.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& tj : j.at("trees")) {
      Tree t;
      detail::node_from_json(tj, t, f.feature_names.size());
      f.trees.push_back(std::move(t));
    }
    if (f.trees.size() != f.params.n_estimators) throw ParseError("tree count does not match n_estimators");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad model document: ") + e.what());
  }
}

}  // namespace alert_sift

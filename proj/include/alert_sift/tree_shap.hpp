#pragma once

// Exact path-dependent Shapley attributions for forest predictions.
//
// The conditional expectation of a tree given a feature subset S follows x
// at nodes that split on a feature in S and otherwise averages both
// children weighted by their training cover. Shapley values of that set
// function are computed in polynomial time by tracking, along each
// root-to-leaf path, the proportion of subsets of every size that reach the
// leaf (Lundberg et al.'s TreeSHAP recursion).

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alert_sift/forest.hpp"

namespace alert_sift {

struct Attribution {
  double base_value = 0.0;
  std::vector<double> phi;

  double total() const { return std::accumulate(phi.begin(), phi.end(), base_value); }
};

namespace detail {

struct PathElement {
  int feature;
  double zero_fraction;  // share of cover flowing here when the feature is unknown
  double one_fraction;   // 1 if x follows this branch, else 0
  double weight;
};

// Grows the subset-size weights by one feature.
inline void extend_path(std::vector<PathElement>& path, double zero_fraction, double one_fraction, int feature) {
  const std::size_t depth = path.size();
  path.push_back({feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0});
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) / d1;
    path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) / d1;
  }
}

// Inverse of extend_path for element `index`; removes it from the path.
inline void unwind_path(std::vector<PathElement>& path, std::size_t index) {
  const std::size_t depth = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next = path[depth].weight;
  for (std::size_t j = depth; j-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[j].weight;
      path[j].weight = next * d1 / (static_cast<double>(j + 1) * one);
      next = tmp - path[j].weight * zero * static_cast<double>(depth - j) / d1;
    } else {
      path[j].weight = path[j].weight * d1 / (zero * static_cast<double>(depth - j));
    }
  }
  for (std::size_t j = index; j < depth; ++j) {
    path[j].feature = path[j + 1].feature;
    path[j].zero_fraction = path[j + 1].zero_fraction;
    path[j].one_fraction = path[j + 1].one_fraction;
  }
  path.pop_back();
}

// Total weight the path would have with element `index` unwound.
inline double unwound_sum(const std::vector<PathElement>& path, std::size_t index) {
  const std::size_t depth = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next = path[depth].weight;
  double total = 0.0;
  for (std::size_t j = depth; j-- > 0;) {
    if (one != 0.0) {
      const double tmp = next * d1 / (static_cast<double>(j + 1) * one);
      total += tmp;
      next = path[j].weight - tmp * zero * static_cast<double>(depth - j) / d1;
    } else {
      total += path[j].weight / zero * d1 / static_cast<double>(depth - j);
    }
  }
  return total;
}

inline void shap_recurse(const Tree& tree, int node_id, std::span<const double> x, std::vector<PathElement> path,
                         double zero_fraction, double one_fraction, int feature, std::vector<double>& phi) {
  extend_path(path, zero_fraction, one_fraction, feature);
  const auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
  if (node.is_leaf()) {
    const double value = node.counts.tp_fraction();
    for (std::size_t i = 1; i < path.size(); ++i) {
      const double w = unwound_sum(path, i);
      phi[static_cast<std::size_t>(path[i].feature)] += w * (path[i].one_fraction - path[i].zero_fraction) * value;
    }
    return;
  }
  const bool go_left = x[static_cast<std::size_t>(node.feature)] <= node.threshold;
  const int hot = go_left ? node.left : node.right;
  const int cold = go_left ? node.right : node.left;
  const double cover = static_cast<double>(node.counts.total());
  const double hot_cover = static_cast<double>(tree.nodes[static_cast<std::size_t>(hot)].counts.total());
  const double cold_cover = static_cast<double>(tree.nodes[static_cast<std::size_t>(cold)].counts.total());

  // A feature already on the path is merged rather than counted twice.
  double incoming_zero = 1.0, incoming_one = 1.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (path[k].feature == node.feature) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, k);
      break;
    }
  }
  shap_recurse(tree, hot, x, path, incoming_zero * hot_cover / cover, incoming_one, node.feature, phi);
  shap_recurse(tree, cold, x, std::move(path), incoming_zero * cold_cover / cover, 0.0, node.feature, phi);
}

}  // namespace detail

/// Cover-weighted mean leaf value: the tree's output with nothing known.
inline double expected_value(const Tree& tree) {
  double weighted = 0.0;
  for (const auto& n : tree.nodes)
    if (n.is_leaf()) weighted += static_cast<double>(n.counts.total()) * n.counts.tp_fraction();
  return weighted / static_cast<double>(tree.nodes.front().counts.total());
}

/// Shapley values of one tree's output at x, added into `phi`.
inline void tree_shap(const Tree& tree, std::span<const double> x, std::vector<double>& phi) {
  detail::shap_recurse(tree, 0, x, {}, 1.0, 1.0, -1, phi);
}

/// Attribution of predict_proba(forest, x): base_value + sum(phi) equals the
/// prediction up to rounding.
inline Attribution tree_shap(const Forest& forest, std::span<const double> x) {
  forest.check_width(x);
  Attribution a{0.0, std::vector<double>(forest.width(), 0.0)};
  for (const auto& t : forest.trees) {
    a.base_value += expected_value(t);
    tree_shap(t, x, a.phi);
  }
  const double n = static_cast<double>(forest.trees.size());
  a.base_value /= n;
  for (auto& p : a.phi) p /= n;
  return a;
}

struct FeatureImportance {
  std::string feature;
  std::size_t index;
  double mean_abs_shap;
};

/// Mean |phi| per feature over all rows, highest first (ties by index).
inline std::vector<FeatureImportance> global_importance(const Forest& forest,
                                                        const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ValidationError("importance needs at least one row");
  std::vector<double> sums(forest.width(), 0.0);
  for (const auto& r : rows) {
    const auto a = tree_shap(forest, r);
    for (std::size_t j = 0; j < sums.size(); ++j) sums[j] += std::abs(a.phi[j]);
  }
  std::vector<FeatureImportance> out;
  for (std::size_t j = 0; j < sums.size(); ++j)
    out.push_back({forest.feature_names[j], j, sums[j] / static_cast<double>(rows.size())});
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.mean_abs_shap > b.mean_abs_shap; });
  return out;
}

}  // namespace alert_sift

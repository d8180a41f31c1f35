#pragma once

// Slow, obviously-correct reference computations used only by tests. None of
// these call into the code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "alert_sift/forest.hpp"

namespace alert_sift::oracle {

inline long double gini_of(long double tp, long double fp) {
  const long double n = tp + fp;
  return 1.0L - (tp / n) * (tp / n) - (fp / n) * (fp / n);
}

struct OracleSplit {
  std::size_t feature;
  double threshold;
  long double decrease;
};

/// Every (feature, midpoint threshold) pair, scored by direct counting.
inline std::vector<OracleSplit> all_splits(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                                           const std::vector<std::size_t>& samples,
                                           const std::vector<std::size_t>& features) {
  long double ptp = 0, pfp = 0;
  for (auto i : samples) (labels[i] ? ptp : pfp) += 1;
  std::vector<OracleSplit> out;
  for (auto f : features) {
    std::set<double> distinct;
    for (auto i : samples) distinct.insert(rows[i][f]);
    std::vector<double> values(distinct.begin(), distinct.end());
    for (std::size_t v = 0; v + 1 < values.size(); ++v) {
      const double t = values[v] + (values[v + 1] - values[v]) / 2.0;
      long double ltp = 0, lfp = 0, rtp = 0, rfp = 0;
      for (auto i : samples) {
        if (rows[i][f] <= t) (labels[i] ? ltp : lfp) += 1;
        else (labels[i] ? rtp : rfp) += 1;
      }
      const long double n = ptp + pfp;
      const long double dec = gini_of(ptp, pfp) - (ltp + lfp) / n * gini_of(ltp, lfp) - (rtp + rfp) / n * gini_of(rtp, rfp);
      out.push_back({f, t, dec});
    }
  }
  return out;
}

/// Exhaustive optimum with ties to (lower feature, lower threshold).
inline std::optional<OracleSplit> exhaustive_best_split(const std::vector<std::vector<double>>& rows,
                                                        const std::vector<int>& labels,
                                                        const std::vector<std::size_t>& samples,
                                                        std::vector<std::size_t> features) {
  std::sort(features.begin(), features.end());
  const auto all = all_splits(rows, labels, samples, features);
  long double best = 0;
  for (const auto& s : all) best = std::max(best, s.decrease);
  if (best <= 1e-12L) return std::nullopt;
  for (const auto& s : all)
    if (s.decrease >= best - 1e-12L) return s;
  return std::nullopt;
}

/// Best training accuracy reachable by any tree of depth <= `depth` whose
/// thresholds are midpoints of the data (leaves predict their majority).
inline std::size_t best_correct(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                                const std::vector<std::size_t>& samples, std::size_t width, std::size_t depth) {
  std::size_t tp = 0;
  for (auto i : samples) tp += labels[i] == 1;
  std::size_t best = std::max(tp, samples.size() - tp);
  if (depth == 0) return best;
  std::vector<std::size_t> features(width);
  for (std::size_t f = 0; f < width; ++f) features[f] = f;
  for (const auto& s : all_splits(rows, labels, samples, features)) {
    std::vector<std::size_t> l, r;
    for (auto i : samples) (rows[i][s.feature] <= s.threshold ? l : r).push_back(i);
    best = std::max(best, best_correct(rows, labels, l, width, depth - 1) + best_correct(rows, labels, r, width, depth - 1));
  }
  return best;
}

/// Path-dependent conditional expectation of a tree when only features in
/// `known` (bitmask) are observed.
inline long double conditional_value(const Tree& tree, int node_id, const std::vector<double>& x, std::uint32_t known) {
  const auto& n = tree.nodes[static_cast<std::size_t>(node_id)];
  if (n.is_leaf()) return static_cast<long double>(n.counts.tp) / static_cast<long double>(n.counts.total());
  if (known & (1u << n.feature))
    return conditional_value(tree, x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right, x, known);
  const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
  const long double total = static_cast<long double>(n.counts.total());
  return static_cast<long double>(l.counts.total()) / total * conditional_value(tree, n.left, x, known) +
         static_cast<long double>(r.counts.total()) / total * conditional_value(tree, n.right, x, known);
}

inline long double forest_conditional(const Forest& f, const std::vector<double>& x, std::uint32_t known) {
  long double s = 0;
  for (const auto& t : f.trees) s += conditional_value(t, 0, x, known);
  return s / static_cast<long double>(f.trees.size());
}

/// Shapley values by enumerating every subset of the other features.
inline std::vector<long double> exhaustive_shapley(const Forest& f, const std::vector<double>& x) {
  const std::size_t m = x.size();
  std::vector<long double> fact(m + 1, 1.0L);
  for (std::size_t i = 1; i <= m; ++i) fact[i] = fact[i - 1] * static_cast<long double>(i);
  std::vector<long double> value(std::size_t{1} << m);
  for (std::uint32_t s = 0; s < value.size(); ++s) value[s] = forest_conditional(f, x, s);
  std::vector<long double> phi(m, 0.0L);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::uint32_t s = 0; s < value.size(); ++s) {
      if (s & (1u << j)) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcount(s));
      const long double w = fact[size] * fact[m - size - 1] / fact[m];
      phi[j] += w * (value[s | (1u << j)] - value[s]);
    }
  }
  return phi;
}

/// Chi-squared by the class-prior contingency formula, one feature at a time.
inline std::vector<long double> chi2(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels) {
  const std::size_t width = rows.empty() ? 0 : rows[0].size();
  std::vector<long double> out;
  for (std::size_t j = 0; j < width; ++j) {
    long double score = 0;
    bool degenerate = false;
    for (int c = 0; c < 2; ++c) {
      long double observed = 0, total = 0, in_class = 0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        total += rows[i][j];
        if (labels[i] == c) {
          observed += rows[i][j];
          in_class += 1;
        }
      }
      const long double expected = total * in_class / static_cast<long double>(rows.size());
      if (expected == 0) degenerate = true;
      else score += (observed - expected) * (observed - expected) / expected;
    }
    out.push_back(degenerate ? 0.0L : score);
  }
  return out;
}

/// Textbook two-pass Pearson correlation in extended precision.
inline std::optional<long double> pearson(const std::vector<double>& xs, const std::vector<int>& ys) {
  const long double n = static_cast<long double>(xs.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace alert_sift::oracle

#include "alert_sift/tree_shap.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace alert_sift {
namespace {

/// Random forest of hand-built trees: random splits, random leaf counts.
Tree random_tree(Rng& rng, std::size_t width, std::size_t depth) {
  Tree t;
  auto build = [&](auto&& self, std::size_t d) -> int {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.push_back({});
    if (d == depth || rng.chance(0.2)) {
      t.nodes[static_cast<std::size_t>(id)].counts = {rng.below(6), 1 + rng.below(6)};
      if (rng.chance(0.5)) std::swap(t.nodes[static_cast<std::size_t>(id)].counts.tp, t.nodes[static_cast<std::size_t>(id)].counts.fp);
      return id;
    }
    const int l = self(self, d + 1);
    const int r = self(self, d + 1);
    auto& n = t.nodes[static_cast<std::size_t>(id)];
    n.feature = static_cast<int>(rng.below(width));
    n.threshold = rng.unit();
    n.left = l;
    n.right = r;
    const auto& lc = t.nodes[static_cast<std::size_t>(l)].counts;
    const auto& rc = t.nodes[static_cast<std::size_t>(r)].counts;
    n.counts = {lc.tp + rc.tp, lc.fp + rc.fp};
    return id;
  };
  build(build, 0);
  return t;
}

Forest random_forest(Rng& rng, std::size_t width, std::size_t depth, std::size_t trees) {
  Forest f;
  for (std::size_t j = 0; j < width; ++j) f.feature_names.push_back("f" + std::to_string(j));
  f.params.n_estimators = trees;
  for (std::size_t i = 0; i < trees; ++i) f.trees.push_back(random_tree(rng, width, depth));
  return f;
}

std::vector<double> random_point(Rng& rng, std::size_t width) {
  std::vector<double> x(width);
  for (auto& v : x) v = rng.unit();
  return x;
}

TEST(TreeShap, SingleLeafTreeHasZeroPhi) {
  Forest f;
  f.feature_names = {"a", "b"};
  f.trees = {Tree{{{-1, 0, -1, -1, {3, 1}}}}};
  const auto a = tree_shap(f, std::vector<double>{0.2, 0.7});
  EXPECT_DOUBLE_EQ(a.base_value, 0.75);
  EXPECT_EQ(a.phi, (std::vector<double>{0.0, 0.0}));
}

TEST(TreeShap, StumpMatchesHandValues) {
  // Stump on feature 1: left (x<=0.5) 6 samples at TP 1/3, right 2 samples at TP 1.
  Forest f;
  f.feature_names = {"a", "b"};
  f.trees = {Tree{{{1, 0.5, 1, 2, {4, 4}}, {-1, 0, -1, -1, {2, 4}}, {-1, 0, -1, -1, {2, 0}}}}};
  const std::vector<double> x = {0.9, 0.8};
  const auto a = tree_shap(f, x);
  EXPECT_DOUBLE_EQ(a.base_value, 0.5);  // 6/8 * 1/3 + 2/8 * 1
  EXPECT_DOUBLE_EQ(a.phi[0], 0.0);
  EXPECT_DOUBLE_EQ(a.phi[1], 0.5);
  const auto brute = oracle::exhaustive_shapley(f, x);
  EXPECT_NEAR(a.phi[1], static_cast<double>(brute[1]), 1e-12);
}

TEST(TreeShap, MatchesExhaustiveShapley) {
  Rng rng(31337);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t width = 1 + rng.below(6);
    const auto f = random_forest(rng, width, 1 + rng.below(4), 1 + rng.below(4));
    for (int k = 0; k < 5; ++k) {
      const auto x = random_point(rng, width);
      const auto a = tree_shap(f, x);
      const auto want = oracle::exhaustive_shapley(f, x);
      for (std::size_t j = 0; j < width; ++j) EXPECT_NEAR(a.phi[j], static_cast<double>(want[j]), 1e-9);
    }
  }
}

TEST(TreeShap, RepeatedFeatureOnPath) {
  // Feature 0 splits twice on the same path.
  Forest f;
  f.feature_names = {"a", "b"};
  Tree t;
  t.nodes = {{0, 0.5, 1, 4, {6, 6}}, {0, 0.2, 2, 3, {2, 4}}, {-1, 0, -1, -1, {0, 3}},
             {-1, 0, -1, -1, {2, 1}}, {1, 0.5, 5, 6, {4, 2}}, {-1, 0, -1, -1, {1, 2}}, {-1, 0, -1, -1, {3, 0}}};
  f.trees = {t};
  for (const std::vector<double>& x : {std::vector<double>{0.1, 0.9}, {0.3, 0.1}, {0.7, 0.7}, {0.7, 0.2}}) {
    const auto a = tree_shap(f, x);
    const auto want = oracle::exhaustive_shapley(f, x);
    EXPECT_NEAR(a.phi[0], static_cast<double>(want[0]), 1e-12);
    EXPECT_NEAR(a.phi[1], static_cast<double>(want[1]), 1e-12);
    EXPECT_NEAR(a.total(), predict_proba(f, x), 1e-12);
  }
}

TEST(TreeShap, LocalAccuracyOnTrainedForest) {
  Rng rng(8);
  FeatureMatrix m;
  m.names = {"a", "b", "c", "d", "e", "f"};
  for (int i = 0; i < 200; ++i) {
    auto x = random_point(rng, 6);
    m.labels.push_back(x[0] + 0.5 * x[3] > 0.8 || rng.chance(0.1) ? 1 : 0);
    m.rows.push_back(std::move(x));
  }
  ForestParams p;
  p.n_estimators = 30;
  const auto f = train_forest(m, p);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_point(rng, 6);
    EXPECT_NEAR(tree_shap(f, x).total(), predict_proba(f, x), 1e-9);
  }
}

TEST(TreeShap, UnusedFeatureGetsZero) {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    auto f = random_forest(rng, 4, 3, 3);
    // Remap every split away from feature 2.
    for (auto& t : f.trees)
      for (auto& n : t.nodes)
        if (n.feature == 2) n.feature = 3;
    for (int k = 0; k < 10; ++k) EXPECT_EQ(tree_shap(f, random_point(rng, 4)).phi[2], 0.0);
  }
}

TEST(TreeShap, WidthMismatch) {
  Forest f;
  f.feature_names = {"a"};
  f.trees = {Tree{{{-1, 0, -1, -1, {1, 1}}}}};
  EXPECT_THROW(tree_shap(f, std::vector<double>{0.1, 0.2}), ValidationError);
}

TEST(GlobalImportance, NeverSplittingForestIsAllZero) {
  Forest f;
  f.feature_names = {"a", "b", "c"};
  f.trees = {Tree{{{-1, 0, -1, -1, {2, 1}}}}};
  const auto imp = global_importance(f, {{0.1, 0.2, 0.3}, {0.5, 0.5, 0.5}});
  ASSERT_EQ(imp.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(imp[j].mean_abs_shap, 0.0);
    EXPECT_EQ(imp[j].index, j);  // ties keep index order
  }
}

TEST(GlobalImportance, StumpOnFeatureZeroRanksItFirst) {
  Forest f;
  f.feature_names = {"a", "b", "c"};
  f.trees = {Tree{{{0, 0.5, 1, 2, {4, 4}}, {-1, 0, -1, -1, {0, 4}}, {-1, 0, -1, -1, {4, 0}}}}};
  const std::vector<std::vector<double>> rows = {{0.1, 0.9, 0.3}, {0.8, 0.2, 0.6}, {0.4, 0.4, 0.4}};
  const auto imp = global_importance(f, rows);
  EXPECT_EQ(imp[0].feature, "a");
  EXPECT_DOUBLE_EQ(imp[0].mean_abs_shap, 0.5);
  EXPECT_EQ(imp[1].mean_abs_shap, 0.0);
  EXPECT_EQ(imp[2].mean_abs_shap, 0.0);
}

TEST(GlobalImportance, StableUnderRowDuplication) {
  Rng rng(19);
  const auto f = random_forest(rng, 5, 3, 4);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 20; ++i) rows.push_back(random_point(rng, 5));
  auto doubled = rows;
  doubled.insert(doubled.end(), rows.begin(), rows.end());
  const auto a = global_importance(f, rows);
  const auto b = global_importance(f, doubled);
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_EQ(a[j].index, b[j].index);
    EXPECT_NEAR(a[j].mean_abs_shap, b[j].mean_abs_shap, 1e-12);
  }
  EXPECT_THROW(global_importance(f, {}), ValidationError);
}

}  // namespace
}  // namespace alert_sift

#include "alert_sift/forest.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace alert_sift {
namespace {

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

TEST(Gini, Values) {
  EXPECT_DOUBLE_EQ(gini({5, 5}), 0.5);
  EXPECT_DOUBLE_EQ(gini({10, 0}), 0.0);
  EXPECT_DOUBLE_EQ(gini({3, 1}), 0.375);
  EXPECT_THROW(gini({0, 0}), ValidationError);
}

TEST(BestSplit, SeparableOnFeatureTwo) {
  const std::vector<std::vector<double>> rows = {{0.5, 0.1, 0.0}, {0.5, 0.9, 0.2}, {0.5, 0.1, 0.8}, {0.5, 0.9, 1.0}};
  const std::vector<int> labels = {0, 0, 1, 1};
  const TrainingView view{rows, labels};
  const auto samples = iota(4);
  const auto s = best_split(view, samples, {0, 1, 2});
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->feature, 2u);
  EXPECT_DOUBLE_EQ(s->threshold, 0.5);
  EXPECT_DOUBLE_EQ(s->decrease, 0.5);  // parent gini, children pure
}

TEST(BestSplit, IdenticalSamplesHaveNoSplit) {
  const std::vector<std::vector<double>> rows = {{1, 2}, {1, 2}, {1, 2}};
  const std::vector<int> labels = {0, 1, 0};
  const auto samples = iota(3);
  EXPECT_FALSE(best_split(TrainingView{rows, labels}, samples, {0, 1}).has_value());
}

TEST(BestSplit, SixSampleFixtureMatchesExhaustiveSearch) {
  const std::vector<std::vector<double>> rows = {{0.1, 0.7, 0.3}, {0.4, 0.2, 0.3}, {0.2, 0.9, 0.8},
                                                 {0.9, 0.4, 0.1}, {0.6, 0.5, 0.9}, {0.3, 0.1, 0.5}};
  const std::vector<int> labels = {1, 0, 1, 0, 1, 0};
  const auto samples = iota(6);
  const auto got = best_split(TrainingView{rows, labels}, samples, {0, 1, 2});
  const auto want = oracle::exhaustive_best_split(rows, labels, samples, {0, 1, 2});
  ASSERT_TRUE(got && want);
  EXPECT_EQ(got->feature, want->feature);
  EXPECT_DOUBLE_EQ(got->threshold, want->threshold);
  EXPECT_NEAR(got->decrease, static_cast<double>(want->decrease), 1e-12);
  // Feature 1 separates perfectly at 0.6 (labels 1 iff value >= 0.5 ... 0.7, 0.9, 0.5).
  EXPECT_EQ(got->feature, 1u);
  EXPECT_DOUBLE_EQ(got->threshold, 0.45);
}

TEST(BestSplit, TiesGoToLowerFeatureThenLowerThreshold) {
  // Features 0 and 1 are identical; feature 1 must lose the tie.
  const std::vector<std::vector<double>> rows = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  const std::vector<int> labels = {1, 0, 0, 1};
  const auto samples = iota(4);
  const auto s = best_split(TrainingView{rows, labels}, samples, {1, 0});
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->feature, 0u);
  EXPECT_DOUBLE_EQ(s->threshold, 0.5);  // 0.5 and 2.5 tie; the lower wins
}

TEST(BestSplit, RandomDatasetsMatchOracle) {
  Rng rng(4242);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(7), w = 1 + rng.below(3);
    std::vector<std::vector<double>> rows(n, std::vector<double>(w));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(2));
      for (auto& x : rows[i]) x = static_cast<double>(rng.below(4)) / 4.0;
    }
    const auto samples = iota(n);
    const auto got = best_split(TrainingView{rows, labels}, samples, iota(w));
    const auto want = oracle::exhaustive_best_split(rows, labels, samples, iota(w));
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      EXPECT_EQ(got->feature, want->feature);
      EXPECT_DOUBLE_EQ(got->threshold, want->threshold);
    }
  }
}

TEST(GrowTree, PureInputIsSingleLeaf) {
  const std::vector<std::vector<double>> rows = {{0}, {1}, {2}};
  const std::vector<int> labels = {1, 1, 1};
  Rng rng(1);
  const auto t = grow_tree(TrainingView{rows, labels}, iota(3), ForestParams{}, rng);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_TRUE(t.nodes[0].is_leaf());
  EXPECT_EQ(t.nodes[0].counts, (ClassCounts{3, 0}));
}

TEST(GrowTree, DepthOneIsAStump) {
  const std::vector<std::vector<double>> rows = {{0}, {1}, {2}, {3}, {4}, {5}};
  const std::vector<int> labels = {1, 0, 1, 0, 1, 0};
  ForestParams p;
  p.max_depth = 1;
  Rng rng(1);
  const auto t = grow_tree(TrainingView{rows, labels}, iota(6), p, rng);
  EXPECT_LE(t.nodes.size(), 3u);
  EXPECT_LE(t.depth(), 1u);
}

TEST(GrowTree, XorAtDepthTwoFitsPerfectly) {
  const std::vector<std::vector<double>> rows = {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 0}, {1, 1}, {0.1, 0.9}, {0.9, 0.2}};
  const std::vector<int> labels = {0, 1, 1, 0, 0, 0, 1, 1};
  ForestParams p;
  p.max_depth = 2;
  p.max_features = 2;
  Rng rng(1);
  const auto t = grow_tree(TrainingView{rows, labels}, iota(rows.size()), p, rng);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    correct += (t.leaf_for(rows[i]).counts.tp_fraction() >= 0.5) == (labels[i] == 1);
  EXPECT_EQ(correct, oracle::best_correct(rows, labels, iota(rows.size()), 2, 2));
  EXPECT_EQ(correct, rows.size());
  EXPECT_LE(t.depth(), 2u);
}

TEST(GrowTree, ChildrenPartitionParentSamples) {
  Rng data_rng(5);
  std::vector<std::vector<double>> rows(200, std::vector<double>(5));
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (auto& x : rows[i]) x = std::round(data_rng.unit() * 20) / 20;
    labels[i] = rows[i][0] + rows[i][3] > 1.0 ? 1 : static_cast<int>(data_rng.below(2) && data_rng.chance(0.2));
  }
  Rng rng(9);
  const auto t = grow_tree(TrainingView{rows, labels}, iota(rows.size()), ForestParams{}, rng);
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) continue;
    const auto& l = t.nodes[static_cast<std::size_t>(n.left)].counts;
    const auto& r = t.nodes[static_cast<std::size_t>(n.right)].counts;
    EXPECT_EQ(l.tp + r.tp, n.counts.tp);
    EXPECT_EQ(l.fp + r.fp, n.counts.fp);
  }
}

FeatureMatrix separable(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix m;
  m.names = {"f0", "f1", "f2", "f3"};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.below(2));
    std::vector<double> row(4);
    for (auto& x : row) x = std::round(rng.unit() * 100) / 100;
    // Every feature separates the classes: TP values sit in (0.6, 1], FP in [0, 0.4).
    for (auto& x : row) x = label ? 0.6 + 0.4 * x + 0.001 : 0.4 * x * 0.99;
    m.rows.push_back(row);
    m.labels.push_back(label);
  }
  return m;
}

TEST(TrainForest, DefaultsGiveHundredTreesOfDepthAtMostSix) {
  Rng rng(3);
  FeatureMatrix m;
  m.names = {"a", "b", "c", "d", "e"};
  for (int i = 0; i < 300; ++i) {
    std::vector<double> row(5);
    for (auto& x : row) x = rng.unit();
    m.labels.push_back(rng.chance(row[0] * row[1] + 0.1 * row[2]) ? 1 : 0);
    m.rows.push_back(std::move(row));
  }
  const auto f = train_forest(m);
  ASSERT_EQ(f.trees.size(), 100u);
  for (const auto& t : f.trees) EXPECT_LE(t.depth(), 6u);
  EXPECT_EQ(f.feature_names, m.names);
}

TEST(TrainForest, SameSeedSameModelBytes) {
  const auto m = separable(120, 1);
  ForestParams p;
  p.n_estimators = 20;
  p.seed = 123;
  const auto a = forest_to_json(train_forest(m, p)).dump();
  const auto b = forest_to_json(train_forest(m, p)).dump();
  EXPECT_EQ(a, b);
  p.seed = 124;
  EXPECT_NE(forest_to_json(train_forest(m, p)).dump(), a);
}

TEST(TrainForest, SeparableDataFitsPerfectly) {
  const auto m = separable(200, 2);
  const auto f = train_forest(m);
  for (std::size_t i = 0; i < m.size(); ++i)
    EXPECT_EQ(to_int(predict(f, m.rows[i])), m.labels[i]) << "row " << i;
}

TEST(TrainForest, RejectsSingleClassAndTinyInput) {
  FeatureMatrix m;
  m.names = {"a"};
  m.rows = {{0}, {1}};
  m.labels = {1, 1};
  EXPECT_THROW(train_forest(m), ValidationError);
  m.rows = {{0}};
  m.labels = {1};
  EXPECT_THROW(train_forest(m), ValidationError);
}

TEST(TrainForest, DepthBoundProperty) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureMatrix m;
    const std::size_t w = 1 + rng.below(6);
    for (std::size_t j = 0; j < w; ++j) m.names.push_back("f" + std::to_string(j));
    const std::size_t n = 2 + rng.below(80);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(w);
      for (auto& x : row) x = std::round(rng.unit() * 10) / 10;
      m.rows.push_back(row);
      m.labels.push_back(static_cast<int>(i < 2 ? i : rng.below(2)));
    }
    ForestParams p;
    p.n_estimators = 10;
    p.max_depth = 1 + rng.below(5);
    p.seed = rng.next();
    for (const auto& t : train_forest(m, p).trees) EXPECT_LE(t.depth(), p.max_depth);
  }
}

Forest two_tree_fixture() {
  // Two stumps on feature 0; the right leaves hold TP fractions 0.25 and 0.75.
  Forest f;
  f.feature_names = {"x"};
  f.params.n_estimators = 2;
  Tree a;
  a.nodes = {{0, 0.5, 1, 2, {3, 5}}, {-1, 0, -1, -1, {2, 2}}, {-1, 0, -1, -1, {1, 3}}};
  Tree b;
  b.nodes = {{0, 0.5, 1, 2, {5, 3}}, {-1, 0, -1, -1, {2, 2}}, {-1, 0, -1, -1, {3, 1}}};
  f.trees = {a, b};
  return f;
}

TEST(PredictProba, MeanOfLeafFractions) {
  const auto f = two_tree_fixture();
  const std::vector<double> right = {0.9};
  EXPECT_DOUBLE_EQ(predict_proba(f, right), 0.5);
  EXPECT_THROW(predict_proba(f, std::vector<double>{0.1, 0.2}), ValidationError);
}

TEST(PredictProba, PureLeaves) {
  Forest f;
  f.feature_names = {"x"};
  f.trees = {Tree{{{-1, 0, -1, -1, {4, 0}}}}, Tree{{{-1, 0, -1, -1, {1, 0}}}}};
  EXPECT_DOUBLE_EQ(predict_proba(f, std::vector<double>{0.3}), 1.0);
  f.trees = {Tree{{{-1, 0, -1, -1, {0, 4}}}}};
  EXPECT_DOUBLE_EQ(predict_proba(f, std::vector<double>{0.3}), 0.0);
}

TEST(Predict, ThresholdTiesGoToTp) {
  const auto f = two_tree_fixture();  // proba 0.5 on the right branch
  const std::vector<double> x = {0.9};
  EXPECT_EQ(predict(f, x, 0.5), Label::TP);
  EXPECT_EQ(predict(f, x, 0.51), Label::FP);
  EXPECT_EQ(predict(f, x, 0.49), Label::TP);
  EXPECT_THROW(predict(f, x, 0.0), ValidationError);
  EXPECT_THROW(predict(f, x, 1.0), ValidationError);
}

TEST(Predict, RaisingThresholdNeverCreatesTp) {
  const auto m = separable(100, 4);
  ForestParams p;
  p.n_estimators = 15;
  const auto f = train_forest(m, p);
  Rng rng(6);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.unit();
    const double t1 = 0.01 + 0.98 * rng.unit(), t2 = 0.01 + 0.98 * rng.unit();
    const double lo = std::min(t1, t2), hi = std::max(t1, t2);
    if (predict(f, x, lo) == Label::FP) {
      EXPECT_EQ(predict(f, x, hi), Label::FP);
    }
  }
}

TEST(ForestJson, RoundTripIsLossless) {
  const auto m = separable(80, 5);
  ForestParams p;
  p.n_estimators = 7;
  p.max_features = 3;
  const auto f = train_forest(m, p, FeatureProfile::Full29);
  const auto text = forest_to_json(f).dump();
  const auto back = forest_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, f);
  EXPECT_EQ(forest_to_json(back).dump(), text);
}

TEST(ForestJson, RejectsBadDocuments) {
  EXPECT_THROW(forest_from_json(nlohmann::json::parse(R"({"trees":[]})")), ParseError);
  auto j = forest_to_json(train_forest(separable(30, 6), ForestParams{3, 2, {}, 2, 1}));
  j["format_version"] = 99;
  EXPECT_THROW(forest_from_json(j), ParseError);
  j["format_version"] = kModelFormatVersion;
  j["params"]["n_estimators"] = 4;
  EXPECT_THROW(forest_from_json(j), ParseError);
}

TEST(ForestParams, Validation) {
  EXPECT_THROW(ForestParams({0, 6, {}, 2, 1}).validate(), ValidationError);
  EXPECT_THROW(ForestParams({1, 0, {}, 2, 1}).validate(), ValidationError);
  EXPECT_THROW(ForestParams({1, 1, {}, 1, 1}).validate(), ValidationError);
  EXPECT_EQ(ForestParams{}.candidates_for(20), 4u);
  EXPECT_EQ(ForestParams{}.candidates_for(29), 5u);
  EXPECT_EQ(ForestParams{}.candidates_for(1), 1u);
}

}  // namespace
}  // namespace alert_sift

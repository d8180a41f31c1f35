#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alert_sift/error.hpp"
#include "alert_sift/forest.hpp"
#include "alert_sift/rng.hpp"

namespace alert_sift {

/// Shuffles 0..n-1 and deals it into k folds whose sizes differ by at most
/// one; the first n % k folds get the extra element.
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("k must be at least 2");
  if (k > n) throw ValidationError("k (" + std::to_string(k) + ") exceeds sample count (" + std::to_string(n) + ")");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos), idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

/// Counts indexed by (truth, prediction).
struct ConfusionMatrix {
  std::uint64_t tp_as_tp = 0;
  std::uint64_t tp_as_fp = 0;
  std::uint64_t fp_as_fp = 0;
  std::uint64_t fp_as_tp = 0;

  std::uint64_t total() const noexcept { return tp_as_tp + tp_as_fp + fp_as_fp + fp_as_tp; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept {
    tp_as_tp += o.tp_as_tp;
    tp_as_fp += o.tp_as_fp;
    fp_as_fp += o.fp_as_fp;
    fp_as_tp += o.fp_as_tp;
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(const std::vector<Label>& predictions, const std::vector<Label>& truths) {
  if (predictions.size() != truths.size()) throw ValidationError("prediction and truth counts differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] == Label::TP)
      ++(predictions[i] == Label::TP ? cm.tp_as_tp : cm.tp_as_fp);
    else
      ++(predictions[i] == Label::FP ? cm.fp_as_fp : cm.fp_as_tp);
  }
  return cm;
}

/// Per-class precision/recall and accuracy. A metric whose denominator is
/// zero is nullopt.
struct MetricsReport {
  std::optional<double> tp_precision;
  std::optional<double> tp_recall;
  std::optional<double> fp_precision;
  std::optional<double> fp_recall;
  std::optional<double> accuracy;
};

inline MetricsReport metrics(const ConfusionMatrix& cm) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(cm.tp_as_tp, cm.tp_as_tp + cm.fp_as_tp), ratio(cm.tp_as_tp, cm.tp_as_tp + cm.tp_as_fp),
          ratio(cm.fp_as_fp, cm.fp_as_fp + cm.tp_as_fp), ratio(cm.fp_as_fp, cm.fp_as_fp + cm.fp_as_tp),
          ratio(cm.tp_as_tp + cm.fp_as_fp, cm.total())};
}

/// Analyst hours saved by not reviewing `filtered_fp_count` alerts.
inline double workload_savings(double filtered_fp_count, double minutes_per_alert = 4.0) {
  if (!(minutes_per_alert > 0)) throw ValidationError("minutes_per_alert must be positive");
  return filtered_fp_count * minutes_per_alert / 60.0;
}

inline std::vector<Label> predict_all(const Forest& forest, const std::vector<std::vector<double>>& rows,
                                      double threshold = 0.5) {
  std::vector<Label> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(predict(forest, r, threshold));
  return out;
}

inline std::vector<Label> to_labels(const std::vector<int>& labels) {
  std::vector<Label> out;
  out.reserve(labels.size());
  for (const int l : labels) out.push_back(l == 1 ? Label::TP : Label::FP);
  return out;
}

inline ConfusionMatrix evaluate_forest(const Forest& forest, const FeatureMatrix& data, double threshold = 0.5) {
  data.validate();
  return confusion(predict_all(forest, data.rows, threshold), to_labels(data.labels));
}

struct FoldResult {
  ConfusionMatrix confusion;
  MetricsReport metrics;
};

struct CrossValidation {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double accuracy_variance = 0.0;  // population variance across folds
};

/// k-fold validation: each fold is scored by a forest trained on the other
/// k-1 folds. Folds are not stratified; a training complement holding a
/// single class is an error naming the fold.
inline CrossValidation cross_validate(const FeatureMatrix& data, const ForestParams& params, std::size_t k = 10,
                                      std::uint64_t seed = 42, double threshold = 0.5) {
  data.validate();
  const auto folds = kfold_split(data.size(), k, seed);
  CrossValidation cv;
  std::vector<char> held_out(data.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::fill(held_out.begin(), held_out.end(), 0);
    for (const auto i : folds[f]) held_out[i] = 1;
    FeatureMatrix train, test;
    train.names = test.names = data.names;
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto& dst = held_out[i] ? test : train;
      dst.rows.push_back(data.rows[i]);
      dst.labels.push_back(data.labels[i]);
    }
    const auto tp = std::count(train.labels.begin(), train.labels.end(), 1);
    if (tp == 0 || tp == static_cast<std::ptrdiff_t>(train.size()))
      throw ValidationError("fold " + std::to_string(f) + ": training complement holds a single class");
    const auto forest = train_forest(train, params);
    const auto cm = evaluate_forest(forest, test, threshold);
    cv.folds.push_back({cm, metrics(cm)});
  }
  double sum = 0;
  for (const auto& r : cv.folds) sum += *r.metrics.accuracy;
  cv.mean_accuracy = sum / static_cast<double>(cv.folds.size());
  double ss = 0;
  for (const auto& r : cv.folds) ss += (*r.metrics.accuracy - cv.mean_accuracy) * (*r.metrics.accuracy - cv.mean_accuracy);
  cv.accuracy_variance = ss / static_cast<double>(cv.folds.size());
  return cv;
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
  return {{"tp_as_tp", cm.tp_as_tp}, {"tp_as_fp", cm.tp_as_fp}, {"fp_as_fp", cm.fp_as_fp}, {"fp_as_tp", cm.fp_as_tp}};
}

inline nlohmann::json to_json(const MetricsReport& m) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"tp_precision", opt(m.tp_precision)},
          {"tp_recall", opt(m.tp_recall)},
          {"fp_precision", opt(m.fp_precision)},
          {"fp_recall", opt(m.fp_recall)},
          {"accuracy", opt(m.accuracy)}};
}

}  // namespace alert_sift

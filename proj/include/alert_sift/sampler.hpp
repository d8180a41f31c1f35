#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "alert_sift/error.hpp"
#include "alert_sift/timestamp.hpp"
#include "alert_sift/weak_labeler.hpp"

namespace alert_sift {

struct SampleParams {
  std::size_t stride = 100;
  std::size_t per_rule_cap = 10;

  void validate() const {
    if (stride < 1) throw ValidationError("stride must be >= 1");
    if (per_rule_cap < 1) throw ValidationError("per_rule_cap must be >= 1");
  }
};

/// Thins out per-rule duplication.
///
/// Alerts are grouped by rule_uuid in arrival order. Within a group the
/// alerts at 1-based positions 1, 1+stride, 1+2*stride, ... survive, and at
/// most per_rule_cap of those are kept. Groups are emitted in the order their
/// rule was first seen.
inline std::vector<LabeledAlert> dedup_sample(const std::vector<LabeledAlert>& alerts,
                                              const SampleParams& params = {}) {
  params.validate();
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string_view, std::size_t> group_of;
  std::vector<std::size_t> position;  // alerts seen so far per group
  for (std::size_t i = 0; i < alerts.size(); ++i) {
    const auto [it, inserted] = group_of.try_emplace(alerts[i].alert.rule_uuid, groups.size());
    if (inserted) {
      groups.emplace_back();
      position.push_back(0);
    }
    const auto g = it->second;
    if (position[g]++ % params.stride == 0 && groups[g].size() < params.per_rule_cap) groups[g].push_back(i);
  }
  std::vector<LabeledAlert> out;
  for (const auto& g : groups)
    for (const auto i : g) out.push_back(alerts[i]);
  return out;
}

struct Partition {
  std::vector<LabeledAlert> train;
  std::vector<LabeledAlert> test;
};

/// Alerts strictly before `split` train; everything else tests.
inline Partition partition_by_period(const std::vector<LabeledAlert>& alerts, Timestamp split) {
  Partition p;
  for (const auto& a : alerts) (a.alert.timestamp < split ? p.train : p.test).push_back(a);
  return p;
}

}  // namespace alert_sift

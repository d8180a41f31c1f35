#pragma once

// Weak labels from analyst comments on the filter rule an alert matched.
//
// A rule whose comment mentions only true-positive vocabulary ("alerted",
// "sent") labels its alerts TP; only false-positive vocabulary ("expected",
// "benign", "whitelisted") labels them FP. Comments hitting both lists are
// ambiguous and dropped. Conditional comments ("benign unless ...") are not
// interpreted: they label by keyword like any other comment.

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "alert_sift/corpus_ingest.hpp"
#include "alert_sift/csv.hpp"
#include "alert_sift/error.hpp"

namespace alert_sift {

enum class LabelDecision { TruePositive, FalsePositive, Ambiguous, Unmatched };

inline std::string_view to_string(LabelDecision d) {
  switch (d) {
    case LabelDecision::TruePositive: return "TruePositive";
    case LabelDecision::FalsePositive: return "FalsePositive";
    case LabelDecision::Ambiguous: return "Ambiguous";
    case LabelDecision::Unmatched: return "Unmatched";
  }
  return "?";
}

/// Binary class label. TP = 1, FP = 0.
enum class Label : int { FP = 0, TP = 1 };

inline constexpr int to_int(Label l) noexcept { return static_cast<int>(l); }

namespace detail {

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string_view trim_view(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

class KeywordConfig {
 public:
  /// Keyword lists exactly as the analysts' vocabulary was first mined.
  KeywordConfig() : KeywordConfig({"alerted", "sent"}, {"expected", "benign", "whitelisted"}, true) {}

  KeywordConfig(std::vector<std::string> tp, std::vector<std::string> fp, bool case_insensitive)
      : tp_(std::move(tp)), fp_(std::move(fp)), case_insensitive_(case_insensitive) {
    normalize(tp_);
    normalize(fp_);
    if (tp_.empty() || fp_.empty()) throw ValidationError("keyword lists must both be non-empty");
    for (const auto& k : tp_)
      if (std::find(fp_.begin(), fp_.end(), k) != fp_.end())
        throw ValidationError("keyword '" + k + "' appears in both tp and fp lists");
  }

  const std::vector<std::string>& tp_keywords() const noexcept { return tp_; }
  const std::vector<std::string>& fp_keywords() const noexcept { return fp_; }
  bool case_insensitive() const noexcept { return case_insensitive_; }

  /// Parses the keyword file:
  ///
  ///   case_insensitive: true
  ///   tp: alerted, sent
  ///   fp:
  ///     expected
  ///     benign
  ///
  /// A `tp:` or `fp:` line opens a stanza; keywords follow on the same line
  /// (comma separated) or on subsequent lines. `#` starts a comment.
  static KeywordConfig load(std::istream& in) {
    std::vector<std::string> tp, fp;
    bool ci = true;
    std::vector<std::string>* current = nullptr;
    std::string line;
    std::size_t line_no = 0;
    auto add_all = [](std::vector<std::string>& dst, std::string_view items) {
      std::size_t start = 0;
      while (start <= items.size()) {
        const auto comma = items.find(',', start);
        const auto item = detail::trim_view(items.substr(start, comma == items.npos ? items.npos : comma - start));
        if (!item.empty()) dst.emplace_back(item);
        if (comma == items.npos) break;
        start = comma + 1;
      }
    };
    while (std::getline(in, line)) {
      ++line_no;
      const auto body = detail::trim_view(std::string_view(line).substr(0, line.find('#')));
      if (body.empty()) continue;
      const auto colon = body.find(':');
      const auto head = colon == body.npos ? std::string{} : detail::lowercase(detail::trim_view(body.substr(0, colon)));
      if (head == "tp" || head == "fp") {
        current = head == "tp" ? &tp : &fp;
        add_all(*current, body.substr(colon + 1));
      } else if (head == "case_insensitive") {
        const auto v = detail::lowercase(detail::trim_view(body.substr(colon + 1)));
        if (v == "true" || v == "1" || v == "yes") ci = true;
        else if (v == "false" || v == "0" || v == "no") ci = false;
        else throw ParseError("case_insensitive expects true/false", line_no);
      } else if (current) {
        add_all(*current, body);
      } else {
        throw ParseError("keyword outside a tp:/fp: stanza", line_no);
      }
    }
    return KeywordConfig(std::move(tp), std::move(fp), ci);
  }

 private:
  void normalize(std::vector<std::string>& list) const {
    std::vector<std::string> out;
    for (const auto& k : list) {
      std::string t(detail::trim_view(k));
      if (case_insensitive_) t = detail::lowercase(t);
      if (!t.empty() && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
    }
    list = std::move(out);
  }

  std::vector<std::string> tp_;
  std::vector<std::string> fp_;
  bool case_insensitive_;
};

inline LabelDecision classify_comment(std::string_view comment, const KeywordConfig& cfg) {
  const auto trimmed = detail::trim_view(comment);
  const std::string text = cfg.case_insensitive() ? detail::lowercase(trimmed) : std::string(trimmed);
  auto hits = [&](const std::vector<std::string>& words) {
    return std::any_of(words.begin(), words.end(),
                       [&](const std::string& w) { return text.find(w) != std::string::npos; });
  };
  const bool tp = hits(cfg.tp_keywords());
  const bool fp = hits(cfg.fp_keywords());
  if (tp && fp) return LabelDecision::Ambiguous;
  if (tp) return LabelDecision::TruePositive;
  if (fp) return LabelDecision::FalsePositive;
  return LabelDecision::Unmatched;
}

struct LabelLists {
  std::vector<RuleComment> tp;
  std::vector<RuleComment> fp;
};

inline LabelLists build_label_lists(const std::vector<RuleComment>& rules, const KeywordConfig& cfg) {
  std::set<std::string, std::less<>> seen;
  LabelLists lists;
  for (const auto& r : rules) {
    if (!seen.insert(r.rule_uuid).second) throw ValidationError("duplicate rule_uuid: " + r.rule_uuid);
    switch (classify_comment(r.rev_comment, cfg)) {
      case LabelDecision::TruePositive: lists.tp.push_back(r); break;
      case LabelDecision::FalsePositive: lists.fp.push_back(r); break;
      default: break;
    }
  }
  return lists;
}

/// Distinct (rule_uuid, rev_comment) pairs carried by the alerts themselves,
/// first occurrence wins. Alerts without a comment contribute nothing.
inline std::vector<RuleComment> rules_from_alerts(const std::vector<RawAlert>& alerts) {
  std::set<std::string, std::less<>> seen;
  std::vector<RuleComment> rules;
  for (const auto& a : alerts)
    if (a.rev_comment && seen.insert(a.rule_uuid).second) rules.push_back({a.rule_uuid, *a.rev_comment});
  return rules;
}

struct LabeledAlert {
  RawAlert alert;
  Label label;

  friend bool operator==(const LabeledAlert&, const LabeledAlert&) = default;
};

/// Alerts whose rule is on exactly one list, excluding client-wide
/// `notate_for_soc` dispositions. Order is preserved.
inline std::vector<LabeledAlert> label_corpus(const std::vector<RawAlert>& alerts, const LabelLists& lists) {
  std::unordered_map<std::string_view, Label> lookup;
  for (const auto& r : lists.tp) lookup.emplace(r.rule_uuid, Label::TP);
  for (const auto& r : lists.fp) {
    if (lookup.count(r.rule_uuid)) throw ValidationError("rule_uuid on both lists: " + r.rule_uuid);
    lookup.emplace(r.rule_uuid, Label::FP);
  }
  std::vector<LabeledAlert> out;
  for (const auto& a : alerts) {
    if (a.action == "notate_for_soc") continue;
    const auto it = lookup.find(a.rule_uuid);
    if (it != lookup.end()) out.push_back({a, it->second});
  }
  return out;
}

/// CSV `rule_uuid,rev_comment,label`, TP rows first.
inline void write_label_lists(std::ostream& out, const LabelLists& lists) {
  out << "rule_uuid,rev_comment,label\n";
  for (const auto& r : lists.tp) out << csv::join({r.rule_uuid, r.rev_comment, "1"}) << '\n';
  for (const auto& r : lists.fp) out << csv::join({r.rule_uuid, r.rev_comment, "0"}) << '\n';
}

// Labeled corpora are stored as the alert's JSON with a top-level "label".

inline nlohmann::json labeled_to_json(const LabeledAlert& la, const FieldMap& map = {}) {
  auto j = alert_to_json(la.alert, map);
  j["label"] = to_int(la.label);
  return j;
}

inline std::vector<LabeledAlert> read_labeled_corpus(std::istream& in, const FieldMap& map = {}) {
  std::vector<LabeledAlert> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    const auto it = j.find("label");
    if (it == j.end() || !it->is_number_integer() || (it->get<int>() != 0 && it->get<int>() != 1))
      throw ValidationError("line " + std::to_string(line_no) + ": label must be 0 or 1");
    try {
      out.push_back({parse_alert_record(j, map), it->get<int>() == 1 ? Label::TP : Label::FP});
    } catch (const Error& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_labeled_corpus(std::ostream& out, const std::vector<LabeledAlert>& alerts,
                                 const FieldMap& map = {}) {
  for (const auto& la : alerts) out << labeled_to_json(la, map).dump() << '\n';
}

}  // namespace alert_sift

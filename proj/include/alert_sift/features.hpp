#pragma once

// Encoding alerts into fixed-order numeric feature vectors, plus
// variance/correlation screening and chi-squared top-k selection.
//
// Layout (index: name):
//    0 priv_src_ip   1 priv_dst_ip   2 sip        3 dip          4 diff
//    5 http_status   6 pkt_to_svr    7 pkt_to_clt 8 byt_to_svr   9 byt_to_clt
//   10 rulesid      11 CVE          12 attack    13 EXPLOIT     14 POSSIBLE
//   15 activity     16 attempt      17 sport     18 dport       19 PAYLOAD_Bytes
// The full profile appends description flags SCAN POLICY WEB_SERVER TROJAN
// ATTEMPT INBOUND UNUSUAL '.' (dot) and the class-type flag policy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "alert_sift/corpus_ingest.hpp"
#include "alert_sift/csv.hpp"
#include "alert_sift/error.hpp"
#include "alert_sift/ip_address.hpp"
#include "alert_sift/weak_labeler.hpp"

namespace alert_sift {

enum class FeatureProfile { Core20, Full29 };

inline constexpr std::size_t width_of(FeatureProfile p) noexcept { return p == FeatureProfile::Core20 ? 20 : 29; }

inline std::string_view to_string(FeatureProfile p) { return p == FeatureProfile::Core20 ? "core20" : "full29"; }

inline FeatureProfile parse_profile(std::string_view s) {
  if (s == "core20" || s == "Core20") return FeatureProfile::Core20;
  if (s == "full29" || s == "Full29") return FeatureProfile::Full29;
  throw ValidationError("unknown feature profile: " + std::string(s));
}

inline constexpr std::array<std::string_view, 29> kFeatureNames = {
    "priv_src_ip", "priv_dst_ip", "sip",     "dip",        "diff",   "http_status", "pkt_to_svr", "pkt_to_clt",
    "byt_to_svr",  "byt_to_clt",  "rulesid", "CVE",        "attack", "EXPLOIT",     "POSSIBLE",   "activity",
    "attempt",     "sport",       "dport",   "PAYLOAD_Bytes", "SCAN", "POLICY",     "WEB_SERVER", "TROJAN",
    "ATTEMPT",     "INBOUND",     "UNUSUAL", "dot",        "policy",
};

/// Index of a feature in the full layout.
namespace feature {
inline constexpr std::size_t kPrivSrcIp = 0, kPrivDstIp = 1, kSrcIp = 2, kDstIp = 3, kIpDiff = 4, kHttpStatus = 5,
                             kPktToSvr = 6, kPktToClt = 7, kBytToSvr = 8, kBytToClt = 9, kRuleSid = 10, kCve = 11,
                             kAttack = 12, kExploit = 13, kPossible = 14, kActivity = 15, kAttempt = 16,
                             kSrcPort = 17, kDstPort = 18, kPayload = 19;
}

/// Kind of each entry, for range and precision checks.
enum class FeatureKind { Boolean, Ip, Diff, Http, Counter, Sid, Port, Payload };

inline constexpr FeatureKind kind_of(std::size_t index) noexcept {
  switch (index) {
    case 0: case 1: return FeatureKind::Boolean;
    case 2: case 3: return FeatureKind::Ip;
    case 4: return FeatureKind::Diff;
    case 5: return FeatureKind::Http;
    case 6: case 7: case 8: case 9: return FeatureKind::Counter;
    case 10: return FeatureKind::Sid;
    case 17: case 18: return FeatureKind::Port;
    case 19: return FeatureKind::Payload;
    default: return FeatureKind::Boolean;
  }
}

/// Scaling bounds. The counters and payload are min-max scaled against
/// these caps and saturate at 1.
struct ScalingCaps {
  std::uint64_t packets = 10'000;
  std::uint64_t bytes = 1'000'000;
  std::uint64_t payload = 65'535;
  std::uint64_t sid_max = 10'000'000;
  /// Emit sip/dip/diff. They are client specific and can be turned off.
  bool include_raw_ips = true;

  void validate() const {
    if (packets == 0 || bytes == 0 || payload == 0 || sid_max == 0)
      throw ValidationError("scaling caps must be positive");
  }

  /// `name=value` lines: packets, bytes, payload, sid_max, include_raw_ips.
  static ScalingCaps load(std::istream& in) {
    ScalingCaps caps;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto body = detail::trim_view(std::string_view(line).substr(0, line.find('#')));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == body.npos) throw ParseError("expected name=value", line_no);
      const std::string name(detail::trim_view(body.substr(0, eq)));
      const std::string value(detail::trim_view(body.substr(eq + 1)));
      if (name == "include_raw_ips") {
        if (value == "true" || value == "1") caps.include_raw_ips = true;
        else if (value == "false" || value == "0") caps.include_raw_ips = false;
        else throw ParseError("include_raw_ips expects true/false", line_no);
        continue;
      }
      std::uint64_t v = 0;
      std::istringstream vs(value);
      if (!(vs >> v) || !vs.eof()) throw ParseError("expected an unsigned integer for " + name, line_no);
      if (name == "packets") caps.packets = v;
      else if (name == "bytes") caps.bytes = v;
      else if (name == "payload") caps.payload = v;
      else if (name == "sid_max") caps.sid_max = v;
      else throw ParseError("unknown cap '" + name + "'", line_no);
    }
    caps.validate();
    return caps;
  }
};

inline double round_to(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

inline double scale_port(long port) {
  if (port < 0 || port > 65535) throw ValidationError("port out of range: " + std::to_string(port));
  return round_to(static_cast<double>(port) / 65535.0, 2);
}

/// IPv4 scales the whole address; IPv6 scales its top 64 bits.
inline double scale_ip(const IpAddress& addr) {
  if (addr.is_v4()) return round_to(static_cast<double>(addr.v4_value()) / 4294967295.0, 3);
  return round_to(static_cast<double>(addr.v6_high64()) / 18446744073709551615.0, 3);
}

inline double is_private(const IpAddress& addr) {
  if (addr.is_v4()) {
    const auto v = addr.v4_value();
    const bool priv = (v >> 24) == 10 || (v >> 20) == ((172u << 4) | 1u) || (v >> 16) == ((192u << 8) | 168u);
    return priv ? 1.0 : 0.0;
  }
  return (addr.bytes()[0] & 0xFE) == 0xFC ? 1.0 : 0.0;
}

inline double ip_diff(double src_scaled, double dst_scaled) { return round_to(std::fabs(src_scaled - dst_scaled), 3); }

inline double encode_http_status(std::optional<int> status) {
  if (!status) return 0.0;
  if (*status < 100 || *status > 599) throw ValidationError("http_status out of range: " + std::to_string(*status));
  return round_to(*status / 1000.0, 3);
}

inline constexpr double kMissingCounter = -1.0;

inline double encode_counter(std::optional<std::uint64_t> value, std::uint64_t cap) {
  if (cap == 0) throw ValidationError("counter cap must be positive");
  if (!value) return kMissingCounter;
  return round_to(static_cast<double>(std::min(*value, cap)) / static_cast<double>(cap), 2);
}

inline double scale_rule_sid(std::uint64_t sid, std::uint64_t sid_max) {
  if (sid_max == 0) throw ValidationError("sid_max must be positive");
  return round_to(static_cast<double>(std::min(sid, sid_max)) / static_cast<double>(sid_max), 3);
}

inline double scale_payload(std::uint64_t len, std::uint64_t cap) {
  if (cap == 0) throw ValidationError("payload cap must be positive");
  return round_to(static_cast<double>(std::min(len, cap)) / static_cast<double>(cap), 3);
}

/// Keyword one-hot flags in layout order: the six core flags (CVE, attack,
/// EXPLOIT, POSSIBLE, activity, attempt), then for the full profile the nine
/// extra flags. Description tokens are uppercase signature words and match
/// case-sensitively. Class-type tokens match the lowercased class type, so
/// both "attempted-admin" and "Attempted Administrator Privilege Gain" hit
/// `attempt`.
inline std::vector<double> keyword_flags(std::string_view description, std::string_view class_type,
                                         FeatureProfile profile) {
  const std::string klass = detail::lowercase(class_type);
  auto in_desc = [&](std::string_view k) { return description.find(k) != std::string_view::npos ? 1.0 : 0.0; };
  auto in_class = [&](std::string_view k) { return klass.find(k) != std::string::npos ? 1.0 : 0.0; };
  std::vector<double> flags = {in_desc("CVE"),      in_class("attack"),   in_desc("EXPLOIT"),
                               in_desc("POSSIBLE"), in_class("activity"), in_class("attempt")};
  if (profile == FeatureProfile::Full29) {
    for (std::string_view k : {"SCAN", "POLICY", "WEB_SERVER", "TROJAN", "ATTEMPT", "INBOUND", "UNUSUAL", "."})
      flags.push_back(in_desc(k));
    flags.push_back(in_class("policy"));
  }
  return flags;
}

struct FeatureVector {
  std::vector<double> values;
  FeatureProfile profile = FeatureProfile::Core20;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline FeatureVector encode_alert(const RawAlert& a, FeatureProfile profile, const ScalingCaps& caps = {}) {
  caps.validate();
  const double sip = scale_ip(a.src_ip);
  const double dip = scale_ip(a.dst_ip);
  FeatureVector v{{}, profile};
  v.values.reserve(width_of(profile));
  v.values = {is_private(a.src_ip),
              is_private(a.dst_ip),
              sip,
              dip,
              ip_diff(sip, dip),
              encode_http_status(a.http_status),
              encode_counter(a.pkts_to_server, caps.packets),
              encode_counter(a.pkts_to_client, caps.packets),
              encode_counter(a.bytes_to_server, caps.bytes),
              encode_counter(a.bytes_to_client, caps.bytes),
              scale_rule_sid(a.rule_sid, caps.sid_max)};
  const auto flags = keyword_flags(a.rule_description, a.class_type, profile);
  v.values.insert(v.values.end(), flags.begin(), flags.begin() + 6);
  v.values.push_back(scale_port(a.src_port));
  v.values.push_back(scale_port(a.dst_port));
  v.values.push_back(scale_payload(a.payload_len, caps.payload));
  v.values.insert(v.values.end(), flags.begin() + 6, flags.end());
  return v;
}

/// Layout indices exported for a profile under the given caps.
inline std::vector<std::size_t> exported_columns(FeatureProfile profile, const ScalingCaps& caps = {}) {
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < width_of(profile); ++i) {
    if (!caps.include_raw_ips && (i == feature::kSrcIp || i == feature::kDstIp || i == feature::kIpDiff)) continue;
    cols.push_back(i);
  }
  return cols;
}

/// Named numeric matrix with binary labels; the unit of exchange between
/// encoding, selection, training, and evaluation.
struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;

  std::size_t width() const noexcept { return names.size(); }
  std::size_t size() const noexcept { return rows.size(); }

  void validate() const {
    if (rows.size() != labels.size()) throw ValidationError("row and label counts differ");
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].size() != names.size())
        throw ValidationError("row " + std::to_string(i) + " has width " + std::to_string(rows[i].size()) +
                              ", expected " + std::to_string(names.size()));
    for (const int l : labels)
      if (l != 0 && l != 1) throw ValidationError("labels must be 0 or 1");
  }

  /// Keeps the given columns, in the given order.
  FeatureMatrix project(const std::vector<std::size_t>& columns) const {
    FeatureMatrix out;
    for (const auto c : columns) {
      if (c >= width()) throw ValidationError("column index out of range");
      out.names.push_back(names[c]);
    }
    out.labels = labels;
    out.rows.reserve(rows.size());
    for (const auto& r : rows) {
      std::vector<double> p;
      p.reserve(columns.size());
      for (const auto c : columns) p.push_back(r[c]);
      out.rows.push_back(std::move(p));
    }
    return out;
  }
};

inline FeatureMatrix encode_corpus(const std::vector<LabeledAlert>& alerts, FeatureProfile profile,
                                   const ScalingCaps& caps = {}) {
  const auto cols = exported_columns(profile, caps);
  FeatureMatrix m;
  for (const auto c : cols) m.names.emplace_back(kFeatureNames[c]);
  m.rows.reserve(alerts.size());
  for (const auto& la : alerts) {
    const auto v = encode_alert(la.alert, profile, caps);
    std::vector<double> row;
    row.reserve(cols.size());
    for (const auto c : cols) row.push_back(v.values[c]);
    m.rows.push_back(std::move(row));
    m.labels.push_back(to_int(la.label));
  }
  return m;
}

/// Shortest text that reads back to the same double.
inline std::string format_number(double x) {
  char buf[32];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

/// Header of feature names plus a trailing `label` column.
inline void write_matrix_csv(std::ostream& out, const FeatureMatrix& m) {
  m.validate();
  for (const auto& n : m.names) out << csv::escape(n) << ',';
  out << "label\n";
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    for (const double x : m.rows[i]) out << format_number(x) << ',';
    out << m.labels[i] << '\n';
  }
}

inline FeatureMatrix read_matrix_csv(std::istream& in) {
  csv::Reader reader(in);
  csv::Record row;
  std::size_t line = 0;
  if (!reader.next(row, &line)) throw ParseError("empty feature matrix");
  if (row.empty() || row.back() != "label") throw ParseError("last header column must be 'label'", line);
  FeatureMatrix m;
  m.names.assign(row.begin(), row.end() - 1);
  while (reader.next(row, &line)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != m.names.size() + 1)
      throw ParseError("expected " + std::to_string(m.names.size() + 1) + " columns", line);
    std::vector<double> values;
    values.reserve(m.names.size());
    for (std::size_t j = 0; j < m.names.size(); ++j) {
      char* end = nullptr;
      const double x = std::strtod(row[j].c_str(), &end);
      if (row[j].empty() || *end != '\0' || !std::isfinite(x)) throw ParseError("bad number '" + row[j] + "'", line);
      values.push_back(x);
    }
    if (row.back() != "0" && row.back() != "1") throw ParseError("label must be 0 or 1", line);
    m.rows.push_back(std::move(values));
    m.labels.push_back(row.back() == "1" ? 1 : 0);
  }
  return m;
}

struct ScreenReport {
  std::vector<double> variance;
  std::vector<std::optional<double>> pearson;  // nullopt where undefined (constant column or labels)
};

/// Population variance of each column and its Pearson correlation with the label.
inline ScreenReport screen_features(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels) {
  if (rows.size() != labels.size()) throw ValidationError("row and label counts differ");
  if (rows.size() < 2) throw ValidationError("screening needs at least two rows");
  const std::size_t width = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != width) throw ValidationError("inconsistent row width");
  const double n = static_cast<double>(rows.size());

  double label_mean = 0;
  for (const int l : labels) label_mean += l;
  label_mean /= n;
  double label_ss = 0;
  for (const int l : labels) label_ss += (l - label_mean) * (l - label_mean);

  ScreenReport report;
  for (std::size_t j = 0; j < width; ++j) {
    double mean = 0;
    for (const auto& r : rows) mean += r[j];
    mean /= n;
    double ss = 0, cross = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double d = rows[i][j] - mean;
      ss += d * d;
      cross += d * (labels[i] - label_mean);
    }
    report.variance.push_back(ss / n);
    if (ss == 0.0 || label_ss == 0.0) {
      report.pearson.emplace_back(std::nullopt);
    } else {
      report.pearson.emplace_back(std::clamp(cross / std::sqrt(ss * label_ss), -1.0, 1.0));
    }
  }
  return report;
}

struct SelectionResult {
  std::vector<double> chi2_scores;
  std::vector<std::size_t> selected_indices;  // descending score, ties by index
};

/// Chi-squared relevance of each non-negative feature to the binary label.
/// Feature magnitudes are treated as frequency mass: observed mass per class
/// is compared with the mass expected from class priors alone.
inline std::vector<double> chi2_scores(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels) {
  if (rows.size() != labels.size()) throw ValidationError("row and label counts differ");
  if (rows.empty()) return {};
  const std::size_t width = rows.front().size();
  std::array<double, 2> class_count{0, 0};
  std::vector<std::array<double, 2>> observed(width, {0, 0});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) throw ValidationError("inconsistent row width");
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("labels must be 0 or 1");
    class_count[static_cast<std::size_t>(labels[i])] += 1;
    for (std::size_t j = 0; j < width; ++j) {
      if (rows[i][j] < 0) throw ValidationError("chi-squared needs non-negative features (column " +
                                                std::to_string(j) + ")");
      observed[j][static_cast<std::size_t>(labels[i])] += rows[i][j];
    }
  }
  const double n = static_cast<double>(rows.size());
  std::vector<double> scores(width, 0.0);
  for (std::size_t j = 0; j < width; ++j) {
    const double total = observed[j][0] + observed[j][1];
    double score = 0;
    for (std::size_t c = 0; c < 2; ++c) {
      const double expected = total * class_count[c] / n;
      if (expected == 0.0) {
        score = 0;
        break;
      }
      const double d = observed[j][c] - expected;
      score += d * d / expected;
    }
    scores[j] = score;
  }
  return scores;
}

inline SelectionResult chi2_select(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                                   std::size_t k) {
  if (k == 0) throw ValidationError("k must be positive");
  SelectionResult result{chi2_scores(rows, labels), {}};
  std::vector<std::size_t> order(result.chi2_scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.chi2_scores[a] > result.chi2_scores[b];
  });
  order.resize(std::min(k, order.size()));
  result.selected_indices = std::move(order);
  return result;
}

/// Replaces the missing-counter sentinel with 0 so a matrix can be scored.
inline std::vector<std::vector<double>> mask_missing_counters(std::vector<std::vector<double>> rows) {
  for (auto& r : rows)
    for (auto& x : r)
      if (x == kMissingCounter) x = 0.0;
  return rows;
}

}  // namespace alert_sift

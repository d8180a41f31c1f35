#pragma once

// Reading IDS alert records from newline-delimited JSON.
//
// Records follow Suricata EVE naming by default (src_ip, dest_ip,
// alert.signature_id, flow.pkts_toserver, ...). Every logical field is
// looked up through a FieldMap, so other shippers can be read by
// remapping keys instead of rewriting the input.

#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alert_sift/csv.hpp"
#include "alert_sift/error.hpp"
#include "alert_sift/ip_address.hpp"
#include "alert_sift/timestamp.hpp"

namespace alert_sift {

/// One parsed IDS alert.
struct RawAlert {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint64_t rule_sid = 0;
  std::string rule_description;
  std::string class_type;
  std::string rule_uuid;
  std::string action;
  std::optional<int> http_status;
  std::optional<std::uint64_t> pkts_to_server;
  std::optional<std::uint64_t> pkts_to_client;
  std::optional<std::uint64_t> bytes_to_server;
  std::optional<std::uint64_t> bytes_to_client;
  std::uint64_t payload_len = 0;
  Timestamp timestamp{};
  std::optional<std::string> rev_comment;

  friend bool operator==(const RawAlert&, const RawAlert&) = default;
};

/// Logical alert fields that can be remapped.
enum class Field {
  Timestamp,
  SrcIp,
  DstIp,
  SrcPort,
  DstPort,
  RuleSid,
  RuleDescription,
  ClassType,
  RuleUuid,
  Action,
  HttpStatus,
  PktsToServer,
  PktsToClient,
  BytesToServer,
  BytesToClient,
  PayloadLen,
  RevComment,
};

inline constexpr std::size_t kFieldCount = 17;

inline constexpr std::array<std::string_view, kFieldCount> kFieldNames = {
    "timestamp",      "src_ip",          "dst_ip",          "src_port",        "dst_port",
    "rule_sid",       "rule_description", "class_type",     "rule_uuid",       "action",
    "http_status",    "pkts_to_server",  "pkts_to_client",  "bytes_to_server", "bytes_to_client",
    "payload_len",    "rev_comment",
};

/// Maps each logical field to a dotted JSON key path.
class FieldMap {
 public:
  FieldMap()
      : paths_{"timestamp",          "src_ip",           "dest_ip",
               "src_port",           "dest_port",        "alert.signature_id",
               "alert.signature",    "alert.category",   "rule_uuid",
               "action",             "http.status",      "flow.pkts_toserver",
               "flow.pkts_toclient", "flow.bytes_toserver", "flow.bytes_toclient",
               "payload_len",        "rev_comment"} {}

  const std::string& path(Field f) const { return paths_[static_cast<std::size_t>(f)]; }

  void set(Field f, std::string dotted) { paths_[static_cast<std::size_t>(f)] = std::move(dotted); }

  /// Reads `logical_name = dotted.path` lines. Blank lines and `#` comments
  /// are skipped; unnamed fields keep their default path.
  static FieldMap load(std::istream& in) {
    FieldMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto body = trim(line.substr(0, line.find('#')));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ParseError("expected name=path", line_no);
      const auto name = trim(body.substr(0, eq));
      const auto value = trim(body.substr(eq + 1));
      std::size_t i = 0;
      while (i < kFieldCount && kFieldNames[i] != name) ++i;
      if (i == kFieldCount) throw ValidationError("unknown field '" + name + "' in field map");
      if (value.empty()) throw ValidationError("empty path for field '" + name + "'");
      map.paths_[i] = value;
    }
    return map;
  }

 private:
  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  }

  std::array<std::string, kFieldCount> paths_;
};

namespace detail {

inline const nlohmann::json* lookup(const nlohmann::json& root, std::string_view dotted) {
  const nlohmann::json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = dotted.find('.', start);
    const auto key = dotted.substr(start, dot == std::string_view::npos ? dotted.npos : dot - start);
    if (!node->is_object()) return nullptr;
    const auto it = node->find(std::string(key));
    if (it == node->end() || it->is_null()) return nullptr;
    node = &*it;
    if (dot == std::string_view::npos) return node;
    start = dot + 1;
  }
}

inline nlohmann::json& place(nlohmann::json& root, std::string_view dotted) {
  nlohmann::json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = dotted.find('.', start);
    const auto key = std::string(dotted.substr(start, dot == std::string_view::npos ? dotted.npos : dot - start));
    node = &(*node)[key];
    if (dot == std::string_view::npos) return *node;
    start = dot + 1;
  }
}

inline std::string_view name_of(Field f) { return kFieldNames[static_cast<std::size_t>(f)]; }

inline std::optional<std::uint64_t> get_unsigned(const nlohmann::json& root, const FieldMap& map, Field f,
                                                 std::uint64_t max) {
  const auto* v = lookup(root, map.path(f));
  if (!v) return std::nullopt;
  if (v->is_number_unsigned()) {
    const auto x = v->get<std::uint64_t>();
    if (x > max)
      throw ValidationError(std::string(name_of(f)) + " out of range: " + std::to_string(x));
    return x;
  }
  if (v->is_number_integer())
    throw ValidationError(std::string(name_of(f)) + " must be non-negative: " + v->dump());
  throw ValidationError(std::string(name_of(f)) + " must be an integer, got " + v->dump());
}

inline std::optional<std::string> get_string(const nlohmann::json& root, const FieldMap& map, Field f) {
  const auto* v = lookup(root, map.path(f));
  if (!v) return std::nullopt;
  if (!v->is_string()) throw ValidationError(std::string(name_of(f)) + " must be a string");
  return v->get<std::string>();
}

inline IpAddress get_ip(const nlohmann::json& root, const FieldMap& map, Field f) {
  const auto text = get_string(root, map, f);
  if (!text) throw ValidationError("missing required field " + std::string(name_of(f)));
  const auto ip = IpAddress::parse(*text);
  if (!ip) throw ValidationError("invalid address for " + std::string(name_of(f)) + ": " + *text);
  return *ip;
}

}  // namespace detail

/// Maps one JSON object onto a RawAlert.
///
/// Required: timestamp, src_ip, dst_ip, rule_sid. Ports and payload_len
/// default to 0 (ICMP alerts carry neither). Text fields default to empty.
/// http_status, the four flow counters and rev_comment stay missing when
/// absent. Unknown keys are ignored.
inline RawAlert parse_alert_record(const nlohmann::json& record, const FieldMap& map = {}) {
  using detail::get_string;
  using detail::get_unsigned;
  if (!record.is_object()) throw ParseError("record is not a JSON object");

  RawAlert a;
  const auto ts_text = get_string(record, map, Field::Timestamp);
  if (!ts_text) throw ValidationError("missing required field timestamp");
  const auto ts = parse_timestamp(*ts_text);
  if (!ts) throw ValidationError("invalid timestamp: " + *ts_text);
  a.timestamp = *ts;

  a.src_ip = detail::get_ip(record, map, Field::SrcIp);
  a.dst_ip = detail::get_ip(record, map, Field::DstIp);
  a.src_port = static_cast<std::uint16_t>(get_unsigned(record, map, Field::SrcPort, 65535).value_or(0));
  a.dst_port = static_cast<std::uint16_t>(get_unsigned(record, map, Field::DstPort, 65535).value_or(0));

  const auto sid = get_unsigned(record, map, Field::RuleSid, UINT64_MAX);
  if (!sid) throw ValidationError("missing required field rule_sid");
  a.rule_sid = *sid;

  a.rule_description = get_string(record, map, Field::RuleDescription).value_or("");
  a.class_type = get_string(record, map, Field::ClassType).value_or("");
  a.rule_uuid = get_string(record, map, Field::RuleUuid).value_or("");
  a.action = get_string(record, map, Field::Action).value_or("");
  a.rev_comment = get_string(record, map, Field::RevComment);

  if (const auto status = get_unsigned(record, map, Field::HttpStatus, UINT64_MAX)) {
    if (*status < 100 || *status > 599)
      throw ValidationError("http_status out of range: " + std::to_string(*status));
    a.http_status = static_cast<int>(*status);
  }
  a.pkts_to_server = get_unsigned(record, map, Field::PktsToServer, UINT64_MAX);
  a.pkts_to_client = get_unsigned(record, map, Field::PktsToClient, UINT64_MAX);
  a.bytes_to_server = get_unsigned(record, map, Field::BytesToServer, UINT64_MAX);
  a.bytes_to_client = get_unsigned(record, map, Field::BytesToClient, UINT64_MAX);
  a.payload_len = get_unsigned(record, map, Field::PayloadLen, UINT64_MAX).value_or(0);
  return a;
}

inline RawAlert parse_alert_record(std::string_view line, const FieldMap& map = {}) {
  nlohmann::json record;
  try {
    record = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return parse_alert_record(record, map);
}

/// Writes an alert back into the input schema. Missing optionals are omitted.
inline nlohmann::json alert_to_json(const RawAlert& a, const FieldMap& map = {}) {
  using detail::place;
  nlohmann::json j = nlohmann::json::object();
  place(j, map.path(Field::Timestamp)) = format_timestamp(a.timestamp);
  place(j, map.path(Field::SrcIp)) = a.src_ip.to_string();
  place(j, map.path(Field::SrcPort)) = a.src_port;
  place(j, map.path(Field::DstIp)) = a.dst_ip.to_string();
  place(j, map.path(Field::DstPort)) = a.dst_port;
  place(j, map.path(Field::RuleSid)) = a.rule_sid;
  place(j, map.path(Field::RuleDescription)) = a.rule_description;
  place(j, map.path(Field::ClassType)) = a.class_type;
  place(j, map.path(Field::RuleUuid)) = a.rule_uuid;
  place(j, map.path(Field::Action)) = a.action;
  if (a.http_status) place(j, map.path(Field::HttpStatus)) = *a.http_status;
  if (a.pkts_to_server) place(j, map.path(Field::PktsToServer)) = *a.pkts_to_server;
  if (a.pkts_to_client) place(j, map.path(Field::PktsToClient)) = *a.pkts_to_client;
  if (a.bytes_to_server) place(j, map.path(Field::BytesToServer)) = *a.bytes_to_server;
  if (a.bytes_to_client) place(j, map.path(Field::BytesToClient)) = *a.bytes_to_client;
  place(j, map.path(Field::PayloadLen)) = a.payload_len;
  if (a.rev_comment) place(j, map.path(Field::RevComment)) = *a.rev_comment;
  return j;
}

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<std::pair<std::size_t, std::string>> rejection_reasons;  // (1-based line, reason)

  std::size_t total() const noexcept { return accepted + rejected; }
};

struct Corpus {
  std::vector<RawAlert> alerts;
  IngestReport report;
  std::vector<std::size_t> source_lines;  // 1-based line of each accepted alert
};

/// Reads every line of `in`. Bad lines are skipped and recorded; only a
/// failing stream is fatal.
inline Corpus read_corpus(std::istream& in, const FieldMap& map = {}) {
  if (!in) throw IoError("input stream is not readable");
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string reason;
    if (line.find_first_not_of(" \t") == std::string::npos) {
      reason = "empty line";
    } else {
      try {
        corpus.alerts.push_back(parse_alert_record(std::string_view(line), map));
        corpus.source_lines.push_back(line_no);
        ++corpus.report.accepted;
        continue;
      } catch (const Error& e) {
        reason = e.what();
      }
    }
    ++corpus.report.rejected;
    corpus.report.rejection_reasons.emplace_back(line_no, std::move(reason));
  }
  if (in.bad()) throw IoError("read failed after line " + std::to_string(line_no));
  return corpus;
}

inline Corpus read_corpus_file(const std::string& path, const FieldMap& map = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_corpus(in, map);
}

/// (rule_uuid, rev_comment) pair as kept in the rule-comment table.
struct RuleComment {
  std::string rule_uuid;
  std::string rev_comment;

  friend bool operator==(const RuleComment&, const RuleComment&) = default;
};

/// Reads the rule-comment sidecar: CSV with header `rule_uuid,rev_comment`.
inline std::vector<RuleComment> read_rule_comments(std::istream& in) {
  csv::Reader reader(in);
  csv::Record row;
  std::size_t line = 0;
  if (!reader.next(row, &line)) return {};
  if (row.size() < 2 || row[0] != "rule_uuid" || row[1] != "rev_comment")
    throw ParseError("sidecar header must be rule_uuid,rev_comment", line);
  std::vector<RuleComment> out;
  while (reader.next(row, &line)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() < 2) throw ParseError("expected 2 columns", line);
    out.push_back({row[0], row[1]});
  }
  return out;
}

/// Fills rev_comment from the sidecar, joined on rule_uuid. Sidecar entries
/// take precedence over comments embedded in the record.
inline void attach_rule_comments(std::vector<RawAlert>& alerts, const std::vector<RuleComment>& rules) {
  std::map<std::string, const std::string*, std::less<>> by_uuid;
  for (const auto& r : rules) by_uuid.emplace(r.rule_uuid, &r.rev_comment);
  for (auto& a : alerts) {
    const auto it = by_uuid.find(a.rule_uuid);
    if (it != by_uuid.end()) a.rev_comment = *it->second;
  }
}

}  // namespace alert_sift

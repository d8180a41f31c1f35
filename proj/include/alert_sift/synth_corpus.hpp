#pragma once

// Deterministic synthetic alert corpora with a plantable class signal.
//
// Every base alert belongs to a class-consistent filter rule and carries
// six marker fields (signature, class type, source address, HTTP status,
// flow counters, payload size). Each marker is drawn from its class's
// distribution with probability `signal_strength`, otherwise from a neutral
// distribution shared by both classes (a fair coin between the two class
// distributions). Each base alert is then replicated `duplication_factor`
// times, varying only the ports, to mimic one sensor repeating itself.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "alert_sift/corpus_ingest.hpp"
#include "alert_sift/error.hpp"
#include "alert_sift/rng.hpp"
#include "alert_sift/weak_labeler.hpp"

namespace alert_sift {

struct SynthSpec {
  std::size_t n_tp = 982;
  std::size_t n_fp = 1126;
  std::size_t n_rules = 500;
  std::size_t duplication_factor = 1;
  double signal_strength = 0.9;
  std::uint64_t seed = 42;
  /// Base alerts are spread uniformly over [start, end).
  Timestamp start = std::chrono::sys_days{std::chrono::year{2022} / 1 / 1};
  Timestamp end = std::chrono::sys_days{std::chrono::year{2022} / 8 / 1};
  /// Write each rule's comment into its alerts as well as the sidecar.
  bool embed_comments = false;

  void validate() const {
    if (n_rules < 1) throw ValidationError("n_rules must be at least 1");
    if (duplication_factor < 1) throw ValidationError("duplication_factor must be at least 1");
    if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) throw ValidationError("signal_strength must lie in [0, 1]");
    if (!(start < end)) throw ValidationError("synthetic period is empty");
    if (n_tp > 0 && n_fp > 0 && n_rules < 2) throw ValidationError("two classes need at least two rules");
  }
};

/// Share of rules whose comment hits both keyword lists.
inline constexpr double kSynthAmbiguousRuleRate = 0.04;
/// Share of rules whose comment hits neither list.
inline constexpr double kSynthSilentRuleRate = 0.04;
/// Share of base alerts carrying the client-wide `notate_for_soc` action.
inline constexpr double kSynthNotateRate = 0.03;
/// Share of base alerts with no flow counters.
inline constexpr double kSynthMissingFlowRate = 0.1;

struct SynthCorpus {
  std::vector<RawAlert> alerts;
  std::vector<Label> truth;
  std::vector<RuleComment> rules;
};

namespace synth {

struct Signature {
  std::uint64_t sid;
  std::string_view description;
};

inline constexpr std::array<Signature, 8> kTpSignatures = {{
    {2034647, "ET EXPLOIT Apache log4j RCE Attempt (CVE-2021-44228)"},
    {2027863, "ET EXPLOIT Possible Pulse Secure VPN Arbitrary File Read (CVE-2019-11510)"},
    {2029022, "ET EXPLOIT Citrix ADC Directory Traversal (CVE-2019-19781)"},
    {2031502, "ET WEB_SERVER Possible SQL Injection Attempt UNION SELECT"},
    {2024792, "ET TROJAN Cobalt Strike Beacon Observed"},
    {2030333, "ET EXPLOIT F5 BIG-IP TMUI RCE (CVE-2020-5902)"},
    {2035095, "ET TROJAN Win32/Emotet CnC Activity"},
    {2032776, "ET EXPLOIT Microsoft Exchange SSRF Inbound (CVE-2021-26855)"},
}};

inline constexpr std::array<Signature, 8> kFpSignatures = {{
    {2013028, "ET POLICY curl User-Agent Outbound"},
    {2012648, "ET POLICY Dropbox Client Broadcasting"},
    {2027757, "ET INFO DNS Query for .onion proxy Domain"},
    {2009582, "ET SCAN NMAP -sS window 1024"},
    {2002910, "ET SCAN Potential VNC Scan 5800-5820"},
    {2016149, "ET INFO Session Traversal Utilities for NAT (STUN Binding Request)"},
    {2025275, "ET INFO Windows OS Submitting USB Metadata to Microsoft"},
    {2001219, "ET SCAN Potential SSH Scan"},
}};

inline constexpr std::array<std::string_view, 4> kTpClassTypes = {
    "attempted-admin", "web-application-attack", "trojan-activity", "attempted-user"};
inline constexpr std::array<std::string_view, 4> kFpClassTypes = {
    "policy-violation", "misc-activity", "not-suspicious", "network-scan"};

inline constexpr std::array<std::string_view, 5> kTpComments = {
    "External scan has been alerted", "alerted to client", "ticket sent to customer",
    "escalation sent to SOC", "Alerted: confirmed exploitation attempt"};
inline constexpr std::array<std::string_view, 5> kFpComments = {
    "filtering benign activity", "expected behaviour from vulnerability scanner", "whitelisted by client",
    "benign internal backup traffic", "Expected: monitoring probe"};
inline constexpr std::array<std::string_view, 3> kAmbiguousComments = {
    "benign, but similar case was alerted", "expected unless sent from external host",
    "whitelisted earlier, alerted again after change"};
inline constexpr std::array<std::string_view, 3> kSilentComments = {"", "reviewed", "see ticket"};

inline constexpr std::array<int, 4> kTpStatuses = {400, 403, 404, 500};
inline constexpr std::array<int, 3> kFpStatuses = {200, 301, 304};
inline constexpr std::array<std::uint16_t, 8> kServicePorts = {80, 443, 22, 445, 3389, 8080, 53, 25};

template <typename T, std::size_t N>
const T& pick(const std::array<T, N>& items, Rng& rng) {
  return items[rng.below(N)];
}

inline std::string make_uuid(Rng& rng) {
  const std::uint64_t a = rng.next(), b = rng.next();
  char buf[40];
  std::snprintf(buf, sizeof buf, "%08llx-%04llx-4%03llx-%04llx-%012llx", static_cast<unsigned long long>(a >> 32),
                static_cast<unsigned long long>((a >> 16) & 0xFFFF), static_cast<unsigned long long>(a & 0xFFF),
                static_cast<unsigned long long>(0x8000 | ((b >> 48) & 0x3FFF)),
                static_cast<unsigned long long>(b & 0xFFFFFFFFFFFFULL));
  return buf;
}

inline IpAddress private_ip(Rng& rng) {
  if (rng.chance(0.5)) return IpAddress::v4((10u << 24) | static_cast<std::uint32_t>(rng.below(1u << 24)));
  return IpAddress::v4((192u << 24) | (168u << 16) | static_cast<std::uint32_t>(rng.below(1u << 16)));
}

inline IpAddress public_ip(Rng& rng) {
  for (;;) {
    const auto v = static_cast<std::uint32_t>(rng.between(0x01000000, 0xDFFFFFFF));
    const auto a = IpAddress::v4(v);
    const auto first = v >> 24;
    if (first == 10 || first == 127 || (v >> 20) == ((172u << 4) | 1u) || (v >> 16) == ((192u << 8) | 168u)) continue;
    return a;
  }
}

inline std::uint16_t ephemeral_port(Rng& rng) { return static_cast<std::uint16_t>(rng.between(1024, 65535)); }

}  // namespace synth

inline SynthCorpus generate_corpus(const SynthSpec& spec) {
  using namespace synth;
  spec.validate();
  Rng rng(spec.seed);
  SynthCorpus corpus;

  // Rules: the first share is TP-class, the rest FP-class.
  const std::size_t total = spec.n_tp + spec.n_fp;
  std::size_t tp_rules = total ? static_cast<std::size_t>(
                                     static_cast<double>(spec.n_rules) * static_cast<double>(spec.n_tp) / static_cast<double>(total) + 0.5)
                               : 0;
  if (spec.n_tp > 0) tp_rules = std::max<std::size_t>(tp_rules, 1);
  if (spec.n_fp > 0) tp_rules = std::min(tp_rules, spec.n_rules - 1);
  std::vector<std::string> uuids;
  for (std::size_t r = 0; r < spec.n_rules; ++r) {
    const bool tp_rule = r < tp_rules;
    std::string uuid = make_uuid(rng);
    std::string_view comment;
    const double u = rng.unit();
    if (u < kSynthAmbiguousRuleRate) comment = pick(kAmbiguousComments, rng);
    else if (u < kSynthAmbiguousRuleRate + kSynthSilentRuleRate) comment = pick(kSilentComments, rng);
    else comment = tp_rule ? pick(kTpComments, rng) : pick(kFpComments, rng);
    corpus.rules.push_back({uuid, std::string(comment)});
    uuids.push_back(std::move(uuid));
  }

  struct Base {
    RawAlert alert;
    Label label;
  };
  std::vector<Base> bases;
  bases.reserve(total);
  const auto span_seconds = std::chrono::duration_cast<std::chrono::seconds>(spec.end - spec.start).count();
  for (std::size_t i = 0; i < total; ++i) {
    const bool tp = i < spec.n_tp;
    // true -> draw from the TP distribution for this marker
    auto side = [&] { return rng.chance(spec.signal_strength) ? tp : rng.chance(0.5); };
    RawAlert a;
    const std::size_t rule = tp ? rng.below(tp_rules) : tp_rules + rng.below(spec.n_rules - tp_rules);
    a.rule_uuid = uuids[rule];
    a.action = rng.chance(kSynthNotateRate) ? "notate_for_soc" : (tp ? "escalate" : "filter");

    const auto& sig = side() ? pick(kTpSignatures, rng) : pick(kFpSignatures, rng);
    a.rule_sid = sig.sid;
    a.rule_description = std::string(sig.description);
    a.class_type = std::string(side() ? pick(kTpClassTypes, rng) : pick(kFpClassTypes, rng));
    a.src_ip = side() ? public_ip(rng) : private_ip(rng);
    a.dst_ip = rng.chance(0.8) ? private_ip(rng) : public_ip(rng);
    if (side()) {
      a.http_status = pick(kTpStatuses, rng);
    } else if (rng.chance(0.6)) {
      a.http_status = pick(kFpStatuses, rng);
    }
    const bool small_flow = side();
    if (!rng.chance(kSynthMissingFlowRate)) {
      if (small_flow) {
        a.pkts_to_server = static_cast<std::uint64_t>(rng.between(1, 20));
        a.pkts_to_client = static_cast<std::uint64_t>(rng.between(0, 20));
        a.bytes_to_server = static_cast<std::uint64_t>(rng.between(60, 20'000));
        a.bytes_to_client = static_cast<std::uint64_t>(rng.between(0, 20'000));
      } else {
        a.pkts_to_server = static_cast<std::uint64_t>(rng.between(200, 8'000));
        a.pkts_to_client = static_cast<std::uint64_t>(rng.between(200, 8'000));
        a.bytes_to_server = static_cast<std::uint64_t>(rng.between(200'000, 1'000'000));
        a.bytes_to_client = static_cast<std::uint64_t>(rng.between(200'000, 1'000'000));
      }
    }
    a.payload_len = side() ? static_cast<std::uint64_t>(rng.between(2'000, 12'000))
                           : static_cast<std::uint64_t>(rng.between(0, 600));
    a.dst_port = pick(kServicePorts, rng);
    a.src_port = ephemeral_port(rng);
    a.timestamp = spec.start + std::chrono::seconds{static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(span_seconds)))};
    bases.push_back({std::move(a), tp ? Label::TP : Label::FP});
  }
  std::stable_sort(bases.begin(), bases.end(),
                   [](const Base& x, const Base& y) { return x.alert.timestamp < y.alert.timestamp; });

  std::unordered_map<std::string_view, std::string_view> comment_of_rule;
  for (const auto& r : corpus.rules) comment_of_rule.emplace(r.rule_uuid, r.rev_comment);

  corpus.alerts.reserve(total * spec.duplication_factor);
  for (const auto& b : bases) {
    for (std::size_t d = 0; d < spec.duplication_factor; ++d) {
      RawAlert copy = b.alert;
      if (d > 0) {
        copy.src_port = ephemeral_port(rng);
        copy.dst_port = static_cast<std::uint16_t>(rng.between(1, 65535));
      }
      if (spec.embed_comments) copy.rev_comment = std::string(comment_of_rule.at(copy.rule_uuid));
      corpus.alerts.push_back(std::move(copy));
      corpus.truth.push_back(b.label);
    }
  }
  return corpus;
}

inline void write_alerts_ndjson(std::ostream& out, const std::vector<RawAlert>& alerts, const FieldMap& map = {}) {
  for (const auto& a : alerts) out << alert_to_json(a, map).dump() << '\n';
}

/// CSV `line,label`: the 1-based NDJSON line and its true class (1 = TP).
inline void write_truth_csv(std::ostream& out, const std::vector<Label>& truth) {
  out << "line,label\n";
  for (std::size_t i = 0; i < truth.size(); ++i) out << i + 1 << ',' << to_int(truth[i]) << '\n';
}

inline void write_rule_comments(std::ostream& out, const std::vector<RuleComment>& rules) {
  out << "rule_uuid,rev_comment\n";
  for (const auto& r : rules) out << csv::join({r.rule_uuid, r.rev_comment}) << '\n';
}

}  // namespace alert_sift

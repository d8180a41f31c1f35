#pragma once

#include <arpa/inet.h>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace alert_sift {

/// IPv4 or IPv6 address held in network byte order.
class IpAddress {
 public:
  enum class Family : std::uint8_t { V4, V6 };

  IpAddress() = default;

  static IpAddress v4(std::uint32_t host_order) {
    IpAddress a;
    a.family_ = Family::V4;
    a.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
    a.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
    a.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
    a.bytes_[3] = static_cast<std::uint8_t>(host_order);
    return a;
  }

  static IpAddress v6(const std::array<std::uint8_t, 16>& bytes) {
    IpAddress a;
    a.family_ = Family::V6;
    a.bytes_ = bytes;
    return a;
  }

  /// Parses dotted-quad or RFC 4291 text. Returns nullopt on bad input.
  static std::optional<IpAddress> parse(std::string_view text) {
    const std::string s(text);
    IpAddress a;
    if (s.find(':') == std::string::npos) {
      if (inet_pton(AF_INET, s.c_str(), a.bytes_.data()) != 1) return std::nullopt;
      a.family_ = Family::V4;
    } else {
      if (inet_pton(AF_INET6, s.c_str(), a.bytes_.data()) != 1) return std::nullopt;
      a.family_ = Family::V6;
    }
    return a;
  }

  Family family() const noexcept { return family_; }
  bool is_v4() const noexcept { return family_ == Family::V4; }

  std::uint32_t v4_value() const noexcept {
    return (std::uint32_t{bytes_[0]} << 24) | (std::uint32_t{bytes_[1]} << 16) |
           (std::uint32_t{bytes_[2]} << 8) | std::uint32_t{bytes_[3]};
  }

  /// Most significant 64 bits of an IPv6 address (the routing prefix).
  std::uint64_t v6_high64() const noexcept {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | bytes_[static_cast<std::size_t>(i)];
    return v;
  }

  const std::array<std::uint8_t, 16>& bytes() const noexcept { return bytes_; }

  std::string to_string() const {
    char buf[INET6_ADDRSTRLEN] = {};
    inet_ntop(is_v4() ? AF_INET : AF_INET6, bytes_.data(), buf, sizeof buf);
    return buf;
  }

  friend bool operator==(const IpAddress&, const IpAddress&) = default;

 private:
  Family family_ = Family::V4;
  std::array<std::uint8_t, 16> bytes_{};
};

}  // namespace alert_sift

#pragma once

// MQTT 3.1.1 control-packet subset: CONNECT, CONNACK, PUBLISH (qos 0/1),
// PUBACK, SUBSCRIBE, SUBACK, PINGREQ, PINGRESP, DISCONNECT.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace triplex::mqtt {

using Bytes = std::vector<std::uint8_t>;

enum class PacketType : std::uint8_t {
  Connect = 1,
  ConnAck = 2,
  Publish = 3,
  PubAck = 4,
  Subscribe = 8,
  SubAck = 9,
  PingReq = 12,
  PingResp = 13,
  Disconnect = 14,
};

inline constexpr std::uint32_t kMaxRemainingLength = 268'435'455;

struct Connect {
  std::string client_id;
  std::uint16_t keep_alive_s = 60;
  bool operator==(const Connect&) const = default;
};

struct ConnAck {
  bool session_present = false;
  std::uint8_t return_code = 0;
  bool operator==(const ConnAck&) const = default;
};

struct Publish {
  std::string topic;
  Bytes payload;
  std::uint8_t qos = 0;
  std::optional<std::uint16_t> packet_id;
  bool dup = false;
  bool retain = false;
  bool operator==(const Publish&) const = default;
};

struct PubAck {
  std::uint16_t packet_id = 0;
  bool operator==(const PubAck&) const = default;
};

struct Subscription {
  std::string filter;
  std::uint8_t qos = 0;
  bool operator==(const Subscription&) const = default;
};

struct Subscribe {
  std::uint16_t packet_id = 0;
  std::vector<Subscription> filters;
  bool operator==(const Subscribe&) const = default;
};

inline constexpr std::uint8_t kSubAckFailure = 0x80;

struct SubAck {
  std::uint16_t packet_id = 0;
  std::vector<std::uint8_t> return_codes;
  bool operator==(const SubAck&) const = default;
};

struct PingReq {
  bool operator==(const PingReq&) const = default;
};
struct PingResp {
  bool operator==(const PingResp&) const = default;
};
struct Disconnect {
  bool operator==(const Disconnect&) const = default;
};

using Packet =
    std::variant<Connect, ConnAck, Publish, PubAck, Subscribe, SubAck, PingReq, PingResp, Disconnect>;

struct Decoded {
  Packet packet;
  std::size_t consumed = 0;
};

/// Throws EncodeError when the packet violates its invariants.
Bytes encode_packet(const Packet& p);

/// Returns std::nullopt (NeedMoreBytes) when `buf` holds only a prefix of a
/// packet. Throws ProtocolError on malformed input; the caller must then drop
/// the connection.
std::optional<Decoded> decode_packet(std::span<const std::uint8_t> buf);

void encode_remaining_length(std::uint32_t value, Bytes& out);

struct VarInt {
  std::uint32_t value = 0;
  std::size_t length = 0;
};
/// std::nullopt when more bytes are needed; ProtocolError beyond four bytes.
std::optional<VarInt> decode_remaining_length(std::span<const std::uint8_t> buf);

/// Validates a topic name (no wildcards, non-empty, well-formed UTF-8).
bool is_valid_topic_name(std::string_view name);
/// Validates a topic filter ('+' whole level, '#' whole final level).
bool is_valid_topic_filter(std::string_view filter);

bool topic_matches(std::string_view filter, std::string_view name);

const char* packet_name(const Packet& p);

}  // namespace triplex::mqtt

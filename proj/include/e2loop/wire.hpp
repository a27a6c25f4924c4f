#pragma once

// Message model and binary codec for the E2 link.
//
// Frame layout (all integers big-endian):
//   magic 0xE2AF (2) | version 0x01 (1) | msg_type (1) | payload_len (4) | payload
// Payload fields are positional: fixed-width integers, u16-length strings,
// u16-count lists, IEEE-754 f64. See docs/wire-format.md for worked examples.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace e2loop::wire {

inline constexpr uint16_t kMagic = 0xE2AF;
inline constexpr uint8_t kVersion = 0x01;
inline constexpr std::size_t kFrameHeaderSize = 8;

inline constexpr uint16_t kKpmFunctionId = 200;
inline constexpr uint16_t kRcFunctionId = 300;

enum class NodeKind : uint8_t { Enb = 0, Gnb = 1 };

struct GlobalNodeId {
  std::string plmn;  // "131-133"
  NodeKind kind = NodeKind::Gnb;
  uint32_t node_id = 0;

  bool operator==(const GlobalNodeId&) const = default;
};

// True when `plmn` matches \d+-\d+.
bool valid_plmn(std::string_view plmn);

struct RanFunctionDefinition {
  uint16_t function_id = 0;
  uint8_t revision = 0;
  std::string description;

  bool operator==(const RanFunctionDefinition&) const = default;
};

enum class UnitType : uint8_t { CuCp = 0, CuUp = 1, Du = 2 };

const char* unit_name(UnitType unit);

struct Measurement {
  std::string name;
  double value = 0.0;

  bool operator==(const Measurement&) const = default;
};

struct UeMeasurements {
  uint64_t ue_id = 0;  // IMSI
  std::vector<Measurement> items;

  bool operator==(const UeMeasurements&) const = default;
};

struct KpmHeader {
  uint64_t timestamp_ms = 0;  // Unix epoch ms
  std::string node_display_id;

  bool operator==(const KpmHeader&) const = default;
};

struct KpmBody {
  UnitType unit = UnitType::CuCp;
  std::vector<Measurement> cell_measurements;
  std::vector<UeMeasurements> ue_measurements;

  bool operator==(const KpmBody&) const = default;
};

struct KpmReport {
  KpmHeader header;
  KpmBody body;

  bool operator==(const KpmReport&) const = default;
};

enum class ControlKind : uint8_t { Handover = 0 };

struct ControlAction {
  ControlKind kind = ControlKind::Handover;
  uint64_t ue_id = 0;
  uint32_t source_cell = 0;
  uint32_t target_cell = 0;

  bool operator==(const ControlAction&) const = default;
};

enum class AckStatus : uint8_t { Success = 0, Rejected = 1 };

struct E2SetupRequest {
  GlobalNodeId node;
  std::vector<RanFunctionDefinition> functions;
  bool operator==(const E2SetupRequest&) const = default;
};

struct E2SetupResponse {
  std::vector<uint16_t> accepted_function_ids;
  bool operator==(const E2SetupResponse&) const = default;
};

struct SubscriptionRequest {
  uint32_t request_id = 0;
  uint16_t function_id = 0;
  uint32_t report_period_ms = 0;
  bool operator==(const SubscriptionRequest&) const = default;
};

struct SubscriptionResponse {
  uint32_t request_id = 0;
  bool admitted = false;
  bool operator==(const SubscriptionResponse&) const = default;
};

struct RicIndication {
  uint32_t request_id = 0;
  uint16_t function_id = 0;
  uint32_t sequence_number = 0;
  KpmHeader header;
  KpmBody body;
  bool operator==(const RicIndication&) const = default;
};

struct RicControlRequest {
  uint16_t function_id = kRcFunctionId;
  ControlAction action;
  bool operator==(const RicControlRequest&) const = default;
};

struct RicControlAcknowledge {
  AckStatus status = AckStatus::Success;
  std::string detail;
  bool operator==(const RicControlAcknowledge&) const = default;
};

using E2Message = std::variant<E2SetupRequest, E2SetupResponse, SubscriptionRequest,
                               SubscriptionResponse, RicIndication, RicControlRequest,
                               RicControlAcknowledge>;

enum class MsgType : uint8_t {
  SetupRequest = 0x01,
  SetupResponse = 0x02,
  SubscriptionRequest = 0x03,
  SubscriptionResponse = 0x04,
  Indication = 0x05,
  ControlRequest = 0x06,
  ControlAck = 0x07,
};

MsgType type_of(const E2Message& msg);
const char* type_name(MsgType type);

// Function id carried by the message, when the variant has one.
std::optional<uint16_t> function_id_of(const E2Message& msg);

// Throws Error(ErrorCode::Encode) when a string exceeds 65535 bytes or a list
// exceeds 65535 entries.
std::vector<uint8_t> encode(const E2Message& msg);

struct Decoded {
  E2Message message;
  std::size_t consumed = 0;
};

enum class DecodeErrorKind { BadMagic, UnsupportedVersion, TruncatedFrame, MalformedPayload };

const char* decode_error_name(DecodeErrorKind kind);

struct DecodeError {
  DecodeErrorKind kind;
  std::size_t required = 0;  // total frame bytes needed, for TruncatedFrame
  std::string detail;
};

using DecodeResult = std::variant<Decoded, DecodeError>;

// Decodes exactly one frame from the front of `bytes`. Never throws.
DecodeResult decode(std::span<const uint8_t> bytes);

// Header-only inspection used by stream readers: returns the full frame size
// once 8 bytes are available, or the header error.
std::variant<std::size_t, DecodeError> peek_frame_size(std::span<const uint8_t> bytes);

// "gnb:" / "enb:" + plmn + "-3" + node_id left-padded with '0' to pad_width.
std::string format_node_id(const GlobalNodeId& id, int pad_width = 8);
std::optional<GlobalNodeId> parse_node_id(std::string_view text);

std::string to_hex(std::span<const uint8_t> bytes);

}  // namespace e2loop::wire

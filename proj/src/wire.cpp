#include "e2loop/wire.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <limits>

#include "e2loop/error.hpp"

namespace e2loop {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Encode: return "EncodeError";
    case ErrorCode::ConnectRefused: return "ConnectRefused";
    case ErrorCode::SetupTimeout: return "SetupTimeout";
    case ErrorCode::SetupRejected: return "SetupRejected";
    case ErrorCode::NotSubscribed: return "NotSubscribed";
    case ErrorCode::ConnectionLost: return "ConnectionLost";
    case ErrorCode::DuplicatePort: return "DuplicatePort";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::FunctionNotAccepted: return "FunctionNotAccepted";
    case ErrorCode::ControlNotSupported: return "ControlNotSupported";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::UnsupportedUnit: return "UnsupportedUnit";
    case ErrorCode::Io: return "IoError";
  }
  return "Unknown";
}

}  // namespace e2loop

namespace e2loop::wire {

namespace {

constexpr std::size_t kMaxField = std::numeric_limits<uint16_t>::max();

class Writer {
 public:
  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) {
    out_.push_back(static_cast<uint8_t>(v >> 8));
    out_.push_back(static_cast<uint8_t>(v));
  }
  void u32(uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<uint8_t>(v >> shift));
  }
  void u64(uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<uint8_t>(v >> shift));
  }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void str(const std::string& s) {
    if (s.size() > kMaxField) throw Error(ErrorCode::Encode, "string exceeds 65535 bytes");
    u16(static_cast<uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void count(std::size_t n) {
    if (n > kMaxField) throw Error(ErrorCode::Encode, "list exceeds 65535 entries");
    u16(static_cast<uint16_t>(n));
  }

  std::vector<uint8_t>& bytes() { return out_; }

 private:
  std::vector<uint8_t> out_;
};

// Bounds-checked cursor. Any read past the end flips `ok` and yields zeros so
// callers can decode straight-line and check once.
class Reader {
 public:
  explicit Reader(std::span<const uint8_t> in) : in_(in) {}

  bool ok() const { return ok_; }
  bool at_end() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

  uint8_t u8() {
    if (!need(1)) return 0;
    return in_[pos_++];
  }
  uint16_t u16() {
    if (!need(2)) return 0;
    uint16_t v = static_cast<uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    if (!need(4)) return 0;
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    if (!need(8)) return 0;
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    uint16_t len = u16();
    if (!need(len)) return {};
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  // Count prefix for a list whose elements occupy at least `min_elem` bytes;
  // rejects counts the remaining input cannot hold before anything is reserved.
  std::size_t count(std::size_t min_elem) {
    uint16_t n = u16();
    if (ok_ && n * min_elem > remaining()) ok_ = false;
    return ok_ ? n : 0;
  }
  void fail() { ok_ = false; }

 private:
  bool need(std::size_t n) {
    if (!ok_ || remaining() < n) {
      ok_ = false;
      return false;
    }
    return true;
  }

  std::span<const uint8_t> in_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

void put_measurements(Writer& w, const std::vector<Measurement>& items) {
  w.count(items.size());
  for (const auto& m : items) {
    w.str(m.name);
    w.f64(m.value);
  }
}

std::vector<Measurement> get_measurements(Reader& r) {
  std::vector<Measurement> items;
  std::size_t n = r.count(2 + 8);
  items.reserve(n);
  for (std::size_t i = 0; i < n && r.ok(); ++i) {
    Measurement m;
    m.name = r.str();
    m.value = r.f64();
    items.push_back(std::move(m));
  }
  return items;
}

void put_payload(Writer& w, const E2SetupRequest& m) {
  w.str(m.node.plmn);
  w.u8(static_cast<uint8_t>(m.node.kind));
  w.u32(m.node.node_id);
  w.count(m.functions.size());
  for (const auto& f : m.functions) {
    w.u16(f.function_id);
    w.u8(f.revision);
    w.str(f.description);
  }
}

void put_payload(Writer& w, const E2SetupResponse& m) {
  w.count(m.accepted_function_ids.size());
  for (uint16_t id : m.accepted_function_ids) w.u16(id);
}

void put_payload(Writer& w, const SubscriptionRequest& m) {
  w.u32(m.request_id);
  w.u16(m.function_id);
  w.u32(m.report_period_ms);
}

void put_payload(Writer& w, const SubscriptionResponse& m) {
  w.u32(m.request_id);
  w.u8(m.admitted ? 1 : 0);
}

void put_payload(Writer& w, const RicIndication& m) {
  w.u32(m.request_id);
  w.u16(m.function_id);
  w.u32(m.sequence_number);
  w.u64(m.header.timestamp_ms);
  w.str(m.header.node_display_id);
  w.u8(static_cast<uint8_t>(m.body.unit));
  put_measurements(w, m.body.cell_measurements);
  w.count(m.body.ue_measurements.size());
  for (const auto& ue : m.body.ue_measurements) {
    w.u64(ue.ue_id);
    put_measurements(w, ue.items);
  }
}

void put_payload(Writer& w, const RicControlRequest& m) {
  w.u16(m.function_id);
  w.u8(static_cast<uint8_t>(m.action.kind));
  w.u64(m.action.ue_id);
  w.u32(m.action.source_cell);
  w.u32(m.action.target_cell);
}

void put_payload(Writer& w, const RicControlAcknowledge& m) {
  w.u8(static_cast<uint8_t>(m.status));
  w.str(m.detail);
}

std::optional<E2Message> get_payload(MsgType type, Reader& r) {
  switch (type) {
    case MsgType::SetupRequest: {
      E2SetupRequest m;
      m.node.plmn = r.str();
      uint8_t kind = r.u8();
      if (kind > 1) r.fail();
      m.node.kind = static_cast<NodeKind>(kind);
      m.node.node_id = r.u32();
      std::size_t n = r.count(2 + 1 + 2);
      m.functions.reserve(n);
      for (std::size_t i = 0; i < n && r.ok(); ++i) {
        RanFunctionDefinition f;
        f.function_id = r.u16();
        f.revision = r.u8();
        f.description = r.str();
        m.functions.push_back(std::move(f));
      }
      return m;
    }
    case MsgType::SetupResponse: {
      E2SetupResponse m;
      std::size_t n = r.count(2);
      m.accepted_function_ids.reserve(n);
      for (std::size_t i = 0; i < n && r.ok(); ++i) m.accepted_function_ids.push_back(r.u16());
      return m;
    }
    case MsgType::SubscriptionRequest: {
      SubscriptionRequest m;
      m.request_id = r.u32();
      m.function_id = r.u16();
      m.report_period_ms = r.u32();
      return m;
    }
    case MsgType::SubscriptionResponse: {
      SubscriptionResponse m;
      m.request_id = r.u32();
      uint8_t admitted = r.u8();
      if (admitted > 1) r.fail();
      m.admitted = admitted == 1;
      return m;
    }
    case MsgType::Indication: {
      RicIndication m;
      m.request_id = r.u32();
      m.function_id = r.u16();
      m.sequence_number = r.u32();
      m.header.timestamp_ms = r.u64();
      m.header.node_display_id = r.str();
      uint8_t unit = r.u8();
      if (unit > 2) r.fail();
      m.body.unit = static_cast<UnitType>(unit);
      m.body.cell_measurements = get_measurements(r);
      std::size_t n = r.count(8 + 2);
      m.body.ue_measurements.reserve(n);
      for (std::size_t i = 0; i < n && r.ok(); ++i) {
        UeMeasurements ue;
        ue.ue_id = r.u64();
        ue.items = get_measurements(r);
        m.body.ue_measurements.push_back(std::move(ue));
      }
      return m;
    }
    case MsgType::ControlRequest: {
      RicControlRequest m;
      m.function_id = r.u16();
      uint8_t kind = r.u8();
      if (kind != 0) r.fail();
      m.action.kind = ControlKind::Handover;
      m.action.ue_id = r.u64();
      m.action.source_cell = r.u32();
      m.action.target_cell = r.u32();
      return m;
    }
    case MsgType::ControlAck: {
      RicControlAcknowledge m;
      uint8_t status = r.u8();
      if (status > 1) r.fail();
      m.status = static_cast<AckStatus>(status);
      m.detail = r.str();
      return m;
    }
  }
  return std::nullopt;
}

bool known_type(uint8_t t) { return t >= 0x01 && t <= 0x07; }

}  // namespace

bool valid_plmn(std::string_view plmn) {
  auto dash = plmn.find('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 1 == plmn.size()) return false;
  for (std::size_t i = 0; i < plmn.size(); ++i) {
    if (i == dash) continue;
    if (plmn[i] < '0' || plmn[i] > '9') return false;
  }
  return true;
}

const char* unit_name(UnitType unit) {
  switch (unit) {
    case UnitType::CuCp: return "CU-CP";
    case UnitType::CuUp: return "CU-UP";
    case UnitType::Du: return "DU";
  }
  return "?";
}

MsgType type_of(const E2Message& msg) {
  return static_cast<MsgType>(msg.index() + 1);
}

const char* type_name(MsgType type) {
  switch (type) {
    case MsgType::SetupRequest: return "E2SetupRequest";
    case MsgType::SetupResponse: return "E2SetupResponse";
    case MsgType::SubscriptionRequest: return "SubscriptionRequest";
    case MsgType::SubscriptionResponse: return "SubscriptionResponse";
    case MsgType::Indication: return "RicIndication";
    case MsgType::ControlRequest: return "RicControlRequest";
    case MsgType::ControlAck: return "RicControlAcknowledge";
  }
  return "Unknown";
}

std::optional<uint16_t> function_id_of(const E2Message& msg) {
  if (auto* m = std::get_if<SubscriptionRequest>(&msg)) return m->function_id;
  if (auto* m = std::get_if<RicIndication>(&msg)) return m->function_id;
  if (auto* m = std::get_if<RicControlRequest>(&msg)) return m->function_id;
  return std::nullopt;
}

std::vector<uint8_t> encode(const E2Message& msg) {
  Writer w;
  w.u16(kMagic);
  w.u8(kVersion);
  w.u8(static_cast<uint8_t>(type_of(msg)));
  w.u32(0);
  std::visit([&w](const auto& m) { put_payload(w, m); }, msg);
  auto& out = w.bytes();
  uint32_t payload_len = static_cast<uint32_t>(out.size() - kFrameHeaderSize);
  for (int i = 0; i < 4; ++i) out[4 + i] = static_cast<uint8_t>(payload_len >> (24 - 8 * i));
  return std::move(out);
}

const char* decode_error_name(DecodeErrorKind kind) {
  switch (kind) {
    case DecodeErrorKind::BadMagic: return "BadMagic";
    case DecodeErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case DecodeErrorKind::TruncatedFrame: return "TruncatedFrame";
    case DecodeErrorKind::MalformedPayload: return "MalformedPayload";
  }
  return "Unknown";
}

std::variant<std::size_t, DecodeError> peek_frame_size(std::span<const uint8_t> bytes) {
  if (bytes.size() >= 2) {
    uint16_t magic = static_cast<uint16_t>((bytes[0] << 8) | bytes[1]);
    if (magic != kMagic) return DecodeError{DecodeErrorKind::BadMagic, 0, "bad magic"};
  }
  if (bytes.size() >= 3 && bytes[2] != kVersion) {
    return DecodeError{DecodeErrorKind::UnsupportedVersion, 0,
                       "version " + std::to_string(bytes[2])};
  }
  if (bytes.size() < kFrameHeaderSize) {
    return DecodeError{DecodeErrorKind::TruncatedFrame, kFrameHeaderSize, "short header"};
  }
  uint32_t payload_len = (uint32_t{bytes[4]} << 24) | (uint32_t{bytes[5]} << 16) |
                         (uint32_t{bytes[6]} << 8) | uint32_t{bytes[7]};
  return kFrameHeaderSize + std::size_t{payload_len};
}

DecodeResult decode(std::span<const uint8_t> bytes) {
  auto size = peek_frame_size(bytes);
  if (auto* err = std::get_if<DecodeError>(&size)) return *err;
  std::size_t frame_size = std::get<std::size_t>(size);
  if (bytes.size() < frame_size) {
    return DecodeError{DecodeErrorKind::TruncatedFrame, frame_size, "short payload"};
  }
  uint8_t raw_type = bytes[3];
  if (!known_type(raw_type)) {
    return DecodeError{DecodeErrorKind::MalformedPayload, 0,
                       "unknown msg_type " + std::to_string(raw_type)};
  }
  Reader r(bytes.subspan(kFrameHeaderSize, frame_size - kFrameHeaderSize));
  auto msg = get_payload(static_cast<MsgType>(raw_type), r);
  if (!msg || !r.ok()) {
    return DecodeError{DecodeErrorKind::MalformedPayload, 0, "payload fields inconsistent"};
  }
  if (!r.at_end()) {
    return DecodeError{DecodeErrorKind::MalformedPayload, 0, "trailing payload bytes"};
  }
  return Decoded{std::move(*msg), frame_size};
}

std::string format_node_id(const GlobalNodeId& id, int pad_width) {
  std::string digits = std::to_string(id.node_id);
  if (pad_width > 0 && digits.size() < static_cast<std::size_t>(pad_width)) {
    digits.insert(0, static_cast<std::size_t>(pad_width) - digits.size(), '0');
  }
  std::string out = id.kind == NodeKind::Gnb ? "gnb:" : "enb:";
  out += id.plmn;
  out += "-3";
  out += digits;
  return out;
}

std::optional<GlobalNodeId> parse_node_id(std::string_view text) {
  GlobalNodeId id;
  if (text.starts_with("gnb:")) {
    id.kind = NodeKind::Gnb;
  } else if (text.starts_with("enb:")) {
    id.kind = NodeKind::Enb;
  } else {
    return std::nullopt;
  }
  text.remove_prefix(4);
  auto first_dash = text.find('-');
  if (first_dash == std::string_view::npos) return std::nullopt;
  auto second_dash = text.find('-', first_dash + 1);
  if (second_dash == std::string_view::npos) return std::nullopt;
  std::string_view plmn = text.substr(0, second_dash);
  if (!valid_plmn(plmn)) return std::nullopt;
  std::string_view rest = text.substr(second_dash + 1);
  if (rest.size() < 2 || rest[0] != '3') return std::nullopt;
  rest.remove_prefix(1);
  for (char c : rest) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
  if (ec != std::errc{} || ptr != rest.data() + rest.size()) return std::nullopt;
  id.plmn = std::string(plmn);
  id.node_id = value;
  return id;
}

std::string to_hex(std::span<const uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(bytes.size() * 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i) out.push_back(' ');
    out.push_back(kDigits[bytes[i] >> 4]);
    out.push_back(kDigits[bytes[i] & 0xF]);
  }
  return out;
}

}  // namespace e2loop::wire

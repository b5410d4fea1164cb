#include "triplex/mqtt/codec.hpp"

#include "triplex/error.hpp"

namespace triplex::mqtt {

namespace {

constexpr std::uint8_t kProtocolLevel = 4;
constexpr std::uint8_t kCleanSession = 0x02;

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (extra > 0 && i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000)) {
      return false;  // overlong
    }
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_string(Bytes& out, std::string_view s) {
  if (s.size() > 0xFFFF) throw EncodeError("string longer than 65535 bytes");
  if (!valid_utf8(s)) throw EncodeError("string is not well-formed UTF-8");
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

std::uint16_t require_packet_id(std::optional<std::uint16_t> id) {
  if (!id || *id == 0) throw EncodeError("packet id must be in [1, 65535]");
  return *id;
}

Bytes frame(std::uint8_t first_byte, const Bytes& body) {
  if (body.size() > kMaxRemainingLength) throw EncodeError("packet exceeds maximum length");
  Bytes out;
  out.reserve(body.size() + 5);
  out.push_back(first_byte);
  encode_remaining_length(static_cast<std::uint32_t>(body.size()), out);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

struct Encoder {
  Bytes operator()(const Connect& c) const {
    Bytes body;
    put_string(body, "MQTT");
    body.push_back(kProtocolLevel);
    body.push_back(kCleanSession);
    put_u16(body, c.keep_alive_s);
    put_string(body, c.client_id);
    return frame(0x10, body);
  }
  Bytes operator()(const ConnAck& c) const {
    if (c.return_code > 5) throw EncodeError("connack return code out of range");
    if (c.session_present && c.return_code != 0) {
      throw EncodeError("session_present requires return code 0");
    }
    return frame(0x20, Bytes{static_cast<std::uint8_t>(c.session_present ? 1 : 0), c.return_code});
  }
  Bytes operator()(const Publish& p) const {
    if (p.qos > 1) throw EncodeError("qos must be 0 or 1");
    if (!is_valid_topic_name(p.topic)) throw EncodeError("invalid topic name '" + p.topic + "'");
    Bytes body;
    put_string(body, p.topic);
    if (p.qos == 1) {
      put_u16(body, require_packet_id(p.packet_id));
    } else {
      if (p.packet_id) throw EncodeError("qos 0 publish must not carry a packet id");
      if (p.dup) throw EncodeError("qos 0 publish must not set dup");
    }
    body.insert(body.end(), p.payload.begin(), p.payload.end());
    const auto flags = static_cast<std::uint8_t>((p.dup ? 0x08 : 0) | (p.qos << 1) | (p.retain ? 1 : 0));
    return frame(static_cast<std::uint8_t>(0x30 | flags), body);
  }
  Bytes operator()(const PubAck& a) const {
    Bytes body;
    put_u16(body, require_packet_id(a.packet_id));
    return frame(0x40, body);
  }
  Bytes operator()(const Subscribe& s) const {
    if (s.filters.empty()) throw EncodeError("subscribe needs at least one filter");
    Bytes body;
    put_u16(body, require_packet_id(s.packet_id));
    for (const auto& f : s.filters) {
      if (!is_valid_topic_filter(f.filter)) throw EncodeError("invalid topic filter '" + f.filter + "'");
      if (f.qos > 1) throw EncodeError("requested qos must be 0 or 1");
      put_string(body, f.filter);
      body.push_back(f.qos);
    }
    return frame(0x82, body);
  }
  Bytes operator()(const SubAck& s) const {
    if (s.return_codes.empty()) throw EncodeError("suback needs at least one return code");
    Bytes body;
    put_u16(body, require_packet_id(s.packet_id));
    for (auto rc : s.return_codes) {
      if (rc > 2 && rc != kSubAckFailure) throw EncodeError("invalid suback return code");
      body.push_back(rc);
    }
    return frame(0x90, body);
  }
  Bytes operator()(const PingReq&) const { return {0xC0, 0x00}; }
  Bytes operator()(const PingResp&) const { return {0xD0, 0x00}; }
  Bytes operator()(const Disconnect&) const { return {0xE0, 0x00}; }
};

/// Bounds-checked cursor over the variable header + payload.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> body) : body_(body) {}

  std::uint8_t u8() {
    need(1);
    return body_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>((body_[pos_] << 8) | body_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::string str() {
    const std::uint16_t len = u16();
    need(len);
    std::string s(reinterpret_cast<const char*>(body_.data() + pos_), len);
    pos_ += len;
    if (!valid_utf8(s)) throw ProtocolError("string is not well-formed UTF-8");
    return s;
  }
  Bytes rest() {
    Bytes b(body_.begin() + static_cast<std::ptrdiff_t>(pos_), body_.end());
    pos_ = body_.size();
    return b;
  }
  bool done() const { return pos_ == body_.size(); }
  void expect_done() const {
    if (!done()) throw ProtocolError("trailing bytes in packet");
  }

 private:
  void need(std::size_t n) const {
    if (body_.size() - pos_ < n) throw ProtocolError("packet shorter than its fields");
  }
  std::span<const std::uint8_t> body_;
  std::size_t pos_ = 0;
};

std::uint16_t nonzero_id(std::uint16_t id) {
  if (id == 0) throw ProtocolError("packet id 0 is not allowed");
  return id;
}

Packet decode_body(std::uint8_t type, std::uint8_t flags, std::span<const std::uint8_t> body) {
  Reader r(body);
  auto expect_flags = [&](std::uint8_t want) {
    if (flags != want) throw ProtocolError("invalid fixed-header flags");
  };
  switch (type) {
    case 1: {
      expect_flags(0);
      if (r.str() != "MQTT") throw ProtocolError("unknown protocol name");
      if (r.u8() != kProtocolLevel) throw ProtocolError("unsupported protocol level");
      const std::uint8_t cflags = r.u8();
      if (cflags & 0x01) throw ProtocolError("reserved connect flag set");
      if (cflags != kCleanSession) {
        throw ProtocolError("only clean sessions without will, retain or credentials are supported");
      }
      Connect c;
      c.keep_alive_s = r.u16();
      c.client_id = r.str();
      r.expect_done();
      return c;
    }
    case 2: {
      expect_flags(0);
      const std::uint8_t ack_flags = r.u8();
      if (ack_flags & 0xFE) throw ProtocolError("reserved connack flags set");
      ConnAck c{(ack_flags & 1) != 0, r.u8()};
      if (c.return_code > 5) throw ProtocolError("connack return code out of range");
      r.expect_done();
      return c;
    }
    case 3: {
      Publish p;
      p.dup = (flags & 0x08) != 0;
      p.qos = static_cast<std::uint8_t>((flags >> 1) & 0x03);
      p.retain = (flags & 0x01) != 0;
      if (p.qos > 1) throw ProtocolError("qos 2 is not supported");
      if (p.qos == 0 && p.dup) throw ProtocolError("dup set on qos 0 publish");
      p.topic = r.str();
      if (!is_valid_topic_name(p.topic)) throw ProtocolError("invalid topic name");
      if (p.qos == 1) p.packet_id = nonzero_id(r.u16());
      p.payload = r.rest();
      return p;
    }
    case 4: {
      expect_flags(0);
      PubAck a{nonzero_id(r.u16())};
      r.expect_done();
      return a;
    }
    case 8: {
      expect_flags(0x02);
      Subscribe s;
      s.packet_id = nonzero_id(r.u16());
      while (!r.done()) {
        Subscription sub;
        sub.filter = r.str();
        sub.qos = r.u8();
        if (!is_valid_topic_filter(sub.filter)) throw ProtocolError("invalid topic filter");
        if (sub.qos > 2) throw ProtocolError("invalid requested qos");
        if (sub.qos == 2) sub.qos = 1;  // downgraded: qos 2 is outside the subset
        s.filters.push_back(std::move(sub));
      }
      if (s.filters.empty()) throw ProtocolError("subscribe without filters");
      return s;
    }
    case 9: {
      expect_flags(0);
      SubAck s;
      s.packet_id = nonzero_id(r.u16());
      while (!r.done()) {
        const std::uint8_t rc = r.u8();
        if (rc > 2 && rc != kSubAckFailure) throw ProtocolError("invalid suback return code");
        s.return_codes.push_back(rc);
      }
      if (s.return_codes.empty()) throw ProtocolError("suback without return codes");
      return s;
    }
    case 12:
      expect_flags(0);
      r.expect_done();
      return PingReq{};
    case 13:
      expect_flags(0);
      r.expect_done();
      return PingResp{};
    case 14:
      expect_flags(0);
      r.expect_done();
      return Disconnect{};
    default:
      throw ProtocolError("unsupported or reserved packet type " + std::to_string(type));
  }
}

}  // namespace

void encode_remaining_length(std::uint32_t value, Bytes& out) {
  if (value > kMaxRemainingLength) throw EncodeError("remaining length out of range");
  do {
    auto byte = static_cast<std::uint8_t>(value % 128);
    value /= 128;
    if (value > 0) byte |= 0x80;
    out.push_back(byte);
  } while (value > 0);
}

std::optional<VarInt> decode_remaining_length(std::span<const std::uint8_t> buf) {
  std::uint32_t value = 0;
  std::uint32_t multiplier = 1;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= buf.size()) return std::nullopt;
    const std::uint8_t b = buf[i];
    value += (b & 0x7F) * multiplier;
    if ((b & 0x80) == 0) return VarInt{value, i + 1};
    multiplier *= 128;
  }
  throw ProtocolError("remaining length exceeds four bytes");
}

Bytes encode_packet(const Packet& p) { return std::visit(Encoder{}, p); }

std::optional<Decoded> decode_packet(std::span<const std::uint8_t> buf) {
  if (buf.empty()) return std::nullopt;
  const std::uint8_t type = buf[0] >> 4;
  const std::uint8_t flags = buf[0] & 0x0F;
  if (type == 0 || type == 15) throw ProtocolError("reserved packet type");
  const auto len = decode_remaining_length(buf.subspan(1));
  if (!len) return std::nullopt;
  const std::size_t total = 1 + len->length + len->value;
  if (buf.size() < total) return std::nullopt;
  Packet p = decode_body(type, flags, buf.subspan(1 + len->length, len->value));
  return Decoded{std::move(p), total};
}

bool is_valid_topic_name(std::string_view name) {
  if (name.empty() || name.size() > 0xFFFF) return false;
  if (name.find_first_of("+#") != std::string_view::npos) return false;
  return valid_utf8(name);
}

bool is_valid_topic_filter(std::string_view filter) {
  if (filter.empty() || filter.size() > 0xFFFF || !valid_utf8(filter)) return false;
  std::size_t start = 0;
  while (true) {
    const std::size_t slash = filter.find('/', start);
    const bool last = slash == std::string_view::npos;
    const std::string_view level = filter.substr(start, last ? std::string_view::npos : slash - start);
    if (level.find('#') != std::string_view::npos && (level != "#" || !last)) return false;
    if (level.find('+') != std::string_view::npos && level != "+") return false;
    if (last) return true;
    start = slash + 1;
  }
}

bool topic_matches(std::string_view filter, std::string_view name) {
  // Wildcards at the first level never match names reserved with '$'.
  if (!name.empty() && name.front() == '$' && !filter.empty() &&
      (filter.front() == '+' || filter.front() == '#')) {
    return false;
  }
  std::size_t fpos = 0;
  std::size_t npos = 0;
  while (true) {
    const std::size_t fslash = filter.find('/', fpos);
    const std::string_view flevel = filter.substr(fpos, fslash == std::string_view::npos ? std::string_view::npos : fslash - fpos);
    if (flevel == "#") return true;

    // name already exhausted: only a trailing "/#" can still match the parent
    if (npos == std::string_view::npos) return false;

    const std::size_t nslash = name.find('/', npos);
    const std::string_view nlevel = name.substr(npos, nslash == std::string_view::npos ? std::string_view::npos : nslash - npos);
    if (flevel != "+" && flevel != nlevel) return false;

    const bool f_end = fslash == std::string_view::npos;
    const bool n_end = nslash == std::string_view::npos;
    if (f_end && n_end) return true;
    if (f_end) return false;
    fpos = fslash + 1;
    npos = n_end ? std::string_view::npos : nslash + 1;
  }
}

const char* packet_name(const Packet& p) {
  static constexpr const char* names[] = {"CONNECT", "CONNACK",  "PUBLISH",  "PUBACK",    "SUBSCRIBE",
                                          "SUBACK",  "PINGREQ", "PINGRESP", "DISCONNECT"};
  return names[p.index()];
}

}  // namespace triplex::mqtt

#include "vbmi/packet.hpp"

#include <cstring>
#include <stdexcept>
#include <string>

#include "vbmi/hashes.hpp"

namespace vbmi::proto {

namespace {

void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

uint16_t get_u16le(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t get_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

int32_t get_s24be(const uint8_t* p) {
  uint32_t u = (static_cast<uint32_t>(p[0]) << 16) | (static_cast<uint32_t>(p[1]) << 8) |
               static_cast<uint32_t>(p[2]);
  if (u & 0x800000u) u |= 0xFF000000u;  // sign extend
  return static_cast<int32_t>(u);
}

}  // namespace

std::vector<uint8_t> encode_packet(const Packet& p) {
  if (p.payload.size() != static_cast<size_t>(p.n_samples) * kStreamChannels) {
    throw std::invalid_argument("encode_packet: payload size " + std::to_string(p.payload.size()) +
                                " does not match n_samples " + std::to_string(p.n_samples));
  }
  for (int32_t code : p.payload) {
    if (code < kRawMin || code > kRawMax) {
      throw std::invalid_argument("encode_packet: raw code " + std::to_string(code) +
                                  " outside signed 24-bit range");
    }
  }
  std::vector<uint8_t> out;
  out.reserve(packet_size_bytes(p.n_samples));
  out.push_back(kSync0);
  out.push_back(kSync1);
  out.push_back(p.version);
  put_u16le(out, p.seq);
  put_u32le(out, p.sample_index);
  out.push_back(p.n_samples);
  put_u16le(out, p.status);
  for (int32_t code : p.payload) {
    uint32_t u = static_cast<uint32_t>(code) & 0xFFFFFFu;
    out.push_back(static_cast<uint8_t>((u >> 16) & 0xFF));
    out.push_back(static_cast<uint8_t>((u >> 8) & 0xFF));
    out.push_back(static_cast<uint8_t>(u & 0xFF));
  }
  uint16_t crc = crc16_ccitt_false(std::span<const uint8_t>(out.data() + 2, out.size() - 2));
  put_u16le(out, crc);
  return out;
}

Packet decode_packet(std::span<const uint8_t> bytes) {
  if (bytes.size() < packet_size_bytes(0)) {
    throw std::invalid_argument("decode_packet: truncated frame");
  }
  if (bytes[0] != kSync0 || bytes[1] != kSync1) {
    throw std::invalid_argument("decode_packet: missing sync pair");
  }
  uint8_t n_samples = bytes[9];
  size_t total = packet_size_bytes(n_samples);
  if (bytes.size() < total) throw std::invalid_argument("decode_packet: truncated frame");
  uint16_t crc_stored = get_u16le(bytes.data() + total - 2);
  uint16_t crc_actual = crc16_ccitt_false(bytes.subspan(2, total - 4));
  if (crc_stored != crc_actual) throw std::invalid_argument("decode_packet: checksum mismatch");

  Packet p;
  p.version = bytes[2];
  p.seq = get_u16le(bytes.data() + 3);
  p.sample_index = get_u32le(bytes.data() + 5);
  p.n_samples = n_samples;
  p.status = get_u16le(bytes.data() + 10);
  p.payload.resize(static_cast<size_t>(n_samples) * kStreamChannels);
  const uint8_t* cur = bytes.data() + 12;
  for (auto& code : p.payload) {
    code = get_s24be(cur);
    cur += 3;
  }
  return p;
}

RateBudget packet_rate_budget(int n_samples_per_packet) {
  if (n_samples_per_packet < 1 || 250 % n_samples_per_packet != 0) {
    throw std::invalid_argument("packet_rate_budget: 250 must be divisible by n_samples");
  }
  RateBudget b;
  b.packets_per_s = 250.0 / n_samples_per_packet;
  b.bytes_per_s = b.packets_per_s * static_cast<double>(packet_size_bytes(n_samples_per_packet));
  if (b.bytes_per_s > kMaxBytesPerSecond) {
    throw std::invalid_argument("packet_rate_budget: " + std::to_string(b.bytes_per_s) +
                                " B/s exceeds the 13 KB/s link budget");
  }
  return b;
}

void PacketParser::feed(std::span<const uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  scan();
}

std::optional<Packet> PacketParser::next() {
  if (out_.empty()) return std::nullopt;
  Packet p = std::move(out_.front());
  out_.pop_front();
  return p;
}

void PacketParser::scan() {
  size_t pos = 0;
  while (true) {
    // hunt for the sync pair
    while (pos + 1 < buf_.size() && !(buf_[pos] == kSync0 && buf_[pos + 1] == kSync1)) {
      ++pos;
      ++skipped_;
    }
    if (pos + 1 >= buf_.size()) {
      // no full pair; keep a dangling sync byte for the next feed
      if (pos < buf_.size() && buf_[pos] != kSync0) {
        ++skipped_;
        ++pos;
      }
      break;
    }

    // need the header to learn the frame length
    if (buf_.size() - pos < 12) break;
    uint8_t version = buf_[pos + 2];
    uint8_t n_samples = buf_[pos + 9];
    if (version != kProtocolVersion || n_samples > 250) {
      // header cannot be trusted; treat the sync pair as noise
      ++corrupt_;
      skipped_ += 2;
      pos += 2;
      continue;
    }
    size_t total = packet_size_bytes(n_samples);
    if (buf_.size() - pos < total) break;  // wait for the rest of the frame

    uint16_t crc_stored = get_u16le(buf_.data() + pos + total - 2);
    uint16_t crc_actual =
        crc16_ccitt_false(std::span<const uint8_t>(buf_.data() + pos + 2, total - 4));
    if (crc_stored != crc_actual) {
      ++corrupt_;
      skipped_ += 2;
      pos += 2;  // resume scanning after the bad sync pair
      continue;
    }

    out_.push_back(decode_packet(std::span<const uint8_t>(buf_.data() + pos, total)));
    ++delivered_;
    pos += total;
  }
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(pos));
}

}  // namespace vbmi::proto

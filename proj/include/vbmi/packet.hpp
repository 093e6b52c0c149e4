#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace vbmi::proto {

inline constexpr uint8_t kSync0 = 0xA5;
inline constexpr uint8_t kSync1 = 0x5A;
inline constexpr uint8_t kProtocolVersion = 1;
inline constexpr int kStreamChannels = 9;  // 7 acquisition + reference + bias
inline constexpr double kSampleRateHz = 250.0;
inline constexpr int32_t kRawMax = (1 << 23) - 1;
inline constexpr int32_t kRawMin = -(1 << 23);
// Link budget: 13 KB/s.
inline constexpr int kMaxBytesPerSecond = 13312;

// One wire frame. Payload is sample-major: for each sample, 9 signed 24-bit
// channel codes. n_samples == 0 frames are stream-control markers (end of
// stream) and carry no payload.
struct Packet {
  uint8_t version{kProtocolVersion};
  uint16_t seq{0};            // wraps at 2^16
  uint32_t sample_index{0};   // index of first payload sample
  uint8_t n_samples{10};
  uint16_t status{0};         // lead-off bitmap, bit c set <=> electrode c >= 50 kOhm
  std::vector<int32_t> payload;  // n_samples * 9 raw codes

  bool operator==(const Packet&) const = default;
};

constexpr size_t packet_size_bytes(int n_samples) {
  // sync(2) + version(1) + seq(2) + sample_index(4) + n_samples(1) + status(2)
  // + payload + crc(2)
  return 12 + static_cast<size_t>(n_samples) * kStreamChannels * 3 + 2;
}

// Header fields little-endian, payload samples 3-byte big-endian two's
// complement, CRC16/CCITT-FALSE over version..payload, little-endian.
std::vector<uint8_t> encode_packet(const Packet& p);

// One-shot decode of a complete frame starting at a sync pair. Throws
// std::invalid_argument on malformed input; use PacketParser for streams.
Packet decode_packet(std::span<const uint8_t> bytes);

struct RateBudget {
  double packets_per_s;
  double bytes_per_s;
};

// Throws std::invalid_argument when 250 is not divisible by the packet size
// or the resulting stream rate exceeds the 13 KB/s link budget.
RateBudget packet_rate_budget(int n_samples_per_packet);

// Incremental stream decoder. Feed arbitrary byte chunks; complete frames with
// a valid checksum come out of next(); corrupt frames are dropped and counted
// while the scanner hunts for the next sync pair.
class PacketParser {
 public:
  void feed(std::span<const uint8_t> bytes);
  std::optional<Packet> next();

  uint64_t packets_delivered() const { return delivered_; }
  uint64_t corrupt_packets() const { return corrupt_; }
  uint64_t bytes_skipped() const { return skipped_; }

 private:
  void scan();

  std::vector<uint8_t> buf_;
  std::deque<Packet> out_;
  uint64_t delivered_{0};
  uint64_t corrupt_{0};
  uint64_t skipped_{0};
};

}  // namespace vbmi::proto

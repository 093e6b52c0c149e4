#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vbmi/packet.hpp"
#include "vbmi/queue.hpp"
#include "vbmi/transport.hpp"

namespace vbmi::proto {

// Decoded, volt-scaled slice of the stream; one chunk per wire packet.
struct SampleChunk {
  std::uint32_t sample_index{0};
  Eigen::MatrixXd values_volt;  // 9 x n_samples
  std::uint16_t status{0};
  std::chrono::steady_clock::time_point recv_time;
};

// Samples lost between consecutive delivered packets.
struct GapRecord {
  std::uint32_t expected_index{0};
  std::uint32_t missing_samples{0};
};

struct SessionEvent {
  enum class Kind { connected, retrying, disconnected, stream_ended, gap };
  Kind kind;
  std::string detail;
};

// Pure stream-order bookkeeping: packets in, volt chunks and gap records out.
// Split from the socket pump so loss handling is testable without a network.
class ChunkAssembler {
 public:
  ChunkAssembler(double v_ref, int gain);

  // nullopt for the n_samples == 0 end marker (sets ended())
  std::optional<SampleChunk> on_packet(const Packet& p);

  const std::vector<GapRecord>& gaps() const { return gaps_; }
  std::uint64_t samples_delivered() const { return samples_delivered_; }
  bool ended() const { return ended_; }

 private:
  double volts_per_code_;
  std::optional<std::uint32_t> expected_index_;
  std::vector<GapRecord> gaps_;
  std::uint64_t samples_delivered_{0};
  bool ended_{false};
};

struct ClientSettings {
  double v_ref_volt{4.5};
  int gain{24};
  std::size_t queue_capacity{256};
  // bounded exponential backoff for connect()
  int backoff_initial_ms{25};
  int backoff_max_ms{400};
  int connect_attempts{5};
};

// Host-side session against one device. connect() retries with bounded
// exponential backoff; start_stream()/stop_stream() bracket a receive pump
// that decodes packets into a bounded chunk queue (backpressure stalls the
// socket, not the process).
class ClientSession {
 public:
  ClientSession(std::string host, std::uint16_t port, ClientSettings settings = {});
  ~ClientSession();
  ClientSession(const ClientSession&) = delete;
  ClientSession& operator=(const ClientSession&) = delete;

  void connect();
  bool connected() const { return socket_.valid(); }

  // idle-mode text command; returns the reply line without the newline
  std::string command(const std::string& line);

  void start_stream();
  // Ends the stream: chunks already queued stay poppable, in-flight ones are
  // dropped, and the call returns once the device's end marker (or a
  // disconnect) has been seen. Safe to call after the stream ended on its own.
  void stop_stream();
  bool streaming() const { return pump_.joinable() && !pump_done_.load(); }

  // next decoded chunk; nullopt once the stream has ended and drained
  std::optional<SampleChunk> next_chunk() { return queue_->pop(); }

  std::vector<GapRecord> gaps() const;
  std::vector<SessionEvent> events() const;
  std::uint64_t corrupt_packets() const;

 private:
  void pump_loop();
  bool drain_parser();
  std::string read_line();
  void add_event(SessionEvent::Kind kind, std::string detail);

  std::string host_;
  std::uint16_t port_;
  ClientSettings settings_;
  net::TcpSocket socket_;
  std::string line_buf_;

  std::unique_ptr<net::BoundedQueue<SampleChunk>> queue_;
  std::thread pump_;
  std::atomic<bool> pump_done_{false};
  ChunkAssembler assembler_;
  PacketParser parser_;

  mutable std::mutex state_mutex_;
  std::vector<SessionEvent> events_;
};

}  // namespace vbmi::proto

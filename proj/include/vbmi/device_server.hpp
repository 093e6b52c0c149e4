#pragma once

#include <Eigen/Dense>
#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "vbmi/packet.hpp"
#include "vbmi/transport.hpp"

namespace vbmi::proto {

struct DeviceSettings {
  std::string host{"127.0.0.1"};
  std::uint16_t port{0};     // 0 binds an ephemeral port
  int samples_per_packet{10};
  double pace{1.0};          // wall-clock speedup; 1 = real time, 100 = 100x faster
  double v_ref_volt{4.5};
  int gain{24};
};

// What the simulated headset streams: a pre-rendered 9-channel recording in
// volts plus the per-electrode contact impedance it reports over IMPEDANCE
// and folds into the packet lead-off bits (>= 50 kOhm sets the bit).
struct DeviceSource {
  Eigen::MatrixXd samples_volt;                // 9 x total_samples
  std::array<double, kStreamChannels> impedance_kohm{};
};

// Single-client device simulator. Speaks newline-terminated text commands
// (START, STOP, INFO, IMPEDANCE); while streaming it emits wire packets at
// the paced rate with monotonically advancing sample_index and a seq counter
// continuous across START/STOP within one connection. The stream ends with an
// n_samples == 0 marker packet, either at STOP or when the recording runs
// out. A disconnect stops streaming and the server waits for the next client.
class DeviceServer {
 public:
  DeviceServer(DeviceSettings settings, DeviceSource source);
  ~DeviceServer();
  DeviceServer(const DeviceServer&) = delete;
  DeviceServer& operator=(const DeviceServer&) = delete;

  void start();  // bind + spawn the accept loop; throws on a busy port
  void stop();   // disconnect, unbind, join

  std::uint16_t port() const { return port_; }
  std::uint64_t packets_sent() const { return packets_sent_.load(); }
  std::uint64_t bytes_sent() const { return bytes_sent_.load(); }
  std::uint64_t connections_served() const { return connections_.load(); }

 private:
  void accept_loop();
  void serve_client(net::TcpSocket& client);
  // one reply line for one command; toggles the streaming flag
  std::string handle_command(const std::string& line, bool& streaming, bool& send_marker);
  Packet next_packet(std::uint64_t& position, std::uint16_t& seq) const;

  DeviceSettings settings_;
  DeviceSource source_;
  std::uint16_t status_bits_{0};
  std::uint16_t port_{0};

  std::unique_ptr<net::TcpListener> listener_;
  std::thread thread_;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> packets_sent_{0};
  std::atomic<std::uint64_t> bytes_sent_{0};
  std::atomic<std::uint64_t> connections_{0};
  std::mutex client_mutex_;
  net::TcpSocket* active_client_{nullptr};  // for stop() to unblock reads
};

// volts -> signed 24-bit raw code, saturating at the rails
std::int32_t volts_to_raw(double volts, double v_ref, int gain);
double raw_to_volts(std::int32_t raw, double v_ref, int gain);

}  // namespace vbmi::proto

#include "vbmi/device_server.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace vbmi::proto {

namespace {
constexpr double kLeadOffGateKohm = 50.0;
}

std::int32_t volts_to_raw(double volts, double v_ref, int gain) {
  const double code = std::round(volts * gain * 8388608.0 / v_ref);
  return static_cast<std::int32_t>(
      std::clamp(code, static_cast<double>(kRawMin), static_cast<double>(kRawMax)));
}

double raw_to_volts(std::int32_t raw, double v_ref, int gain) {
  return static_cast<double>(raw) * v_ref / (gain * 8388608.0);
}

DeviceServer::DeviceServer(DeviceSettings settings, DeviceSource source)
    : settings_(std::move(settings)), source_(std::move(source)) {
  if (source_.samples_volt.rows() != kStreamChannels) {
    throw std::invalid_argument("DeviceServer: source must have 9 channel rows");
  }
  if (settings_.samples_per_packet < 1 || settings_.samples_per_packet > 255) {
    throw std::invalid_argument("DeviceServer: samples_per_packet out of range");
  }
  if (!(settings_.pace > 0.0)) {
    throw std::invalid_argument("DeviceServer: pace must be positive");
  }
  packet_rate_budget(settings_.samples_per_packet);  // rejects over-budget configs
  for (int c = 0; c < kStreamChannels; ++c) {
    if (source_.impedance_kohm[static_cast<std::size_t>(c)] >= kLeadOffGateKohm) {
      status_bits_ = static_cast<std::uint16_t>(status_bits_ | (1u << c));
    }
  }
}

DeviceServer::~DeviceServer() { stop(); }

void DeviceServer::start() {
  if (running_.load()) return;
  listener_ = std::make_unique<net::TcpListener>(settings_.host, settings_.port);
  port_ = listener_->port();
  running_.store(true);
  thread_ = std::thread([this] { accept_loop(); });
}

void DeviceServer::stop() {
  if (!running_.exchange(false)) return;
  {
    std::lock_guard lock(client_mutex_);
    if (active_client_ != nullptr) active_client_->shutdown_both();
  }
  if (listener_) listener_->close();
  if (thread_.joinable()) thread_.join();
  listener_.reset();
}

void DeviceServer::accept_loop() {
  while (running_.load()) {
    net::TcpSocket client;
    try {
      client = listener_->accept();
    } catch (const net::SocketError&) {
      break;  // listener closed by stop()
    }
    connections_.fetch_add(1);
    {
      std::lock_guard lock(client_mutex_);
      active_client_ = &client;
    }
    try {
      serve_client(client);
    } catch (const net::SocketError&) {
      // client went away mid-write; fall through to the next accept
    }
    {
      std::lock_guard lock(client_mutex_);
      active_client_ = nullptr;
    }
  }
}

Packet DeviceServer::next_packet(std::uint64_t& position, std::uint16_t& seq) const {
  const auto total = static_cast<std::uint64_t>(source_.samples_volt.cols());
  const auto n = std::min<std::uint64_t>(
      static_cast<std::uint64_t>(settings_.samples_per_packet), total - position);
  Packet p;
  p.seq = seq++;
  p.sample_index = static_cast<std::uint32_t>(position);
  p.n_samples = static_cast<std::uint8_t>(n);
  p.status = status_bits_;
  p.payload.reserve(n * kStreamChannels);
  for (std::uint64_t s = 0; s < n; ++s) {
    for (int c = 0; c < kStreamChannels; ++c) {
      p.payload.push_back(volts_to_raw(
          source_.samples_volt(c, static_cast<Eigen::Index>(position + s)),
          settings_.v_ref_volt, settings_.gain));
    }
  }
  position += n;
  return p;
}

std::string DeviceServer::handle_command(const std::string& line, bool& streaming,
                                         bool& send_marker) {
  if (line == "START") {
    if (streaming) return "ERR already streaming";
    streaming = true;
    return "OK";
  }
  if (line == "STOP") {
    // acknowledged in-band by the end marker; no text that could land in the
    // middle of the binary stream. An idle STOP is a no-op.
    if (streaming) {
      streaming = false;
      send_marker = true;
    }
    return "";
  }
  if (line == "INFO") {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "OK channels=%d fs=%.0f vref=%.3f gain=%d spp=%d",
                  kStreamChannels, kSampleRateHz, settings_.v_ref_volt, settings_.gain,
                  settings_.samples_per_packet);
    return buf;
  }
  if (line == "IMPEDANCE") {
    std::string reply = "OK";
    for (const double z : source_.impedance_kohm) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), " %.1f", z);
      reply += buf;
    }
    return reply;
  }
  return "ERR unknown command '" + line + "'";
}

void DeviceServer::serve_client(net::TcpSocket& client) {
  using clock = std::chrono::steady_clock;
  const auto total = static_cast<std::uint64_t>(source_.samples_volt.cols());
  const auto packet_period = std::chrono::duration<double>(
      settings_.samples_per_packet / kSampleRateHz / settings_.pace);

  std::uint64_t position = 0;
  std::uint16_t seq = 0;
  bool streaming = false;
  auto next_deadline = clock::now();
  std::string line_buf;

  const auto send_end_marker = [&] {
    Packet marker;
    marker.seq = seq++;
    marker.sample_index = static_cast<std::uint32_t>(position);
    marker.n_samples = 0;
    marker.status = status_bits_;
    const auto bytes = encode_packet(marker);
    client.write_all(bytes);
    bytes_sent_.fetch_add(bytes.size());
  };

  while (running_.load()) {
    if (streaming) {
      const auto now = clock::now();
      if (now >= next_deadline) {
        const auto bytes = encode_packet(next_packet(position, seq));
        client.write_all(bytes);
        packets_sent_.fetch_add(1);
        bytes_sent_.fetch_add(bytes.size());
        next_deadline += std::chrono::duration_cast<clock::duration>(packet_period);
        if (next_deadline < now) next_deadline = now;  // don't owe a backlog
        if (position >= total) {
          streaming = false;
          send_end_marker();
        }
        continue;
      }
      const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
          next_deadline - now);
      if (!client.wait_readable(static_cast<int>(std::max<std::int64_t>(
              0, wait_ms.count())))) {
        continue;
      }
    } else if (!client.wait_readable(50)) {
      continue;
    }

    std::uint8_t buf[256];
    const std::size_t n = client.read_some(buf);
    if (n == 0) return;  // disconnect: stop streaming, await the next client
    line_buf.append(reinterpret_cast<const char*>(buf), n);
    std::size_t eol;
    while ((eol = line_buf.find('\n')) != std::string::npos) {
      std::string line = line_buf.substr(0, eol);
      line_buf.erase(0, eol + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const bool was_streaming = streaming;
      bool send_marker = false;
      const std::string reply = handle_command(line, streaming, send_marker);
      if (send_marker) send_end_marker();
      if (!reply.empty()) client.write_text(reply + "\n");
      if (streaming && !was_streaming) {
        if (position >= total) {  // nothing left to stream
          streaming = false;
          send_end_marker();
        } else {
          next_deadline = clock::now();
        }
      }
    }
  }
}

}  // namespace vbmi::proto

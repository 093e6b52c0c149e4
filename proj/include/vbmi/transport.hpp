#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace vbmi::net {

struct SocketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Connected TCP stream, move-only RAII over the descriptor.
class TcpSocket {
 public:
  TcpSocket() = default;
  explicit TcpSocket(int fd) : fd_(fd) {}
  ~TcpSocket();
  TcpSocket(TcpSocket&& other) noexcept;
  TcpSocket& operator=(TcpSocket&& other) noexcept;
  TcpSocket(const TcpSocket&) = delete;
  TcpSocket& operator=(const TcpSocket&) = delete;

  static TcpSocket connect(const std::string& host, std::uint16_t port);

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  // bytes read; 0 means orderly shutdown by the peer
  std::size_t read_some(std::span<std::uint8_t> buf);
  // true when the descriptor became readable within the timeout
  bool wait_readable(int timeout_ms);
  void write_all(std::span<const std::uint8_t> bytes);
  void write_text(std::string_view text);

  void shutdown_both();
  void close();

 private:
  int fd_{-1};
};

// Listening socket; port 0 binds an ephemeral port, inspect with port().
class TcpListener {
 public:
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }

  // Blocks for the next client. Throws SocketError once close() is called.
  TcpSocket accept();
  void close();

 private:
  int fd_{-1};
  std::uint16_t port_{0};
};

}  // namespace vbmi::net

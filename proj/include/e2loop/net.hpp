#pragma once

// Reliable stream transport carrying E2 frames over TCP, with per-connection
// packet/byte accounting done at the framing layer.

#include <array>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace e2loop::net {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  // Wakes any thread blocked in recv on this socket.
  void shutdown();
  void close();

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host;
  uint16_t port = 0;
};

// "host:port" or "host" (uses default_port). Throws Error(InvalidConfig).
Endpoint parse_endpoint(const std::string& text, uint16_t default_port);

// Opens a connection bound to `local_port` (0 = ephemeral).
// Throws Error(ConnectRefused) on any failure, including timeout.
Socket connect_tcp(const Endpoint& remote, uint16_t local_port, std::chrono::milliseconds timeout);

uint16_t local_port_of(const Socket& s);
uint16_t remote_port_of(const Socket& s);

class Listener {
 public:
  explicit Listener(const Endpoint& bind_at);
  uint16_t port() const { return port_; }
  // Blocks until a connection arrives; returns an invalid socket once closed.
  Socket accept();
  void close();

 private:
  Socket sock_;
  uint16_t port_ = 0;
};

struct LinkCounters {
  uint64_t tx_frames = 0;
  uint64_t rx_frames = 0;
  uint64_t tx_bytes = 0;
  uint64_t rx_bytes = 0;
  int64_t first_us = 0;  // Unix wall clock of first frame either way, 0 if none
  int64_t last_us = 0;
  std::array<uint64_t, 8> tx_by_type{};  // indexed by msg_type byte
  std::array<uint64_t, 8> rx_by_type{};

  uint64_t frames() const { return tx_frames + rx_frames; }
  uint64_t bytes() const { return tx_bytes + rx_bytes; }
};

int64_t unix_now_us();
uint64_t unix_now_ms();

// Upper bound on accepted frame size; larger length fields close the link.
inline constexpr std::size_t kMaxFrameBytes = 16u << 20;

class FrameConnection {
 public:
  explicit FrameConnection(Socket s);

  // Writes one complete frame. Serialized across threads.
  // Throws Error(ConnectionLost).
  void send(std::span<const uint8_t> frame);

  enum class ReadStatus { Frame, Closed, Timeout, Malformed };
  struct ReadResult {
    ReadStatus status = ReadStatus::Closed;
    std::vector<uint8_t> frame;
    std::string detail;
  };
  ReadResult read_frame(std::optional<std::chrono::milliseconds> timeout = std::nullopt);

  LinkCounters counters() const;
  uint16_t local_port() const { return local_port_; }
  uint16_t remote_port() const { return remote_port_; }
  void shutdown() { sock_.shutdown(); }

 private:
  void count(bool tx, std::span<const uint8_t> frame);

  Socket sock_;
  uint16_t local_port_ = 0;
  uint16_t remote_port_ = 0;
  std::mutex send_mu_;
  mutable std::mutex stats_mu_;
  LinkCounters counters_;
  std::vector<uint8_t> pending_;  // partial frame carried across a read timeout
};

}  // namespace e2loop::net

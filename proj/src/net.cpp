#include "e2loop/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "e2loop/error.hpp"
#include "e2loop/wire.hpp"

namespace e2loop::net {

namespace {

std::string errno_text() { return std::strerror(errno); }

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  std::string host = ep.host.empty() ? "0.0.0.0" : ep.host;
  if (host == "localhost") host = "127.0.0.1";
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw Error(ErrorCode::ConnectRefused, "cannot resolve host '" + host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

uint16_t port_of(int fd, bool local) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  int rc = local ? getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len)
                 : getpeername(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return rc == 0 ? ntohs(addr.sin_port) : 0;
}

}  // namespace

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Endpoint parse_endpoint(const std::string& text, uint16_t default_port) {
  Endpoint ep;
  auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    ep.host = text;
    ep.port = default_port;
  } else {
    ep.host = text.substr(0, colon);
    std::string_view port = std::string_view(text).substr(colon + 1);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc{} || ptr != port.data() + port.size() || value > 65535) {
      throw Error(ErrorCode::InvalidConfig, "bad port in endpoint '" + text + "'");
    }
    ep.port = static_cast<uint16_t>(value);
  }
  if (ep.host.empty()) throw Error(ErrorCode::InvalidConfig, "empty host in '" + text + "'");
  return ep;
}

Socket connect_tcp(const Endpoint& remote, uint16_t local_port,
                   std::chrono::milliseconds timeout) {
  sockaddr_in dst = resolve(remote);
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw Error(ErrorCode::ConnectRefused, "socket: " + errno_text());

  int one = 1;
  setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  if (local_port != 0) {
    sockaddr_in src{};
    src.sin_family = AF_INET;
    src.sin_addr.s_addr = htonl(INADDR_ANY);
    src.sin_port = htons(local_port);
    if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&src), sizeof(src)) != 0) {
      throw Error(ErrorCode::ConnectRefused,
                  "bind local port " + std::to_string(local_port) + ": " + errno_text());
    }
  }

  int flags = fcntl(s.fd(), F_GETFL, 0);
  fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(s.fd(), reinterpret_cast<sockaddr*>(&dst), sizeof(dst));
  std::string target = remote.host + ":" + std::to_string(remote.port);
  if (rc != 0 && errno != EINPROGRESS) {
    throw Error(ErrorCode::ConnectRefused, target + ": " + errno_text());
  }
  if (rc != 0) {
    pollfd pfd{s.fd(), POLLOUT, 0};
    int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (ready == 0) throw Error(ErrorCode::ConnectRefused, target + ": connect timed out");
    int err = 0;
    socklen_t len = sizeof(err);
    getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (ready < 0 || err != 0) {
      throw Error(ErrorCode::ConnectRefused, target + ": " + std::strerror(err ? err : errno));
    }
  }
  fcntl(s.fd(), F_SETFL, flags);
  return s;
}

uint16_t local_port_of(const Socket& s) { return port_of(s.fd(), true); }
uint16_t remote_port_of(const Socket& s) { return port_of(s.fd(), false); }

Listener::Listener(const Endpoint& bind_at) {
  sockaddr_in addr = resolve(bind_at);
  sock_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
  if (!sock_.valid()) throw Error(ErrorCode::Io, "socket: " + errno_text());
  int one = 1;
  setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw Error(ErrorCode::Io, "bind " + bind_at.host + ":" + std::to_string(bind_at.port) +
                                   ": " + errno_text());
  }
  if (::listen(sock_.fd(), 64) != 0) throw Error(ErrorCode::Io, "listen: " + errno_text());
  port_ = local_port_of(sock_);
}

Socket Listener::accept() {
  while (sock_.valid()) {
    int fd = ::accept(sock_.fd(), nullptr, nullptr);
    if (fd >= 0) {
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return Socket(fd);
    }
    if (errno != EINTR) break;
  }
  return Socket();
}

void Listener::close() {
  sock_.shutdown();
  sock_.close();
}

int64_t unix_now_us() {
  using namespace std::chrono;
  return duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
}

uint64_t unix_now_ms() { return static_cast<uint64_t>(unix_now_us() / 1000); }

FrameConnection::FrameConnection(Socket s) : sock_(std::move(s)) {
  local_port_ = local_port_of(sock_);
  remote_port_ = remote_port_of(sock_);
}

void FrameConnection::count(bool tx, std::span<const uint8_t> frame) {
  std::lock_guard lock(stats_mu_);
  int64_t now = unix_now_us();
  if (counters_.first_us == 0) counters_.first_us = now;
  counters_.last_us = now;
  uint8_t type = frame.size() > 3 && frame[3] < 8 ? frame[3] : 0;
  if (tx) {
    ++counters_.tx_frames;
    counters_.tx_bytes += frame.size();
    ++counters_.tx_by_type[type];
  } else {
    ++counters_.rx_frames;
    counters_.rx_bytes += frame.size();
    ++counters_.rx_by_type[type];
  }
}

void FrameConnection::send(std::span<const uint8_t> frame) {
  std::lock_guard lock(send_mu_);
  std::size_t off = 0;
  while (off < frame.size()) {
    ssize_t n = ::send(sock_.fd(), frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::ConnectionLost, "send: " + errno_text());
    off += static_cast<std::size_t>(n);
  }
  count(true, frame);
}

FrameConnection::ReadResult FrameConnection::read_frame(
    std::optional<std::chrono::milliseconds> timeout) {
  using clock = std::chrono::steady_clock;
  auto deadline = timeout ? clock::now() + *timeout : clock::time_point::max();
  uint8_t buf[4096];

  auto fill_to = [&](std::size_t want) -> std::optional<ReadResult> {
    while (pending_.size() < want) {
      if (timeout) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
        if (left.count() < 0) left = std::chrono::milliseconds(0);
        pollfd pfd{sock_.fd(), POLLIN, 0};
        int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (ready == 0) return ReadResult{ReadStatus::Timeout, {}, "read timed out"};
        if (ready < 0 && errno == EINTR) continue;
      }
      std::size_t room = std::min(sizeof(buf), want - pending_.size());
      ssize_t n = ::recv(sock_.fd(), buf, room, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return ReadResult{ReadStatus::Closed, {}, n == 0 ? "peer closed" : errno_text()};
      pending_.insert(pending_.end(), buf, buf + n);
    }
    return std::nullopt;
  };

  if (auto early = fill_to(wire::kFrameHeaderSize)) return std::move(*early);
  auto size = wire::peek_frame_size(pending_);
  if (auto* err = std::get_if<wire::DecodeError>(&size)) {
    pending_.clear();
    return ReadResult{ReadStatus::Malformed, {}, err->detail};
  }
  std::size_t frame_size = std::get<std::size_t>(size);
  if (frame_size > kMaxFrameBytes) {
    pending_.clear();
    return ReadResult{ReadStatus::Malformed, {}, "frame exceeds size limit"};
  }
  if (auto early = fill_to(frame_size)) return std::move(*early);

  ReadResult out{ReadStatus::Frame, std::move(pending_), {}};
  pending_.clear();
  count(false, out.frame);
  return out;
}

LinkCounters FrameConnection::counters() const {
  std::lock_guard lock(stats_mu_);
  return counters_;
}

}  // namespace e2loop::net

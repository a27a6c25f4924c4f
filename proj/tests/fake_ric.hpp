#pragma once

// Minimal RIC-side peer for agent tests, built directly on the framing layer.

#include <algorithm>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "e2loop/net.hpp"
#include "e2loop/wire.hpp"

namespace e2test {

class FakeRic {
 public:
  struct Peer {
    std::unique_ptr<e2loop::net::FrameConnection> conn;
    std::vector<e2loop::wire::E2SetupRequest> setups;

    void send(const e2loop::wire::E2Message& msg) { conn->send(e2loop::wire::encode(msg)); }

    std::optional<e2loop::wire::E2Message> read(std::chrono::milliseconds timeout = std::chrono::milliseconds(2000)) {
      auto r = conn->read_frame(timeout);
      if (r.status != e2loop::net::FrameConnection::ReadStatus::Frame) return std::nullopt;
      auto d = e2loop::wire::decode(r.frame);
      if (auto* ok = std::get_if<e2loop::wire::Decoded>(&d)) return ok->message;
      return std::nullopt;
    }
  };

  // respond = false leaves setup requests unanswered.
  explicit FakeRic(bool respond = true, std::optional<std::vector<uint16_t>> fixed_accept = std::nullopt)
      : listener_({"127.0.0.1", 0}), respond_(respond), fixed_(std::move(fixed_accept)) {
    thread_ = std::thread([this] { loop(); });
  }

  ~FakeRic() {
    listener_.close();
    if (thread_.joinable()) thread_.join();
  }

  e2loop::net::Endpoint endpoint() const { return {"127.0.0.1", listener_.port()}; }

  Peer& peer(std::size_t index) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, std::chrono::seconds(5), [&] { return peers_.size() > index; });
    return *peers_.at(index);
  }

  std::size_t setup_count(std::size_t index) {
    std::lock_guard lock(mu_);
    return index < peers_.size() ? peers_[index]->setups.size() : 0;
  }

 private:
  void loop() {
    using namespace e2loop::wire;
    for (;;) {
      auto sock = listener_.accept();
      if (!sock.valid()) return;
      auto peer = std::make_unique<Peer>();
      peer->conn = std::make_unique<e2loop::net::FrameConnection>(std::move(sock));
      // Read the setup attempts before handing the peer to the test.
      for (;;) {
        auto r = peer->conn->read_frame(std::chrono::milliseconds(respond_ ? 2000 : 400));
        if (r.status != e2loop::net::FrameConnection::ReadStatus::Frame) break;
        auto d = decode(r.frame);
        auto* ok = std::get_if<Decoded>(&d);
        if (!ok) break;
        auto* req = std::get_if<E2SetupRequest>(&ok->message);
        if (!req) break;
        peer->setups.push_back(*req);
        if (!respond_) continue;
        E2SetupResponse resp;
        if (fixed_) {
          resp.accepted_function_ids = *fixed_;
        } else {
          for (const auto& f : req->functions) {
            if (f.function_id == kKpmFunctionId || f.function_id == kRcFunctionId) {
              resp.accepted_function_ids.push_back(f.function_id);
            }
          }
        }
        peer->conn->send(encode(resp));
        break;
      }
      std::lock_guard lock(mu_);
      peers_.push_back(std::move(peer));
      cv_.notify_all();
    }
  }

  e2loop::net::Listener listener_;
  bool respond_;
  std::optional<std::vector<uint16_t>> fixed_;
  std::thread thread_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<Peer>> peers_;
};

}  // namespace e2test

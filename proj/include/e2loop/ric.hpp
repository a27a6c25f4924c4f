#pragma once

// Near-real-time RIC service: terminates E2 connections, keeps the node and
// subscription tables, fans indications out to xApps and forwards control.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "e2loop/net.hpp"
#include "e2loop/wire.hpp"

namespace e2loop::ric {

inline constexpr uint16_t kDefaultListenPort = 36421;

struct NodeRecord {
  wire::GlobalNodeId node;
  std::string display_id;
  std::set<uint16_t> accepted_functions;
  uint16_t peer_port = 0;  // the agent's local port
  bool connected = false;
  net::LinkCounters link_stats;
};

enum class SubscriptionState { Pending, Active, Rejected };

const char* subscription_state_name(SubscriptionState s);

struct Subscription {
  uint32_t request_id = 0;
  std::string xapp_id;
  std::string node_display_id;
  uint16_t function_id = 0;
  uint32_t report_period_ms = 0;
  SubscriptionState state = SubscriptionState::Pending;
};

enum class Direction { Rx, Tx };

struct MessageLogEntry {
  int64_t wall_us = 0;
  Direction direction = Direction::Rx;
  std::string node_display_id;
  wire::MsgType type = wire::MsgType::SetupRequest;
  std::size_t bytes = 0;
};

struct IndicationEvent {
  std::string node_display_id;
  wire::RicIndication indication;
  std::shared_ptr<const std::vector<uint8_t>> frame;  // bytes exactly as received
};

struct ControlAckEvent {
  std::string node_display_id;
  wire::ControlAction action;
  wire::RicControlAcknowledge ack;
};

class XappHost;

// xApp callbacks run serially on the xApp's own dispatcher thread.
class Xapp {
 public:
  virtual ~Xapp() = default;
  virtual std::string id() const = 0;
  virtual void on_node_connected(XappHost&, const NodeRecord&) {}
  virtual void on_indication(XappHost&, const IndicationEvent& ev) = 0;
  virtual void on_control_ack(XappHost&, const ControlAckEvent&) {}
};

struct RicConfig {
  net::Endpoint listen{"0.0.0.0", kDefaultListenPort};
  std::chrono::milliseconds timeout{5000};
};

class Ric;

// The three verbs an xApp uses, bound to one xApp identity.
class XappHost {
 public:
  XappHost(Ric& ric, std::string xapp_id) : ric_(ric), xapp_id_(std::move(xapp_id)) {}

  Subscription subscribe(const std::string& node_display_id, uint16_t function_id, uint32_t period_ms);
  wire::RicControlAcknowledge send_control(const std::string& node_display_id,
                                           const wire::ControlAction& action);
  std::shared_future<wire::RicControlAcknowledge> send_control_async(
      const std::string& node_display_id, const wire::ControlAction& action);
  std::vector<NodeRecord> nodes() const;
  const std::string& xapp_id() const { return xapp_id_; }

 private:
  Ric& ric_;
  std::string xapp_id_;
};

class Ric {
 public:
  explicit Ric(RicConfig cfg = {});
  ~Ric();
  Ric(const Ric&) = delete;
  Ric& operator=(const Ric&) = delete;

  // Binds the listener and starts accepting E2 connections.
  void start();
  void stop();
  uint16_t port() const;

  // Registers (or replaces) the node record and returns the accepted ids:
  // the offered ids intersected with {200, 300}.
  wire::E2SetupResponse accept_setup(const wire::E2SetupRequest& req);

  void attach_xapp(std::shared_ptr<Xapp> xapp);

  // Throws Error(UnknownNode | FunctionNotAccepted | Timeout).
  Subscription subscribe(const std::string& xapp_id, const std::string& node_display_id,
                         uint16_t function_id, uint32_t period_ms);

  // Delivers to every xApp holding an ACTIVE matching subscription.
  std::size_t route_indication(const wire::RicIndication& ind, const std::string& from_display_id,
                               std::shared_ptr<const std::vector<uint8_t>> frame = nullptr);

  // Throws Error(UnknownNode | ControlNotSupported | Timeout).
  wire::RicControlAcknowledge send_control(const std::string& xapp_id,
                                           const std::string& node_display_id,
                                           const wire::ControlAction& action);
  std::shared_future<wire::RicControlAcknowledge> send_control_async(
      const std::string& xapp_id, const std::string& node_display_id,
      const wire::ControlAction& action);

  std::vector<NodeRecord> nodes() const;
  std::vector<Subscription> subscriptions() const;
  std::vector<MessageLogEntry> message_log() const;

  uint64_t indications_received() const { return indications_received_.load(); }
  uint64_t controls_sent() const { return controls_sent_.load(); }
  uint64_t indications_dropped() const { return indications_dropped_.load(); }

  // Blocks until every xApp dispatcher has an empty queue and is not inside a
  // callback. Returns false on timeout.
  bool wait_xapps_idle(std::chrono::milliseconds timeout);
  // Blocks until `count` nodes are connected. Returns false on timeout.
  bool wait_for_nodes(std::size_t count, std::chrono::milliseconds timeout);
  // Blocks until `count` subscriptions are ACTIVE. Returns false on timeout.
  bool wait_for_active(std::size_t count, std::chrono::milliseconds timeout);

 private:
  struct Link;
  class Dispatcher;
  struct XappSlot {
    std::shared_ptr<Xapp> xapp;
    std::unique_ptr<Dispatcher> dispatcher;
    std::unique_ptr<XappHost> host;
  };

  void accept_loop();
  void link_loop(std::shared_ptr<Link> link);
  void handle(const std::shared_ptr<Link>& link, const wire::E2Message& msg,
              std::shared_ptr<const std::vector<uint8_t>> frame);
  void send_on(Link& link, const wire::E2Message& msg);
  void record(Direction dir, const std::string& node, wire::MsgType type, std::size_t bytes);
  std::shared_ptr<Link> link_for(const std::string& display_id) const;
  XappSlot* slot_for(const std::string& xapp_id);

  RicConfig cfg_;
  std::unique_ptr<net::Listener> listener_;
  std::thread accept_thread_;
  std::atomic<bool> running_{false};

  mutable std::shared_mutex mu_;  // nodes_, links_, subs_
  std::map<std::string, NodeRecord> nodes_;
  std::map<std::string, std::shared_ptr<Link>> links_;
  std::vector<std::shared_ptr<Link>> all_links_;
  std::vector<Subscription> subs_;
  uint32_t next_request_id_ = 1;

  std::mutex xapps_mu_;
  std::vector<XappSlot> xapps_;

  mutable std::mutex log_mu_;
  std::vector<MessageLogEntry> log_;

  std::atomic<uint64_t> indications_received_{0};
  std::atomic<uint64_t> indications_dropped_{0};
  std::atomic<uint64_t> controls_sent_{0};
};

}  // namespace e2loop::ric

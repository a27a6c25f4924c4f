#pragma once

// RAN-side E2 terminations. One termination per simulated base station, each
// with its own connection bound to a distinct local port.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "e2loop/net.hpp"
#include "e2loop/wire.hpp"

namespace e2loop::agent {

inline constexpr uint16_t kDefaultLocalPortBase = 38471;

enum class TerminationState { Disconnected, SetupSent, Established };

const char* state_name(TerminationState s);

struct SendReceipt {
  std::size_t bytes_on_wire = 0;
  uint64_t wall_time_ms = 0;
  uint8_t msg_type = 0;
};

struct SetupOutcome {
  std::vector<uint16_t> accepted;
};

struct TerminationConfig {
  wire::GlobalNodeId node;
  uint16_t local_port = 0;  // 0 = ephemeral
  net::Endpoint remote;
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds setup_timeout{5000};
  int setup_retries = 1;
  int pad_width = 8;
};

// Invoked on the connection thread with the decoded inbound message.
using Handler = std::function<void(const wire::E2Message&)>;
// Invoked when a subscription is admitted; the owning node starts reporting.
using SubscriptionListener = std::function<void(uint16_t function_id, uint32_t period_ms)>;

// Default capability set: KPM reports and RAN control.
std::vector<wire::RanFunctionDefinition> default_functions();

class E2Termination {
 public:
  explicit E2Termination(TerminationConfig cfg);
  ~E2Termination();
  E2Termination(const E2Termination&) = delete;
  E2Termination& operator=(const E2Termination&) = delete;

  // Throws Error(ConnectRefused | SetupTimeout | SetupRejected).
  SetupOutcome connect_and_setup(const std::vector<wire::RanFunctionDefinition>& functions);

  // Last registration wins.
  void register_callback(uint16_t function_id, Handler handler);
  void set_subscription_listener(SubscriptionListener listener);

  // Admission policy for an inbound subscription. Called by the connection
  // thread, which also writes the response.
  wire::SubscriptionResponse handle_subscription(const wire::SubscriptionRequest& req);

  // Throws Error(NotSubscribed | ConnectionLost).
  SendReceipt send_report(const wire::KpmReport& report);
  SendReceipt send_control_ack(wire::AckStatus status, const std::string& detail);

  std::optional<uint32_t> report_period(uint16_t function_id) const;
  TerminationState state() const { return state_.load(); }
  const wire::GlobalNodeId& node() const { return cfg_.node; }
  const std::string& display_id() const { return display_id_; }
  uint16_t configured_port() const { return cfg_.local_port; }
  uint16_t local_port() const;
  std::vector<uint16_t> accepted_functions() const;

  net::LinkCounters counters() const;
  uint64_t dropped_messages() const { return dropped_.load(); }
  uint64_t controls_received() const { return controls_received_.load(); }
  uint64_t indications_sent() const { return indications_sent_.load(); }

  void close();

 private:
  SendReceipt send_message(const wire::E2Message& msg);
  void reader_loop();
  void dispatch(const wire::E2Message& msg);

  TerminationConfig cfg_;
  std::string display_id_;
  std::atomic<TerminationState> state_{TerminationState::Disconnected};
  std::unique_ptr<net::FrameConnection> conn_;
  std::thread reader_;

  mutable std::mutex mu_;
  std::vector<uint16_t> accepted_;
  std::map<uint16_t, wire::SubscriptionRequest> subscriptions_;
  std::map<uint16_t, Handler> callbacks_;
  SubscriptionListener sub_listener_;
  std::array<uint32_t, 3> sequence_{};  // per unit type
  std::mutex send_mu_;

  std::atomic<uint64_t> dropped_{0};
  std::atomic<uint64_t> controls_received_{0};
  std::atomic<uint64_t> indications_sent_{0};
  net::LinkCounters final_counters_;
  std::atomic<uint16_t> bound_port_{0};
};

// Owns the terminations of one simulation process. Mutated during scenario
// setup, read concurrently afterwards.
class TerminationRegistry {
 public:
  // Throws Error(DuplicatePort) when a non-zero local port is already taken.
  E2Termination& add(TerminationConfig cfg);

  E2Termination* find_by_node(uint32_t node_id) const;
  E2Termination* find_by_display(const std::string& display_id) const;
  std::vector<E2Termination*> all() const;

  uint64_t indications_sent() const;
  uint64_t controls_received() const;

  void close_all();

 private:
  mutable std::shared_mutex mu_;
  std::vector<std::unique_ptr<E2Termination>> terms_;
};

}  // namespace e2loop::agent

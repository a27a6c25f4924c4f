#include "e2loop/agent.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

#include "e2loop/error.hpp"
#include "e2loop/log.hpp"

namespace e2loop::agent {

using namespace e2loop::wire;

const char* state_name(TerminationState s) {
  switch (s) {
    case TerminationState::Disconnected: return "DISCONNECTED";
    case TerminationState::SetupSent: return "SETUP_SENT";
    case TerminationState::Established: return "ESTABLISHED";
  }
  return "?";
}

std::vector<RanFunctionDefinition> default_functions() {
  return {{kKpmFunctionId, 1, "KPM periodic report"}, {kRcFunctionId, 1, "RAN control: handover"}};
}

E2Termination::E2Termination(TerminationConfig cfg)
    : cfg_(std::move(cfg)), display_id_(format_node_id(cfg_.node, cfg_.pad_width)) {}

E2Termination::~E2Termination() { close(); }

SetupOutcome E2Termination::connect_and_setup(const std::vector<RanFunctionDefinition>& functions) {
  if (state_ != TerminationState::Disconnected) {
    throw Error(ErrorCode::SetupRejected, display_id_ + " already connected");
  }
  conn_ = std::make_unique<net::FrameConnection>(
      net::connect_tcp(cfg_.remote, cfg_.local_port, cfg_.connect_timeout));
  bound_port_ = conn_->local_port();

  E2SetupRequest req{cfg_.node, functions};
  auto frame = encode(req);
  for (int attempt = 0; attempt <= cfg_.setup_retries; ++attempt) {
    try {
      conn_->send(frame);
    } catch (const Error& e) {
      conn_.reset();
      throw Error(ErrorCode::ConnectRefused, e.what());
    }
    state_ = TerminationState::SetupSent;
    log_line("e2agent dir=tx node=" + display_id_ + " type=E2SetupRequest bytes=" +
             std::to_string(frame.size()));

    auto deadline = std::chrono::steady_clock::now() + cfg_.setup_timeout;
    while (true) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) break;
      auto res = conn_->read_frame(left);
      if (res.status == net::FrameConnection::ReadStatus::Timeout) break;
      if (res.status != net::FrameConnection::ReadStatus::Frame) {
        state_ = TerminationState::Disconnected;
        conn_.reset();
        throw Error(ErrorCode::ConnectRefused, display_id_ + ": link closed during setup");
      }
      auto decoded = decode(res.frame);
      auto* ok = std::get_if<Decoded>(&decoded);
      if (!ok) continue;
      auto* resp = std::get_if<E2SetupResponse>(&ok->message);
      if (!resp) continue;

      if (resp->accepted_function_ids.empty()) {
        state_ = TerminationState::Disconnected;
        conn_.reset();
        throw Error(ErrorCode::SetupRejected, display_id_ + ": no offered function accepted");
      }
      {
        std::lock_guard lock(mu_);
        accepted_ = resp->accepted_function_ids;
      }
      state_ = TerminationState::Established;
      reader_ = std::thread([this] { reader_loop(); });
      return SetupOutcome{resp->accepted_function_ids};
    }
  }
  state_ = TerminationState::Disconnected;
  conn_.reset();
  throw Error(ErrorCode::SetupTimeout, display_id_ + ": no E2 Setup Response");
}

void E2Termination::register_callback(uint16_t function_id, Handler handler) {
  std::lock_guard lock(mu_);
  callbacks_[function_id] = std::move(handler);
}

void E2Termination::set_subscription_listener(SubscriptionListener listener) {
  std::lock_guard lock(mu_);
  sub_listener_ = std::move(listener);
}

SubscriptionResponse E2Termination::handle_subscription(const SubscriptionRequest& req) {
  SubscriptionListener listener;
  {
    std::lock_guard lock(mu_);
    bool accepted = std::find(accepted_.begin(), accepted_.end(), req.function_id) != accepted_.end();
    // Only the KPM function produces a report stream.
    bool admitted = state_ == TerminationState::Established && accepted &&
                    req.function_id == kKpmFunctionId && req.report_period_ms > 0;
    if (!admitted) return SubscriptionResponse{req.request_id, false};
    subscriptions_[req.function_id] = req;
    listener = sub_listener_;
  }
  if (listener) listener(req.function_id, req.report_period_ms);
  return SubscriptionResponse{req.request_id, true};
}

std::optional<uint32_t> E2Termination::report_period(uint16_t function_id) const {
  std::lock_guard lock(mu_);
  auto it = subscriptions_.find(function_id);
  if (it == subscriptions_.end()) return std::nullopt;
  return it->second.report_period_ms;
}

uint16_t E2Termination::local_port() const {
  uint16_t bound = bound_port_.load();
  return bound ? bound : cfg_.local_port;
}

std::vector<uint16_t> E2Termination::accepted_functions() const {
  std::lock_guard lock(mu_);
  return accepted_;
}

SendReceipt E2Termination::send_message(const E2Message& msg) {
  if (state_ != TerminationState::Established || !conn_) {
    throw Error(ErrorCode::ConnectionLost, display_id_ + " is not established");
  }
  auto frame = encode(msg);
  try {
    conn_->send(frame);
  } catch (const Error&) {
    state_ = TerminationState::Disconnected;
    throw;
  }
  SendReceipt receipt{frame.size(), net::unix_now_ms(), frame[3]};
  log_line("e2agent dir=tx node=" + display_id_ + " type=" + type_name(type_of(msg)) +
           " bytes=" + std::to_string(frame.size()));
  return receipt;
}

SendReceipt E2Termination::send_report(const KpmReport& report) {
  std::lock_guard send_lock(send_mu_);
  RicIndication ind;
  {
    std::lock_guard lock(mu_);
    auto it = subscriptions_.find(kKpmFunctionId);
    if (it == subscriptions_.end()) {
      throw Error(ErrorCode::NotSubscribed, display_id_ + " has no KPM subscription");
    }
    ind.request_id = it->second.request_id;
    ind.function_id = kKpmFunctionId;
    ind.sequence_number = sequence_[static_cast<std::size_t>(report.body.unit)] + 1;
  }
  ind.header = report.header;
  ind.body = report.body;
  auto receipt = send_message(ind);
  {
    std::lock_guard lock(mu_);
    sequence_[static_cast<std::size_t>(report.body.unit)] = ind.sequence_number;
  }
  ++indications_sent_;
  return receipt;
}

SendReceipt E2Termination::send_control_ack(AckStatus status, const std::string& detail) {
  std::lock_guard send_lock(send_mu_);
  return send_message(RicControlAcknowledge{status, detail});
}

void E2Termination::dispatch(const E2Message& msg) {
  if (auto* sub = std::get_if<SubscriptionRequest>(&msg)) {
    auto resp = handle_subscription(*sub);
    try {
      std::lock_guard send_lock(send_mu_);
      send_message(resp);
    } catch (const Error& e) {
      log_line("e2agent node=" + display_id_ + " error=" + e.what());
    }
  }

  auto fid = function_id_of(msg);
  Handler handler;
  if (fid) {
    std::lock_guard lock(mu_);
    auto it = callbacks_.find(*fid);
    if (it != callbacks_.end()) handler = it->second;
  }
  if (handler) {
    handler(msg);
  } else if (!std::holds_alternative<SubscriptionRequest>(msg)) {
    ++dropped_;
    log_line("e2agent node=" + display_id_ + " dropped type=" + type_name(type_of(msg)) +
             (fid ? " function=" + std::to_string(*fid) : std::string()));
  }
  // Counted after the handler so a nonzero count implies the action is queued.
  if (std::holds_alternative<RicControlRequest>(msg)) ++controls_received_;
}

void E2Termination::reader_loop() {
  while (true) {
    auto res = conn_->read_frame();
    if (res.status != net::FrameConnection::ReadStatus::Frame) break;
    auto decoded = decode(res.frame);
    if (auto* ok = std::get_if<Decoded>(&decoded)) {
      log_line("e2agent dir=rx node=" + display_id_ + " type=" +
               type_name(type_of(ok->message)) + " bytes=" + std::to_string(res.frame.size()));
      dispatch(ok->message);
    } else {
      ++dropped_;
    }
  }
  state_ = TerminationState::Disconnected;
}

net::LinkCounters E2Termination::counters() const {
  return conn_ ? conn_->counters() : final_counters_;
}

void E2Termination::close() {
  if (conn_) conn_->shutdown();
  if (reader_.joinable() && reader_.get_id() != std::this_thread::get_id()) reader_.join();
  if (conn_) {
    final_counters_ = conn_->counters();
    conn_.reset();
  }
  state_ = TerminationState::Disconnected;
}

E2Termination& TerminationRegistry::add(TerminationConfig cfg) {
  std::unique_lock lock(mu_);
  if (cfg.local_port != 0) {
    for (const auto& t : terms_) {
      if (t->configured_port() == cfg.local_port) {
        throw Error(ErrorCode::DuplicatePort,
                    "local port " + std::to_string(cfg.local_port) + " already used");
      }
    }
  }
  terms_.push_back(std::make_unique<E2Termination>(std::move(cfg)));
  return *terms_.back();
}

E2Termination* TerminationRegistry::find_by_node(uint32_t node_id) const {
  std::shared_lock lock(mu_);
  for (const auto& t : terms_) {
    if (t->node().node_id == node_id) return t.get();
  }
  return nullptr;
}

E2Termination* TerminationRegistry::find_by_display(const std::string& display_id) const {
  std::shared_lock lock(mu_);
  for (const auto& t : terms_) {
    if (t->display_id() == display_id) return t.get();
  }
  return nullptr;
}

std::vector<E2Termination*> TerminationRegistry::all() const {
  std::shared_lock lock(mu_);
  std::vector<E2Termination*> out;
  for (const auto& t : terms_) out.push_back(t.get());
  return out;
}

uint64_t TerminationRegistry::indications_sent() const {
  std::shared_lock lock(mu_);
  uint64_t total = 0;
  for (const auto& t : terms_) total += t->indications_sent();
  return total;
}

uint64_t TerminationRegistry::controls_received() const {
  std::shared_lock lock(mu_);
  uint64_t total = 0;
  for (const auto& t : terms_) total += t->controls_received();
  return total;
}

void TerminationRegistry::close_all() {
  std::shared_lock lock(mu_);
  for (const auto& t : terms_) t->close();
}

}  // namespace e2loop::agent

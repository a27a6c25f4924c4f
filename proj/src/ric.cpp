#include "e2loop/ric.hpp"

#include <algorithm>

#include "e2loop/error.hpp"
#include "e2loop/log.hpp"

namespace e2loop::ric {

using namespace e2loop::wire;

namespace {

template <typename Pred>
bool wait_until(Pred pred, std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!pred()) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::microseconds(50));
  }
  return true;
}

bool is_supported(uint16_t function_id) {
  return function_id == kKpmFunctionId || function_id == kRcFunctionId;
}

}  // namespace

const char* subscription_state_name(SubscriptionState s) {
  switch (s) {
    case SubscriptionState::Pending: return "PENDING";
    case SubscriptionState::Active: return "ACTIVE";
    case SubscriptionState::Rejected: return "REJECTED";
  }
  return "?";
}

struct Ric::Link {
  struct PendingAck {
    std::string xapp_id;
    ControlAction action;
    std::shared_ptr<std::promise<RicControlAcknowledge>> promise;
  };

  std::unique_ptr<net::FrameConnection> conn;
  std::thread reader;
  std::string display_id;
  std::mutex mu;
  std::deque<PendingAck> pending_acks;
  std::map<uint32_t, std::shared_ptr<std::promise<SubscriptionResponse>>> pending_subs;
};

class Ric::Dispatcher {
 public:
  Dispatcher() : thread_([this] { loop(); }) {}
  ~Dispatcher() { shutdown(); }

  void post(std::function<void()> task) {
    {
      std::lock_guard lock(mu_);
      if (stopping_) return;
      queue_.push_back(std::move(task));
    }
    cv_.notify_one();
  }

  bool idle() const {
    std::lock_guard lock(mu_);
    return queue_.empty() && !busy_;
  }

  void shutdown() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_one();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void loop() {
    std::unique_lock lock(mu_);
    while (true) {
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      auto task = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
      lock.unlock();
      try {
        task();
      } catch (const std::exception& e) {
        log_line(std::string("xapp callback failed: ") + e.what());
      }
      lock.lock();
      busy_ = false;
    }
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread thread_;
};

Subscription XappHost::subscribe(const std::string& node_display_id, uint16_t function_id,
                                 uint32_t period_ms) {
  return ric_.subscribe(xapp_id_, node_display_id, function_id, period_ms);
}

RicControlAcknowledge XappHost::send_control(const std::string& node_display_id,
                                             const ControlAction& action) {
  return ric_.send_control(xapp_id_, node_display_id, action);
}

std::shared_future<RicControlAcknowledge> XappHost::send_control_async(
    const std::string& node_display_id, const ControlAction& action) {
  return ric_.send_control_async(xapp_id_, node_display_id, action);
}

std::vector<NodeRecord> XappHost::nodes() const { return ric_.nodes(); }

Ric::Ric(RicConfig cfg) : cfg_(std::move(cfg)) {}

Ric::~Ric() { stop(); }

void Ric::start() {
  listener_ = std::make_unique<net::Listener>(cfg_.listen);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  log_line("e2term listening port=" + std::to_string(listener_->port()));
}

uint16_t Ric::port() const { return listener_ ? listener_->port() : 0; }

void Ric::stop() {
  if (running_.exchange(false)) {
    listener_->close();
  }
  if (accept_thread_.joinable()) accept_thread_.join();

  std::vector<std::shared_ptr<Link>> links;
  {
    std::shared_lock lock(mu_);
    links = all_links_;
  }
  for (auto& link : links) link->conn->shutdown();
  for (auto& link : links) {
    if (link->reader.joinable()) link->reader.join();
  }

  std::vector<XappSlot> slots;
  {
    std::lock_guard lock(xapps_mu_);
    slots.swap(xapps_);
  }
  for (auto& slot : slots) slot.dispatcher->shutdown();
}

void Ric::accept_loop() {
  while (running_) {
    net::Socket s = listener_->accept();
    if (!s.valid()) break;
    auto link = std::make_shared<Link>();
    link->conn = std::make_unique<net::FrameConnection>(std::move(s));
    {
      std::unique_lock lock(mu_);
      all_links_.push_back(link);
    }
    link->reader = std::thread([this, link] { link_loop(link); });
  }
}

void Ric::record(Direction dir, const std::string& node, MsgType type, std::size_t bytes) {
  {
    std::lock_guard lock(log_mu_);
    log_.push_back({net::unix_now_us(), dir, node, type, bytes});
  }
  log_line(std::string("e2term dir=") + (dir == Direction::Rx ? "rx" : "tx") + " node=" +
           (node.empty() ? "-" : node) + " type=" + type_name(type) + " bytes=" + std::to_string(bytes));
}

void Ric::send_on(Link& link, const E2Message& msg) {
  auto frame = encode(msg);
  link.conn->send(frame);
  record(Direction::Tx, link.display_id, type_of(msg), frame.size());
}

void Ric::link_loop(std::shared_ptr<Link> link) {
  while (true) {
    auto res = link->conn->read_frame();
    if (res.status != net::FrameConnection::ReadStatus::Frame) {
      if (res.status == net::FrameConnection::ReadStatus::Malformed) {
        log_line("e2term node=" + link->display_id + " codec error: " + res.detail);
      }
      break;
    }
    auto decoded = decode(res.frame);
    auto* ok = std::get_if<Decoded>(&decoded);
    if (!ok) {
      log_line("e2term node=" + link->display_id + " codec error: " +
               decode_error_name(std::get<DecodeError>(decoded).kind));
      break;
    }
    // Setup names the node, so it is logged after handling.
    if (!std::holds_alternative<E2SetupRequest>(ok->message)) {
      record(Direction::Rx, link->display_id, type_of(ok->message), res.frame.size());
    }
    auto frame = std::make_shared<const std::vector<uint8_t>>(std::move(res.frame));
    try {
      handle(link, ok->message, frame);
    } catch (const Error& e) {
      log_line(std::string("e2term error: ") + e.what());
      break;
    }
  }
  link->conn->shutdown();

  std::deque<Link::PendingAck> acks;
  std::map<uint32_t, std::shared_ptr<std::promise<SubscriptionResponse>>> subs;
  {
    std::lock_guard lock(link->mu);
    acks.swap(link->pending_acks);
    subs.swap(link->pending_subs);
  }
  for (auto& p : acks) {
    p.promise->set_exception(std::make_exception_ptr(Error(ErrorCode::ConnectionLost, link->display_id)));
  }
  for (auto& [id, p] : subs) {
    p->set_exception(std::make_exception_ptr(Error(ErrorCode::ConnectionLost, link->display_id)));
  }

  std::unique_lock lock(mu_);
  auto it = links_.find(link->display_id);
  if (it != links_.end() && it->second == link) {
    links_.erase(it);
    auto node = nodes_.find(link->display_id);
    if (node != nodes_.end()) {
      node->second.connected = false;
      node->second.link_stats = link->conn->counters();
    }
  }
}

E2SetupResponse Ric::accept_setup(const E2SetupRequest& req) {
  NodeRecord rec;
  rec.node = req.node;
  rec.display_id = format_node_id(req.node);
  E2SetupResponse resp;
  for (const auto& f : req.functions) {
    if (is_supported(f.function_id) && rec.accepted_functions.insert(f.function_id).second) {
      resp.accepted_function_ids.push_back(f.function_id);
    }
  }
  std::unique_lock lock(mu_);
  nodes_[rec.display_id] = std::move(rec);
  return resp;
}

void Ric::handle(const std::shared_ptr<Link>& link, const E2Message& msg,
                 std::shared_ptr<const std::vector<uint8_t>> frame) {
  if (auto* setup = std::get_if<E2SetupRequest>(&msg)) {
    std::string display = format_node_id(setup->node);
    record(Direction::Rx, display, MsgType::SetupRequest, frame->size());
    auto resp = accept_setup(*setup);
    std::shared_ptr<Link> stale;
    {
      std::unique_lock lock(mu_);
      link->display_id = display;
      auto& slot = links_[display];
      if (slot && slot != link) stale = slot;
      slot = link;
      auto& rec = nodes_[display];
      rec.connected = true;
      rec.peer_port = link->conn->remote_port();
    }
    // Duplicate setup replaces the stale record.
    if (stale) stale->conn->shutdown();
    send_on(*link, resp);

    NodeRecord rec;
    {
      std::shared_lock lock(mu_);
      rec = nodes_[display];
    }
    std::lock_guard lock(xapps_mu_);
    for (auto& slot : xapps_) {
      auto xapp = slot.xapp;
      auto* host = slot.host.get();
      slot.dispatcher->post([xapp, host, rec] { xapp->on_node_connected(*host, rec); });
    }
    return;
  }

  if (auto* sub = std::get_if<SubscriptionResponse>(&msg)) {
    {
      std::unique_lock lock(mu_);
      for (auto& s : subs_) {
        if (s.request_id == sub->request_id) {
          s.state = sub->admitted ? SubscriptionState::Active : SubscriptionState::Rejected;
        }
      }
    }
    std::shared_ptr<std::promise<SubscriptionResponse>> promise;
    {
      std::lock_guard lock(link->mu);
      auto it = link->pending_subs.find(sub->request_id);
      if (it != link->pending_subs.end()) {
        promise = it->second;
        link->pending_subs.erase(it);
      }
    }
    if (promise) promise->set_value(*sub);
    return;
  }

  if (auto* ind = std::get_if<RicIndication>(&msg)) {
    route_indication(*ind, link->display_id, std::move(frame));
    ++indications_received_;
    return;
  }

  if (auto* ack = std::get_if<RicControlAcknowledge>(&msg)) {
    std::optional<Link::PendingAck> pending;
    {
      std::lock_guard lock(link->mu);
      if (!link->pending_acks.empty()) {
        pending = std::move(link->pending_acks.front());
        link->pending_acks.pop_front();
      }
    }
    if (!pending) {
      log_line("e2term node=" + link->display_id + " unsolicited control ack dropped");
      return;
    }
    pending->promise->set_value(*ack);
    if (XappSlot* slot = slot_for(pending->xapp_id)) {
      ControlAckEvent ev{link->display_id, pending->action, *ack};
      auto xapp = slot->xapp;
      auto* host = slot->host.get();
      slot->dispatcher->post([xapp, host, ev] { xapp->on_control_ack(*host, ev); });
    }
    return;
  }

  log_line("e2term node=" + link->display_id + " unexpected " + type_name(type_of(msg)));
}

void Ric::attach_xapp(std::shared_ptr<Xapp> xapp) {
  std::lock_guard lock(xapps_mu_);
  XappSlot slot;
  slot.host = std::make_unique<XappHost>(*this, xapp->id());
  slot.dispatcher = std::make_unique<Dispatcher>();
  slot.xapp = std::move(xapp);
  xapps_.push_back(std::move(slot));
}

Ric::XappSlot* Ric::slot_for(const std::string& xapp_id) {
  std::lock_guard lock(xapps_mu_);
  for (auto& slot : xapps_) {
    if (slot.xapp->id() == xapp_id) return &slot;
  }
  return nullptr;
}

std::shared_ptr<Ric::Link> Ric::link_for(const std::string& display_id) const {
  std::shared_lock lock(mu_);
  auto it = links_.find(display_id);
  return it == links_.end() ? nullptr : it->second;
}

Subscription Ric::subscribe(const std::string& xapp_id, const std::string& node_display_id,
                            uint16_t function_id, uint32_t period_ms) {
  auto link = link_for(node_display_id);
  if (!link) throw Error(ErrorCode::UnknownNode, node_display_id);

  Subscription sub;
  auto promise = std::make_shared<std::promise<SubscriptionResponse>>();
  auto future = promise->get_future();
  {
    std::unique_lock lock(mu_);
    const auto& rec = nodes_.at(node_display_id);
    if (!rec.accepted_functions.count(function_id)) {
      throw Error(ErrorCode::FunctionNotAccepted,
                  node_display_id + " did not accept function " + std::to_string(function_id));
    }
    sub = Subscription{next_request_id_++, xapp_id, node_display_id, function_id, period_ms,
                       SubscriptionState::Pending};
    subs_.push_back(sub);
  }
  {
    std::lock_guard lock(link->mu);
    link->pending_subs[sub.request_id] = promise;
  }
  send_on(*link, SubscriptionRequest{sub.request_id, function_id, period_ms});

  if (future.wait_for(cfg_.timeout) != std::future_status::ready) {
    throw Error(ErrorCode::Timeout, "subscription " + std::to_string(sub.request_id));
  }
  auto resp = future.get();
  sub.state = resp.admitted ? SubscriptionState::Active : SubscriptionState::Rejected;
  return sub;
}

std::size_t Ric::route_indication(const RicIndication& ind, const std::string& from_display_id,
                                  std::shared_ptr<const std::vector<uint8_t>> frame) {
  std::set<std::string> targets;
  {
    std::shared_lock lock(mu_);
    for (const auto& s : subs_) {
      if (s.state == SubscriptionState::Active && s.node_display_id == from_display_id &&
          s.function_id == ind.function_id) {
        targets.insert(s.xapp_id);
      }
    }
  }
  if (targets.empty()) {
    ++indications_dropped_;
    return 0;
  }
  auto ev = std::make_shared<const IndicationEvent>(IndicationEvent{from_display_id, ind, std::move(frame)});
  std::size_t delivered = 0;
  std::lock_guard lock(xapps_mu_);
  for (auto& slot : xapps_) {
    if (!targets.count(slot.xapp->id())) continue;
    auto xapp = slot.xapp;
    auto* host = slot.host.get();
    slot.dispatcher->post([xapp, host, ev] { xapp->on_indication(*host, *ev); });
    ++delivered;
  }
  return delivered;
}

std::shared_future<RicControlAcknowledge> Ric::send_control_async(const std::string& xapp_id,
                                                                  const std::string& node_display_id,
                                                                  const ControlAction& action) {
  auto link = link_for(node_display_id);
  if (!link) throw Error(ErrorCode::UnknownNode, node_display_id);
  {
    std::shared_lock lock(mu_);
    if (!nodes_.at(node_display_id).accepted_functions.count(kRcFunctionId)) {
      throw Error(ErrorCode::ControlNotSupported, node_display_id);
    }
  }
  auto promise = std::make_shared<std::promise<RicControlAcknowledge>>();
  std::shared_future<RicControlAcknowledge> future = promise->get_future().share();
  {
    // Acks carry no id; pending order must equal send order.
    std::lock_guard lock(link->mu);
    link->pending_acks.push_back({xapp_id, action, promise});
    try {
      send_on(*link, RicControlRequest{kRcFunctionId, action});
    } catch (...) {
      link->pending_acks.pop_back();
      throw;
    }
    ++controls_sent_;
  }
  return future;
}

RicControlAcknowledge Ric::send_control(const std::string& xapp_id, const std::string& node_display_id,
                                        const ControlAction& action) {
  auto future = send_control_async(xapp_id, node_display_id, action);
  if (future.wait_for(cfg_.timeout) != std::future_status::ready) {
    throw Error(ErrorCode::Timeout, "no control acknowledge from " + node_display_id);
  }
  return future.get();
}

std::vector<NodeRecord> Ric::nodes() const {
  std::shared_lock lock(mu_);
  std::vector<NodeRecord> out;
  for (const auto& [display, rec] : nodes_) {
    NodeRecord copy = rec;
    auto it = links_.find(display);
    if (it != links_.end()) copy.link_stats = it->second->conn->counters();
    out.push_back(std::move(copy));
  }
  return out;
}

std::vector<Subscription> Ric::subscriptions() const {
  std::shared_lock lock(mu_);
  return subs_;
}

std::vector<MessageLogEntry> Ric::message_log() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

bool Ric::wait_xapps_idle(std::chrono::milliseconds timeout) {
  return wait_until(
      [this] {
        std::lock_guard lock(xapps_mu_);
        return std::all_of(xapps_.begin(), xapps_.end(),
                           [](const XappSlot& s) { return s.dispatcher->idle(); });
      },
      timeout);
}

bool Ric::wait_for_nodes(std::size_t count, std::chrono::milliseconds timeout) {
  return wait_until(
      [this, count] {
        std::shared_lock lock(mu_);
        return links_.size() >= count;
      },
      timeout);
}

bool Ric::wait_for_active(std::size_t count, std::chrono::milliseconds timeout) {
  return wait_until(
      [this, count] {
        std::shared_lock lock(mu_);
        return static_cast<std::size_t>(std::count_if(subs_.begin(), subs_.end(), [](const Subscription& s) {
                 return s.state == SubscriptionState::Active;
               })) >= count;
      },
      timeout);
}

}  // namespace e2loop::ric

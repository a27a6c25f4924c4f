#include <doctest.h>

#include <thread>

#include "e2loop/agent.hpp"
#include "e2loop/error.hpp"
#include "e2loop/ric.hpp"

using namespace e2loop;
using namespace e2loop::wire;
using std::chrono::milliseconds;

namespace {

class Recorder : public ric::Xapp {
 public:
  Recorder(std::string id, bool subscribe) : id_(std::move(id)), subscribe_(subscribe) {}

  std::string id() const override { return id_; }
  void on_node_connected(ric::XappHost& host, const ric::NodeRecord& node) override {
    if (subscribe_) host.subscribe(node.display_id, kKpmFunctionId, 100);
  }
  void on_indication(ric::XappHost&, const ric::IndicationEvent& ev) override {
    std::lock_guard lock(mu_);
    events_.push_back(ev);
  }
  void on_control_ack(ric::XappHost&, const ric::ControlAckEvent& ev) override {
    std::lock_guard lock(mu_);
    acks_.push_back(ev);
  }

  std::vector<ric::IndicationEvent> events() {
    std::lock_guard lock(mu_);
    return events_;
  }
  std::vector<ric::ControlAckEvent> acks() {
    std::lock_guard lock(mu_);
    return acks_;
  }

 private:
  std::string id_;
  bool subscribe_;
  std::mutex mu_;
  std::vector<ric::IndicationEvent> events_;
  std::vector<ric::ControlAckEvent> acks_;
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

template <typename Pred>
bool eventually(Pred pred) {
  for (int i = 0; i < 3000 && !pred(); ++i) std::this_thread::sleep_for(milliseconds(1));
  return pred();
}

std::unique_ptr<ric::Ric> local_ric(milliseconds timeout = milliseconds(2000)) {
  return std::make_unique<ric::Ric>(ric::RicConfig{{"127.0.0.1", 0}, timeout});
}

std::unique_ptr<agent::E2Termination> connect(ric::Ric& r, uint32_t node_id,
                                              std::vector<RanFunctionDefinition> fns = agent::default_functions()) {
  agent::TerminationConfig c;
  c.node = {"131-133", node_id == 1 ? NodeKind::Enb : NodeKind::Gnb, node_id};
  c.remote = {"127.0.0.1", r.port()};
  auto t = std::make_unique<agent::E2Termination>(c);
  t->connect_and_setup(fns);
  return t;
}

KpmReport sample_report(const std::string& display) {
  KpmReport rep;
  rep.header = {1'700'000'000'100, display};
  rep.body.unit = UnitType::CuCp;
  rep.body.cell_measurements = {{"num_active_ues", 1.0}, {"handover_count", 0.0}};
  rep.body.ue_measurements = {{1, {{"sinr_db_serving", 12.5}, {"sinr_db_cell_2", 12.5}}}};
  return rep;
}

}  // namespace

TEST_CASE("setup acceptance intersects with the supported functions") {
  ric::Ric r;
  auto both = r.accept_setup({{"131-133", NodeKind::Gnb, 2}, agent::default_functions()});
  CHECK(both.accepted_function_ids == std::vector<uint16_t>{200, 300});
  auto none = r.accept_setup({{"131-133", NodeKind::Gnb, 3}, {{999, 1, "x"}}});
  CHECK(none.accepted_function_ids.empty());
  auto nodes = r.nodes();
  REQUIRE(nodes.size() == 2);
  CHECK(nodes[0].display_id == "gnb:131-133-300000002");
  CHECK(nodes[0].accepted_functions == std::set<uint16_t>{200, 300});
  CHECK_FALSE(nodes[0].connected);
}

TEST_CASE("subscribing to an unknown node fails") {
  auto r = local_ric();
  r->start();
  CHECK(code_of([&] { r->subscribe("x", "gnb:131-133-300000009", 200, 100); }) == ErrorCode::UnknownNode);
  CHECK(code_of([&] { r->send_control("x", "gnb:131-133-300000009", {}); }) == ErrorCode::UnknownNode);
  r->stop();
}

TEST_CASE("indications fan out to every subscribed xApp with the raw frame") {
  auto r = local_ric();
  auto a = std::make_shared<Recorder>("a", true);
  auto b = std::make_shared<Recorder>("b", true);
  auto quiet = std::make_shared<Recorder>("quiet", false);
  r->attach_xapp(a);
  r->attach_xapp(b);
  r->attach_xapp(quiet);
  r->start();

  auto t = connect(*r, 2);
  REQUIRE(r->wait_for_active(2, milliseconds(3000)));
  REQUIRE(eventually([&] { return t->report_period(200).has_value(); }));
  auto subs = r->subscriptions();
  REQUIRE(subs.size() == 2);
  CHECK(subs[0].request_id != subs[1].request_id);

  auto rep = sample_report(t->display_id());
  t->send_report(rep);
  REQUIRE(eventually([&] { return r->indications_received() == 1; }));
  REQUIRE(r->wait_xapps_idle(milliseconds(2000)));

  for (auto* x : {a.get(), b.get()}) {
    auto evs = x->events();
    REQUIRE(evs.size() == 1);
    CHECK(evs[0].node_display_id == "gnb:131-133-300000002");
    CHECK(evs[0].indication.header == rep.header);
    CHECK(evs[0].indication.body == rep.body);
    REQUIRE(evs[0].frame);
    CHECK(*evs[0].frame == encode(evs[0].indication));
  }
  CHECK(quiet->events().empty());

  auto node = r->nodes().at(0);
  CHECK(node.connected);
  CHECK(node.peer_port == t->local_port());
  t->close();
  r->stop();
}

TEST_CASE("indications without subscribers are dropped") {
  auto r = local_ric();
  auto quiet = std::make_shared<Recorder>("quiet", false);
  r->attach_xapp(quiet);
  r->start();
  auto t = connect(*r, 3);
  // Subscribe directly on behalf of nobody that is attached.
  auto sub = r->subscribe("ghost", t->display_id(), 200, 100);
  CHECK(sub.state == ric::SubscriptionState::Active);
  t->send_report(sample_report(t->display_id()));
  REQUIRE(eventually([&] { return r->indications_received() == 1; }));
  r->wait_xapps_idle(milliseconds(1000));
  CHECK(quiet->events().empty());
  t->close();
  r->stop();
}

TEST_CASE("subscription and control checks against accepted functions") {
  auto r = local_ric(milliseconds(300));
  r->start();
  auto kpm_only = connect(*r, 4, {{200, 1, "KPM"}});
  CHECK(code_of([&] { r->send_control("x", kpm_only->display_id(), {}); }) == ErrorCode::ControlNotSupported);
  auto rc_only = connect(*r, 5, {{300, 1, "RC"}});
  CHECK(code_of([&] { r->subscribe("x", rc_only->display_id(), 200, 100); }) == ErrorCode::FunctionNotAccepted);
  // No handler registered on the agent, so no ack ever comes back.
  CHECK(code_of([&] { r->send_control("x", rc_only->display_id(), {ControlKind::Handover, 1, 2, 3}); }) ==
        ErrorCode::Timeout);
  CHECK(r->controls_sent() == 1);
  kpm_only->close();
  rc_only->close();
  r->stop();
}

TEST_CASE("control acknowledgements are matched in order") {
  auto r = local_ric();
  auto x = std::make_shared<Recorder>("ts", false);
  r->attach_xapp(x);
  r->start();
  auto t = connect(*r, 1);
  agent::E2Termination* raw = t.get();
  t->register_callback(300, [raw](const E2Message& m) {
    const auto& a = std::get<RicControlRequest>(m).action;
    raw->send_control_ack(a.target_cell == 3 ? AckStatus::Success : AckStatus::Rejected,
                          "target " + std::to_string(a.target_cell));
  });

  auto f1 = r->send_control_async("ts", t->display_id(), {ControlKind::Handover, 1, 2, 3});
  auto f2 = r->send_control_async("ts", t->display_id(), {ControlKind::Handover, 1, 2, 4});
  REQUIRE(f1.wait_for(std::chrono::seconds(2)) == std::future_status::ready);
  REQUIRE(f2.wait_for(std::chrono::seconds(2)) == std::future_status::ready);
  CHECK(f1.get().status == AckStatus::Success);
  CHECK(f2.get().status == AckStatus::Rejected);
  CHECK(f2.get().detail == "target 4");

  REQUIRE(r->wait_xapps_idle(milliseconds(1000)));
  REQUIRE(eventually([&] { return x->acks().size() == 2; }));
  CHECK(x->acks()[0].action.target_cell == 3);
  CHECK(x->acks()[1].ack.status == AckStatus::Rejected);
  CHECK(r->controls_sent() == 2);
  t->close();
  r->stop();
}

TEST_CASE("message log records the setup exchange per node") {
  auto r = local_ric();
  r->attach_xapp(std::make_shared<Recorder>("a", true));
  r->start();
  auto t = connect(*r, 2);
  REQUIRE(r->wait_for_active(1, milliseconds(2000)));
  t->send_report(sample_report(t->display_id()));
  REQUIRE(eventually([&] { return r->message_log().size() == 5; }));
  auto log = r->message_log();
  std::vector<MsgType> types;
  for (const auto& e : log) {
    CHECK(e.node_display_id == "gnb:131-133-300000002");
    CHECK(e.bytes > 8);
    types.push_back(e.type);
  }
  CHECK(types == std::vector<MsgType>{MsgType::SetupRequest, MsgType::SetupResponse, MsgType::SubscriptionRequest,
                                      MsgType::SubscriptionResponse, MsgType::Indication});
  CHECK(log[0].direction == ric::Direction::Rx);
  CHECK(log[1].direction == ric::Direction::Tx);
  t->close();
  r->stop();
}

TEST_CASE("a repeated setup from the same node replaces the old link") {
  auto r = local_ric();
  r->start();
  auto first = connect(*r, 2);
  auto second = connect(*r, 2);
  REQUIRE(eventually([&] { return first->state() == agent::TerminationState::Disconnected; }));
  CHECK(second->state() == agent::TerminationState::Established);
  auto nodes = r->nodes();
  REQUIRE(nodes.size() == 1);
  CHECK(nodes[0].connected);
  CHECK(nodes[0].peer_port == second->local_port());
  auto sub = r->subscribe("x", second->display_id(), 200, 100);
  CHECK(sub.state == ric::SubscriptionState::Active);
  first->close();
  second->close();
  r->stop();
}

TEST_CASE("disconnects are reflected in the node table") {
  auto r = local_ric();
  r->start();
  auto t = connect(*r, 2);
  REQUIRE(r->wait_for_nodes(1, milliseconds(1000)));
  t->close();
  REQUIRE(eventually([&] { return !r->nodes().at(0).connected; }));
  CHECK(r->nodes().at(0).link_stats.frames() == 2);
  r->stop();
}

#pragma once

// xApp building blocks and the sample traffic-steering xApp that closes the
// handover control loop.

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "e2loop/ric.hpp"
#include "e2loop/wire.hpp"

namespace e2loop::xapp {

struct TsPolicy {
  double hysteresis_db = 3.0;
  int confirm_reports = 2;
  uint64_t cooldown_ms = 500;
};

// Throws Error(InvalidConfig).
void validate(const TsPolicy& policy);

// One CU-CP observation of a UE.
struct UeSample {
  uint64_t timestamp_ms = 0;
  uint32_t serving_cell = 0;
  double serving_sinr_db = 0.0;
  std::map<uint32_t, double> sinr_db_per_cell;
};

struct UeView {
  uint64_t ue_id = 0;
  uint32_t serving_cell = 0;
  double sinr_db_serving = 0.0;
  double throughput_mbps = 0.0;
  uint64_t last_timestamp_ms = 0;
  std::deque<UeSample> recent;  // oldest first, bounded by the view table history
  std::optional<uint64_t> last_action_ms;
};

class ViewTable {
 public:
  explicit ViewTable(std::size_t history = 2, uint32_t report_period_ms = 100)
      : history_(history < 2 ? 2 : history), period_ms_(report_period_ms) {}

  struct UpdateResult {
    std::size_t updated = 0;
    std::size_t discarded = 0;        // older than the stored timestamp
    std::size_t ignored_metrics = 0;  // names outside the catalog
  };

  // Uses the header timestamp, never the wall clock, for ordering.
  UpdateResult apply(const wire::RicIndication& ind);

  // Marks the actions as issued at the UE's current view time.
  void record_actions(const std::vector<wire::ControlAction>& actions);

  const std::map<uint64_t, UeView>& views() const { return views_; }
  std::map<uint64_t, UeView>& views() { return views_; }

 private:
  std::size_t history_;
  uint32_t period_ms_;
  std::map<uint64_t, UeView> views_;
};

// Pure: for each UE, hands over to the strongest neighbor that beat the
// serving cell by hysteresis_db in each of the last confirm_reports samples,
// unless the UE is within cooldown. Ties go to the lowest cell id.
std::vector<wire::ControlAction> decide(const TsPolicy& policy, const std::map<uint64_t, UeView>& views);

struct ControlRecord {
  std::string node_display_id;
  wire::ControlAction action;
  std::optional<wire::RicControlAcknowledge> ack;
};

// Passive consumer: subscribes to KPM on every node and keeps what it saw.
class MonitorXapp : public ric::Xapp {
 public:
  MonitorXapp(std::string id, uint32_t period_ms, bool keep_events = true)
      : id_(std::move(id)), period_ms_(period_ms), keep_(keep_events) {}

  std::string id() const override { return id_; }
  void on_node_connected(ric::XappHost& host, const ric::NodeRecord& node) override;
  void on_indication(ric::XappHost& host, const ric::IndicationEvent& ev) override;

  std::vector<ric::IndicationEvent> events() const;
  uint64_t indication_count() const;

 protected:
  std::string id_;
  uint32_t period_ms_;
  bool keep_;
  mutable std::mutex mu_;
  std::vector<ric::IndicationEvent> events_;
  uint64_t count_ = 0;
};

class TrafficSteeringXapp : public MonitorXapp {
 public:
  TrafficSteeringXapp(std::string id, TsPolicy policy, uint32_t period_ms, bool keep_events = true);

  void on_indication(ric::XappHost& host, const ric::IndicationEvent& ev) override;
  void on_control_ack(ric::XappHost& host, const ric::ControlAckEvent& ev) override;

  std::vector<ControlRecord> controls() const;
  std::map<uint64_t, UeView> views() const;

 private:
  TsPolicy policy_;
  ViewTable table_;
  std::vector<ControlRecord> controls_;
};

}  // namespace e2loop::xapp

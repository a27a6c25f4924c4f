#include "e2loop/xapp.hpp"

#include <charconv>

#include "e2loop/error.hpp"
#include "e2loop/log.hpp"

namespace e2loop::xapp {

using namespace e2loop::wire;

namespace {

constexpr std::string_view kNeighborPrefix = "sinr_db_cell_";

std::optional<uint32_t> neighbor_cell(std::string_view name) {
  if (!name.starts_with(kNeighborPrefix)) return std::nullopt;
  name.remove_prefix(kNeighborPrefix.size());
  uint32_t id = 0;
  auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), id);
  if (ec != std::errc{} || ptr != name.data() + name.size()) return std::nullopt;
  return id;
}

bool known_cell_metric(UnitType unit, std::string_view name) {
  switch (unit) {
    case UnitType::CuCp: return name == "num_active_ues" || name == "handover_count";
    case UnitType::CuUp: return name == "dl_throughput_mbps";
    case UnitType::Du: return name == "prb_utilization_pct";
  }
  return false;
}

}  // namespace

void validate(const TsPolicy& policy) {
  if (!(policy.hysteresis_db >= 0.0)) throw Error(ErrorCode::InvalidConfig, "hysteresis_db must be >= 0");
  if (policy.confirm_reports < 1) throw Error(ErrorCode::InvalidConfig, "confirm_reports must be >= 1");
}

ViewTable::UpdateResult ViewTable::apply(const RicIndication& ind) {
  UpdateResult result;
  auto node = parse_node_id(ind.header.node_display_id);
  if (!node) {
    result.discarded = ind.body.ue_measurements.size();
    return result;
  }
  const uint64_t ts = ind.header.timestamp_ms;
  const UnitType unit = ind.body.unit;

  for (const auto& m : ind.body.cell_measurements) {
    if (!known_cell_metric(unit, m.name)) ++result.ignored_metrics;
  }

  for (const auto& ue : ind.body.ue_measurements) {
    auto it = views_.find(ue.ue_id);
    if (it != views_.end() && ts < it->second.last_timestamp_ms) {
      ++result.discarded;
      continue;
    }
    UeView& view = views_[ue.ue_id];
    view.ue_id = ue.ue_id;

    switch (unit) {
      case UnitType::CuCp: {
        UeSample sample{ts, node->node_id, 0.0, {}};
        for (const auto& m : ue.items) {
          if (m.name == "sinr_db_serving") {
            sample.serving_sinr_db = m.value;
          } else if (auto cell = neighbor_cell(m.name)) {
            sample.sinr_db_per_cell[*cell] = m.value;
          } else {
            ++result.ignored_metrics;
          }
        }
        if (view.serving_cell != node->node_id) view.recent.clear();
        view.serving_cell = node->node_id;
        view.sinr_db_serving = sample.serving_sinr_db;
        view.recent.push_back(std::move(sample));
        while (view.recent.size() > history_) view.recent.pop_front();
        break;
      }
      case UnitType::CuUp:
        for (const auto& m : ue.items) {
          if (m.name == "pdcp_sdu_volume_dl_kbit") {
            view.throughput_mbps = period_ms_ > 0 ? m.value / period_ms_ : 0.0;
          } else {
            ++result.ignored_metrics;
          }
        }
        break;
      case UnitType::Du:
        for (const auto& m : ue.items) {
          if (m.name != "mcs_index" && m.name != "achievable_rate_mbps") ++result.ignored_metrics;
        }
        break;
    }
    view.last_timestamp_ms = ts;
    ++result.updated;
  }
  return result;
}

void ViewTable::record_actions(const std::vector<ControlAction>& actions) {
  for (const auto& a : actions) {
    auto it = views_.find(a.ue_id);
    if (it != views_.end()) it->second.last_action_ms = it->second.last_timestamp_ms;
  }
}

std::vector<ControlAction> decide(const TsPolicy& policy, const std::map<uint64_t, UeView>& views) {
  std::vector<ControlAction> actions;
  const std::size_t need = static_cast<std::size_t>(policy.confirm_reports);
  for (const auto& [ue_id, view] : views) {
    if (view.recent.size() < need || view.serving_cell == 0) continue;
    const UeSample& latest = view.recent.back();
    if (view.last_action_ms && latest.timestamp_ms < *view.last_action_ms + policy.cooldown_ms) continue;

    uint32_t target = 0;
    double target_sinr = 0.0;
    for (const auto& [cell, sinr] : latest.sinr_db_per_cell) {
      if (cell == view.serving_cell) continue;
      bool confirmed = true;
      for (std::size_t k = view.recent.size() - need; k < view.recent.size() && confirmed; ++k) {
        const UeSample& s = view.recent[k];
        auto it = s.sinr_db_per_cell.find(cell);
        confirmed = s.serving_cell == view.serving_cell && it != s.sinr_db_per_cell.end() &&
                    it->second - s.serving_sinr_db >= policy.hysteresis_db;
      }
      // Map iteration is ascending, so strict > keeps the lowest id on ties.
      if (confirmed && (target == 0 || sinr > target_sinr)) {
        target = cell;
        target_sinr = sinr;
      }
    }
    if (target != 0) {
      actions.push_back(ControlAction{ControlKind::Handover, ue_id, view.serving_cell, target});
    }
  }
  return actions;
}

void MonitorXapp::on_node_connected(ric::XappHost& host, const ric::NodeRecord& node) {
  if (!node.accepted_functions.count(kKpmFunctionId)) return;
  try {
    auto sub = host.subscribe(node.display_id, kKpmFunctionId, period_ms_);
    log_line("xapp=" + id_ + " subscribed node=" + node.display_id + " state=" +
             ric::subscription_state_name(sub.state));
  } catch (const Error& e) {
    log_line("xapp=" + id_ + " subscribe failed: " + e.what());
  }
}

void MonitorXapp::on_indication(ric::XappHost&, const ric::IndicationEvent& ev) {
  std::lock_guard lock(mu_);
  ++count_;
  if (keep_) events_.push_back(ev);
}

std::vector<ric::IndicationEvent> MonitorXapp::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

uint64_t MonitorXapp::indication_count() const {
  std::lock_guard lock(mu_);
  return count_;
}

TrafficSteeringXapp::TrafficSteeringXapp(std::string id, TsPolicy policy, uint32_t period_ms, bool keep_events)
    : MonitorXapp(std::move(id), period_ms, keep_events),
      policy_(policy),
      table_(static_cast<std::size_t>(policy.confirm_reports), period_ms) {
  validate(policy_);
}

void TrafficSteeringXapp::on_indication(ric::XappHost& host, const ric::IndicationEvent& ev) {
  MonitorXapp::on_indication(host, ev);
  std::lock_guard lock(mu_);
  auto update = table_.apply(ev.indication);
  if (update.ignored_metrics) {
    log_line("xapp=" + id_ + " ignored " + std::to_string(update.ignored_metrics) + " unknown metrics");
  }
  if (ev.indication.body.unit != UnitType::CuCp) return;

  // Only UEs carried by this report: each UE is reported by one cell per
  // period, so decisions do not depend on the arrival order across nodes.
  std::map<uint64_t, UeView> reported;
  for (const auto& ue : ev.indication.body.ue_measurements) {
    auto it = table_.views().find(ue.ue_id);
    if (it != table_.views().end()) reported.insert(*it);
  }
  auto actions = decide(policy_, reported);
  if (actions.empty()) return;
  table_.record_actions(actions);

  std::string primary;
  for (const auto& n : host.nodes()) {
    if (n.connected && n.node.kind == NodeKind::Enb) primary = n.display_id;
  }
  for (const auto& action : actions) {
    if (primary.empty()) {
      log_line("xapp=" + id_ + " no primary node for control");
      break;
    }
    try {
      host.send_control_async(primary, action);
      controls_.push_back({primary, action, std::nullopt});
      log_line("xapp=" + id_ + " handover ue=" + std::to_string(action.ue_id) + " " +
               std::to_string(action.source_cell) + "->" + std::to_string(action.target_cell));
    } catch (const Error& e) {
      log_line("xapp=" + id_ + " control failed: " + e.what());
    }
  }
}

void TrafficSteeringXapp::on_control_ack(ric::XappHost&, const ric::ControlAckEvent& ev) {
  std::lock_guard lock(mu_);
  for (auto& rec : controls_) {
    if (!rec.ack && rec.action == ev.action && rec.node_display_id == ev.node_display_id) {
      rec.ack = ev.ack;
      return;
    }
  }
}

std::vector<ControlRecord> TrafficSteeringXapp::controls() const {
  std::lock_guard lock(mu_);
  return controls_;
}

std::map<uint64_t, UeView> TrafficSteeringXapp::views() const {
  std::lock_guard lock(mu_);
  return table_.views();
}

}  // namespace e2loop::xapp

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <thread>

#include "e2loop/error.hpp"
#include "e2loop/log.hpp"
#include "e2loop/sim.hpp"

namespace e2loop::sim {

using wire::UnitType;

void ControlQueue::push(Item item) {
  std::lock_guard lock(mu_);
  items_.push_back(item);
}

std::vector<ControlQueue::Item> ControlQueue::drain() {
  std::lock_guard lock(mu_);
  std::vector<Item> out(items_.begin(), items_.end());
  items_.clear();
  return out;
}

std::size_t ControlQueue::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* TraceWriter::file_name(UnitType unit) {
  switch (unit) {
    case UnitType::CuCp: return "cu-cp.csv";
    case UnitType::CuUp: return "cu-up.csv";
    case UnitType::Du: return "du.csv";
  }
  return "unknown.csv";
}

TraceWriter::TraceWriter(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (auto unit : {UnitType::CuCp, UnitType::CuUp, UnitType::Du}) {
    auto& f = files_[static_cast<int>(unit)];
    f.open(dir / file_name(unit), std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot open trace file in " + dir.string());
    f << "timestamp_ms,cell_id,scope,metric,value\n";
  }
}

void TraceWriter::write(uint32_t cell_id, const wire::KpmReport& report) {
  auto& f = files_[static_cast<int>(report.body.unit)];
  const auto ts = report.header.timestamp_ms;
  for (const auto& m : report.body.cell_measurements) {
    f << ts << ',' << cell_id << ",CELL," << m.name << ',' << format_value(m.value) << '\n';
  }
  for (const auto& ue : report.body.ue_measurements) {
    for (const auto& m : ue.items) {
      f << ts << ',' << cell_id << ',' << ue.ue_id << ',' << m.name << ',' << format_value(m.value)
        << '\n';
    }
  }
}

void TraceWriter::flush() {
  for (auto& f : files_) f.flush();
}

Simulator::Simulator(ScenarioState state) : state_(std::move(state)) {}

void Simulator::attach_terminations(agent::TerminationRegistry& registry) {
  for (const auto& cell : state_.cells) {
    agent::E2Termination* term = registry.find_by_node(cell.cell_id);
    if (!term) continue;
    bindings_[cell.cell_id] = term;
    if (cell.kind == CellKind::LtePrimary) {
      term->register_callback(wire::kRcFunctionId, [this, term](const wire::E2Message& msg) {
        if (auto* req = std::get_if<wire::RicControlRequest>(&msg)) {
          queue_.push({req->action, term});
        }
      });
    } else {
      // Control is processed only at the primary.
      term->register_callback(wire::kRcFunctionId, [term](const wire::E2Message& msg) {
        if (!std::holds_alternative<wire::RicControlRequest>(msg)) return;
        try {
          term->send_control_ack(wire::AckStatus::Rejected,
                                 std::string(reason_name(HandoverReason::NotAtPrimary)) +
                                     ": control only at primary");
        } catch (const Error& e) {
          log_line(std::string("ransim ack failed: ") + e.what());
        }
      });
    }
  }
}

std::optional<uint32_t> Simulator::period_for(uint32_t cell_id) const {
  if (mode_ == Mode::Offline || degraded_.count(cell_id)) return state_.cfg.report_period_ms;
  auto it = bindings_.find(cell_id);
  if (it == bindings_.end()) return std::nullopt;
  return it->second->report_period(wire::kKpmFunctionId);
}

void Simulator::begin(Mode mode) {
  mode_ = mode;
  if (mode == Mode::Online) {
    bool any = false;
    for (const auto& [id, term] : bindings_) {
      any = any || term->state() == agent::TerminationState::Established;
    }
    if (!any) throw Error(ErrorCode::InvalidConfig, "online mode needs established terminations");
  } else {
    if (!trace_dir_) throw Error(ErrorCode::InvalidConfig, "offline mode needs a trace directory");
    trace_ = std::make_unique<TraceWriter>(*trace_dir_);
  }
  uint64_t baseline = state_.cfg.baseline_unix_ms;
  if (baseline == 0 && mode == Mode::Online) baseline = net::unix_now_ms();
  state_.clock.baseline_unix_ms = baseline;
  summary_ = SimulationSummary{};
  summary_.baseline_unix_ms = baseline;
}

void Simulator::advance(uint32_t dt_ms) {
  step_traffic(state_, dt_ms);
  step_mobility(state_, dt_ms);
  state_.clock.sim_elapsed_ms += dt_ms;
  ++summary_.events;
}

void Simulator::drain_controls() {
  const std::size_t first = summary_.handover_log.size();
  for (const auto& item : queue_.drain()) {
    HandoverOutcome outcome = apply_handover(state_, item.action);
    summary_.handover_log.push_back({state_.clock.sim_elapsed_ms, item.action, outcome});
    if (outcome.status == HandoverStatus::Success) {
      ++summary_.handovers;
    } else {
      ++summary_.handover_rejections;
    }
    log_line("ransim t=" + std::to_string(state_.clock.sim_elapsed_ms) + " handover " + outcome.detail);
    if (item.via) {
      try {
        item.via->send_control_ack(outcome.status == HandoverStatus::Success
                                       ? wire::AckStatus::Success
                                       : wire::AckStatus::Rejected,
                                   outcome.detail);
      } catch (const Error& e) {
        log_line(std::string("ransim ack failed: ") + e.what());
      }
    }
  }
  // Applied (and acked) in arrival order; logged in UE order so that the log
  // does not depend on which link delivered first.
  std::stable_sort(summary_.handover_log.begin() + static_cast<std::ptrdiff_t>(first), summary_.handover_log.end(),
                   [](const HandoverRecord& a, const HandoverRecord& b) { return a.action.ue_id < b.action.ue_id; });
}

void Simulator::emit_reports(uint32_t cell_id) {
  const CellState& cell = *state_.cell(cell_id);
  for (UnitType unit : supported_units(cell)) {
    wire::KpmReport report = collect_kpm(state_, cell_id, unit);
    if (observer_) observer_(cell_id, report);
    bool traced = mode_ == Mode::Offline || degraded_.count(cell_id);
    if (!traced) {
      try {
        bindings_.at(cell_id)->send_report(report);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ConnectionLost) throw;
        log_line("ransim cell=" + std::to_string(cell_id) + " link lost, tracing offline");
        degraded_.insert(cell_id);
        summary_.degraded_cells.push_back(cell_id);
        if (!trace_) {
          trace_ = std::make_unique<TraceWriter>(trace_dir_.value_or("e2loop-fallback-traces"));
        }
        traced = true;
      }
    }
    if (traced) trace_->write(cell_id, report);
    ++summary_.reports;
    ++summary_.reports_per_cell[cell_id];
  }
  reset_period(state_, cell_id);
}

SimulationSummary Simulator::run(Mode mode) {
  begin(mode);
  const auto wall_start = std::chrono::steady_clock::now();
  const uint64_t end = state_.cfg.sim_time_ms;

  while (state_.clock.sim_elapsed_ms < end) {
    uint32_t dt = static_cast<uint32_t>(std::min<uint64_t>(state_.cfg.step_ms, end - state_.clock.sim_elapsed_ms));
    advance(dt);
    drain_controls();

    bool reported = false;
    const uint64_t now = state_.clock.sim_elapsed_ms;
    for (const auto& cell : state_.cells) {
      auto period = period_for(cell.cell_id);
      if (period && *period > 0 && now % *period == 0) {
        emit_reports(cell.cell_id);
        reported = true;
      }
    }
    if (reported && cycle_hook_) cycle_hook_(now);

    if (realtime_factor_ > 0.0) {
      auto due = wall_start + std::chrono::microseconds(static_cast<int64_t>(now * 1000.0 / realtime_factor_));
      std::this_thread::sleep_until(due);
    }
  }
  if (trace_) trace_->flush();
  summary_.sim_end_ms = state_.clock.sim_elapsed_ms;
  return summary_;
}

}  // namespace e2loop::sim

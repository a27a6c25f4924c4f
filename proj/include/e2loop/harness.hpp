#pragma once

// Scenario runner and E2 traffic accounting.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "e2loop/error.hpp"
#include "e2loop/net.hpp"
#include "e2loop/ric.hpp"
#include "e2loop/sim.hpp"
#include "e2loop/xapp.hpp"

namespace e2loop::harness {

struct LinkStats {
  uint64_t n_packets = 0;
  double time_span_s = 0.0;
  double avg_pps = 0.0;
  double avg_size_bytes = 0.0;
  uint64_t bytes_exchanged = 0;
  double avg_rate_Bps = 0.0;
  double avg_rate_bps = 0.0;
};

// Per-connection counters as captured at the framing layer.
struct CapturedLink {
  std::string display_id;
  uint16_t local_port = 0;
  wire::NodeKind kind = wire::NodeKind::Gnb;
  net::LinkCounters counters;
};

struct NodeRow {
  std::string display_id;
  uint16_t local_port = 0;
  wire::NodeKind kind = wire::NodeKind::Gnb;
  LinkStats stats;
};

struct RunReport {
  std::string mode;  // "embedded", "remote" or "offline"
  std::vector<NodeRow> nodes;
  LinkStats aggregate;
  std::map<std::string, uint64_t> message_histogram;
  std::vector<sim::HandoverRecord> handovers;
  sim::SimulationSummary summary;
  int exit_status = 0;
  std::string diagnostic;

  // Embedded runs only.
  std::vector<ric::MessageLogEntry> ric_log;
  std::vector<ric::IndicationEvent> indications;
  std::vector<xapp::ControlRecord> controls;
  std::vector<ric::NodeRecord> ric_nodes;
};

LinkStats compute_link_stats(const net::LinkCounters& c);

// Fills nodes, aggregate and message_histogram from captured links.
// An empty capture yields an all-zero report with exit status 0.
RunReport stats_report(const std::vector<CapturedLink>& captured);

enum class XappChoice { TrafficSteering, None };

struct HarnessOptions {
  sim::ScenarioConfig scenario;
  bool embedded = true;
  std::string e2_term_ip = "127.0.0.1";
  uint16_t e2_term_port = ric::kDefaultListenPort;
  uint16_t local_port_base = agent::kDefaultLocalPortBase;  // 0 = ephemeral ports
  std::filesystem::path out = "e2loop-out";
  bool write_report_file = true;
  XappChoice xapp = XappChoice::TrafficSteering;
  xapp::TsPolicy policy;
  std::chrono::milliseconds setup_timeout{5000};
  std::chrono::milliseconds subscribe_wait{10000};
  // Remote runs pace sim time against the wall clock; embedded runs lockstep.
  double remote_realtime_factor = 1.0;
  // Keep RIC log, indications and control records in the report.
  bool capture = false;
  // Applied to the freshly built scenario (scripted UEs in tests).
  std::function<void(sim::ScenarioState&)> scenario_hook;
};

// Throws Error(InvalidConfig) for bad options and Error(ConnectRefused |
// SetupTimeout | SetupRejected) when the E2 link cannot be brought up.
RunReport run_scenario_zero(const HarnessOptions& opts);

std::string format_table(const RunReport& report);
std::string to_json(const RunReport& report);

// Exit status for an error raised by run_scenario_zero: 2 config, 3 link, 1 other.
int exit_code_for(ErrorCode code);

}  // namespace e2loop::harness

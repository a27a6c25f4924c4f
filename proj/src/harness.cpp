#include "e2loop/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "e2loop/agent.hpp"
#include "e2loop/error.hpp"
#include "e2loop/log.hpp"

namespace e2loop::harness {

using nlohmann::json;

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

const char* kind_name(wire::NodeKind kind) { return kind == wire::NodeKind::Enb ? "eNB" : "gNB"; }

json stats_json(const LinkStats& s) {
  return {{"n_packets", s.n_packets},       {"time_span_s", s.time_span_s},
          {"avg_pps", s.avg_pps},           {"avg_size_bytes", s.avg_size_bytes},
          {"bytes_exchanged", s.bytes_exchanged}, {"avg_rate_Bps", s.avg_rate_Bps},
          {"avg_rate_bps", s.avg_rate_bps}};
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void write_report_file(const HarnessOptions& opts, const RunReport& report) {
  if (!opts.write_report_file) return;
  std::error_code ec;
  std::filesystem::create_directories(opts.out, ec);
  std::ofstream f(opts.out / "run-report.json", std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + (opts.out / "run-report.json").string());
  f << to_json(report) << '\n';
}

std::unique_ptr<xapp::MonitorXapp> make_xapp(const HarnessOptions& opts) {
  const uint32_t period = opts.scenario.report_period_ms;
  if (opts.xapp == XappChoice::TrafficSteering) {
    return std::make_unique<xapp::TrafficSteeringXapp>("ts-xapp", opts.policy, period, opts.capture);
  }
  return std::make_unique<xapp::MonitorXapp>("kpm-monitor", period, opts.capture);
}

}  // namespace

LinkStats compute_link_stats(const net::LinkCounters& c) {
  LinkStats s;
  s.n_packets = c.frames();
  s.bytes_exchanged = c.bytes();
  if (s.n_packets == 0) return s;
  s.time_span_s = static_cast<double>(c.last_us - c.first_us) / 1e6;
  s.avg_size_bytes = static_cast<double>(s.bytes_exchanged) / static_cast<double>(s.n_packets);
  if (s.time_span_s > 0.0) {
    s.avg_pps = static_cast<double>(s.n_packets) / s.time_span_s;
    s.avg_rate_Bps = static_cast<double>(s.bytes_exchanged) / s.time_span_s;
  }
  s.avg_rate_bps = 8.0 * s.avg_rate_Bps;
  return s;
}

RunReport stats_report(const std::vector<CapturedLink>& captured) {
  RunReport report;
  net::LinkCounters total;
  for (const auto& link : captured) {
    report.nodes.push_back({link.display_id, link.local_port, link.kind, compute_link_stats(link.counters)});
    const auto& c = link.counters;
    if (c.frames() > 0) {
      total.first_us = total.first_us == 0 ? c.first_us : std::min(total.first_us, c.first_us);
      total.last_us = std::max(total.last_us, c.last_us);
    }
    total.tx_frames += c.tx_frames;
    total.rx_frames += c.rx_frames;
    total.tx_bytes += c.tx_bytes;
    total.rx_bytes += c.rx_bytes;
    for (uint8_t t = 1; t <= 7; ++t) {
      uint64_t n = c.tx_by_type[t] + c.rx_by_type[t];
      if (n) report.message_histogram[wire::type_name(static_cast<wire::MsgType>(t))] += n;
    }
  }
  report.aggregate = compute_link_stats(total);
  return report;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return 2;
    case ErrorCode::ConnectRefused:
    case ErrorCode::SetupTimeout:
    case ErrorCode::SetupRejected:
      return 3;
    default: return 1;
  }
}

RunReport run_scenario_zero(const HarnessOptions& opts) {
  sim::validate(opts.scenario);
  xapp::validate(opts.policy);
  if (!opts.embedded && opts.e2_term_ip.empty()) {
    throw Error(ErrorCode::InvalidConfig, "remote mode needs --e2-term-ip");
  }

  sim::ScenarioState state = sim::build_scenario_zero(opts.scenario);
  if (opts.scenario_hook) opts.scenario_hook(state);

  if (opts.scenario.mode == sim::Mode::Offline) {
    sim::Simulator simulator(std::move(state));
    simulator.set_trace_dir(opts.out);
    RunReport report = stats_report({});
    report.mode = "offline";
    report.summary = simulator.run(sim::Mode::Offline);
    report.handovers = report.summary.handover_log;
    write_report_file(opts, report);
    return report;
  }

  std::unique_ptr<ric::Ric> ric;
  std::shared_ptr<xapp::MonitorXapp> app;
  net::Endpoint remote{opts.e2_term_ip, opts.e2_term_port};
  if (opts.embedded) {
    ric = std::make_unique<ric::Ric>(ric::RicConfig{{"127.0.0.1", 0}, opts.setup_timeout});
    app = make_xapp(opts);
    ric->attach_xapp(app);
    ric->start();
    remote = {"127.0.0.1", ric->port()};
  }

  agent::TerminationRegistry registry;
  std::vector<sim::CellState> cells = state.cells;
  try {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      agent::TerminationConfig tc;
      tc.node = state.node_of(cells[i]);
      tc.local_port = opts.local_port_base == 0 ? 0 : static_cast<uint16_t>(opts.local_port_base + i);
      tc.remote = remote;
      tc.connect_timeout = opts.setup_timeout;
      tc.setup_timeout = opts.setup_timeout;
      tc.pad_width = opts.scenario.node_id_pad_width;
      registry.add(tc).connect_and_setup(agent::default_functions());
    }
  } catch (...) {
    registry.close_all();
    if (ric) ric->stop();
    throw;
  }

  sim::Simulator simulator(std::move(state));
  simulator.attach_terminations(registry);
  simulator.set_trace_dir(opts.out / "fallback-traces");

  auto all_subscribed = [&] {
    for (auto* t : registry.all()) {
      if (!t->report_period(wire::kKpmFunctionId)) return false;
    }
    return true;
  };
  if (!wait_until(all_subscribed, opts.subscribe_wait)) {
    log_line("harness: not every node was subscribed before the run started");
  }

  auto barrier = [&](uint64_t) {
    wait_until([&] { return ric->indications_received() >= registry.indications_sent(); }, opts.setup_timeout);
    ric->wait_xapps_idle(opts.setup_timeout);
    wait_until([&] { return registry.controls_received() >= ric->controls_sent(); }, opts.setup_timeout);
  };
  if (opts.embedded) {
    simulator.set_cycle_hook(barrier);
  } else {
    simulator.set_realtime_factor(opts.remote_realtime_factor);
  }

  sim::SimulationSummary summary;
  try {
    summary = simulator.run(sim::Mode::Online);
  } catch (...) {
    registry.close_all();
    if (ric) ric->stop();
    throw;
  }
  if (opts.embedded) barrier(summary.sim_end_ms);

  std::vector<CapturedLink> captured;
  registry.close_all();
  for (auto* t : registry.all()) {
    captured.push_back({t->display_id(), t->local_port(),
                        t->node().kind, t->counters()});
  }

  RunReport report = stats_report(captured);
  report.mode = opts.embedded ? "embedded" : "remote";
  report.summary = summary;
  report.handovers = summary.handover_log;

  if (ric) {
    wait_until([&] {
      for (const auto& n : ric->nodes()) {
        if (n.connected) return false;
      }
      return true;
    }, std::chrono::milliseconds(1000));
    report.ric_nodes = ric->nodes();
    report.ric_log = ric->message_log();
    ric->stop();
    if (opts.capture) {
      report.indications = app->events();
      if (auto* ts = dynamic_cast<xapp::TrafficSteeringXapp*>(app.get())) report.controls = ts->controls();
    }
  }
  write_report_file(opts, report);
  return report;
}

std::string format_table(const RunReport& report) {
  std::vector<std::string> headers{"Measurement", "All"};
  std::vector<const LinkStats*> cols{&report.aggregate};
  std::vector<std::string> filters{"Filter", "e2ap"};
  for (const auto& n : report.nodes) {
    headers.push_back(std::string(kind_name(n.kind)) + " " + n.display_id);
    filters.push_back("port " + std::to_string(n.local_port));
    cols.push_back(&n.stats);
  }

  std::vector<std::vector<std::string>> rows{headers, filters};
  auto add = [&](const std::string& label, auto fn) {
    std::vector<std::string> row{label};
    for (const auto* s : cols) row.push_back(fn(*s));
    rows.push_back(std::move(row));
  };
  add("Number of Packets", [](const LinkStats& s) { return std::to_string(s.n_packets); });
  add("Time span (s)", [](const LinkStats& s) { return fixed(s.time_span_s, 3); });
  add("Average pps", [](const LinkStats& s) { return fixed(s.avg_pps, 1); });
  add("Average size (B)", [](const LinkStats& s) { return fixed(s.avg_size_bytes, 0); });
  add("Bytes exchanged", [](const LinkStats& s) { return std::to_string(s.bytes_exchanged); });
  add("Average Data Rate (Bps)", [](const LinkStats& s) { return fixed(s.avg_rate_Bps, 0); });
  add("Average Data Rate (bps)", [](const LinkStats& s) { return fixed(s.avg_rate_bps, 0); });

  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());

  std::ostringstream os;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      os << (i ? "  " : "") << rows[r][i] << std::string(width[i] - rows[r][i].size(), ' ');
    }
    os << '\n';
    if (r == 1) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }

  os << "\nMessages:";
  for (const auto& [name, n] : report.message_histogram) os << ' ' << name << '=' << n;
  os << "\nSimulation: mode=" << report.mode << " events=" << report.summary.events
     << " reports=" << report.summary.reports << " handovers=" << report.summary.handovers
     << " rejected=" << report.summary.handover_rejections << '\n';
  for (const auto& h : report.handovers) {
    os << "  t=" << h.sim_ms << "ms ue=" << h.action.ue_id << ' ' << h.action.source_cell << "->"
       << h.action.target_cell << ' '
       << (h.outcome.status == sim::HandoverStatus::Success ? "SUCCESS" : "REJECTED") << ' '
       << h.outcome.detail << '\n';
  }
  return os.str();
}

std::string to_json(const RunReport& report) {
  json j;
  j["mode"] = report.mode;
  j["exit_status"] = report.exit_status;
  j["diagnostic"] = report.diagnostic;
  j["aggregate"] = stats_json(report.aggregate);
  j["nodes"] = json::array();
  for (const auto& n : report.nodes) {
    j["nodes"].push_back({{"display_id", n.display_id},
                          {"local_port", n.local_port},
                          {"kind", kind_name(n.kind)},
                          {"stats", stats_json(n.stats)}});
  }
  j["message_histogram"] = report.message_histogram;

  json per_cell = json::object();
  for (const auto& [cell, n] : report.summary.reports_per_cell) per_cell[std::to_string(cell)] = n;
  j["simulation"] = {{"events", report.summary.events},
                     {"reports", report.summary.reports},
                     {"handovers", report.summary.handovers},
                     {"handover_rejections", report.summary.handover_rejections},
                     {"sim_end_ms", report.summary.sim_end_ms},
                     {"baseline_unix_ms", report.summary.baseline_unix_ms},
                     {"reports_per_cell", per_cell},
                     {"degraded_cells", report.summary.degraded_cells}};
  j["handovers"] = json::array();
  for (const auto& h : report.handovers) {
    j["handovers"].push_back({{"sim_ms", h.sim_ms},
                              {"ue_id", h.action.ue_id},
                              {"source_cell", h.action.source_cell},
                              {"target_cell", h.action.target_cell},
                              {"status", h.outcome.status == sim::HandoverStatus::Success ? "SUCCESS" : "REJECTED"},
                              {"reason", sim::reason_name(h.outcome.reason)},
                              {"detail", h.outcome.detail}});
  }
  return j.dump(2);
}

}  // namespace e2loop::harness

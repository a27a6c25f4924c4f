#include "e2loop/e2loop.h"

#include <charconv>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "e2loop/error.hpp"
#include "e2loop/harness.hpp"
#include "e2loop/log.hpp"
#include "e2loop/ric.hpp"
#include "e2loop/wire.hpp"
#include "e2loop/xapp.hpp"

using namespace e2loop;

struct e2l_config {
  harness::HarnessOptions opts;
  std::string listen_addr = "0.0.0.0:36421";
  bool ip_set = false;
  bool embedded_set = false;
};

struct e2l_report {
  harness::RunReport report;
  std::string table;
  std::string json;
};

struct e2l_ric {
  std::unique_ptr<ric::Ric> ric;
};

namespace {

thread_local std::string g_last_error;

e2l_status fail(e2l_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

e2l_status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return E2L_ERR_CONFIG;
    case ErrorCode::ConnectRefused:
    case ErrorCode::SetupTimeout:
    case ErrorCode::SetupRejected:
      return E2L_ERR_CONNECT;
    case ErrorCode::Io: return E2L_ERR_IO;
    default: return E2L_ERR_INTERNAL;
  }
}

template <typename Fn>
e2l_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const Error& e) {
    return fail(status_for(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(E2L_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(E2L_ERR_INTERNAL, e.what());
  }
}

e2l_status copy_out(const std::string& text, char* buf, size_t cap, size_t* len) {
  if (len) *len = text.size();
  if (!buf || cap < text.size() + 1) return fail(E2L_ERR_BUFFER, "buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return E2L_OK;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::InvalidConfig, "invalid value for " + key + ": '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value);
}

void set_key(e2l_config& c, const std::string& key, const std::string& value) {
  auto& o = c.opts;
  auto& s = o.scenario;
  if (key == "e2-term-ip") {
    if (value.empty()) bad_value(key, value);
    o.e2_term_ip = value;
    c.ip_set = true;
  } else if (key == "e2-term-port") {
    o.e2_term_port = parse_number<uint16_t>(key, value);
  } else if (key == "embedded") {
    o.embedded = parse_bool(key, value);
    c.embedded_set = true;
  } else if (key == "mode") {
    if (value == "online") s.mode = sim::Mode::Online;
    else if (value == "offline") s.mode = sim::Mode::Offline;
    else bad_value(key, value);
  } else if (key == "sim-time-ms") {
    s.sim_time_ms = parse_number<uint64_t>(key, value);
  } else if (key == "period-ms") {
    s.report_period_ms = parse_number<uint32_t>(key, value);
  } else if (key == "step-ms") {
    s.step_ms = parse_number<uint32_t>(key, value);
  } else if (key == "ues") {
    s.n_ues = parse_number<uint32_t>(key, value);
  } else if (key == "seed") {
    s.seed = parse_number<uint64_t>(key, value);
  } else if (key == "isd-m") {
    s.inter_site_distance_m = parse_number<double>(key, value);
  } else if (key == "carrier-ghz") {
    s.carrier_freq_ghz = parse_number<double>(key, value);
  } else if (key == "bandwidth-mhz") {
    s.bandwidth_mhz = parse_number<double>(key, value);
  } else if (key == "speed-min-mps") {
    s.ue_speed_range_mps.first = parse_number<double>(key, value);
  } else if (key == "speed-max-mps") {
    s.ue_speed_range_mps.second = parse_number<double>(key, value);
  } else if (key == "full-buffer-mbps") {
    s.full_buffer_rate_mbps = parse_number<double>(key, value);
  } else if (key == "neighbor-sinr") {
    s.neighbor_sinr_catalog = parse_bool(key, value);
  } else if (key == "node-id-pad-width") {
    s.node_id_pad_width = parse_number<int>(key, value);
  } else if (key == "baseline-unix-ms") {
    s.baseline_unix_ms = parse_number<uint64_t>(key, value);
  } else if (key == "out") {
    if (value.empty()) bad_value(key, value);
    o.out = value;
  } else if (key == "write-report") {
    o.write_report_file = parse_bool(key, value);
  } else if (key == "xapp") {
    if (value == "ts") o.xapp = harness::XappChoice::TrafficSteering;
    else if (value == "none") o.xapp = harness::XappChoice::None;
    else bad_value(key, value);
  } else if (key == "hysteresis-db") {
    o.policy.hysteresis_db = parse_number<double>(key, value);
  } else if (key == "confirm-reports") {
    o.policy.confirm_reports = parse_number<int>(key, value);
  } else if (key == "cooldown-ms") {
    o.policy.cooldown_ms = parse_number<uint64_t>(key, value);
  } else if (key == "e2-local-port-base") {
    o.local_port_base = parse_number<uint16_t>(key, value);
  } else if (key == "setup-timeout-ms") {
    o.setup_timeout = std::chrono::milliseconds(parse_number<uint32_t>(key, value));
  } else if (key == "subscribe-wait-ms") {
    o.subscribe_wait = std::chrono::milliseconds(parse_number<uint32_t>(key, value));
  } else if (key == "realtime-factor") {
    o.remote_realtime_factor = parse_number<double>(key, value);
  } else if (key == "listen-addr") {
    net::parse_endpoint(value, ric::kDefaultListenPort);
    c.listen_addr = value;
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
  }
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

nlohmann::json measurements_json(const std::vector<wire::Measurement>& items) {
  auto out = nlohmann::json::object();
  for (const auto& m : items) out[m.name] = m.value;
  return out;
}

nlohmann::json describe(const wire::E2Message& msg) {
  using nlohmann::json;
  json j;
  j["type"] = wire::type_name(wire::type_of(msg));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, wire::E2SetupRequest>) {
          j["node"] = wire::format_node_id(m.node);
          j["functions"] = json::array();
          for (const auto& f : m.functions) {
            j["functions"].push_back(
                {{"id", f.function_id}, {"revision", f.revision}, {"description", f.description}});
          }
        } else if constexpr (std::is_same_v<T, wire::E2SetupResponse>) {
          j["accepted"] = m.accepted_function_ids;
        } else if constexpr (std::is_same_v<T, wire::SubscriptionRequest>) {
          j["request_id"] = m.request_id;
          j["function_id"] = m.function_id;
          j["report_period_ms"] = m.report_period_ms;
        } else if constexpr (std::is_same_v<T, wire::SubscriptionResponse>) {
          j["request_id"] = m.request_id;
          j["admitted"] = m.admitted;
        } else if constexpr (std::is_same_v<T, wire::RicIndication>) {
          j["request_id"] = m.request_id;
          j["function_id"] = m.function_id;
          j["sequence_number"] = m.sequence_number;
          j["timestamp_ms"] = m.header.timestamp_ms;
          j["node"] = m.header.node_display_id;
          j["unit"] = wire::unit_name(m.body.unit);
          j["cell"] = measurements_json(m.body.cell_measurements);
          j["ues"] = json::array();
          for (const auto& ue : m.body.ue_measurements) {
            j["ues"].push_back({{"ue_id", ue.ue_id}, {"metrics", measurements_json(ue.items)}});
          }
        } else if constexpr (std::is_same_v<T, wire::RicControlRequest>) {
          j["function_id"] = m.function_id;
          j["action"] = {{"kind", "handover"},
                         {"ue_id", m.action.ue_id},
                         {"source_cell", m.action.source_cell},
                         {"target_cell", m.action.target_cell}};
        } else {
          j["status"] = m.status == wire::AckStatus::Success ? "SUCCESS" : "REJECTED";
          j["detail"] = m.detail;
        }
      },
      msg);
  return j;
}

}  // namespace

extern "C" {

const char* e2l_version(void) { return "0.1.0"; }

const char* e2l_status_name(e2l_status status) {
  switch (status) {
    case E2L_OK: return "OK";
    case E2L_ERR_INTERNAL: return "INTERNAL";
    case E2L_ERR_CONFIG: return "CONFIG";
    case E2L_ERR_CONNECT: return "CONNECT";
    case E2L_ERR_ARGUMENT: return "ARGUMENT";
    case E2L_ERR_IO: return "IO";
    case E2L_ERR_DECODE: return "DECODE";
    case E2L_ERR_BUFFER: return "BUFFER";
  }
  return "UNKNOWN";
}

const char* e2l_last_error(void) { return g_last_error.c_str(); }

void e2l_set_log_callback(e2l_log_fn fn, void* user) {
  if (!fn) {
    set_log_sink(nullptr);
    return;
  }
  set_log_sink([fn, user](std::string_view line) { fn(std::string(line).c_str(), user); });
}

e2l_config* e2l_config_new(void) {
  try {
    return new e2l_config();
  } catch (...) {
    return nullptr;
  }
}

void e2l_config_free(e2l_config* cfg) { delete cfg; }

e2l_status e2l_config_set(e2l_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail(E2L_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    set_key(*cfg, key, value);
    return E2L_OK;
  });
}

e2l_status e2l_config_load_file(e2l_config* cfg, const char* path) {
  if (!cfg || !path) return fail(E2L_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    std::ifstream in(path);
    if (!in) return fail(E2L_ERR_IO, std::string("cannot open ") + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        return fail(E2L_ERR_CONFIG, std::string(path) + ":" + std::to_string(lineno) + ": expected key = value");
      }
      set_key(*cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return E2L_OK;
  });
}

e2l_status e2l_run(const e2l_config* cfg, e2l_report** out) {
  if (!cfg || !out) return fail(E2L_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    harness::HarnessOptions opts = cfg->opts;
    opts.embedded = cfg->embedded_set ? cfg->opts.embedded : !cfg->ip_set;
    auto rep = std::make_unique<e2l_report>();
    rep->report = harness::run_scenario_zero(opts);
    rep->table = harness::format_table(rep->report);
    rep->json = harness::to_json(rep->report);
    *out = rep.release();
    return E2L_OK;
  });
}

e2l_status e2l_report_table(const e2l_report* report, char* buf, size_t cap, size_t* len) {
  if (!report) return fail(E2L_ERR_ARGUMENT, "null report");
  return copy_out(report->table, buf, cap, len);
}

e2l_status e2l_report_json(const e2l_report* report, char* buf, size_t cap, size_t* len) {
  if (!report) return fail(E2L_ERR_ARGUMENT, "null report");
  return copy_out(report->json, buf, cap, len);
}

int e2l_report_exit_status(const e2l_report* report) { return report ? report->report.exit_status : -1; }

uint64_t e2l_report_node_count(const e2l_report* report) { return report ? report->report.nodes.size() : 0; }

uint64_t e2l_report_handovers(const e2l_report* report) { return report ? report->report.summary.handovers : 0; }

void e2l_report_free(e2l_report* report) { delete report; }

e2l_status e2l_ric_start(const e2l_config* cfg, e2l_ric** out) {
  if (!cfg || !out) return fail(E2L_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    ric::RicConfig rc{net::parse_endpoint(cfg->listen_addr, ric::kDefaultListenPort), cfg->opts.setup_timeout};
    auto handle = std::make_unique<e2l_ric>();
    handle->ric = std::make_unique<ric::Ric>(rc);
    const uint32_t period = cfg->opts.scenario.report_period_ms;
    if (cfg->opts.xapp == harness::XappChoice::TrafficSteering) {
      handle->ric->attach_xapp(std::make_shared<xapp::TrafficSteeringXapp>("ts-xapp", cfg->opts.policy, period, false));
    } else {
      handle->ric->attach_xapp(std::make_shared<xapp::MonitorXapp>("kpm-monitor", period, false));
    }
    handle->ric->start();
    *out = handle.release();
    return E2L_OK;
  });
}

uint16_t e2l_ric_port(const e2l_ric* ric) { return ric ? ric->ric->port() : 0; }

uint64_t e2l_ric_indications(const e2l_ric* ric) { return ric ? ric->ric->indications_received() : 0; }

uint64_t e2l_ric_controls(const e2l_ric* ric) { return ric ? ric->ric->controls_sent() : 0; }

void e2l_ric_stop(e2l_ric* ric) {
  if (!ric) return;
  try {
    ric->ric->stop();
  } catch (...) {
  }
  delete ric;
}

e2l_status e2l_frame_describe(const uint8_t* data, size_t size, char* buf, size_t cap, size_t* len) {
  if (!data && size) return fail(E2L_ERR_ARGUMENT, "null data");
  return guarded([&] {
    auto result = wire::decode({data, size});
    if (auto* err = std::get_if<wire::DecodeError>(&result)) {
      std::string msg = std::string(wire::decode_error_name(err->kind));
      if (err->kind == wire::DecodeErrorKind::TruncatedFrame) msg += " (need " + std::to_string(err->required) + " bytes)";
      if (!err->detail.empty()) msg += ": " + err->detail;
      return fail(E2L_ERR_DECODE, msg);
    }
    const auto& decoded = std::get<wire::Decoded>(result);
    auto j = describe(decoded.message);
    j["frame_bytes"] = decoded.consumed;
    if (decoded.consumed != size) j["trailing_bytes"] = size - decoded.consumed;
    return copy_out(j.dump(2), buf, cap, len);
  });
}

}  // extern "C"

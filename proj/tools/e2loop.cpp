// e2loop command line: run Scenario Zero, host a standalone RIC, decode frames.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "e2loop/e2loop.h"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int exit_code(e2l_status status) {
  switch (status) {
    case E2L_OK: return 0;
    case E2L_ERR_CONFIG:
    case E2L_ERR_ARGUMENT:
      return 2;
    case E2L_ERR_CONNECT: return 3;
    default: return 1;
  }
}

int report_failure(e2l_status status) {
  std::cerr << "e2loop: " << e2l_status_name(status) << ": " << e2l_last_error() << '\n';
  return exit_code(status);
}

void log_to_stderr(const char* line, void*) { std::cerr << line << '\n'; }

std::optional<std::string> fetch_text(e2l_status (*fn)(const e2l_report*, char*, size_t, size_t*),
                                      const e2l_report* report) {
  size_t len = 0;
  fn(report, nullptr, 0, &len);
  std::string out(len + 1, '\0');
  if (fn(report, out.data(), out.size(), &len) != E2L_OK) return std::nullopt;
  out.resize(len);
  return out;
}

struct Setting {
  std::string key;
  std::string value;
};

// Values collected from flags, applied after --config so flags win.
struct RunFlags {
  std::string config_file;
  std::vector<Setting> settings;
  bool json = false;
  bool verbose = false;
};

template <typename T>
void add_setting(CLI::App* cmd, RunFlags& flags, const std::string& key, const std::string& help) {
  cmd->add_option_function<T>(
      "--" + key,
      [&flags, key](const T& v) {
        if constexpr (std::is_same_v<T, std::string>) {
          flags.settings.push_back({key, v});
        } else {
          std::ostringstream os;
          os.precision(17);
          os << v;
          flags.settings.push_back({key, os.str()});
        }
      },
      help);
}

int apply(e2l_config* cfg, const RunFlags& flags) {
  if (!flags.config_file.empty()) {
    if (auto st = e2l_config_load_file(cfg, flags.config_file.c_str()); st != E2L_OK) return report_failure(st);
  }
  for (const auto& s : flags.settings) {
    if (auto st = e2l_config_set(cfg, s.key.c_str(), s.value.c_str()); st != E2L_OK) return report_failure(st);
  }
  return 0;
}

int do_run(const RunFlags& flags) {
  if (flags.verbose) e2l_set_log_callback(log_to_stderr, nullptr);
  e2l_config* cfg = e2l_config_new();
  if (int rc = apply(cfg, flags)) {
    e2l_config_free(cfg);
    return rc;
  }
  e2l_report* report = nullptr;
  e2l_status st = e2l_run(cfg, &report);
  e2l_config_free(cfg);
  if (st != E2L_OK) return report_failure(st);

  auto text = fetch_text(flags.json ? e2l_report_json : e2l_report_table, report);
  if (text) std::cout << *text << (flags.json ? "\n" : "");
  int rc = e2l_report_exit_status(report);
  e2l_report_free(report);
  return rc;
}

int do_ric(const RunFlags& flags, int duration_ms) {
  if (flags.verbose) e2l_set_log_callback(log_to_stderr, nullptr);
  e2l_config* cfg = e2l_config_new();
  if (int rc = apply(cfg, flags)) {
    e2l_config_free(cfg);
    return rc;
  }
  e2l_ric* ric = nullptr;
  e2l_status st = e2l_ric_start(cfg, &ric);
  e2l_config_free(cfg);
  if (st != E2L_OK) return report_failure(st);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "ric listening on port " << e2l_ric_port(ric) << std::endl;
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(duration_ms);
  while (!g_stop && (duration_ms <= 0 || std::chrono::steady_clock::now() < deadline)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  std::cout << "indications=" << e2l_ric_indications(ric) << " controls=" << e2l_ric_controls(ric) << std::endl;
  e2l_ric_stop(ric);
  return 0;
}

int do_decode(const std::string& hex_arg) {
  std::string hex = hex_arg;
  if (hex.empty() || hex == "-") hex.assign(std::istreambuf_iterator<char>(std::cin), {});
  std::vector<uint8_t> bytes;
  int nibble = -1;
  for (char c : hex) {
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else if (c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == ':') continue;
    else {
      std::cerr << "e2loop: invalid hex character '" << c << "'\n";
      return 2;
    }
    if (nibble < 0) {
      nibble = v;
    } else {
      bytes.push_back(static_cast<uint8_t>(nibble << 4 | v));
      nibble = -1;
    }
  }
  if (nibble >= 0) {
    std::cerr << "e2loop: odd number of hex digits\n";
    return 2;
  }
  size_t len = 0;
  e2l_status st = e2l_frame_describe(bytes.data(), bytes.size(), nullptr, 0, &len);
  if (st != E2L_OK && st != E2L_ERR_BUFFER) return report_failure(st);
  std::string out(len + 1, '\0');
  st = e2l_frame_describe(bytes.data(), bytes.size(), out.data(), out.size(), &len);
  if (st != E2L_OK) return report_failure(st);
  out.resize(len);
  std::cout << out << '\n';
  return 0;
}

void add_common(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config_file, "key = value file; flags override it");
  cmd->add_flag("-v,--verbose", flags.verbose, "log E2 traffic and xApp decisions to stderr");
  add_setting<std::string>(cmd, flags, "xapp", "ts | none");
  add_setting<double>(cmd, flags, "hysteresis-db", "handover margin over the serving cell (dB)");
  add_setting<int>(cmd, flags, "confirm-reports", "consecutive reports the margin must hold");
  add_setting<uint64_t>(cmd, flags, "cooldown-ms", "minimum time between handovers of one UE");
  add_setting<uint32_t>(cmd, flags, "period-ms", "KPM reporting period");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"E2 closed-loop kit: RAN simulator, E2 agents, near-RT RIC and xApps"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run Scenario Zero and print the E2 traffic report");
  add_common(run, run_flags);
  add_setting<std::string>(run, run_flags, "e2-term-ip", "remote RIC address; selects remote mode");
  add_setting<uint16_t>(run, run_flags, "e2-term-port", "remote RIC port (default 36421)");
  run->add_flag_function(
      "--embedded", [&](int64_t) { run_flags.settings.push_back({"embedded", "true"}); },
      "host the RIC in-process (default unless --e2-term-ip is given)");
  add_setting<std::string>(run, run_flags, "mode", "online | offline");
  add_setting<uint64_t>(run, run_flags, "sim-time-ms", "simulated duration");
  add_setting<uint32_t>(run, run_flags, "ues", "number of UEs");
  add_setting<uint64_t>(run, run_flags, "seed", "RNG seed");
  add_setting<std::string>(run, run_flags, "out", "output directory for traces and run-report.json");
  add_setting<uint16_t>(run, run_flags, "e2-local-port-base", "first agent source port, 0 for ephemeral");
  add_setting<uint64_t>(run, run_flags, "baseline-unix-ms", "fixed timestamp baseline");
  add_setting<uint32_t>(run, run_flags, "setup-timeout-ms", "connect and setup timeout");
  add_setting<uint32_t>(run, run_flags, "subscribe-wait-ms", "remote mode: wait for subscriptions");
  add_setting<double>(run, run_flags, "realtime-factor", "remote mode: wall time per sim time");
  run->add_flag("--json", run_flags.json, "print the JSON report instead of the table");

  RunFlags ric_flags;
  int duration_ms = 0;
  auto* ric = app.add_subcommand("ric", "host a standalone RIC with one xApp");
  add_common(ric, ric_flags);
  add_setting<std::string>(ric, ric_flags, "listen-addr", "host:port (default 0.0.0.0:36421)");
  ric->add_option("--duration-ms", duration_ms, "stop after this long (default: until signalled)");

  std::string hex;
  auto* decode = app.add_subcommand("decode", "decode one hex-encoded frame");
  decode->add_option("hex", hex, "frame bytes as hex; '-' or empty reads stdin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*run) return do_run(run_flags);
  if (*ric) return do_ric(ric_flags, duration_ms);
  return do_decode(hex);
}

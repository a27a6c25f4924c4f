// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <bit>
#include <climits>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "e2loop/harness.hpp"
#include "e2loop/wire.hpp"
#include "support.hpp"

using namespace e2loop;
using Clock = std::chrono::steady_clock;

namespace {

struct Failure {
  std::string why;
};

void require(bool cond, const std::string& why) {
  if (!cond) throw Failure{why};
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

harness::HarnessOptions embedded_defaults(const std::filesystem::path& out) {
  harness::HarnessOptions o;
  o.out = out;
  o.write_report_file = false;
  o.capture = true;
  return o;
}

uint32_t cell_of(const std::string& display_id) {
  auto id = wire::parse_node_id(display_id);
  require(id.has_value(), "unparseable display id " + display_id);
  return id->node_id;
}

// Shared by criteria 1, 2, 3 and 6.
struct DefaultRun {
  harness::RunReport report;
  double wall_s = 0.0;
};

const DefaultRun& default_run() {
  static DefaultRun run = [] {
    e2test::ScratchDir dir("accept-default");
    auto t0 = Clock::now();
    DefaultRun r;
    r.report = harness::run_scenario_zero(embedded_defaults(dir.path()));
    r.wall_s = seconds_since(t0);
    return r;
  }();
  return run;
}

std::string c1_protocol_sequence() {
  const auto& run = default_run();
  const std::vector<std::pair<ric::Direction, wire::MsgType>> expected{
      {ric::Direction::Rx, wire::MsgType::SetupRequest},
      {ric::Direction::Tx, wire::MsgType::SetupResponse},
      {ric::Direction::Tx, wire::MsgType::SubscriptionRequest},
      {ric::Direction::Rx, wire::MsgType::SubscriptionResponse},
      {ric::Direction::Rx, wire::MsgType::Indication},
  };
  std::map<std::string, std::vector<ric::MessageLogEntry>> per_node;
  for (const auto& e : run.report.ric_log) per_node[e.node_display_id].push_back(e);
  require(per_node.size() == 5, "expected 5 nodes in the RIC log, got " + std::to_string(per_node.size()));
  for (const auto& [node, entries] : per_node) {
    require(entries.size() >= expected.size(), node + ": log too short");
    for (std::size_t i = 0; i < expected.size(); ++i) {
      require(entries[i].direction == expected[i].first && entries[i].type == expected[i].second,
              node + ": message " + std::to_string(i + 1) + " is " + wire::type_name(entries[i].type));
    }
    for (std::size_t i = 1; i < entries.size(); ++i) {
      require(entries[i - 1].wall_us <= entries[i].wall_us, node + ": log not in time order");
    }
  }
  require(run.wall_s < 5.0, "runtime " + std::to_string(run.wall_s) + " s");
  std::ostringstream os;
  os << "5 nodes, runtime " << run.wall_s << " s";
  return os.str();
}

std::string c2_indication_cardinality() {
  const auto& run = default_run();
  std::map<std::string, int> rx_log, delivered;
  for (const auto& e : run.report.ric_log) {
    if (e.direction == ric::Direction::Rx && e.type == wire::MsgType::Indication) ++rx_log[e.node_display_id];
  }
  for (const auto& ev : run.report.indications) ++delivered[ev.node_display_id];
  require(rx_log.size() == 5, "indications from " + std::to_string(rx_log.size()) + " nodes");
  for (const auto& [node, n] : rx_log) {
    auto kind = wire::parse_node_id(node)->kind;
    int want = kind == wire::NodeKind::Enb ? 40 : 60;
    require(n == want, node + " sent " + std::to_string(n) + ", want " + std::to_string(want));
    require(delivered[node] == want, node + " delivered " + std::to_string(delivered[node]));
  }
  return "eNB 40, each gNB 60";
}

std::string c3_traffic_asymmetry() {
  const auto& run = default_run();
  std::optional<uint64_t> enb;
  uint64_t min_gnb = UINT64_MAX;
  int gnbs = 0;
  for (const auto& n : run.report.nodes) {
    if (n.kind == wire::NodeKind::Enb) {
      enb = n.stats.bytes_exchanged;
    } else {
      min_gnb = std::min<uint64_t>(min_gnb, n.stats.bytes_exchanged);
      ++gnbs;
    }
  }
  require(enb && gnbs == 4, "expected one eNB and four gNB rows");
  require(*enb < min_gnb, "eNB bytes " + std::to_string(*enb) + " >= gNB bytes " + std::to_string(min_gnb));
  double ratio = static_cast<double>(min_gnb) / static_cast<double>(*enb);
  require(ratio >= 1.5, "ratio " + std::to_string(ratio));
  std::ostringstream os;
  os << "eNB " << *enb << " B, smallest gNB " << min_gnb << " B, ratio " << ratio;
  return os.str();
}

std::string c4_codec_soundness() {
  auto t0 = Clock::now();
  e2test::Rng rng(20240601);
  std::vector<std::vector<uint8_t>> corpus;
  for (int i = 0; i < 10000; ++i) {
    auto msg = e2test::random_message(rng);
    auto bytes = wire::encode(msg);
    auto result = wire::decode(bytes);
    auto* ok = std::get_if<wire::Decoded>(&result);
    require(ok != nullptr, "valid message failed to decode at iteration " + std::to_string(i));
    require(ok->consumed == bytes.size(), "consumed mismatch");
    require(ok->message == msg, "structural mismatch at iteration " + std::to_string(i));
    require(wire::encode(ok->message) == bytes, "re-encode mismatch");
    if (corpus.size() < 512) corpus.push_back(std::move(bytes));
  }

  std::uniform_int_distribution<int> mode(0, 4);
  std::map<wire::DecodeErrorKind, int> kinds;
  int accepted = 0;
  for (int i = 0; i < 100000; ++i) {
    std::vector<uint8_t> buf = corpus[rng() % corpus.size()];
    switch (mode(rng)) {
      case 0:
        for (int k = 1 + static_cast<int>(rng() % 4); k > 0; --k) buf[rng() % buf.size()] ^= 1u << (rng() % 8);
        break;
      case 1: buf.resize(rng() % buf.size()); break;
      case 2: buf.insert(buf.begin() + static_cast<long>(rng() % (buf.size() + 1)), static_cast<uint8_t>(rng())); break;
      case 3:
        if (buf.size() >= 8) buf[4 + rng() % 4] = static_cast<uint8_t>(rng());
        break;
      default: {
        buf.resize(rng() % 64);
        for (auto& b : buf) b = static_cast<uint8_t>(rng());
        if (rng() & 1 && buf.size() >= 3) buf[0] = 0xE2, buf[1] = 0xAF, buf[2] = 0x01;
      }
    }
    try {
      auto result = wire::decode(buf);
      if (auto* err = std::get_if<wire::DecodeError>(&result)) {
        ++kinds[err->kind];
      } else {
        const auto& d = std::get<wire::Decoded>(result);
        require(d.consumed <= buf.size(), "consumed beyond input");
        ++accepted;
      }
    } catch (const std::exception& e) {
      throw Failure{std::string("decode threw: ") + e.what()};
    } catch (...) {
      throw Failure{"decode threw a non-standard exception"};
    }
  }
  double s = seconds_since(t0);
  require(s < 30.0, "runtime " + std::to_string(s) + " s");
  std::ostringstream os;
  os << "10000 round-trips, 100000 fuzzed (" << accepted << " decoded, ";
  bool first = true;
  for (const auto& [k, n] : kinds) {
    os << (first ? "" : ", ") << wire::decode_error_name(k) << "=" << n;
    first = false;
  }
  os << ") in " << s << " s";
  return os.str();
}

std::string c5_closed_loop() {
  e2test::ScratchDir dir("accept-loop");
  auto opts = embedded_defaults(dir.path());
  opts.scenario.n_ues = 1;
  opts.scenario.sim_time_ms = 20000;
  opts.scenario_hook = [](sim::ScenarioState& s) { sim::script_ue(s, 1, {490.0, 0.0}, {4.0, 0.0}); };
  auto report = harness::run_scenario_zero(opts);

  require(report.controls.size() == 1, "controls issued: " + std::to_string(report.controls.size()));
  const auto& ctl = report.controls.front();
  require(ctl.action.ue_id == 1 && ctl.action.source_cell == 2 && ctl.action.target_cell == 3,
          "unexpected action " + std::to_string(ctl.action.source_cell) + "->" +
              std::to_string(ctl.action.target_cell));
  require(ctl.ack.has_value(), "control never acknowledged");
  require(ctl.ack->status == wire::AckStatus::Success, "ack REJECTED: " + ctl.ack->detail);
  require(report.handovers.size() == 1, "handovers applied: " + std::to_string(report.handovers.size()));
  const uint64_t t_ho = report.handovers.front().sim_ms;
  const uint64_t base = report.summary.baseline_unix_ms;
  const uint32_t period = opts.scenario.report_period_ms;

  int checked = 0;
  std::vector<double> hc3;
  for (const auto& ev : report.indications) {
    const auto& ind = ev.indication;
    if (ind.body.unit != wire::UnitType::CuCp) continue;
    const uint64_t t = ind.header.timestamp_ms - base;
    const uint32_t cell = cell_of(ev.node_display_id);
    bool lists_ue = std::any_of(ind.body.ue_measurements.begin(), ind.body.ue_measurements.end(),
                                [](const auto& u) { return u.ue_id == 1; });
    if (cell == 3) {
      for (const auto& m : ind.body.cell_measurements) {
        if (m.name == "handover_count") hc3.push_back(m.value);
      }
    }
    if (t < t_ho + period || cell == 1) continue;
    require(lists_ue == (cell == 3), "at t=" + std::to_string(t) + " cell " + std::to_string(cell) +
                                         (lists_ue ? " lists" : " does not list") + " UE 1");
    ++checked;
  }
  require(checked > 0, "no CU-CP reports after the handover");
  require(!hc3.empty(), "no handover_count from cell 3");
  require(hc3.back() - hc3.front() == 1.0, "cell 3 handover_count went from " + std::to_string(hc3.front()) +
                                               " to " + std::to_string(hc3.back()));
  std::ostringstream os;
  os << "UE 1 2->3 at " << t_ho << " ms, SUCCESS, " << checked << " later CU-CP reports consistent";
  return os.str();
}

std::string c6_time_sync() {
  const auto& run = default_run();
  const uint64_t base = run.report.summary.baseline_unix_ms;
  const uint32_t period = 100;
  require(!run.report.indications.empty(), "no indications captured");
  std::map<std::pair<std::string, int>, uint64_t> last;
  for (const auto& ev : run.report.indications) {
    const auto& ind = ev.indication;
    require(ind.header.timestamp_ms >= base, "timestamp before baseline");
    // Indication k of a stream is emitted at the k-th reporting boundary.
    uint64_t sim_ms = static_cast<uint64_t>(ind.sequence_number) * period;
    require(ind.header.timestamp_ms - base == sim_ms,
            ev.node_display_id + " seq " + std::to_string(ind.sequence_number) + " stamped " +
                std::to_string(ind.header.timestamp_ms - base));
    auto key = std::make_pair(ev.node_display_id, static_cast<int>(ind.body.unit));
    auto it = last.find(key);
    require(it == last.end() || it->second <= ind.header.timestamp_ms, "timestamps decrease on " + key.first);
    last[key] = ind.header.timestamp_ms;
  }
  return std::to_string(run.report.indications.size()) + " indications, " + std::to_string(last.size()) +
         " streams";
}

using KpmRow = std::tuple<uint64_t, uint32_t, std::string, std::string, uint64_t>;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::multiset<KpmRow> rows_from_csv(const std::filesystem::path& dir) {
  std::multiset<KpmRow> rows;
  for (const char* name : {"cu-cp.csv", "cu-up.csv", "du.csv"}) {
    std::istringstream in(slurp(dir / name));
    std::string line;
    std::getline(in, line);
    require(line == "timestamp_ms,cell_id,scope,metric,value", std::string("bad header in ") + name);
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
      require(f.size() == 5, "bad row: " + line);
      double v = std::strtod(f[4].c_str(), nullptr);
      rows.emplace(std::stoull(f[0]), static_cast<uint32_t>(std::stoul(f[1])), f[2], f[3],
                   std::bit_cast<uint64_t>(v));
    }
  }
  return rows;
}

std::string c7_determinism() {
  e2test::ScratchDir a("accept-off-a"), b("accept-off-b"), online("accept-on");
  for (auto* d : {&a, &b}) {
    harness::HarnessOptions o;
    o.scenario.mode = sim::Mode::Offline;
    o.out = d->path();
    harness::run_scenario_zero(o);
  }
  for (const char* name : {"cu-cp.csv", "cu-up.csv", "du.csv"}) {
    auto x = slurp(a.path() / name), y = slurp(b.path() / name);
    require(!x.empty(), std::string(name) + " missing");
    require(x == y, std::string(name) + " differs between offline runs");
  }

  auto opts = embedded_defaults(online.path());
  opts.xapp = harness::XappChoice::None;
  auto report = harness::run_scenario_zero(opts);
  require(report.summary.handovers == 0, "control was applied in the no-control run");
  const uint64_t base = report.summary.baseline_unix_ms;
  std::multiset<KpmRow> on;
  for (const auto& ev : report.indications) {
    const auto& ind = ev.indication;
    const uint64_t t = ind.header.timestamp_ms - base;
    const uint32_t cell = cell_of(ev.node_display_id);
    for (const auto& m : ind.body.cell_measurements) on.emplace(t, cell, "CELL", m.name, std::bit_cast<uint64_t>(m.value));
    for (const auto& ue : ind.body.ue_measurements) {
      for (const auto& m : ue.items) {
        on.emplace(t, cell, std::to_string(ue.ue_id), m.name, std::bit_cast<uint64_t>(m.value));
      }
    }
  }
  auto off = rows_from_csv(a.path());
  require(on.size() == off.size(), "online " + std::to_string(on.size()) + " values vs offline " +
                                       std::to_string(off.size()));
  require(on == off, "online and offline KPM multisets differ");
  return "offline CSVs byte-identical, " + std::to_string(on.size()) + " KPM values equal online/offline";
}

std::string c8_throughput_bound() {
  e2test::ScratchDir dir("accept-rate");
  auto opts = embedded_defaults(dir.path());
  // UE 1 parked on cell 3's site.
  opts.scenario_hook = [](sim::ScenarioState& s) { sim::script_ue(s, 1, {1000.0, 0.0}, {0.0, 0.0}); };
  auto report = harness::run_scenario_zero(opts);

  const double cap_kbit = 20.48e6 * 0.1 / 1e3;
  const double tol = 1e-6;
  std::size_t samples = 0, saturated = 0;
  double max_seen = 0.0;
  for (const auto& ev : report.indications) {
    if (ev.indication.body.unit != wire::UnitType::CuUp) continue;
    for (const auto& ue : ev.indication.body.ue_measurements) {
      for (const auto& m : ue.items) {
        if (m.name != "pdcp_sdu_volume_dl_kbit") continue;
        ++samples;
        max_seen = std::max(max_seen, m.value);
        require(m.value <= cap_kbit + tol, "UE " + std::to_string(ue.ue_id) + " volume " + std::to_string(m.value));
        if (ue.ue_id == 1 && std::fabs(m.value - cap_kbit) <= tol) ++saturated;
      }
    }
  }
  require(samples > 0, "no per-UE CU-UP volumes captured");
  require(saturated > 0, "co-located UE never reached " + std::to_string(cap_kbit) + " kbit");
  std::ostringstream os;
  os.precision(10);
  os << samples << " volumes <= " << cap_kbit << " kbit, max " << max_seen << ", " << saturated
     << " saturated periods for the co-located UE";
  return os.str();
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria{
      {"1 protocol sequence", c1_protocol_sequence},
      {"2 indication cardinality", c2_indication_cardinality},
      {"3 traffic asymmetry", c3_traffic_asymmetry},
      {"4 codec soundness", c4_codec_soundness},
      {"5 closed loop", c5_closed_loop},
      {"6 time synchronization", c6_time_sync},
      {"7 determinism", c7_determinism},
      {"8 throughput bound", c8_throughput_bound},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    std::string line;
    bool ok = false;
    try {
      line = fn();
      ok = true;
    } catch (const Failure& f) {
      line = f.why;
    } catch (const std::exception& e) {
      line = std::string("exception: ") + e.what();
    }
    std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << name << ": " << line << std::endl;
    if (!ok) ++failed;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - failed << "/" << criteria.size() << '\n';
  return failed ? 1 : 0;
}

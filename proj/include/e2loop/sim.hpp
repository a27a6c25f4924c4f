#pragma once

// Discrete-event NSA RAN model: one LTE anchor, NR secondary cells, UEs with a
// random walk, full-buffer downlink traffic and per-unit KPM calculators.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "e2loop/agent.hpp"
#include "e2loop/wire.hpp"

namespace e2loop::sim {

enum class Mode { Online, Offline };

struct ScenarioConfig {
  uint64_t sim_time_ms = 2000;
  uint32_t report_period_ms = 100;
  uint32_t n_ues = 12;
  double inter_site_distance_m = 1000.0;
  double carrier_freq_ghz = 3.5;
  double bandwidth_mhz = 20.0;
  std::pair<double, double> ue_speed_range_mps{2.0, 4.0};
  double full_buffer_rate_mbps = 20.48;
  uint64_t seed = 42;
  Mode mode = Mode::Online;

  uint32_t step_ms = 10;
  uint32_t direction_redraw_ms = 1000;
  double tx_power_dbm = 30.0;
  double noise_figure_db = 7.0;
  double path_loss_exponent = 3.0;
  // Adds per-UE sinr_db_cell_<id> entries for every NR cell to CU-CP reports.
  bool neighbor_sinr_catalog = true;
  std::string plmn = "131-133";
  int node_id_pad_width = 8;
  // 0 = capture Unix time at run start (online) or use 0 (offline).
  uint64_t baseline_unix_ms = 0;
};

// Throws Error(InvalidConfig).
void validate(const ScenarioConfig& cfg);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double norm(Vec2 v);

enum class CellKind { LtePrimary, NrSecondary };

struct CellState {
  uint32_t cell_id = 0;
  CellKind kind = CellKind::NrSecondary;
  Vec2 position;
  double tx_power_dbm = 30.0;
  std::set<uint64_t> attached_ues;
  uint64_t handover_count = 0;

  // Per reporting period accumulators.
  double delivered_bits_period = 0.0;
  double prb_utilization_accum = 0.0;
  uint64_t traffic_steps_period = 0;
  uint64_t period_start_ms = 0;
};

struct UeState {
  uint64_t ue_id = 0;
  Vec2 position;
  Vec2 velocity;
  uint32_t serving_nr_cell = 0;
  std::map<uint32_t, double> sinr_db_per_cell;
  double buffered_bits = 0.0;
  double delivered_bits_period = 0.0;
  bool scripted = false;  // fixed trajectory, exempt from direction redraws
};

struct SimClock {
  uint64_t baseline_unix_ms = 0;
  uint64_t sim_elapsed_ms = 0;

  uint64_t timestamp_ms() const { return baseline_unix_ms + sim_elapsed_ms; }
};

struct ScenarioState {
  ScenarioConfig cfg;
  std::vector<CellState> cells;  // ascending cell_id
  std::vector<UeState> ues;      // ascending ue_id
  SimClock clock;
  uint64_t mobility_elapsed_ms = 0;
  std::mt19937_64 rng;

  CellState* cell(uint32_t cell_id);
  const CellState* cell(uint32_t cell_id) const;
  UeState* ue(uint64_t ue_id);
  const UeState* ue(uint64_t ue_id) const;
  std::vector<uint32_t> nr_cell_ids() const;
  wire::GlobalNodeId node_of(const CellState& cell) const;
};

// eNB = cell 1 and gNB = cell 2 at the origin, gNBs 3..5 on a ring of radius
// inter_site_distance_m at bearings 0, 120 and 240 degrees, UEs uniform in the
// disc of the same radius, each attached to its best NR cell.
ScenarioState build_scenario_zero(const ScenarioConfig& cfg);

// Canonical text dump (hex floats, RNG state) for bitwise comparisons.
std::string serialize(const ScenarioState& state);

// Log-distance model anchored at the 1 m free-space term; d clamped to >= 1 m.
double path_loss_db(double distance_m, double freq_ghz, double exponent = 3.0);
double noise_floor_dbm(double bandwidth_hz, double noise_figure_db);
double sinr_db(const UeState& ue, const CellState& cell, const ScenarioState& state);
// Recomputes sinr_db_per_cell for every UE.
void refresh_sinr(ScenarioState& state);

// Pins a UE to a scripted position/velocity and reattaches it to its best cell.
void script_ue(ScenarioState& state, uint64_t ue_id, Vec2 position, Vec2 velocity);

void step_mobility(ScenarioState& state, uint32_t dt_ms);
void step_traffic(ScenarioState& state, uint32_t dt_ms);

int mcs_index(double sinr_db);
// Per-UE equal PRB share times Shannon rate, bits per second.
double achievable_rate_bps(const ScenarioState& state, const UeState& ue);

// Throws Error(UnsupportedUnit) for DU on the LTE primary, Error(UnknownNode)
// for an unknown cell.
wire::KpmReport collect_kpm(const ScenarioState& state, uint32_t cell_id, wire::UnitType unit);

// Units each cell reports: CU-CP, CU-UP, and DU for NR cells only.
std::vector<wire::UnitType> supported_units(const CellState& cell);

// Clears the period accumulators of a cell and the UEs it serves.
void reset_period(ScenarioState& state, uint32_t cell_id);

enum class HandoverStatus { Success, Rejected };
enum class HandoverReason { None, UnknownUe, UnknownTargetCell, NoopSameCell, NotAtPrimary };

const char* reason_name(HandoverReason reason);

struct HandoverOutcome {
  HandoverStatus status = HandoverStatus::Rejected;
  HandoverReason reason = HandoverReason::None;
  std::string detail;
};

HandoverOutcome apply_handover(ScenarioState& state, const wire::ControlAction& action);

struct HandoverRecord {
  uint64_t sim_ms = 0;
  wire::ControlAction action;
  HandoverOutcome outcome;
};

struct SimulationSummary {
  uint64_t events = 0;
  uint64_t reports = 0;
  uint64_t handovers = 0;
  uint64_t handover_rejections = 0;
  uint64_t sim_end_ms = 0;
  uint64_t baseline_unix_ms = 0;
  std::map<uint32_t, uint64_t> reports_per_cell;
  std::vector<HandoverRecord> handover_log;
  std::vector<uint32_t> degraded_cells;  // switched to offline tracing after link loss
};

// Multi-producer queue of inbound control actions, drained by the engine.
class ControlQueue {
 public:
  struct Item {
    wire::ControlAction action;
    agent::E2Termination* via = nullptr;  // null for locally injected actions
  };

  void push(Item item);
  std::vector<Item> drain();
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::deque<Item> items_;
};

// One CSV per unit type: cu-cp.csv, cu-up.csv, du.csv.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& dir);
  void write(uint32_t cell_id, const wire::KpmReport& report);
  void flush();

  static const char* file_name(wire::UnitType unit);

 private:
  std::ofstream files_[3];
};

std::string format_value(double v);

class Simulator {
 public:
  explicit Simulator(ScenarioState state);

  // Binds each cell to the termination whose node id equals its cell id and
  // registers the control callbacks: the LTE primary queues actions, NR cells
  // reject them.
  void attach_terminations(agent::TerminationRegistry& registry);
  void set_trace_dir(std::filesystem::path dir) { trace_dir_ = std::move(dir); }
  // Called after every boundary at which reports were emitted.
  void set_cycle_hook(std::function<void(uint64_t sim_ms)> hook) { cycle_hook_ = std::move(hook); }
  // Sim milliseconds per wall millisecond; 0 runs unpaced.
  void set_realtime_factor(double factor) { realtime_factor_ = factor; }
  void set_report_observer(std::function<void(uint32_t cell_id, const wire::KpmReport&)> obs) {
    observer_ = std::move(obs);
  }

  // Throws Error(InvalidConfig) when preconditions for `mode` are missing.
  SimulationSummary run(Mode mode);

  ControlQueue& control_queue() { return queue_; }
  const ScenarioState& state() const { return state_; }
  ScenarioState& state() { return state_; }

 private:
  void begin(Mode mode);
  void advance(uint32_t dt_ms);
  void drain_controls();
  void emit_reports(uint32_t cell_id);
  std::optional<uint32_t> period_for(uint32_t cell_id) const;

  ScenarioState state_;
  Mode mode_ = Mode::Offline;
  std::map<uint32_t, agent::E2Termination*> bindings_;
  std::set<uint32_t> degraded_;
  std::optional<std::filesystem::path> trace_dir_;
  std::unique_ptr<TraceWriter> trace_;
  std::function<void(uint64_t)> cycle_hook_;
  std::function<void(uint32_t, const wire::KpmReport&)> observer_;
  double realtime_factor_ = 0.0;
  ControlQueue queue_;
  SimulationSummary summary_;
};

}  // namespace e2loop::sim

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "e2loop/error.hpp"
#include "e2loop/sim.hpp"

namespace e2loop::sim {

using wire::KpmReport;
using wire::Measurement;
using wire::UnitType;

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

Vec2 draw_velocity(std::mt19937_64& rng, const ScenarioConfig& cfg) {
  double heading = 2.0 * std::numbers::pi * uniform01(rng);
  double speed = uniform(rng, cfg.ue_speed_range_mps.first, cfg.ue_speed_range_mps.second);
  return {speed * std::cos(heading), speed * std::sin(heading)};
}

double distance(Vec2 a, Vec2 b) { return norm({a.x - b.x, a.y - b.y}); }

// Highest SINR wins, lowest cell id on ties.
uint32_t best_cell(const UeState& ue) {
  uint32_t best = 0;
  double best_sinr = -INFINITY;
  for (const auto& [cell_id, sinr] : ue.sinr_db_per_cell) {
    if (best == 0 || sinr > best_sinr) {
      best = cell_id;
      best_sinr = sinr;
    }
  }
  return best;
}

void attach(ScenarioState& state, UeState& ue, uint32_t cell_id) {
  if (ue.serving_nr_cell != 0) {
    if (auto* old = state.cell(ue.serving_nr_cell)) old->attached_ues.erase(ue.ue_id);
  }
  ue.serving_nr_cell = cell_id;
  if (auto* c = state.cell(cell_id)) c->attached_ues.insert(ue.ue_id);
}

void reflect_into_disc(UeState& ue, double radius) {
  double r = norm(ue.position);
  if (r <= radius) return;
  Vec2 n{ue.position.x / r, ue.position.y / r};
  double inside = 2.0 * radius - r;
  if (inside < 0.0) inside = radius;
  ue.position = {n.x * inside, n.y * inside};
  double vn = ue.velocity.x * n.x + ue.velocity.y * n.y;
  if (vn > 0.0) ue.velocity = {ue.velocity.x - 2.0 * vn * n.x, ue.velocity.y - 2.0 * vn * n.y};
}

std::string hexf(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

}  // namespace

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

void validate(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (cfg.report_period_ms == 0) fail("report_period_ms must be > 0");
  if (cfg.step_ms == 0) fail("step_ms must be > 0");
  if (cfg.report_period_ms % cfg.step_ms != 0) fail("report_period_ms must be a multiple of step_ms");
  if (!(cfg.inter_site_distance_m > 0)) fail("inter_site_distance_m must be > 0");
  if (!(cfg.carrier_freq_ghz > 0)) fail("carrier_freq_ghz must be > 0");
  if (!(cfg.bandwidth_mhz > 0)) fail("bandwidth_mhz must be > 0");
  if (!(cfg.full_buffer_rate_mbps > 0)) fail("full_buffer_rate_mbps must be > 0");
  if (!(cfg.ue_speed_range_mps.first > 0)) fail("speed range must be > 0");
  if (cfg.ue_speed_range_mps.first > cfg.ue_speed_range_mps.second) fail("speed range min > max");
  if (cfg.direction_redraw_ms == 0) fail("direction_redraw_ms must be > 0");
  if (!wire::valid_plmn(cfg.plmn)) fail("plmn must match digits-digits");
}

CellState* ScenarioState::cell(uint32_t cell_id) {
  for (auto& c : cells)
    if (c.cell_id == cell_id) return &c;
  return nullptr;
}

const CellState* ScenarioState::cell(uint32_t cell_id) const {
  for (const auto& c : cells)
    if (c.cell_id == cell_id) return &c;
  return nullptr;
}

UeState* ScenarioState::ue(uint64_t ue_id) {
  for (auto& u : ues)
    if (u.ue_id == ue_id) return &u;
  return nullptr;
}

const UeState* ScenarioState::ue(uint64_t ue_id) const {
  for (const auto& u : ues)
    if (u.ue_id == ue_id) return &u;
  return nullptr;
}

std::vector<uint32_t> ScenarioState::nr_cell_ids() const {
  std::vector<uint32_t> ids;
  for (const auto& c : cells)
    if (c.kind == CellKind::NrSecondary) ids.push_back(c.cell_id);
  return ids;
}

wire::GlobalNodeId ScenarioState::node_of(const CellState& c) const {
  return {cfg.plmn, c.kind == CellKind::LtePrimary ? wire::NodeKind::Enb : wire::NodeKind::Gnb,
          c.cell_id};
}

ScenarioState build_scenario_zero(const ScenarioConfig& cfg) {
  validate(cfg);
  ScenarioState state;
  state.cfg = cfg;
  state.rng.seed(cfg.seed);

  const double isd = cfg.inter_site_distance_m;
  auto add_cell = [&](uint32_t id, CellKind kind, Vec2 pos) {
    CellState cell;
    cell.cell_id = id;
    cell.kind = kind;
    cell.position = pos;
    cell.tx_power_dbm = cfg.tx_power_dbm;
    state.cells.push_back(std::move(cell));
  };
  add_cell(1, CellKind::LtePrimary, {0.0, 0.0});
  add_cell(2, CellKind::NrSecondary, {0.0, 0.0});
  for (int i = 0; i < 3; ++i) {
    double bearing = 2.0 * std::numbers::pi * i / 3.0;
    add_cell(static_cast<uint32_t>(3 + i), CellKind::NrSecondary, {isd * std::cos(bearing), isd * std::sin(bearing)});
  }

  for (uint32_t i = 0; i < cfg.n_ues; ++i) {
    UeState ue;
    ue.ue_id = i + 1;
    double r = isd * std::sqrt(uniform01(state.rng));
    double theta = 2.0 * std::numbers::pi * uniform01(state.rng);
    ue.position = {r * std::cos(theta), r * std::sin(theta)};
    ue.velocity = draw_velocity(state.rng, cfg);
    state.ues.push_back(std::move(ue));
  }

  refresh_sinr(state);
  for (auto& ue : state.ues) attach(state, ue, best_cell(ue));
  return state;
}

std::string serialize(const ScenarioState& state) {
  std::ostringstream os;
  os << "clock " << state.clock.baseline_unix_ms << ' ' << state.clock.sim_elapsed_ms << ' '
     << state.mobility_elapsed_ms << '\n';
  for (const auto& c : state.cells) {
    os << "cell " << c.cell_id << ' ' << static_cast<int>(c.kind) << ' ' << hexf(c.position.x)
       << ' ' << hexf(c.position.y) << ' ' << hexf(c.tx_power_dbm) << ' ' << c.handover_count
       << ' ' << hexf(c.delivered_bits_period) << ' ' << hexf(c.prb_utilization_accum) << ' '
       << c.traffic_steps_period << " ues";
    for (auto id : c.attached_ues) os << ' ' << id;
    os << '\n';
  }
  for (const auto& u : state.ues) {
    os << "ue " << u.ue_id << ' ' << hexf(u.position.x) << ' ' << hexf(u.position.y) << ' '
       << hexf(u.velocity.x) << ' ' << hexf(u.velocity.y) << ' ' << u.serving_nr_cell << ' '
       << hexf(u.buffered_bits) << ' ' << hexf(u.delivered_bits_period) << ' ' << u.scripted;
    for (const auto& [id, s] : u.sinr_db_per_cell) os << ' ' << id << '=' << hexf(s);
    os << '\n';
  }
  os << "rng " << state.rng << '\n';
  return os.str();
}

double path_loss_db(double distance_m, double freq_ghz, double exponent) {
  double d = std::max(distance_m, 1.0);
  return 20.0 * std::log10(freq_ghz * 1e9) - 147.55 + 10.0 * exponent * std::log10(d);
}

double noise_floor_dbm(double bandwidth_hz, double noise_figure_db) {
  return -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

double sinr_db(const UeState& ue, const CellState& cell, const ScenarioState& state) {
  const auto& cfg = state.cfg;
  auto rx_dbm = [&](const CellState& c) {
    return c.tx_power_dbm -
           path_loss_db(distance(ue.position, c.position), cfg.carrier_freq_ghz,
                        cfg.path_loss_exponent);
  };
  double denom_mw = dbm_to_mw(noise_floor_dbm(cfg.bandwidth_mhz * 1e6, cfg.noise_figure_db));
  for (const auto& other : state.cells) {
    if (other.kind != CellKind::NrSecondary || other.cell_id == cell.cell_id) continue;
    denom_mw += dbm_to_mw(rx_dbm(other));
  }
  return rx_dbm(cell) - 10.0 * std::log10(denom_mw);
}

void refresh_sinr(ScenarioState& state) {
  for (auto& ue : state.ues) {
    ue.sinr_db_per_cell.clear();
    for (const auto& c : state.cells) {
      if (c.kind == CellKind::NrSecondary) ue.sinr_db_per_cell[c.cell_id] = sinr_db(ue, c, state);
    }
  }
}

void script_ue(ScenarioState& state, uint64_t ue_id, Vec2 position, Vec2 velocity) {
  UeState* ue = state.ue(ue_id);
  if (!ue) throw Error(ErrorCode::InvalidConfig, "unknown ue " + std::to_string(ue_id));
  ue->position = position;
  ue->velocity = velocity;
  ue->scripted = true;
  refresh_sinr(state);
  attach(state, *ue, best_cell(*ue));
}

void step_mobility(ScenarioState& state, uint32_t dt_ms) {
  const double dt_s = dt_ms / 1000.0;
  const double radius = state.cfg.inter_site_distance_m;
  for (auto& ue : state.ues) {
    ue.position.x += ue.velocity.x * dt_s;
    ue.position.y += ue.velocity.y * dt_s;
    reflect_into_disc(ue, radius);
  }
  uint64_t before = state.mobility_elapsed_ms;
  state.mobility_elapsed_ms += dt_ms;
  const uint64_t every = state.cfg.direction_redraw_ms;
  if (before / every != state.mobility_elapsed_ms / every) {
    for (auto& ue : state.ues) {
      if (!ue.scripted) ue.velocity = draw_velocity(state.rng, state.cfg);
    }
  }
  refresh_sinr(state);
}

double achievable_rate_bps(const ScenarioState& state, const UeState& ue) {
  const CellState* c = state.cell(ue.serving_nr_cell);
  if (!c || c->attached_ues.empty()) return 0.0;
  auto it = ue.sinr_db_per_cell.find(ue.serving_nr_cell);
  if (it == ue.sinr_db_per_cell.end()) return 0.0;
  double share_hz = state.cfg.bandwidth_mhz * 1e6 / static_cast<double>(c->attached_ues.size());
  double rate = share_hz * std::log2(1.0 + std::pow(10.0, it->second / 10.0));
  return std::isfinite(rate) && rate > 0.0 ? rate : 0.0;
}

void step_traffic(ScenarioState& state, uint32_t dt_ms) {
  const double dt_s = dt_ms / 1000.0;
  const double offered = state.cfg.full_buffer_rate_mbps * 1e6 * dt_ms / 1000.0;
  CellState* anchor = nullptr;
  for (auto& c : state.cells) {
    if (c.kind == CellKind::LtePrimary) anchor = &c;
    ++c.traffic_steps_period;
  }
  for (auto& ue : state.ues) {
    double capacity = std::max(0.0, achievable_rate_bps(state, ue) * dt_s);
    double delivered = std::min(offered, capacity);
    ue.delivered_bits_period += delivered;
    ue.buffered_bits += offered - delivered;
    CellState* c = state.cell(ue.serving_nr_cell);
    if (c) {
      c->delivered_bits_period += delivered;
      double used = capacity > 0.0 ? std::min(1.0, offered / capacity) : 1.0;
      c->prb_utilization_accum += used / static_cast<double>(c->attached_ues.size());
    }
    // The anchor terminates PDCP for every split bearer.
    if (anchor) anchor->delivered_bits_period += delivered;
  }
}

int mcs_index(double sinr) {
  double idx = std::round((sinr + 10.0) / 1.4);
  if (!(idx > 0.0)) return 0;
  return idx > 28.0 ? 28 : static_cast<int>(idx);
}

std::vector<UnitType> supported_units(const CellState& cell) {
  if (cell.kind == CellKind::LtePrimary) return {UnitType::CuCp, UnitType::CuUp};
  return {UnitType::CuCp, UnitType::CuUp, UnitType::Du};
}

KpmReport collect_kpm(const ScenarioState& state, uint32_t cell_id, UnitType unit) {
  const CellState* c = state.cell(cell_id);
  if (!c) throw Error(ErrorCode::UnknownNode, "no cell " + std::to_string(cell_id));
  if (unit == UnitType::Du && c->kind == CellKind::LtePrimary) {
    throw Error(ErrorCode::UnsupportedUnit, "no DU reports for the LTE primary");
  }

  KpmReport report;
  report.header.timestamp_ms = state.clock.timestamp_ms();
  report.header.node_display_id = wire::format_node_id(state.node_of(*c), state.cfg.node_id_pad_width);
  report.body.unit = unit;

  const bool nr = c->kind == CellKind::NrSecondary;
  uint64_t elapsed = state.clock.sim_elapsed_ms - c->period_start_ms;
  double period_s = elapsed > 0 ? elapsed / 1000.0 : 0.0;
  auto& cell_items = report.body.cell_measurements;
  auto& ue_items = report.body.ue_measurements;

  switch (unit) {
    case UnitType::CuCp:
      cell_items.push_back({"num_active_ues", static_cast<double>(c->attached_ues.size())});
      cell_items.push_back({"handover_count", static_cast<double>(c->handover_count)});
      for (uint64_t id : c->attached_ues) {
        const UeState* ue = state.ue(id);
        wire::UeMeasurements m{id, {}};
        m.items.push_back({"sinr_db_serving", ue->sinr_db_per_cell.at(cell_id)});
        if (state.cfg.neighbor_sinr_catalog) {
          for (const auto& [other, s] : ue->sinr_db_per_cell) {
            m.items.push_back({"sinr_db_cell_" + std::to_string(other), s});
          }
        }
        ue_items.push_back(std::move(m));
      }
      break;
    case UnitType::CuUp:
      cell_items.push_back(
          {"dl_throughput_mbps", period_s > 0 ? c->delivered_bits_period / period_s / 1e6 : 0.0});
      if (nr) {
        for (uint64_t id : c->attached_ues) {
          const UeState* ue = state.ue(id);
          ue_items.push_back({id, {{"pdcp_sdu_volume_dl_kbit", ue->delivered_bits_period / 1000.0}}});
        }
      }
      break;
    case UnitType::Du: {
      double util = c->traffic_steps_period > 0
                        ? 100.0 * c->prb_utilization_accum / static_cast<double>(c->traffic_steps_period)
                        : 0.0;
      cell_items.push_back({"prb_utilization_pct", util});
      for (uint64_t id : c->attached_ues) {
        const UeState* ue = state.ue(id);
        ue_items.push_back({id,
                            {{"mcs_index", static_cast<double>(mcs_index(ue->sinr_db_per_cell.at(cell_id)))},
                             {"achievable_rate_mbps", achievable_rate_bps(state, *ue) / 1e6}}});
      }
      break;
    }
  }
  return report;
}

void reset_period(ScenarioState& state, uint32_t cell_id) {
  CellState* c = state.cell(cell_id);
  if (!c) return;
  c->delivered_bits_period = 0.0;
  c->prb_utilization_accum = 0.0;
  c->traffic_steps_period = 0;
  c->period_start_ms = state.clock.sim_elapsed_ms;
  for (uint64_t id : c->attached_ues) {
    if (UeState* ue = state.ue(id)) ue->delivered_bits_period = 0.0;
  }
}

const char* reason_name(HandoverReason reason) {
  switch (reason) {
    case HandoverReason::None: return "None";
    case HandoverReason::UnknownUe: return "UnknownUe";
    case HandoverReason::UnknownTargetCell: return "UnknownTargetCell";
    case HandoverReason::NoopSameCell: return "NoopSameCell";
    case HandoverReason::NotAtPrimary: return "NotAtPrimary";
  }
  return "?";
}

HandoverOutcome apply_handover(ScenarioState& state, const wire::ControlAction& action) {
  auto reject = [](HandoverReason r, std::string detail) {
    return HandoverOutcome{HandoverStatus::Rejected, r, std::string(reason_name(r)) + ": " + detail};
  };
  UeState* ue = state.ue(action.ue_id);
  if (!ue) return reject(HandoverReason::UnknownUe, "ue " + std::to_string(action.ue_id));
  CellState* target = state.cell(action.target_cell);
  if (!target || target->kind != CellKind::NrSecondary) {
    return reject(HandoverReason::UnknownTargetCell, "cell " + std::to_string(action.target_cell));
  }
  if (action.source_cell == action.target_cell || ue->serving_nr_cell == action.target_cell) {
    return reject(HandoverReason::NoopSameCell,
                  "ue " + std::to_string(action.ue_id) + " already on cell " +
                      std::to_string(action.target_cell));
  }
  uint32_t source = ue->serving_nr_cell;
  attach(state, *ue, action.target_cell);
  ++target->handover_count;
  return HandoverOutcome{HandoverStatus::Success, HandoverReason::None,
                         "ue " + std::to_string(action.ue_id) + " " + std::to_string(source) + "->" +
                             std::to_string(action.target_cell) + " at " +
                             std::to_string(state.clock.sim_elapsed_ms) + " ms"};
}

}  // namespace e2loop::sim

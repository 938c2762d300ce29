// SPDX-License-Identifier: Apache-2.0
#include "nasforge/cost.hpp"

#include <stdexcept>

#include "nasforge/errors.hpp"

namespace nasforge::cost {

namespace {

using u128 = unsigned __int128;

std::uint64_t ceil_div_u128(u128 num, u128 den) {
  return static_cast<std::uint64_t>((num + den - 1) / den);
}

// Exact a1/b1 < a2/b2 via cross multiplication; denominators positive.
bool ratio_less(u128 a1, u128 b1, u128 a2, u128 b2) {
  return a1 * b2 < a2 * b1;
}

// Output channels per group: the unit the channel tile is filled with.
std::int64_t channels_per_group(const ir::PrimitiveOp& op) {
  switch (op.kind) {
    case ir::OpKind::kDepthwiseConv2d:
      return 1;
    case ir::OpKind::kGroupConv2d:
      return op.out.c / op.groups;
    default:
      return op.out.c;
  }
}

}  // namespace

void AcceleratorConfig::validate() const {
  auto positive = [](auto v, const char* field) {
    if (v <= 0)
      throw ValidationError(std::string(field) + " must be positive");
  };
  positive(mac_per_cycle, "mac_per_cycle");
  positive(clock_ghz, "clock_ghz");
  positive(act_bw, "act_bw");
  positive(param_bw, "param_bw");
  positive(channel_tile, "channel_tile");
  positive(bytes_per_elem, "bytes_per_elem");
  if (op_overhead_cycles < 0)
    throw ValidationError("op_overhead_cycles must be nonnegative");
  if (e_mac < 0 || e_act < 0 || e_param < 0)
    throw ValidationError("energy coefficients must be nonnegative");
  if ((channel_tile & (channel_tile - 1)) != 0)
    throw ValidationError("channel_tile must be a power of two");
}

const char* bound_kind_name(BoundKind b) {
  switch (b) {
    case BoundKind::kCompute: return "compute";
    case BoundKind::kActBandwidth: return "act_bw";
    case BoundKind::kParamBandwidth: return "param_bw";
  }
  return "?";
}

double alignment_utilization(const ir::PrimitiveOp& op,
                             const AcceleratorConfig& cfg) {
  if (!ir::is_conv_kind(op.kind))
    throw std::invalid_argument("alignment applies to conv kinds only");
  const std::int64_t q = channels_per_group(op);
  const std::int64_t l = cfg.channel_tile;
  const std::int64_t tiles = (q + l - 1) / l;
  return static_cast<double>(q) / static_cast<double>(tiles * l);
}

OpMetrics op_latency(const ir::PrimitiveOp& op, const AcceleratorConfig& cfg) {
  cfg.validate();
  for (const ir::Violation& v : ir::validate_op(op))
    throw ValidationError(v.context + ": " + v.message);

  OpMetrics m;
  m.name = op.name;
  m.kind = op.kind;
  m.macs = ir::count_macs(op);
  m.params = ir::count_params(op);
  const ir::ActBytes act = ir::count_act_bytes(
      op, static_cast<int>(cfg.bytes_per_elem));
  m.act_bytes = act.in_bytes + act.out_bytes;
  m.param_bytes = m.params * static_cast<std::uint64_t>(cfg.bytes_per_elem);

  // Each port's occupancy as an exact fraction num/den of cycles.
  u128 comp_num = 0, act_num = 0, par_num = 0;
  u128 comp_den = 1, act_den = 1, par_den = 1;
  if (ir::is_conv_kind(op.kind)) {
    const std::int64_t q = channels_per_group(op);
    const std::int64_t l = cfg.channel_tile;
    const std::int64_t tiles = (q + l - 1) / l;
    // macs / (P * u) with u = q / (tiles * L), kept rational.
    comp_num = static_cast<u128>(m.macs) * static_cast<u128>(tiles * l);
    comp_den = static_cast<u128>(cfg.mac_per_cycle) * static_cast<u128>(q);
    act_num = act.in_bytes;
    act_den = cfg.act_bw;
    par_num = m.param_bytes;
    par_den = cfg.param_bw;
  } else {
    // Pure data movement: written bytes on the activation port.
    act_num = act.out_bytes;
    act_den = cfg.act_bw;
  }

  m.bound = BoundKind::kCompute;
  u128 best_num = comp_num, best_den = comp_den;
  if (ratio_less(best_num, best_den, act_num, act_den)) {
    m.bound = BoundKind::kActBandwidth;
    best_num = act_num;
    best_den = act_den;
  }
  if (ratio_less(best_num, best_den, par_num, par_den)) {
    m.bound = BoundKind::kParamBandwidth;
    best_num = par_num;
    best_den = par_den;
  }
  if (!ir::is_conv_kind(op.kind)) m.bound = BoundKind::kActBandwidth;

  const std::uint64_t peak = best_num == 0 ? 0 : ceil_div_u128(best_num, best_den);
  m.cycles = peak + static_cast<std::uint64_t>(cfg.op_overhead_cycles);
  m.latency_us =
      static_cast<double>(m.cycles) / (cfg.clock_ghz * 1000.0);
  m.utilization =
      m.macs == 0 || m.cycles == 0
          ? 0.0
          : static_cast<double>(m.macs) /
                (static_cast<double>(m.cycles) *
                 static_cast<double>(cfg.mac_per_cycle));
  m.energy_mj = op_energy(m, cfg);
  return m;
}

double op_energy(const OpMetrics& m, const AcceleratorConfig& cfg) {
  const double pj = static_cast<double>(m.macs) * cfg.e_mac +
                    static_cast<double>(m.act_bytes) * cfg.e_act +
                    static_cast<double>(m.param_bytes) * cfg.e_param;
  return pj * 1e-9;
}

ModelMetrics graph_metrics(const ir::PrimitiveGraph& g,
                           const AcceleratorConfig& cfg) {
  for (const ir::Violation& v : ir::validate_graph(g))
    throw ValidationError(v.context + ": " + v.message);

  ModelMetrics mm;
  mm.per_op.reserve(g.nodes.size());
  for (const ir::GraphNode& node : g.nodes) {
    OpMetrics m = op_latency(node.op, cfg);
    mm.totals.cycles += m.cycles;
    mm.totals.macs += m.macs;
    mm.totals.params += m.params;
    mm.totals.act_bytes += m.act_bytes;
    mm.totals.param_bytes += m.param_bytes;
    mm.totals.energy_mj += m.energy_mj;
    mm.per_op.push_back(std::move(m));
  }
  mm.totals.latency_us =
      static_cast<double>(mm.totals.cycles) / (cfg.clock_ghz * 1000.0);
  mm.totals.utilization =
      mm.totals.cycles == 0
          ? 0.0
          : static_cast<double>(mm.totals.macs) /
                (static_cast<double>(mm.totals.cycles) *
                 static_cast<double>(cfg.mac_per_cycle));
  return mm;
}

ModelMetrics model_metrics(const ir::ModelIr& m, const AcceleratorConfig& cfg) {
  cfg.validate();
  const std::vector<ir::Violation> v = ir::validate_model(m);
  if (!v.empty())
    throw ValidationError(v.front().context + ": " + v.front().message);
  return graph_metrics(ir::lower_model(m), cfg);
}

double harness_energy_mj(double avg_power_mw, double idle_power_mw,
                         double latency_ms) {
  if (avg_power_mw < idle_power_mw)
    throw ValidationError("average power below idle power");
  if (latency_ms < 0)
    throw ValidationError("latency must be nonnegative");
  // mW * ms = uJ; scale to mJ.
  return (avg_power_mw - idle_power_mw) * latency_ms / 1000.0;
}

}  // namespace nasforge::cost

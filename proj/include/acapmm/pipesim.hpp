#pragma once

// Step-level simulator for one reduction chain fed by one packet-switched
// channel, and the analytical design-level timing model.
//
// Simulator time is in transfer steps (one tile per step). Intervals are
// inclusive: a compute that starts at step s with ctc_steps = 4 occupies
// s..s+3.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "acapmm/interconnect.hpp"
#include "acapmm/mapping.hpp"
#include "acapmm/platform.hpp"
#include "acapmm/schedule.hpp"

namespace acapmm {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ColumnSimParams {
  std::int64_t depth = 1;
  std::int64_t num_batches = 1;
  std::int64_t ctc_steps = 1;
  std::int64_t banks_per_core = 2;
  // Extra busy steps on the last core of the chain while it streams the
  // finished output back to PL.
  std::int64_t drain_steps = 0;
};

struct ComputeSpan {
  std::int64_t core = 0;
  std::int64_t batch = 0;
  std::int64_t start_step = 0;
  std::int64_t end_step = 0;
  bool operator==(const ComputeSpan&) const = default;
};

struct TransferEvent {
  std::int64_t step = 0;
  TileRef tile;
  bool operator==(const TransferEvent&) const = default;
};

/// Channel held at `step` because `blocked` had no free bank at its core.
struct StallEvent {
  std::int64_t step = 0;
  TileRef blocked;
  bool bubble = false;
  bool operator==(const StallEvent&) const = default;
};

struct IdleSpan {
  std::int64_t core = 0;
  std::int64_t next_batch = 0;
  std::int64_t start_step = 0;
  std::int64_t end_step = 0;
  bool operator==(const IdleSpan&) const = default;
};

struct ColumnReport {
  std::int64_t makespan_steps = 0;
  // Stalled channel steps during which a more urgent tile (smaller
  // batch + id) was queued behind the head and could have been delivered.
  std::int64_t transfer_bubbles = 0;
  // All stalled channel steps, bubble or not.
  std::int64_t stall_steps = 0;
  // Idle steps of a core between its first start and its last finish.
  std::int64_t compute_bubbles = 0;
  std::vector<ComputeSpan> per_core_timeline;
  std::vector<TransferEvent> transfers;
  std::vector<StallEvent> stalls;
  std::vector<IdleSpan> idle;

  [[nodiscard]] std::optional<StallEvent> first_transfer_bubble() const {
    for (const auto& s : stalls)
      if (s.bubble) return s;
    return std::nullopt;
  }
  [[nodiscard]] std::optional<std::int64_t> arrival(TileRef t) const {
    for (const auto& e : transfers)
      if (e.tile == t) return e.step;
    return std::nullopt;
  }
  [[nodiscard]] std::vector<IdleSpan> idle_of(std::int64_t core) const {
    std::vector<IdleSpan> v;
    for (const auto& s : idle)
      if (s.core == core) v.push_back(s);
    return v;
  }

  bool operator==(const ColumnReport&) const = default;
};

inline ColumnReport simulate_column(const TransferOrder& order,
                                    const ColumnSimParams& params) {
  if (params.depth < 1 || params.num_batches < 1 || params.ctc_steps < 1 ||
      params.banks_per_core < 1 || params.drain_steps < 0)
    throw ConfigError(
        "depth, num_batches, ctc_steps and banks_per_core must be >= 1");
  if (order.depth != params.depth || order.num_batches != params.num_batches)
    throw ConfigError("order is " + std::to_string(order.num_batches) + "x" +
                      std::to_string(order.depth) + " but params are " +
                      std::to_string(params.num_batches) + "x" +
                      std::to_string(params.depth));
  if (auto bad = validate_order(order)) throw ConfigError("invalid order: " + *bad);

  const auto depth = static_cast<std::size_t>(params.depth);
  const auto nb = params.num_batches;
  constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

  // Indexed [batch * depth + core].
  auto at = [&](std::int64_t b, std::size_t i) {
    return static_cast<std::size_t>(b) * depth + i;
  };
  std::vector<std::int64_t> arrival(static_cast<std::size_t>(nb) * depth, kNever);
  std::vector<std::int64_t> finish(static_cast<std::size_t>(nb) * depth, kNever);
  std::vector<std::int64_t> next_batch(depth, 0);
  std::vector<std::vector<std::int64_t>> banks(depth);  // batches held

  ColumnReport rep;
  std::size_t head = 0;
  const auto& seq = order.sequence;
  std::size_t cores_done = 0;

  for (std::int64_t t = 0; cores_done < depth || head < seq.size(); ++t) {
    bool started = false;
    bool busy = false;
    for (std::size_t i = 0; i < depth; ++i) {
      auto b = next_batch[i];
      if (b > 0 && finish[at(b - 1, i)] >= t) {
        busy = true;
        continue;
      }
      if (b >= nb) continue;
      const bool data = arrival[at(b, i)] < t;
      const bool raw = i == 0 || finish[at(b, i - 1)] < t;
      if (data && raw) {
        auto dur = params.ctc_steps;
        if (i + 1 == depth) dur += params.drain_steps;
        finish[at(b, i)] = t + dur - 1;
        rep.per_core_timeline.push_back(
            {static_cast<std::int64_t>(i), b, t, t + dur - 1});
        ++next_batch[i];
        if (next_batch[i] == nb) ++cores_done;
        started = busy = true;
      }
    }

    for (std::size_t i = 0; i < depth; ++i)
      std::erase_if(banks[i], [&](std::int64_t b) { return finish[at(b, i)] < t; });

    if (head < seq.size()) {
      const auto tile = seq[head];
      const auto core = static_cast<std::size_t>(tile.id);
      if (static_cast<std::int64_t>(banks[core].size()) < params.banks_per_core) {
        banks[core].push_back(tile.batch);
        arrival[at(tile.batch, core)] = t;
        rep.transfers.push_back({t, tile});
        ++head;
      } else {
        StallEvent st{t, tile, false};
        const auto urgency = tile.batch + tile.id;
        for (auto j = head + 1; j < seq.size() && !st.bubble; ++j) {
          const auto& o = seq[j];
          st.bubble = o.batch + o.id < urgency &&
                      static_cast<std::int64_t>(
                          banks[static_cast<std::size_t>(o.id)].size()) <
                          params.banks_per_core;
        }
        rep.stalls.push_back(st);
        ++rep.stall_steps;
        if (st.bubble) ++rep.transfer_bubbles;
        if (!started && !busy)
          throw SimulationError("deadlock at step " + std::to_string(t) +
                                ": tile " + to_string(tile) +
                                " can never be delivered with " +
                                std::to_string(params.banks_per_core) +
                                " bank(s) per core");
      }
    }
  }

  std::sort(rep.per_core_timeline.begin(), rep.per_core_timeline.end(),
            [](const ComputeSpan& a, const ComputeSpan& b) {
              return std::tie(a.core, a.start_step) < std::tie(b.core, b.start_step);
            });
  for (const auto& s : rep.per_core_timeline)
    rep.makespan_steps = std::max(rep.makespan_steps, s.end_step);

  // Gaps between consecutive computations of the same core.
  for (std::size_t k = 1; k < rep.per_core_timeline.size(); ++k) {
    const auto& prev = rep.per_core_timeline[k - 1];
    const auto& cur = rep.per_core_timeline[k];
    if (prev.core == cur.core && cur.start_step > prev.end_step + 1) {
      rep.idle.push_back(
          {cur.core, cur.batch, prev.end_step + 1, cur.start_step - 1});
      rep.compute_bubbles += cur.start_step - prev.end_step - 1;
    }
  }
  return rep;
}

/// Flat event table: entity,kind,start_step,end_step,batch,id
inline void write_timeline_csv(std::ostream& os, const ColumnReport& r) {
  struct Row {
    std::int64_t start, end;
    std::string entity, kind;
    std::int64_t batch, id;
  };
  std::vector<Row> rows;
  for (const auto& e : r.transfers)
    rows.push_back({e.step, e.step, "channel", "transfer", e.tile.batch, e.tile.id});
  for (const auto& s : r.stalls)
    if (s.bubble)
      rows.push_back({s.step, s.step, "channel", "transfer_bubble",
                      s.blocked.batch, s.blocked.id});
  for (const auto& c : r.per_core_timeline)
    rows.push_back({c.start_step, c.end_step, "core" + std::to_string(c.core),
                    "compute", c.batch, c.core});
  for (const auto& g : r.idle)
    rows.push_back({g.start_step, g.end_step, "core" + std::to_string(g.core),
                    "compute_bubble", g.next_batch, g.core});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.start, a.entity, a.kind) < std::tie(b.start, b.entity, b.kind);
  });
  os << "entity,kind,start_step,end_step,batch,id\n";
  for (const auto& row : rows)
    os << row.entity << ',' << row.kind << ',' << row.start << ',' << row.end
       << ',' << row.batch << ',' << row.id << '\n';
}

// ---------------------------------------------------------------------------
// Design-level timing
// ---------------------------------------------------------------------------

enum class Bound { Compute, Offchip, Plio };

inline std::string_view to_string(Bound b) {
  switch (b) {
    case Bound::Compute: return "compute";
    case Bound::Offchip: return "offchip";
    case Bound::Plio: return "plio";
  }
  return "?";
}

struct DesignTiming {
  std::int64_t phases = 0;
  double phase_compute_s = 0;
  // Average over phases; the output write-back is spread evenly.
  double phase_mem_s = 0;
  double total_compute_s = 0;
  double total_mem_s = 0;
  double total_s = 0;
  double predicted_ops_per_s = 0;
  Bound bound = Bound::Compute;
  // Cycles per batch round: the compute time, or the operand transfer time
  // when the core cannot be fed fast enough.
  double period_cycles = 0;
  // compute_cycles / period_cycles.
  double ctc_efficiency = 1;
  // floor(ctc) / ctc: fraction of the compute time a whole-step simulator
  // schedule accounts for.
  double step_quantization = 1;

  bool operator==(const DesignTiming&) const = default;
};

/// Steady-state simulator parameters for one chain of `cfg`.
inline ColumnSimParams column_params(const MappingConfig& cfg,
                                     const PlatformSpec& spec) {
  const auto& dt = spec.dtype(cfg.shape.dtype);
  ColumnSimParams p;
  p.depth = cfg.array.B;
  p.num_batches = cfg.batch.count();
  p.ctc_steps = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::floor(core_ctc(cfg.tile, dt, spec))));
  return p;
}

inline DesignTiming design_timing(const MappingConfig& cfg,
                                  const PlatformSpec& spec) {
  const auto& dt = spec.dtype(cfg.shape.dtype);
  const double compute = single_core_compute_cycles(cfg.tile, dt);
  const double transfer = single_core_transfer_cycles(cfg.tile, dt, spec);
  const double ctc = compute / transfer;

  DesignTiming d;
  d.period_cycles = std::max(compute, transfer);
  d.ctc_efficiency = compute / d.period_cycles;
  d.step_quantization =
      ctc >= 1 ? std::floor(ctc) / ctc : 1.0;
  d.phases = outer_trips(cfg).phases();
  d.phase_compute_s = static_cast<double>(cfg.batch.count()) * d.period_cycles /
                      spec.core_clock_hz;
  d.total_compute_s = static_cast<double>(d.phases) * d.phase_compute_s;
  d.total_mem_s = offchip_bytes(cfg, dt) / spec.offchip_bw_bytes_per_s;
  d.phase_mem_s = d.total_mem_s / static_cast<double>(d.phases);
  // Double buffering overlaps all phases but one.
  d.total_s = std::max(d.total_compute_s, d.total_mem_s) +
              std::min(d.phase_compute_s, d.phase_mem_s);
  d.predicted_ops_per_s = cfg.shape.ops() / d.total_s;

  if (d.total_mem_s > d.total_compute_s)
    d.bound = Bound::Offchip;
  else
    d.bound = transfer > compute ? Bound::Plio : Bound::Compute;
  if (!port_plan(cfg, spec).feasible) d.bound = Bound::Plio;
  return d;
}

struct ThroughputBounds {
  double compute_bound = 0;
  double memory_bound = 0;

  [[nodiscard]] double roof() const { return std::min(compute_bound, memory_bound); }
};

/// Compute ceiling is the array peak, scaled down when a core's operands
/// take longer to arrive than to consume.
inline ThroughputBounds throughput_upper_bounds(const MappingConfig& cfg,
                                                const PlatformSpec& spec) {
  const auto& dt = spec.dtype(cfg.shape.dtype);
  ThroughputBounds b;
  b.compute_bound = peak_throughput(spec, dt, cfg.array.cores()) *
                    std::min(1.0, core_ctc(cfg.tile, dt, spec));
  b.memory_bound = spec.offchip_bw_bytes_per_s * onchip_ctc(cfg, dt);
  return b;
}

}  // namespace acapmm

#pragma once

// PL -> array port allocation. Each physical input stream combines
//   - broadcast: one LHS tile goes to bf_lhs columns at once (one RHS tile
//     to bf_rhs column groups), and
//   - packet switching: the stream time-multiplexes up to p tiles, one per
//     transfer step, while the destination cores compute.
//
// Chains (the A*C reduction columns) are numbered a*C + c and packed onto
// physical array columns, rows/B chains per column.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acapmm/mapping.hpp"
#include "acapmm/platform.hpp"

namespace acapmm {

enum class StreamKind { Lhs, Rhs, Out };

inline std::string_view to_string(StreamKind k) {
  switch (k) {
    case StreamKind::Lhs: return "lhs";
    case StreamKind::Rhs: return "rhs";
    case StreamKind::Out: return "out";
  }
  return "?";
}

inline std::optional<StreamKind> parse_stream_kind(std::string_view s) {
  if (s == "lhs") return StreamKind::Lhs;
  if (s == "rhs") return StreamKind::Rhs;
  if (s == "out") return StreamKind::Out;
  return std::nullopt;
}

/// One physical port. `tiles` are operand-tile indices within one BATCH
/// (LHS a*B+b, RHS c*B+b, output chain index); `chains` are the reduction
/// chains the stream reaches.
struct Stream {
  StreamKind kind = StreamKind::Lhs;
  std::int64_t broadcast_group = 0;
  std::int64_t packet_group = 0;
  std::vector<std::int64_t> tiles;
  std::vector<std::int64_t> chains;

  bool operator==(const Stream&) const = default;
};

struct PortPlan {
  std::int64_t packet_factor = 1;
  std::int64_t lhs_in_ports = 0;
  std::int64_t rhs_in_ports = 0;
  std::int64_t out_ports = 0;
  std::int64_t total_in = 0;
  std::int64_t total_out = 0;
  // PL-side channel demand vs. capacity, bytes/s; capacity 0 means unchecked.
  double pl_demand_bytes_per_s = 0;
  double pl_capacity_bytes_per_s = 0;
  bool feasible = false;
  std::vector<Stream> streams;

  bool operator==(const PortPlan&) const = default;
};

struct CongestionReport {
  std::int64_t horizontal_segments = 0;
  std::int64_t max_segments_per_boundary = 0;
  bool feasible = false;
  std::vector<std::int64_t> entry_columns;

  bool operator==(const CongestionReport&) const = default;
};

/// How many destinations one port can serve without starving any of them.
inline std::int64_t packet_factor(const MappingConfig& cfg,
                                  const PlatformSpec& spec) {
  const auto& dt = spec.dtype(cfg.shape.dtype);
  const auto by_ctc =
      static_cast<std::int64_t>(std::floor(core_ctc(cfg.tile, dt, spec)));
  const auto p = std::min({by_ctc, spec.max_packet_factor, cfg.array.B});
  return std::max<std::int64_t>(1, p);
}

namespace detail {

inline std::vector<std::int64_t> range_slice(std::int64_t first,
                                             std::int64_t last_excl) {
  std::vector<std::int64_t> v;
  for (auto i = first; i < last_excl; ++i) v.push_back(i);
  return v;
}

}  // namespace detail

/// Streams in port order: LHS (broadcast group major), RHS, then outputs.
inline std::vector<Stream> plan_streams(const MappingConfig& cfg,
                                        std::int64_t p) {
  const auto [A, B, C] = cfg.array;
  std::vector<Stream> out;

  const auto lhs_tiles = A * B;
  for (std::int64_t g = 0; g < C / cfg.bf_lhs; ++g) {
    for (std::int64_t pg = 0; pg < ceil_div(lhs_tiles, p); ++pg) {
      Stream s{StreamKind::Lhs, g, pg,
               detail::range_slice(pg * p, std::min(lhs_tiles, (pg + 1) * p)),
               {}};
      std::vector<std::int64_t> as;
      for (auto t : s.tiles)
        if (as.empty() || as.back() != t / B) as.push_back(t / B);
      for (auto a : as)
        for (auto c = g * cfg.bf_lhs; c < (g + 1) * cfg.bf_lhs; ++c)
          s.chains.push_back(a * C + c);
      out.push_back(std::move(s));
    }
  }

  const auto rhs_tiles = C * B;
  for (std::int64_t g = 0; g < A / cfg.bf_rhs; ++g) {
    for (std::int64_t pg = 0; pg < ceil_div(rhs_tiles, p); ++pg) {
      Stream s{StreamKind::Rhs, g, pg,
               detail::range_slice(pg * p, std::min(rhs_tiles, (pg + 1) * p)),
               {}};
      std::vector<std::int64_t> cs;
      for (auto t : s.tiles)
        if (cs.empty() || cs.back() != t / B) cs.push_back(t / B);
      for (auto a = g * cfg.bf_rhs; a < (g + 1) * cfg.bf_rhs; ++a)
        for (auto c : cs) s.chains.push_back(a * C + c);
      std::sort(s.chains.begin(), s.chains.end());
      out.push_back(std::move(s));
    }
  }

  const auto chains = A * C;
  for (std::int64_t pg = 0; pg < ceil_div(chains, p); ++pg) {
    auto ids = detail::range_slice(pg * p, std::min(chains, (pg + 1) * p));
    out.push_back(Stream{StreamKind::Out, 0, pg, ids, ids});
  }
  return out;
}

inline PortPlan port_plan(const MappingConfig& cfg, const PlatformSpec& spec) {
  const auto [A, B, C] = cfg.array;
  if (cfg.bf_lhs < 1 || C % cfg.bf_lhs != 0)
    throw ConfigError("bf_lhs=" + std::to_string(cfg.bf_lhs) +
                      " does not divide C=" + std::to_string(C));
  if (cfg.bf_rhs < 1 || A % cfg.bf_rhs != 0)
    throw ConfigError("bf_rhs=" + std::to_string(cfg.bf_rhs) +
                      " does not divide A=" + std::to_string(A));

  PortPlan plan;
  const auto p = packet_factor(cfg, spec);
  plan.packet_factor = p;
  plan.lhs_in_ports = ceil_div(A * B, p) * (C / cfg.bf_lhs);
  plan.rhs_in_ports = ceil_div(C * B, p) * (A / cfg.bf_rhs);
  plan.out_ports = ceil_div(A * C, p);
  plan.total_in = plan.lhs_in_ports + plan.rhs_in_ports;
  plan.total_out = plan.out_ports;
  plan.streams = plan_streams(cfg, p);

  // A port is busy p transfer steps out of every compute period.
  const auto& dt = spec.dtype(cfg.shape.dtype);
  const double compute = single_core_compute_cycles(cfg.tile, dt);
  const double transfer = single_core_transfer_cycles(cfg.tile, dt, spec);
  const double utilization =
      std::min(1.0, static_cast<double>(p) * transfer / compute);
  plan.pl_demand_bytes_per_s = utilization *
                               static_cast<double>(spec.channel_bytes_per_core_cycle) *
                               spec.core_clock_hz;
  plan.pl_capacity_bytes_per_s =
      static_cast<double>(spec.pl_channel_bytes_per_pl_cycle) * spec.pl_clock_hz;

  const bool pl_ok = spec.pl_channel_bytes_per_pl_cycle == 0 ||
                     plan.pl_demand_bytes_per_s <= plan.pl_capacity_bytes_per_s;
  plan.feasible = plan.total_in <= spec.total_in_channels() &&
                  plan.total_out <= spec.total_out_channels() && pl_ok;
  return plan;
}

// ---------------------------------------------------------------------------
// Placement and routing congestion
// ---------------------------------------------------------------------------

struct Placement {
  std::int64_t columns_needed = 0;
  // Physical columns one chain occupies (> 1 only when B exceeds the rows).
  std::int64_t columns_per_chain = 1;
  std::int64_t chains_per_column = 1;
  bool fits = false;

  [[nodiscard]] std::int64_t column_of(std::int64_t chain) const {
    return columns_per_chain > 1 ? chain * columns_per_chain
                                 : chain / chains_per_column;
  }
};

inline Placement placement(const ArrayDims& a, const PlatformSpec& spec) {
  Placement pl;
  if (a.B <= spec.rows) {
    pl.chains_per_column = spec.rows / a.B;
    pl.columns_needed = ceil_div(a.chains(), pl.chains_per_column);
  } else {
    pl.columns_per_chain = ceil_div(a.B, spec.rows);
    pl.columns_needed = a.chains() * pl.columns_per_chain;
  }
  pl.fits = a.cores() <= spec.cores() && pl.columns_needed <= spec.cols;
  return pl;
}

/// Horizontal trunk model: a stream enters the array at one interface
/// column and runs one east-west trunk covering its entry column and
/// every column it serves. `entry_columns`, when given, has one entry per
/// stream in plan order; otherwise each stream enters under the middle of
/// its served span.
inline CongestionReport congestion(
    const MappingConfig& cfg, const PlatformSpec& spec, const PortPlan& plan,
    const std::optional<std::vector<std::int64_t>>& entry_columns = std::nullopt) {
  const auto pl = placement(cfg.array, spec);
  const auto n = static_cast<std::int64_t>(plan.streams.size());
  if (entry_columns && static_cast<std::int64_t>(entry_columns->size()) != n)
    throw ConfigError("entry_columns has " +
                      std::to_string(entry_columns->size()) +
                      " entries for " + std::to_string(n) + " streams");

  const auto width = std::max(spec.cols, pl.columns_needed);
  std::vector<std::int64_t> crossing(static_cast<std::size_t>(width), 0);
  CongestionReport r;
  r.entry_columns.reserve(static_cast<std::size_t>(n));

  for (std::int64_t i = 0; i < n; ++i) {
    const auto& s = plan.streams[static_cast<std::size_t>(i)];
    std::int64_t lo = width;
    std::int64_t hi = -1;
    for (auto ch : s.chains) {
      const auto col = pl.column_of(ch);
      lo = std::min(lo, col);
      hi = std::max(hi, col + pl.columns_per_chain - 1);
    }
    std::int64_t entry = (lo + hi) / 2;
    if (entry_columns) {
      entry = (*entry_columns)[static_cast<std::size_t>(i)];
      if (entry < 0 || entry >= spec.cols)
        throw ConfigError("entry column " + std::to_string(entry) +
                          " out of range [0, " + std::to_string(spec.cols) + ")");
    }
    r.entry_columns.push_back(entry);
    lo = std::min(lo, entry);
    hi = std::max(hi, entry);
    r.horizontal_segments += hi - lo;
    for (auto x = lo; x < hi; ++x) ++crossing[static_cast<std::size_t>(x)];
  }
  for (auto c : crossing)
    r.max_segments_per_boundary = std::max(r.max_segments_per_boundary, c);
  r.feasible = r.max_segments_per_boundary <= spec.switch_ew_ports;
  return r;
}

inline CongestionReport congestion(
    const MappingConfig& cfg, const PlatformSpec& spec,
    const std::optional<std::vector<std::int64_t>>& entry_columns = std::nullopt) {
  return congestion(cfg, spec, port_plan(cfg, spec), entry_columns);
}

/// max_segments_per_boundary of congestion(cfg, spec) with default entry
/// columns, computed from chain ranges without materializing the streams.
/// Chain columns are monotone in the chain index, so each stream's served
/// span is fixed by its first and last chain, and the default entry lies
/// inside that span.
inline std::int64_t max_trunk_crossings(const MappingConfig& cfg,
                                        const PlatformSpec& spec,
                                        std::int64_t p) {
  const auto [A, B, C] = cfg.array;
  const auto pl = placement(cfg.array, spec);
  const auto width = std::max(spec.cols, pl.columns_needed);
  std::vector<std::int64_t> diff(static_cast<std::size_t>(width) + 1, 0);
  auto trunk = [&](std::int64_t first_chain, std::int64_t last_chain) {
    const auto lo = pl.column_of(first_chain);
    const auto hi = pl.column_of(last_chain) + pl.columns_per_chain - 1;
    ++diff[static_cast<std::size_t>(lo)];
    --diff[static_cast<std::size_t>(hi)];
  };
  const auto lhs_tiles = A * B;
  for (std::int64_t g = 0; g < C / cfg.bf_lhs; ++g)
    for (std::int64_t t0 = 0; t0 < lhs_tiles; t0 += p) {
      const auto t1 = std::min(lhs_tiles, t0 + p) - 1;
      trunk((t0 / B) * C + g * cfg.bf_lhs, (t1 / B) * C + (g + 1) * cfg.bf_lhs - 1);
    }
  const auto rhs_tiles = C * B;
  for (std::int64_t g = 0; g < A / cfg.bf_rhs; ++g)
    for (std::int64_t t0 = 0; t0 < rhs_tiles; t0 += p) {
      const auto t1 = std::min(rhs_tiles, t0 + p) - 1;
      trunk(g * cfg.bf_rhs * C + t0 / B, ((g + 1) * cfg.bf_rhs - 1) * C + t1 / B);
    }
  const auto chains = A * C;
  for (std::int64_t c0 = 0; c0 < chains; c0 += p)
    trunk(c0, std::min(chains, c0 + p) - 1);

  std::int64_t run = 0, best = 0;
  for (std::int64_t x = 0; x < width; ++x) {
    run += diff[static_cast<std::size_t>(x)];
    best = std::max(best, run);
  }
  return best;
}

}  // namespace acapmm

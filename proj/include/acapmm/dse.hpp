#pragma once

// Design-space exploration: exhaustive enumeration of tile / array / batch
// / broadcast choices, feasibility filtering, and argmax of the predicted
// throughput. Candidates whose roofline ceiling cannot beat the current
// k-th best are skipped without a full timing evaluation; this never
// changes the result because the prediction is bounded by that ceiling.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "acapmm/interconnect.hpp"
#include "acapmm/mapping.hpp"
#include "acapmm/pipesim.hpp"
#include "acapmm/platform.hpp"

namespace acapmm {

// ---------------------------------------------------------------------------
// Feasibility
// ---------------------------------------------------------------------------

enum class Constraint { Tiling, ArraySize, LocalMemory, PlBuffer, Ports, Congestion };

inline std::string_view to_string(Constraint c) {
  switch (c) {
    case Constraint::Tiling: return "tiling";
    case Constraint::ArraySize: return "array size";
    case Constraint::LocalMemory: return "local memory";
    case Constraint::PlBuffer: return "pl buffer";
    case Constraint::Ports: return "ports";
    case Constraint::Congestion: return "congestion";
  }
  return "?";
}

struct Violation {
  Constraint constraint = Constraint::Tiling;
  std::string detail;
  bool operator==(const Violation&) const = default;
};

struct Feasibility {
  std::vector<Violation> violations;

  [[nodiscard]] bool ok() const { return violations.empty(); }
  [[nodiscard]] bool violates(Constraint c) const {
    return std::any_of(violations.begin(), violations.end(),
                       [c](const Violation& v) { return v.constraint == c; });
  }
  bool operator==(const Feasibility&) const = default;
};

/// Runs every check in order (tiling, array size, local memory, PL buffer,
/// ports, congestion). A tiling failure stops the rest.
inline Feasibility feasible(const MappingConfig& cfg, const PlatformSpec& spec,
                            bool strict_memory = true) {
  Feasibility f;
  try {
    validate(cfg, spec);
  } catch (const ConfigError& e) {
    f.violations.push_back({Constraint::Tiling, e.what()});
    return f;
  }
  const auto& dt = spec.dtype(cfg.shape.dtype);

  const auto pl = placement(cfg.array, spec);
  if (!pl.fits)
    f.violations.push_back(
        {Constraint::ArraySize,
         std::to_string(cfg.array.cores()) + " cores in " +
             std::to_string(pl.columns_needed) + " columns on a " +
             std::to_string(spec.rows) + "x" + std::to_string(spec.cols) +
             " array"});

  const auto local = core_local_bytes(cfg.tile, dt);
  const auto cap = memory_cap(spec, strict_memory);
  if (local > cap)
    f.violations.push_back({Constraint::LocalMemory,
                            std::to_string(local) + " bytes per core > " +
                                std::to_string(cap)});

  const auto buf = pl_buffer_bytes_used(cfg, dt);
  if (buf > spec.pl_buffer_bytes)
    f.violations.push_back({Constraint::PlBuffer,
                            std::to_string(buf) + " bytes > " +
                                std::to_string(spec.pl_buffer_bytes)});

  const auto ports = port_plan(cfg, spec);
  if (!ports.feasible) {
    std::string d = std::to_string(ports.total_in) + "/" +
                    std::to_string(spec.total_in_channels()) + " in, " +
                    std::to_string(ports.total_out) + "/" +
                    std::to_string(spec.total_out_channels()) + " out";
    if (ports.pl_capacity_bytes_per_s > 0 &&
        ports.pl_demand_bytes_per_s > ports.pl_capacity_bytes_per_s)
      d += ", PL-side rate exceeded";
    f.violations.push_back({Constraint::Ports, d});
  }

  const auto cong = congestion(cfg, spec, ports);
  if (!cong.feasible)
    f.violations.push_back(
        {Constraint::Congestion,
         std::to_string(cong.max_segments_per_boundary) +
             " trunks cross one column boundary (limit " +
             std::to_string(spec.switch_ew_ports) + ")"});
  return f;
}

/// Bit (1 << Constraint) set for each failed check; same verdicts as
/// feasible() but without building streams or messages.
inline unsigned violation_mask(const MappingConfig& cfg, const PlatformSpec& spec,
                               bool strict_memory = true) {
  auto bit = [](Constraint c) { return 1u << static_cast<unsigned>(c); };
  if (config_error(cfg, spec)) return bit(Constraint::Tiling);
  const auto& dt = spec.dtype(cfg.shape.dtype);
  unsigned m = 0;
  if (!placement(cfg.array, spec).fits) m |= bit(Constraint::ArraySize);
  if (core_local_bytes(cfg.tile, dt) > memory_cap(spec, strict_memory))
    m |= bit(Constraint::LocalMemory);
  if (pl_buffer_bytes_used(cfg, dt) > spec.pl_buffer_bytes)
    m |= bit(Constraint::PlBuffer);

  const auto [A, B, C] = cfg.array;
  const auto p = packet_factor(cfg, spec);
  const auto in = ceil_div(A * B, p) * (C / cfg.bf_lhs) +
                  ceil_div(C * B, p) * (A / cfg.bf_rhs);
  const auto out = ceil_div(A * C, p);
  bool ports_ok = in <= spec.total_in_channels() && out <= spec.total_out_channels();
  if (ports_ok && spec.pl_channel_bytes_per_pl_cycle > 0) {
    const auto plan = port_plan(cfg, spec);
    ports_ok = plan.feasible;
  }
  if (!ports_ok) m |= bit(Constraint::Ports);
  if (max_trunk_crossings(cfg, spec, p) > spec.switch_ew_ports)
    m |= bit(Constraint::Congestion);
  return m;
}

// ---------------------------------------------------------------------------
// Search space
// ---------------------------------------------------------------------------

struct SearchLimits {
  std::vector<TileDims> tiles;
  std::vector<std::int64_t> a_values, b_values, c_values;
  std::vector<std::int64_t> x_values, y_values, z_values;
  bool strict_memory = true;
  // Refuse spaces larger than this; 0 means no limit.
  std::int64_t max_candidates = 0;
  std::size_t top_k = 5;
  unsigned threads = 1;
};

inline std::vector<std::int64_t> iota_values(std::int64_t max) {
  std::vector<std::int64_t> v;
  for (std::int64_t i = 1; i <= max; ++i) v.push_back(i);
  return v;
}

inline std::vector<std::int64_t> divisors(std::int64_t n) {
  std::vector<std::int64_t> v;
  for (std::int64_t d = 1; d <= n; ++d)
    if (n % d == 0) v.push_back(d);
  return v;
}

/// Tiles built from power-of-two multiples of the atomic block, up to
/// `max_extent` per dimension, that fit the core memory cap.
inline std::vector<TileDims> candidate_tiles(const PlatformSpec& spec, DType t,
                                             bool strict_memory,
                                             std::int64_t max_extent = 128) {
  const auto& dt = spec.dtype(t);
  const auto at = atomic_dims(dt);
  auto steps = [&](std::int64_t base) {
    std::vector<std::int64_t> v;
    for (auto x = base; x <= std::max(base, max_extent); x *= 2) v.push_back(x);
    return v;
  };
  std::vector<TileDims> out;
  for (auto ti : steps(at.PI))
    for (auto tj : steps(at.PJ))
      for (auto tk : steps(at.PK)) {
        TileDims td{ti, tj, tk};
        if (core_local_bytes(td, dt) <= memory_cap(spec, strict_memory))
          out.push_back(td);
      }
  return out;
}

inline std::int64_t count_candidates(const SearchLimits& l) {
  std::int64_t lhs_pairs = 0;
  for (auto a : l.a_values)
    for (auto c : l.c_values)
      lhs_pairs += static_cast<std::int64_t>(divisors(c).size() * divisors(a).size());
  return static_cast<std::int64_t>(l.tiles.size() * l.b_values.size() *
                                   l.x_values.size() * l.y_values.size() *
                                   l.z_values.size()) *
         lhs_pairs;
}

/// Raw cross product in enumeration order; `fn(index, cfg)`. Only outer
/// (tile, A, B, C) tuples with `outer % stride == offset` are visited.
inline void for_each_candidate(
    const MMShape& shape, const SearchLimits& l,
    const std::function<void(std::int64_t, const MappingConfig&)>& fn,
    std::size_t offset = 0, std::size_t stride = 1) {
  std::int64_t index = 0;
  std::size_t outer = 0;
  MappingConfig cfg;
  cfg.shape = shape;
  for (const auto& tile : l.tiles)
    for (auto A : l.a_values)
      for (auto B : l.b_values)
        for (auto C : l.c_values) {
          const auto inner = static_cast<std::int64_t>(
              l.x_values.size() * l.y_values.size() * l.z_values.size() *
              divisors(C).size() * divisors(A).size());
          if (outer++ % stride != offset) {
            index += inner;
            continue;
          }
          cfg.tile = tile;
          cfg.array = {A, B, C};
          const auto bl = divisors(C);
          const auto br = divisors(A);
          for (auto X : l.x_values)
            for (auto Y : l.y_values)
              for (auto Z : l.z_values)
                for (auto fl : bl)
                  for (auto fr : br) {
                    cfg.batch = {X, Y, Z};
                    cfg.bf_lhs = fl;
                    cfg.bf_rhs = fr;
                    fn(index++, cfg);
                  }
        }
}

/// Feasible configs in enumeration order.
inline std::vector<MappingConfig> enumerate(const MMShape& shape,
                                            const PlatformSpec& spec,
                                            const SearchLimits& limits) {
  std::vector<MappingConfig> out;
  for_each_candidate(shape, limits, [&](std::int64_t, const MappingConfig& c) {
    if (feasible(c, spec, limits.strict_memory).ok()) out.push_back(c);
  });
  return out;
}

/// Default limits for searches over `t` on `spec`.
inline SearchLimits default_limits(const PlatformSpec& spec, DType t,
                                   bool strict_memory = true) {
  SearchLimits l;
  l.strict_memory = strict_memory;
  l.tiles = candidate_tiles(spec, t, strict_memory, 64);
  auto upto = [](std::vector<std::int64_t> v, std::int64_t max) {
    std::erase_if(v, [max](std::int64_t x) { return x > max; });
    return v;
  };
  l.a_values = upto({1, 2, 3, 4, 6, 8, 12, 16}, spec.cols * spec.rows);
  l.b_values = upto({1, 2, 4, 8}, spec.rows * spec.cols);
  l.c_values = upto({1, 2, 4, 8, 12, 16}, spec.cols * spec.rows);
  l.x_values = {1, 2, 4, 8};
  l.y_values = {1, 2, 4, 8};
  l.z_values = {1, 2, 4, 8};
  return l;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

inline MappingConfig with_shape(MappingConfig cfg, const MMShape& shape) {
  cfg.shape = shape;
  return cfg;
}

struct ModelEvaluation {
  std::vector<DesignTiming> per_layer;
  double total_ops = 0;
  double total_s = 0;
  double aggregate_ops_per_s = 0;
};

/// Runs every layer back to back on one shared design.
inline ModelEvaluation evaluate_model(const std::vector<MMShape>& layers,
                                      const MappingConfig& design,
                                      const PlatformSpec& spec) {
  if (layers.empty()) throw ConfigError("model has no layers");
  ModelEvaluation ev;
  for (const auto& l : layers) {
    auto t = design_timing(with_shape(design, l), spec);
    ev.total_ops += l.ops();
    ev.total_s += t.total_s;
    ev.per_layer.push_back(t);
  }
  ev.aggregate_ops_per_s = ev.total_ops / ev.total_s;
  return ev;
}

struct RankedConfig {
  MappingConfig config;
  double score = 0;  // predicted ops/s (aggregate over layers)
  std::int64_t cores = 0;
  std::int64_t pl_buffer_bytes = 0;
};

/// Strict weak order: higher score, then fewer cores, then smaller PL
/// buffer, then the lexicographically smallest config.
inline bool ranks_before(const RankedConfig& a, const RankedConfig& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.cores != b.cores) return a.cores < b.cores;
  if (a.pl_buffer_bytes != b.pl_buffer_bytes)
    return a.pl_buffer_bytes < b.pl_buffer_bytes;
  return a.config.key() < b.config.key();
}

struct NearestInfeasible {
  MappingConfig config;
  std::vector<Violation> violations;
  std::int64_t index = 0;
};

struct DseResult {
  bool found = false;
  MappingConfig best;
  DerivedMetrics metrics;
  PortPlan ports;
  CongestionReport congestion;
  DesignTiming timing;  // first layer
  ModelEvaluation model;
  std::vector<RankedConfig> ranked_alternatives;
  std::int64_t candidates_considered = 0;
  std::int64_t candidates_feasible = 0;
  std::int64_t candidates_evaluated = 0;
  std::optional<NearestInfeasible> nearest;
};

namespace detail {

struct SearchPartial {
  std::vector<RankedConfig> top;
  std::optional<NearestInfeasible> nearest;
  std::int64_t considered = 0;
  std::int64_t feasible = 0;
  std::int64_t evaluated = 0;
};

inline void offer(std::vector<RankedConfig>& top, RankedConfig r, std::size_t k) {
  auto pos = std::lower_bound(top.begin(), top.end(), r, ranks_before);
  top.insert(pos, std::move(r));
  if (top.size() > k) top.pop_back();
}

inline SearchPartial search_slice(const std::vector<MMShape>& layers,
                                  const PlatformSpec& spec,
                                  const SearchLimits& limits, std::size_t offset,
                                  std::size_t stride) {
  SearchPartial part;
  const std::size_t k = std::max<std::size_t>(1, limits.top_k);
  const auto pl_bit = 1u << static_cast<unsigned>(Constraint::PlBuffer);
  const auto tiling_bit = 1u << static_cast<unsigned>(Constraint::Tiling);
  const bool check_dtype = spec.has_dtype(layers.front().dtype);
  double ops = 0;
  for (const auto& l : layers) ops += l.ops();

  // Same order and indices as for_each_candidate; checks that ignore the
  // batch counts run once per (tile, A, B, C, bf_lhs, bf_rhs).
  std::int64_t index = 0;
  std::size_t outer = 0;
  MappingConfig cfg;
  cfg.shape = layers.front();
  std::vector<unsigned> fixed;
  for (const auto& tile : limits.tiles)
    for (auto A : limits.a_values)
      for (auto B : limits.b_values)
        for (auto C : limits.c_values) {
          const auto bl = divisors(C);
          const auto br = divisors(A);
          const auto inner = static_cast<std::int64_t>(
              limits.x_values.size() * limits.y_values.size() *
              limits.z_values.size() * bl.size() * br.size());
          if (outer++ % stride != offset) {
            index += inner;
            continue;
          }
          cfg.tile = tile;
          cfg.array = {A, B, C};
          cfg.batch = {1, 1, 1};
          fixed.clear();
          for (auto fl : bl)
            for (auto fr : br) {
              cfg.bf_lhs = fl;
              cfg.bf_rhs = fr;
              fixed.push_back(violation_mask(cfg, spec, limits.strict_memory) &
                              ~pl_bit);
            }
          for (auto X : limits.x_values)
            for (auto Y : limits.y_values)
              for (auto Z : limits.z_values) {
                cfg.batch = {X, Y, Z};
                const bool batch_ok = X >= 1 && Y >= 1 && Z >= 1;
                std::size_t f = 0;
                for (auto fl : bl)
                  for (auto fr : br) {
                    const auto cur = index++;
                    const auto base = fixed[f++];
                    cfg.bf_lhs = fl;
                    cfg.bf_rhs = fr;
                    ++part.considered;
                    unsigned mask = tiling_bit;
                    if (batch_ok && check_dtype && !(base & tiling_bit)) {
                      mask = base;
                      const auto& dt = spec.dtype(cfg.shape.dtype);
                      if (pl_buffer_bytes_used(cfg, dt) > spec.pl_buffer_bytes)
                        mask |= pl_bit;
                    }
                    if (mask != 0) {
                      // Diagnostics only matter while nothing here is feasible.
                      if (part.feasible == 0 &&
                          (!part.nearest ||
                           static_cast<std::size_t>(std::popcount(mask)) <
                               part.nearest->violations.size()))
                        part.nearest = NearestInfeasible{
                            cfg, feasible(cfg, spec, limits.strict_memory).violations,
                            cur};
                      continue;
                    }
                    ++part.feasible;
                    const auto& dt = spec.dtype(cfg.shape.dtype);
                    RankedConfig r{cfg, 0, cfg.array.cores(),
                                   pl_buffer_bytes_used(cfg, dt)};
                    if (part.top.size() == k) {
                      double floor_s = 0;
                      for (const auto& l : layers)
                        floor_s += l.ops() /
                                   throughput_upper_bounds(with_shape(cfg, l), spec).roof();
                      // Slack keeps exact ties from being pruned by rounding.
                      if (ops / floor_s * (1 + 1e-9) < part.top.back().score) continue;
                    }
                    ++part.evaluated;
                    r.score = evaluate_model(layers, cfg, spec).aggregate_ops_per_s;
                    offer(part.top, std::move(r), k);
                  }
              }
        }
  return part;
}

}  // namespace detail

/// Best shared design for a sequence of layers (all of one data type).
inline DseResult search_model(const std::vector<MMShape>& layers,
                              const PlatformSpec& spec,
                              const SearchLimits& limits) {
  if (layers.empty()) throw ConfigError("model has no layers");
  for (const auto& l : layers) {
    if (l.dtype != layers.front().dtype)
      throw ConfigError("all layers must share one data type");
    if (l.M < 1 || l.K < 1 || l.N < 1)
      throw ConfigError("layer dims must be >= 1");
  }
  (void)spec.dtype(layers.front().dtype);  // throws if undefined
  if (limits.max_candidates > 0 && count_candidates(limits) > limits.max_candidates)
    throw ConfigError("search space has " + std::to_string(count_candidates(limits)) +
                      " candidates, over the budget of " +
                      std::to_string(limits.max_candidates));

  const unsigned threads = std::max(1u, limits.threads);
  std::vector<detail::SearchPartial> parts;
  if (threads == 1) {
    parts.push_back(detail::search_slice(layers, spec, limits, 0, 1));
  } else {
    std::vector<std::future<detail::SearchPartial>> futs;
    for (unsigned w = 0; w < threads; ++w)
      futs.push_back(std::async(std::launch::async, [&, w] {
        return detail::search_slice(layers, spec, limits, w, threads);
      }));
    for (auto& f : futs) parts.push_back(f.get());
  }

  DseResult res;
  const std::size_t k = std::max<std::size_t>(1, limits.top_k);
  for (auto& p : parts) {
    res.candidates_considered += p.considered;
    res.candidates_feasible += p.feasible;
    res.candidates_evaluated += p.evaluated;
    for (auto& r : p.top) detail::offer(res.ranked_alternatives, r, k);
    if (p.nearest &&
        (!res.nearest ||
         p.nearest->violations.size() < res.nearest->violations.size() ||
         (p.nearest->violations.size() == res.nearest->violations.size() &&
          p.nearest->index < res.nearest->index)))
      res.nearest = p.nearest;
  }
  if (res.ranked_alternatives.empty()) return res;

  res.found = true;
  res.nearest.reset();
  res.best = res.ranked_alternatives.front().config;
  res.metrics = derived_metrics(res.best, spec);
  res.ports = port_plan(res.best, spec);
  res.congestion = congestion(res.best, spec, res.ports);
  res.model = evaluate_model(layers, res.best, spec);
  res.timing = res.model.per_layer.front();
  return res;
}

inline DseResult search(const MMShape& shape, const PlatformSpec& spec,
                        const SearchLimits& limits) {
  return search_model({shape}, spec, limits);
}

}  // namespace acapmm

#pragma once

// Four-level tiling of C[M][N] += A[M][K] * B[K][N]:
//
//   outer   m.0/n.0/k.0   off-chip -> PL buffer   (k.0 innermost)
//   batch   m.1/n.1/k.1   X, Z, Y batches reused from the PL buffer
//   array   m.2/n.2/k.2   A x C columns, each a B-deep reduction chain
//   core    TI x TJ x TK  one TILE per core, built from atomic blocks
//
// Everything here is a pure function of the config and the platform.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>

#include "acapmm/platform.hpp"

namespace acapmm {

struct MMShape {
  std::int64_t M = 1;
  std::int64_t K = 1;
  std::int64_t N = 1;
  DType dtype = DType::FP32;

  [[nodiscard]] double ops() const {
    return 2.0 * static_cast<double>(M) * static_cast<double>(N) *
           static_cast<double>(K);
  }
  bool operator==(const MMShape&) const = default;
};

struct TileDims {
  std::int64_t TI = 0;
  std::int64_t TJ = 0;
  std::int64_t TK = 0;
  auto operator<=>(const TileDims&) const = default;
};

struct ArrayDims {
  std::int64_t A = 1;
  std::int64_t B = 1;
  std::int64_t C = 1;

  [[nodiscard]] std::int64_t cores() const { return A * B * C; }
  [[nodiscard]] std::int64_t chains() const { return A * C; }
  auto operator<=>(const ArrayDims&) const = default;
};

struct BatchDims {
  std::int64_t X = 1;
  std::int64_t Y = 1;
  std::int64_t Z = 1;

  [[nodiscard]] std::int64_t count() const { return X * Y * Z; }
  auto operator<=>(const BatchDims&) const = default;
};

struct MappingConfig {
  MMShape shape;
  TileDims tile;
  ArrayDims array;
  BatchDims batch;
  std::int64_t bf_lhs = 1;
  std::int64_t bf_rhs = 1;

  bool operator==(const MappingConfig&) const = default;

  // Ordering used for the final DSE tie-break; ignores the shape.
  [[nodiscard]] auto key() const {
    return std::make_tuple(tile.TI, tile.TJ, tile.TK, array.A, array.B,
                           array.C, batch.X, batch.Y, batch.Z, bf_lhs, bf_rhs);
  }
};

struct DerivedMetrics {
  double compute_cycles = 0;
  double transfer_cycles = 0;
  double ctc = 0;
  std::int64_t core_local_bytes = 0;
  std::int64_t pl_buffer_bytes_used = 0;
  std::int64_t cores = 0;
  double onchip_ctc = 0;

  bool operator==(const DerivedMetrics&) const = default;
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return (a + b - 1) / b;
}

// ---------------------------------------------------------------------------
// Single core
// ---------------------------------------------------------------------------

/// Packed block of 16 vector MAC instructions. FP32 is 8x2x8; wider MAC
/// units double the smallest extent (PK, then PI, then PJ on ties) until
/// the block holds 16 x macs_per_cycle MACs.
inline AtomicDims atomic_dims(const DataTypeSpec& dt) {
  if (dt.atomic) return *dt.atomic;
  constexpr std::int64_t kPackedInstructions = 16;
  AtomicDims d{8, 2, 8};
  if (dt.macs_per_cycle_per_core % 8 != 0) {
    // Not a whole number of 8-lane instructions; fall back to a flat block.
    return AtomicDims{1, 1, kPackedInstructions * dt.macs_per_cycle_per_core};
  }
  std::int64_t factor = dt.macs_per_cycle_per_core / 8;
  while (factor % 2 == 0 && factor > 1) {
    // Doubling priority on ties: PK, PI, PJ.
    std::int64_t* dims[] = {&d.PK, &d.PI, &d.PJ};
    std::int64_t* smallest = dims[0];
    for (auto* p : dims)
      if (*p < *smallest) smallest = p;
    *smallest *= 2;
    factor /= 2;
  }
  d.PK *= factor;
  return d;
}

inline double single_core_compute_cycles(const TileDims& t,
                                         const DataTypeSpec& dt) {
  return static_cast<double>(t.TI * t.TJ * t.TK) /
         static_cast<double>(dt.macs_per_cycle_per_core);
}

/// LHS and RHS arrive on separate channels; the larger operand sets the step.
inline double single_core_transfer_cycles(const TileDims& t,
                                          const DataTypeSpec& dt,
                                          const PlatformSpec& spec) {
  const auto elems = std::max(t.TI * t.TK, t.TK * t.TJ);
  return static_cast<double>(elems * dt.bytes_per_element) /
         static_cast<double>(spec.channel_bytes_per_core_cycle);
}

inline double core_ctc(const TileDims& t, const DataTypeSpec& dt,
                       const PlatformSpec& spec) {
  return single_core_compute_cycles(t, dt) /
         single_core_transfer_cycles(t, dt, spec);
}

/// Ping-pong LHS, RHS and output buffers in core-local memory.
inline std::int64_t core_local_bytes(const TileDims& t, const DataTypeSpec& dt) {
  const auto b = dt.bytes_per_element;
  return 2 * (t.TI * t.TK + t.TK * t.TJ) * b + 2 * (t.TI * t.TJ) * b;
}

inline std::int64_t memory_cap(const PlatformSpec& spec, bool strict) {
  return strict ? spec.local_mem_bytes : spec.neighbor_mem_bytes;
}

// ---------------------------------------------------------------------------
// Design level
// ---------------------------------------------------------------------------

/// Extents of one outer (m.0, n.0, k.0) block.
struct BlockExtents {
  std::int64_t m = 0;
  std::int64_t k = 0;
  std::int64_t n = 0;
};

inline BlockExtents block_extents(const MappingConfig& c) {
  return {c.batch.X * c.array.A * c.tile.TI, c.batch.Y * c.array.B * c.tile.TK,
          c.batch.Z * c.array.C * c.tile.TJ};
}

/// Problem shape zero-padded up to whole outer blocks.
inline MMShape padded_shape(const MappingConfig& c) {
  const auto b = block_extents(c);
  MMShape p = c.shape;
  p.M = ceil_div(c.shape.M, b.m) * b.m;
  p.K = ceil_div(c.shape.K, b.k) * b.k;
  p.N = ceil_div(c.shape.N, b.n) * b.n;
  return p;
}

struct OuterTrips {
  std::int64_t m = 0;
  std::int64_t n = 0;
  std::int64_t k = 0;

  [[nodiscard]] std::int64_t phases() const { return m * n * k; }
};

inline OuterTrips outer_trips(const MappingConfig& c) {
  const auto b = block_extents(c);
  const auto p = padded_shape(c);
  return {p.M / b.m, p.N / b.n, p.K / b.k};
}

/// Double-buffered LHS, RHS and output regions for one outer block.
inline std::int64_t pl_buffer_bytes_used(const MappingConfig& c,
                                         const DataTypeSpec& dt) {
  const auto b = block_extents(c);
  return 2 * dt.bytes_per_element * (b.m * b.k + b.k * b.n + b.m * b.n);
}

/// Off-chip bytes for the whole (padded) problem. Operands stream in every
/// phase; the output leaves once per (m.0, n.0) since k.0 is innermost.
inline double offchip_bytes(const MappingConfig& c, const DataTypeSpec& dt) {
  const auto b = block_extents(c);
  const auto trips = outer_trips(c);
  const double e = static_cast<double>(dt.bytes_per_element);
  const double operands = static_cast<double>(trips.phases()) *
                          static_cast<double>(b.m * b.k + b.k * b.n) * e;
  const double output = static_cast<double>(trips.m * trips.n) *
                        static_cast<double>(b.m * b.n) * e;
  return operands + output;
}

/// Ops per off-chip byte, on the padded problem.
inline double onchip_ctc(const MappingConfig& c, const DataTypeSpec& dt) {
  return padded_shape(c).ops() / offchip_bytes(c, dt);
}

/// Structural checks a config must pass before any metric is meaningful.
/// Returns the first problem found, or nullopt.
inline std::optional<std::string> config_error(const MappingConfig& c,
                                               const PlatformSpec& spec) {
  const auto& s = c.shape;
  if (s.M < 1 || s.K < 1 || s.N < 1) return "problem dims M, K, N must be >= 1";
  if (!spec.has_dtype(s.dtype))
    return "platform '" + spec.name + "' does not define data type " +
           std::string(to_string(s.dtype));
  const auto& dt = spec.dtype(s.dtype);
  const auto& t = c.tile;
  if (t.TI < 1 || t.TJ < 1 || t.TK < 1) return "tile dims TI, TJ, TK must be >= 1";
  const auto at = atomic_dims(dt);
  if (t.TI % at.PI || t.TJ % at.PJ || t.TK % at.PK)
    return "tile " + std::to_string(t.TI) + "x" + std::to_string(t.TJ) + "x" +
           std::to_string(t.TK) + " is not a multiple of the atomic block " +
           std::to_string(at.PI) + "x" + std::to_string(at.PJ) + "x" +
           std::to_string(at.PK);
  const auto& a = c.array;
  if (a.A < 1 || a.B < 1 || a.C < 1) return "array dims A, B, C must be >= 1";
  const auto& b = c.batch;
  if (b.X < 1 || b.Y < 1 || b.Z < 1) return "batch dims X, Y, Z must be >= 1";
  if (c.bf_lhs < 1 || a.C % c.bf_lhs != 0)
    return "bf_lhs=" + std::to_string(c.bf_lhs) + " does not divide C=" +
           std::to_string(a.C);
  if (c.bf_rhs < 1 || a.A % c.bf_rhs != 0)
    return "bf_rhs=" + std::to_string(c.bf_rhs) + " does not divide A=" +
           std::to_string(a.A);
  return std::nullopt;
}

/// Throws ConfigError with the message from config_error().
inline void validate(const MappingConfig& c, const PlatformSpec& spec) {
  if (auto e = config_error(c, spec)) throw ConfigError(*e);
}

inline DerivedMetrics derived_metrics(const MappingConfig& c,
                                      const PlatformSpec& spec) {
  const auto& dt = spec.dtype(c.shape.dtype);
  DerivedMetrics m;
  m.compute_cycles = single_core_compute_cycles(c.tile, dt);
  m.transfer_cycles = single_core_transfer_cycles(c.tile, dt, spec);
  m.ctc = m.compute_cycles / m.transfer_cycles;
  m.core_local_bytes = core_local_bytes(c.tile, dt);
  m.pl_buffer_bytes_used = pl_buffer_bytes_used(c, dt);
  m.cores = c.array.cores();
  m.onchip_ctc = onchip_ctc(c, dt);
  return m;
}

}  // namespace acapmm

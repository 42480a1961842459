#pragma once

// Transfer orders for the tiles of one reduction chain. A tile is named by
// (batch, id) where id is the core's position in the chain.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acapmm/platform.hpp"

namespace acapmm {

struct TileRef {
  std::int64_t batch = 0;
  std::int64_t id = 0;

  auto operator<=>(const TileRef&) const = default;
};

struct TransferOrder {
  std::int64_t num_batches = 0;
  std::int64_t depth = 0;
  std::vector<TileRef> sequence;

  bool operator==(const TransferOrder&) const = default;
};

namespace detail {
inline void check_dims(std::int64_t num_batches, std::int64_t depth) {
  if (num_batches < 1 || depth < 1)
    throw ConfigError("num_batches and depth must be >= 1");
}
}  // namespace detail

/// (batch, id) ascending.
inline TransferOrder lex_order(std::int64_t num_batches, std::int64_t depth) {
  detail::check_dims(num_batches, depth);
  TransferOrder o{num_batches, depth, {}};
  o.sequence.reserve(static_cast<std::size_t>(num_batches * depth));
  for (std::int64_t b = 0; b < num_batches; ++b)
    for (std::int64_t i = 0; i < depth; ++i) o.sequence.push_back({b, i});
  return o;
}

/// Antidiagonals d = batch + id in ascending order, id ascending within a
/// diagonal. Each diagonal is exactly what the chain consumes in the next
/// compute period.
inline TransferOrder zigzag_order(std::int64_t num_batches, std::int64_t depth) {
  detail::check_dims(num_batches, depth);
  TransferOrder o{num_batches, depth, {}};
  o.sequence.reserve(static_cast<std::size_t>(num_batches * depth));
  for (std::int64_t d = 0; d < num_batches + depth - 1; ++d)
    for (std::int64_t i = 0; i < depth; ++i) {
      const auto b = d - i;
      if (b >= 0 && b < num_batches) o.sequence.push_back({b, i});
    }
  return o;
}

inline std::string to_string(const TileRef& t) {
  return "(" + std::to_string(t.batch) + "," + std::to_string(t.id) + ")";
}

/// nullopt if `order` is a permutation of the batch x depth grid, else a
/// description of the first problem found.
inline std::optional<std::string> validate_order(const TransferOrder& order) {
  if (order.num_batches < 1 || order.depth < 1)
    return "num_batches and depth must be >= 1";
  std::vector<bool> seen(static_cast<std::size_t>(order.num_batches * order.depth));
  for (const auto& t : order.sequence) {
    if (t.batch < 0 || t.batch >= order.num_batches || t.id < 0 ||
        t.id >= order.depth)
      return "tile " + to_string(t) + " out of range";
    auto idx = static_cast<std::size_t>(t.batch * order.depth + t.id);
    if (seen[idx]) return "duplicate tile " + to_string(t);
    seen[idx] = true;
  }
  for (std::int64_t b = 0; b < order.num_batches; ++b)
    for (std::int64_t i = 0; i < order.depth; ++i)
      if (!seen[static_cast<std::size_t>(b * order.depth + i)])
        return "missing tile " + to_string(TileRef{b, i});
  return std::nullopt;
}

}  // namespace acapmm

#pragma once

// Machine description for a vector-core array fed from programmable-logic
// buffers, plus the roofline arithmetic used everywhere else.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace acapmm {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DType { FP32, INT16, INT8 };

inline std::string_view to_string(DType t) {
  switch (t) {
    case DType::FP32: return "FP32";
    case DType::INT16: return "INT16";
    case DType::INT8: return "INT8";
  }
  return "?";
}

inline std::optional<DType> parse_dtype(std::string_view s) {
  if (s == "FP32") return DType::FP32;
  if (s == "INT16") return DType::INT16;
  if (s == "INT8") return DType::INT8;
  return std::nullopt;
}

// Element counts of one core's packed multiply block.
struct AtomicDims {
  std::int64_t PI = 0;
  std::int64_t PJ = 0;
  std::int64_t PK = 0;

  [[nodiscard]] std::int64_t macs() const { return PI * PJ * PK; }
  bool operator==(const AtomicDims&) const = default;
};

struct DataTypeSpec {
  DType name = DType::FP32;
  std::int64_t bytes_per_element = 0;
  std::int64_t macs_per_cycle_per_core = 0;
  // Overrides the derived packing when present.
  std::optional<AtomicDims> atomic;

  bool operator==(const DataTypeSpec&) const = default;
};

struct PlatformSpec {
  std::string name = "platform";
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  double core_clock_hz = 0;
  std::int64_t local_mem_bytes = 32768;
  std::int64_t neighbor_mem_bytes = 131072;
  std::int64_t num_interface_tiles = 39;
  std::int64_t in_channels_per_tile = 8;
  std::int64_t out_channels_per_tile = 6;
  std::int64_t channel_bytes_per_core_cycle = 4;
  double pl_clock_hz = 0;
  // PL-side width of one interface channel; 0 leaves the PL-side rate unchecked.
  std::int64_t pl_channel_bytes_per_pl_cycle = 0;
  std::int64_t pl_buffer_bytes = 0;
  double offchip_bw_bytes_per_s = 0;
  std::int64_t max_packet_factor = 4;
  std::int64_t switch_ew_ports = 4;
  std::vector<DataTypeSpec> dtypes;

  [[nodiscard]] std::int64_t cores() const { return rows * cols; }
  [[nodiscard]] std::int64_t total_in_channels() const {
    return num_interface_tiles * in_channels_per_tile;
  }
  [[nodiscard]] std::int64_t total_out_channels() const {
    return num_interface_tiles * out_channels_per_tile;
  }

  [[nodiscard]] const DataTypeSpec& dtype(DType t) const {
    for (const auto& d : dtypes)
      if (d.name == t) return d;
    throw ConfigError("platform '" + name + "' does not define data type " +
                      std::string(to_string(t)));
  }
  [[nodiscard]] bool has_dtype(DType t) const {
    for (const auto& d : dtypes)
      if (d.name == t) return true;
    return false;
  }

  bool operator==(const PlatformSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Roofline arithmetic
// ---------------------------------------------------------------------------

/// Peak ops/s for `cores_used` cores (one MAC counts as two ops).
inline double peak_throughput(const PlatformSpec& spec, const DataTypeSpec& dt,
                              std::int64_t cores_used) {
  if (cores_used < 0) throw ConfigError("cores_used must be non-negative");
  if (cores_used > spec.cores())
    throw ConfigError("cores_used " + std::to_string(cores_used) +
                      " exceeds array size " + std::to_string(spec.cores()));
  return static_cast<double>(cores_used) * spec.core_clock_hz *
         static_cast<double>(dt.macs_per_cycle_per_core) * 2.0;
}

/// Ops per off-chip byte needed to keep `peak` busy at bandwidth `bw`.
inline double required_ctc(double peak, double bw) {
  if (!(bw > 0)) throw ConfigError("bandwidth must be positive");
  return peak / bw;
}

// ---------------------------------------------------------------------------
// Machine-description document (JSON object, flat keys)
// ---------------------------------------------------------------------------

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& doc,
                                     const char* key) {
  auto it = doc.find(key);
  if (it == doc.end())
    throw ParseError(std::string("missing required field '") + key + "'");
  return *it;
}

inline std::int64_t positive_int(const nlohmann::json& v, const char* key) {
  if (!v.is_number_integer() && !(v.is_number_float() &&
                                  v.get<double>() == static_cast<double>(
                                      static_cast<std::int64_t>(v.get<double>()))))
    throw ParseError(std::string("field '") + key + "' must be an integer");
  auto x = v.get<std::int64_t>();
  if (x <= 0) throw ParseError(std::string(key) + " must be positive");
  return x;
}

inline double positive_real(const nlohmann::json& v, const char* key) {
  if (!v.is_number())
    throw ParseError(std::string("field '") + key + "' must be a number");
  auto x = v.get<double>();
  if (!(x > 0)) throw ParseError(std::string(key) + " must be positive");
  return x;
}

inline DataTypeSpec parse_dtype_entry(const nlohmann::json& e, std::size_t idx) {
  const std::string where = "dtypes[" + std::to_string(idx) + "]";
  if (!e.is_array() || (e.size() != 3 && e.size() != 6))
    throw ParseError(where +
                     " must be [name, bytes, macs_per_cycle] or "
                     "[name, bytes, macs_per_cycle, PI, PJ, PK]");
  if (!e[0].is_string()) throw ParseError(where + " name must be a string");
  auto name = parse_dtype(e[0].get<std::string>());
  if (!name)
    throw ParseError(where + " unknown data type '" + e[0].get<std::string>() +
                     "'");
  DataTypeSpec d;
  d.name = *name;
  d.bytes_per_element = positive_int(e[1], "bytes_per_element");
  d.macs_per_cycle_per_core = positive_int(e[2], "macs_per_cycle_per_core");
  if (e.size() == 6) {
    d.atomic = AtomicDims{positive_int(e[3], "PI"), positive_int(e[4], "PJ"),
                          positive_int(e[5], "PK")};
  }
  return d;
}

}  // namespace detail

inline PlatformSpec platform_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("platform document must be an object");

  static const char* const known[] = {
      "name", "rows", "cols", "core_clock_hz", "local_mem_bytes",
      "neighbor_mem_bytes", "num_interface_tiles", "in_channels_per_tile",
      "out_channels_per_tile", "channel_bytes_per_core_cycle", "pl_clock_hz",
      "pl_channel_bytes_per_pl_cycle", "pl_buffer_bytes",
      "offchip_bw_bytes_per_s", "max_packet_factor", "switch_ew_ports",
      "dtypes"};
  for (const auto& [key, _] : doc.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ParseError("unknown field '" + key + "'");
  }

  using detail::positive_int;
  using detail::positive_real;
  using detail::require;

  PlatformSpec s;
  if (auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) throw ParseError("field 'name' must be a string");
    s.name = it->get<std::string>();
  }
  s.rows = positive_int(require(doc, "rows"), "rows");
  s.cols = positive_int(require(doc, "cols"), "cols");
  s.core_clock_hz = positive_real(require(doc, "core_clock_hz"), "core_clock_hz");
  s.pl_clock_hz = positive_real(require(doc, "pl_clock_hz"), "pl_clock_hz");
  s.pl_buffer_bytes =
      positive_int(require(doc, "pl_buffer_bytes"), "pl_buffer_bytes");
  s.offchip_bw_bytes_per_s = positive_real(require(doc, "offchip_bw_bytes_per_s"),
                                           "offchip_bw_bytes_per_s");

  auto optional_int = [&](const char* key, std::int64_t& field) {
    if (auto it = doc.find(key); it != doc.end()) field = positive_int(*it, key);
  };
  optional_int("local_mem_bytes", s.local_mem_bytes);
  optional_int("neighbor_mem_bytes", s.neighbor_mem_bytes);
  optional_int("num_interface_tiles", s.num_interface_tiles);
  optional_int("in_channels_per_tile", s.in_channels_per_tile);
  optional_int("out_channels_per_tile", s.out_channels_per_tile);
  optional_int("channel_bytes_per_core_cycle", s.channel_bytes_per_core_cycle);
  optional_int("max_packet_factor", s.max_packet_factor);
  optional_int("switch_ew_ports", s.switch_ew_ports);
  if (auto it = doc.find("pl_channel_bytes_per_pl_cycle"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
      throw ParseError("pl_channel_bytes_per_pl_cycle must be a non-negative integer");
    s.pl_channel_bytes_per_pl_cycle = it->get<std::int64_t>();
  }

  const auto& dts = require(doc, "dtypes");
  if (!dts.is_array() || dts.empty())
    throw ParseError("dtypes must be a non-empty list");
  for (std::size_t i = 0; i < dts.size(); ++i) {
    auto d = detail::parse_dtype_entry(dts[i], i);
    for (const auto& prev : s.dtypes)
      if (prev.name == d.name)
        throw ParseError("dtypes lists " + std::string(to_string(d.name)) +
                         " twice");
    if (d.atomic && d.atomic->macs() % d.macs_per_cycle_per_core != 0)
      throw ParseError("dtypes[" + std::to_string(i) +
                       "] atomic block is not a whole number of cycles");
    s.dtypes.push_back(d);
  }
  if (s.neighbor_mem_bytes < s.local_mem_bytes)
    throw ParseError("neighbor_mem_bytes must be at least local_mem_bytes");
  return s;
}

inline PlatformSpec load_platform(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("platform document: ") + e.what());
  }
  return platform_from_json(doc);
}

inline nlohmann::json to_json(const PlatformSpec& s) {
  nlohmann::json o;
  o["name"] = s.name;
  o["rows"] = s.rows;
  o["cols"] = s.cols;
  o["core_clock_hz"] = s.core_clock_hz;
  o["local_mem_bytes"] = s.local_mem_bytes;
  o["neighbor_mem_bytes"] = s.neighbor_mem_bytes;
  o["num_interface_tiles"] = s.num_interface_tiles;
  o["in_channels_per_tile"] = s.in_channels_per_tile;
  o["out_channels_per_tile"] = s.out_channels_per_tile;
  o["channel_bytes_per_core_cycle"] = s.channel_bytes_per_core_cycle;
  o["pl_clock_hz"] = s.pl_clock_hz;
  o["pl_channel_bytes_per_pl_cycle"] = s.pl_channel_bytes_per_pl_cycle;
  o["pl_buffer_bytes"] = s.pl_buffer_bytes;
  o["offchip_bw_bytes_per_s"] = s.offchip_bw_bytes_per_s;
  o["max_packet_factor"] = s.max_packet_factor;
  o["switch_ew_ports"] = s.switch_ew_ports;
  auto dts = nlohmann::json::array();
  for (const auto& d : s.dtypes) {
    auto e = nlohmann::json::array(
        {std::string(to_string(d.name)), d.bytes_per_element,
         d.macs_per_cycle_per_core});
    if (d.atomic) {
      e.push_back(d.atomic->PI);
      e.push_back(d.atomic->PJ);
      e.push_back(d.atomic->PK);
    }
    dts.push_back(e);
  }
  o["dtypes"] = dts;
  return o;
}

/// 400-core reference board: 8x50 array at 1 GHz, one DDR4 channel.
inline PlatformSpec vck190_reference() {
  PlatformSpec s;
  s.name = "vck190";
  s.rows = 8;
  s.cols = 50;
  s.core_clock_hz = 1e9;
  s.pl_clock_hz = 230e6;
  s.pl_buffer_bytes = 16 * 1024 * 1024;
  s.offchip_bw_bytes_per_s = 25.6e9;
  s.dtypes = {{DType::FP32, 4, 8, std::nullopt},
              {DType::INT16, 2, 32, std::nullopt},
              {DType::INT8, 1, 128, std::nullopt}};
  return s;
}

}  // namespace acapmm

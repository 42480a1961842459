#pragma once

// Workload files and the JSON documents written by the command-line tool.
//
// Workload file, one directive per line, '#' starts a comment:
//
//   name  mlp
//   dtype FP32
//   layer fc1 4096 4096 4096     # layer_name M K N
//
// All JSON output goes through nlohmann::json, whose object keys are
// sorted, so equal inputs always serialize to identical bytes.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "acapmm/dse.hpp"
#include "acapmm/interconnect.hpp"
#include "acapmm/mapping.hpp"
#include "acapmm/pipesim.hpp"
#include "acapmm/platform.hpp"
#include "acapmm/schedule.hpp"

namespace acapmm {

using Json = nlohmann::json;

struct Layer {
  std::string name;
  std::int64_t M = 0;
  std::int64_t K = 0;
  std::int64_t N = 0;
  bool operator==(const Layer&) const = default;
};

struct WorkloadSpec {
  std::string name = "workload";
  DType dtype = DType::FP32;
  std::vector<Layer> layers;

  [[nodiscard]] std::vector<MMShape> shapes() const {
    std::vector<MMShape> v;
    for (const auto& l : layers) v.push_back({l.M, l.K, l.N, dtype});
    return v;
  }
  bool operator==(const WorkloadSpec&) const = default;
};

inline WorkloadSpec parse_workload(std::string_view text,
                                   const std::string& source = "workload") {
  WorkloadSpec w;
  bool have_dtype = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw ParseError(source + ":" + std::to_string(lineno) + ": " + msg);
  };
  auto dim = [&](const std::string& tok, const char* what) {
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      fail(std::string(what) + " '" + tok + "' is not an integer");
    }
    if (used != tok.size()) fail(std::string(what) + " '" + tok + "' is not an integer");
    if (v < 1) fail(std::string(what) + " must be positive");
    return v;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    if (tok[0] == "name") {
      if (tok.size() != 2) fail("expected: name <name>");
      w.name = tok[1];
    } else if (tok[0] == "dtype") {
      if (tok.size() != 2) fail("expected: dtype <FP32|INT16|INT8>");
      auto t = parse_dtype(tok[1]);
      if (!t) fail("unknown data type '" + tok[1] + "'");
      w.dtype = *t;
      have_dtype = true;
    } else if (tok[0] == "layer") {
      if (tok.size() != 5) fail("expected: layer <name> <M> <K> <N>");
      w.layers.push_back({tok[1], dim(tok[2], "M"), dim(tok[3], "K"), dim(tok[4], "N")});
    } else {
      fail("unknown directive '" + tok[0] + "'");
    }
  }
  if (!have_dtype) throw ParseError(source + ": missing 'dtype' line");
  if (w.layers.empty()) throw ParseError(source + ": no 'layer' lines");
  return w;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// FNV-1a, for report provenance.
inline std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// To JSON
// ---------------------------------------------------------------------------

inline Json to_json(const MMShape& s) {
  return {{"M", s.M}, {"K", s.K}, {"N", s.N}, {"dtype", std::string(to_string(s.dtype))}};
}

inline Json to_json(const MappingConfig& c) {
  return {{"shape", to_json(c.shape)},
          {"TI", c.tile.TI}, {"TJ", c.tile.TJ}, {"TK", c.tile.TK},
          {"A", c.array.A}, {"B", c.array.B}, {"C", c.array.C},
          {"X", c.batch.X}, {"Y", c.batch.Y}, {"Z", c.batch.Z},
          {"bf_lhs", c.bf_lhs}, {"bf_rhs", c.bf_rhs}};
}

inline Json to_json(const DerivedMetrics& m) {
  return {{"compute_cycles", m.compute_cycles},
          {"transfer_cycles", m.transfer_cycles},
          {"ctc", m.ctc},
          {"core_local_bytes", m.core_local_bytes},
          {"pl_buffer_bytes_used", m.pl_buffer_bytes_used},
          {"cores", m.cores},
          {"onchip_ctc", m.onchip_ctc}};
}

inline Json to_json(const Stream& s) {
  return {{"kind", std::string(to_string(s.kind))},
          {"broadcast_group", s.broadcast_group},
          {"packet_group", s.packet_group},
          {"tiles", s.tiles},
          {"chains", s.chains}};
}

inline Json to_json(const PortPlan& p) {
  Json streams = Json::array();
  for (const auto& s : p.streams) streams.push_back(to_json(s));
  return {{"packet_factor", p.packet_factor},
          {"lhs_in_ports", p.lhs_in_ports},
          {"rhs_in_ports", p.rhs_in_ports},
          {"out_ports", p.out_ports},
          {"total_in", p.total_in},
          {"total_out", p.total_out},
          {"pl_demand_bytes_per_s", p.pl_demand_bytes_per_s},
          {"pl_capacity_bytes_per_s", p.pl_capacity_bytes_per_s},
          {"feasible", p.feasible},
          {"streams", streams}};
}

inline Json to_json(const CongestionReport& c) {
  return {{"horizontal_segments", c.horizontal_segments},
          {"max_segments_per_boundary", c.max_segments_per_boundary},
          {"feasible", c.feasible},
          {"entry_columns", c.entry_columns}};
}

inline Json to_json(const DesignTiming& d) {
  return {{"phases", d.phases},
          {"phase_compute_s", d.phase_compute_s},
          {"phase_mem_s", d.phase_mem_s},
          {"total_compute_s", d.total_compute_s},
          {"total_mem_s", d.total_mem_s},
          {"total_s", d.total_s},
          {"predicted_ops_per_s", d.predicted_ops_per_s},
          {"bound", std::string(to_string(d.bound))},
          {"period_cycles", d.period_cycles},
          {"ctc_efficiency", d.ctc_efficiency},
          {"step_quantization", d.step_quantization}};
}

inline Json to_json(const TransferOrder& o) {
  Json seq = Json::array();
  for (const auto& t : o.sequence) seq.push_back({t.batch, t.id});
  return {{"num_batches", o.num_batches}, {"depth", o.depth}, {"sequence", seq}};
}

inline Json to_json(const Feasibility& f) {
  Json v = Json::array();
  for (const auto& x : f.violations)
    v.push_back({{"constraint", std::string(to_string(x.constraint))},
                 {"detail", x.detail}});
  return v;
}

inline Json summary_json(const ColumnReport& r) {
  Json j = {{"makespan_steps", r.makespan_steps},
            {"transfer_bubbles", r.transfer_bubbles},
            {"stall_steps", r.stall_steps},
            {"compute_bubbles", r.compute_bubbles}};
  if (auto fb = r.first_transfer_bubble())
    j["first_transfer_bubble"] = {{"step", fb->step}, {"core", fb->blocked.id},
                                  {"batch", fb->blocked.batch}};
  else
    j["first_transfer_bubble"] = nullptr;
  return j;
}

// ---------------------------------------------------------------------------
// From JSON (schedule export reload)
// ---------------------------------------------------------------------------

namespace detail {
inline std::int64_t int_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer())
    throw ParseError(std::string("missing integer field '") + key + "'");
  return it->get<std::int64_t>();
}
}  // namespace detail

inline MMShape shape_from_json(const Json& j) {
  using detail::int_field;
  auto t = parse_dtype(j.at("dtype").get<std::string>());
  if (!t) throw ParseError("unknown data type in shape");
  return {int_field(j, "M"), int_field(j, "K"), int_field(j, "N"), *t};
}

inline MappingConfig config_from_json(const Json& j) {
  using detail::int_field;
  MappingConfig c;
  c.shape = shape_from_json(j.at("shape"));
  c.tile = {int_field(j, "TI"), int_field(j, "TJ"), int_field(j, "TK")};
  c.array = {int_field(j, "A"), int_field(j, "B"), int_field(j, "C")};
  c.batch = {int_field(j, "X"), int_field(j, "Y"), int_field(j, "Z")};
  c.bf_lhs = int_field(j, "bf_lhs");
  c.bf_rhs = int_field(j, "bf_rhs");
  return c;
}

inline PortPlan port_plan_from_json(const Json& j) {
  using detail::int_field;
  PortPlan p;
  p.packet_factor = int_field(j, "packet_factor");
  p.lhs_in_ports = int_field(j, "lhs_in_ports");
  p.rhs_in_ports = int_field(j, "rhs_in_ports");
  p.out_ports = int_field(j, "out_ports");
  p.total_in = int_field(j, "total_in");
  p.total_out = int_field(j, "total_out");
  p.pl_demand_bytes_per_s = j.at("pl_demand_bytes_per_s").get<double>();
  p.pl_capacity_bytes_per_s = j.at("pl_capacity_bytes_per_s").get<double>();
  p.feasible = j.at("feasible").get<bool>();
  for (const auto& s : j.at("streams")) {
    auto kind = parse_stream_kind(s.at("kind").get<std::string>());
    if (!kind) throw ParseError("unknown stream kind");
    p.streams.push_back({*kind, int_field(s, "broadcast_group"),
                         int_field(s, "packet_group"),
                         s.at("tiles").get<std::vector<std::int64_t>>(),
                         s.at("chains").get<std::vector<std::int64_t>>()});
  }
  return p;
}

inline TransferOrder order_from_json(const Json& j) {
  TransferOrder o;
  o.num_batches = detail::int_field(j, "num_batches");
  o.depth = detail::int_field(j, "depth");
  for (const auto& t : j.at("sequence")) {
    if (!t.is_array() || t.size() != 2) throw ParseError("sequence entries are [batch, id]");
    o.sequence.push_back({t[0].get<std::int64_t>(), t[1].get<std::int64_t>()});
  }
  if (auto bad = validate_order(o)) throw ParseError("schedule order: " + *bad);
  return o;
}

/// Everything needed to drive the data movers for one design.
struct ScheduleExport {
  MappingConfig config;
  PortPlan ports;
  TransferOrder column_order;
  bool operator==(const ScheduleExport&) const = default;
};

inline ScheduleExport make_schedule_export(const MappingConfig& cfg,
                                           const PlatformSpec& spec) {
  return {cfg, port_plan(cfg, spec), zigzag_order(cfg.batch.count(), cfg.array.B)};
}

inline Json to_json(const ScheduleExport& s) {
  return {{"format", "acapmm-schedule"},
          {"version", 1},
          {"config", to_json(s.config)},
          {"ports", to_json(s.ports)},
          {"column_order", to_json(s.column_order)}};
}

inline ScheduleExport schedule_from_json(const Json& j) {
  if (j.value("format", "") != "acapmm-schedule")
    throw ParseError("not a schedule export document");
  return {config_from_json(j.at("config")), port_plan_from_json(j.at("ports")),
          order_from_json(j.at("column_order"))};
}

}  // namespace acapmm

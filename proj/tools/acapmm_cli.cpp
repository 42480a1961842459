// acapmm: analyze / simulate / dse / roofline front end.
//
// Exit codes: 0 ok, 2 usage or parse error, 3 infeasible, 4 internal error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acapmm/dse.hpp"
#include "acapmm/io.hpp"
#include "acapmm/pipesim.hpp"
#include "acapmm/platform.hpp"
#include "acapmm/schedule.hpp"

namespace {

using namespace acapmm;

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 2, kInfeasible = 3, kInternal = 4 };

struct Inputs {
  std::string platform_path;
  std::string workload_path;
  PlatformSpec spec;
  WorkloadSpec workload;
  std::string platform_hash;
  std::string workload_hash;

  void load() {
    const auto ptext = read_file(platform_path);
    spec = load_platform(ptext);
    platform_hash = content_hash(ptext);
    if (!workload_path.empty()) {
      const auto wtext = read_file(workload_path);
      workload = parse_workload(wtext, workload_path);
      workload_hash = content_hash(wtext);
      (void)spec.dtype(workload.dtype);
    }
  }

  [[nodiscard]] Json provenance() const {
    Json j = {{"tool", "acapmm"}, {"version", kVersion},
              {"platform_hash", platform_hash}};
    if (!workload_path.empty()) j["workload_hash"] = workload_hash;
    return j;
  }

  [[nodiscard]] Json workload_json() const {
    Json layers = Json::array();
    for (const auto& l : workload.layers)
      layers.push_back({{"name", l.name}, {"M", l.M}, {"K", l.K}, {"N", l.N}});
    return {{"name", workload.name},
            {"dtype", std::string(to_string(workload.dtype))},
            {"layers", layers}};
  }
};

void write_json(const std::string& path, const Json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot write '" + path + "'");
  f << j.dump(2) << '\n';
}

// Numbers in the text summary use the JSON spelling so both outputs agree.
std::string num(const Json& v) { return v.dump(); }

std::vector<std::int64_t> parse_int_list(const std::string& s, const char* flag) {
  std::vector<std::int64_t> v;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      std::size_t used = 0;
      auto x = std::stoll(tok, &used);
      if (used != tok.size() || x < 1) throw std::invalid_argument(tok);
      v.push_back(x);
    } catch (const std::exception&) {
      throw ParseError(std::string(flag) + ": '" + tok + "' is not a positive integer");
    }
  }
  if (v.empty()) throw ParseError(std::string(flag) + " is empty");
  return v;
}

std::vector<TileDims> parse_tiles(const std::string& s) {
  std::vector<TileDims> v;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    long long a = 0, b = 0, c = 0;
    char x1 = 0, x2 = 0;
    std::istringstream ts(tok);
    if (!(ts >> a >> x1 >> b >> x2 >> c) || x1 != 'x' || x2 != 'x' || a < 1 ||
        b < 1 || c < 1)
      throw ParseError("--tiles: '" + tok + "' is not TIxTJxTK");
    v.push_back({a, b, c});
  }
  return v;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  Inputs in;
  MappingConfig cfg;
  bool strict = true;
  bool simulate = false;
  std::string out;
};

int run_analyze(AnalyzeArgs& a) {
  a.in.load();
  const auto& spec = a.in.spec;

  Json layers = Json::array();
  bool all_ok = true;
  std::vector<MMShape> shapes = a.in.workload.shapes();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto cfg = with_shape(a.cfg, shapes[i]);
    Json lj = {{"name", a.in.workload.layers[i].name}, {"config", to_json(cfg)}};
    const auto f = feasible(cfg, spec, a.strict);
    lj["violations"] = to_json(f);
    if (!f.violates(Constraint::Tiling)) {
      const auto ports = port_plan(cfg, spec);
      lj["metrics"] = to_json(derived_metrics(cfg, spec));
      lj["ports"] = to_json(ports);
      lj["congestion"] = to_json(congestion(cfg, spec, ports));
      if (!f.violates(Constraint::ArraySize)) {
        lj["timing"] = to_json(design_timing(cfg, spec));
        auto tb = throughput_upper_bounds(cfg, spec);
        lj["bounds"] = {{"compute_bound", tb.compute_bound},
                        {"memory_bound", tb.memory_bound}};
      }
      if (a.simulate) {
        const auto p = column_params(cfg, spec);
        lj["column"] = summary_json(
            simulate_column(zigzag_order(p.num_batches, p.depth), p));
      }
    }
    all_ok = all_ok && f.ok();
    layers.push_back(lj);
  }
  Json report = {{"command", "analyze"},
                 {"provenance", a.in.provenance()},
                 {"platform", to_json(spec)},
                 {"workload", a.in.workload_json()},
                 {"strict_memory", a.strict},
                 {"feasible", all_ok},
                 {"layers", layers}};
  if (all_ok) {
    auto ev = evaluate_model(shapes, a.cfg, spec);
    report["model"] = {{"total_ops", ev.total_ops},
                       {"total_s", ev.total_s},
                       {"aggregate_ops_per_s", ev.aggregate_ops_per_s}};
  }
  if (!a.out.empty()) write_json(a.out, report);

  for (const auto& lj : report["layers"]) {
    std::cout << "layer " << lj["name"].get<std::string>() << "\n";
    if (lj.contains("metrics")) {
      const auto& m = lj["metrics"];
      std::cout << "  cores " << num(m["cores"]) << "  compute_cycles "
                << num(m["compute_cycles"]) << "  transfer_cycles "
                << num(m["transfer_cycles"]) << "  ctc " << num(m["ctc"])
                << "\n  core_local_bytes " << num(m["core_local_bytes"])
                << "  pl_buffer_bytes_used " << num(m["pl_buffer_bytes_used"])
                << "  onchip_ctc " << num(m["onchip_ctc"]) << "\n";
      const auto& p = lj["ports"];
      std::cout << "  packet_factor " << num(p["packet_factor"])
                << "  lhs_in_ports " << num(p["lhs_in_ports"]) << "  rhs_in_ports "
                << num(p["rhs_in_ports"]) << "  out_ports " << num(p["out_ports"])
                << "\n";
      const auto& c = lj["congestion"];
      std::cout << "  horizontal_segments " << num(c["horizontal_segments"])
                << "  max_segments_per_boundary "
                << num(c["max_segments_per_boundary"]) << "\n";
    }
    if (lj.contains("timing")) {
      const auto& t = lj["timing"];
      std::cout << "  total_s " << num(t["total_s"]) << "  predicted_ops_per_s "
                << num(t["predicted_ops_per_s"]) << "  bound "
                << t["bound"].get<std::string>() << "\n";
    }
    if (lj.contains("column")) {
      const auto& c = lj["column"];
      std::cout << "  column makespan_steps " << num(c["makespan_steps"])
                << "  transfer_bubbles " << num(c["transfer_bubbles"])
                << "  compute_bubbles " << num(c["compute_bubbles"]) << "\n";
    }
    for (const auto& v : lj["violations"])
      std::cout << "  VIOLATION " << v["constraint"].get<std::string>() << ": "
                << v["detail"].get<std::string>() << "\n";
  }
  if (report.contains("model"))
    std::cout << "aggregate_ops_per_s " << num(report["model"]["aggregate_ops_per_s"])
              << "\n";
  return all_ok ? kOk : kInfeasible;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string order = "zigzag";
  ColumnSimParams params;
  std::string out;
  std::string report;
};

int run_simulate(const SimulateArgs& a) {
  auto p = a.params;
  const auto order = a.order == "lex" ? lex_order(p.num_batches, p.depth)
                                      : zigzag_order(p.num_batches, p.depth);
  const auto rep = simulate_column(order, p);
  const auto j = summary_json(rep);

  std::cout << "order " << a.order << "  depth " << p.depth << "  batches "
            << p.num_batches << "  ctc " << p.ctc_steps << "  banks "
            << p.banks_per_core << "\n";
  std::cout << "makespan_steps " << num(j["makespan_steps"]) << "\n";
  std::cout << "transfer_bubbles " << num(j["transfer_bubbles"]) << "  (stall_steps "
            << num(j["stall_steps"]) << ")\n";
  std::cout << "compute_bubbles " << num(j["compute_bubbles"]) << "\n";
  if (auto fb = rep.first_transfer_bubble())
    std::cout << "first transfer bubble at step " << fb->step << " targeting core "
              << fb->blocked.id << " (batch " << fb->blocked.batch << ")\n";
  else
    std::cout << "no transfer bubbles\n";

  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw ParseError("cannot write '" + a.out + "'");
    write_timeline_csv(f, rep);
  }
  if (!a.report.empty())
    write_json(a.report, Json{{"command", "simulate"},
                              {"provenance", {{"tool", "acapmm"}, {"version", kVersion}}},
                              {"order", a.order},
                              {"params",
                               {{"depth", p.depth},
                                {"num_batches", p.num_batches},
                                {"ctc_steps", p.ctc_steps},
                                {"banks_per_core", p.banks_per_core},
                                {"drain_steps", p.drain_steps}}},
                              {"column", j}});
  return kOk;
}

// ---------------------------------------------------------------------------

struct DseArgs {
  Inputs in;
  bool strict = true;
  std::string tiles, a_values, b_values, c_values, x_values, y_values, z_values;
  std::int64_t budget = 0;
  std::size_t top_k = 5;
  unsigned threads = 1;
  std::string out;
  std::string schedule;
};

int run_dse(DseArgs& a) {
  a.in.load();
  const auto& spec = a.in.spec;
  auto limits = default_limits(spec, a.in.workload.dtype, a.strict);
  if (!a.tiles.empty()) limits.tiles = parse_tiles(a.tiles);
  if (!a.a_values.empty()) limits.a_values = parse_int_list(a.a_values, "--A-values");
  if (!a.b_values.empty()) limits.b_values = parse_int_list(a.b_values, "--B-values");
  if (!a.c_values.empty()) limits.c_values = parse_int_list(a.c_values, "--C-values");
  if (!a.x_values.empty()) limits.x_values = parse_int_list(a.x_values, "--X-values");
  if (!a.y_values.empty()) limits.y_values = parse_int_list(a.y_values, "--Y-values");
  if (!a.z_values.empty()) limits.z_values = parse_int_list(a.z_values, "--Z-values");
  limits.max_candidates = a.budget;
  limits.top_k = a.top_k;
  limits.threads = a.threads;

  const auto shapes = a.in.workload.shapes();
  const auto res = search_model(shapes, spec, limits);

  Json report = {{"command", "dse"},
                 {"provenance", a.in.provenance()},
                 {"platform", to_json(spec)},
                 {"workload", a.in.workload_json()},
                 {"strict_memory", a.strict},
                 {"found", res.found},
                 {"candidates_considered", res.candidates_considered},
                 {"candidates_feasible", res.candidates_feasible},
                 {"candidates_evaluated", res.candidates_evaluated}};
  if (res.found) {
    report["best"] = to_json(res.best);
    report["metrics"] = to_json(res.metrics);
    report["ports"] = to_json(res.ports);
    report["congestion"] = to_json(res.congestion);
    Json per_layer = Json::array();
    for (std::size_t i = 0; i < res.model.per_layer.size(); ++i)
      per_layer.push_back({{"name", a.in.workload.layers[i].name},
                           {"timing", to_json(res.model.per_layer[i])}});
    report["layers"] = per_layer;
    report["model"] = {{"total_ops", res.model.total_ops},
                       {"total_s", res.model.total_s},
                       {"aggregate_ops_per_s", res.model.aggregate_ops_per_s}};
    Json ranked = Json::array();
    for (const auto& r : res.ranked_alternatives)
      ranked.push_back({{"config", to_json(r.config)}, {"score", r.score}});
    report["ranked_alternatives"] = ranked;
  } else if (res.nearest) {
    report["nearest"] = {{"config", to_json(res.nearest->config)},
                         {"violations", to_json(Feasibility{res.nearest->violations})}};
  }
  if (!a.out.empty()) write_json(a.out, report);

  std::cout << "candidates " << res.candidates_considered << "  feasible "
            << res.candidates_feasible << "  evaluated " << res.candidates_evaluated
            << "\n";
  if (!res.found) {
    std::cout << "no feasible mapping\n";
    if (res.nearest)
      for (const auto& v : res.nearest->violations)
        std::cout << "  nearest candidate violates " << to_string(v.constraint)
                  << ": " << v.detail << "\n";
    return kInfeasible;
  }

  const auto& b = report["best"];
  std::cout << "best TI " << num(b["TI"]) << " TJ " << num(b["TJ"]) << " TK "
            << num(b["TK"]) << "  A " << num(b["A"]) << " B " << num(b["B"]) << " C "
            << num(b["C"]) << "  X " << num(b["X"]) << " Y " << num(b["Y"]) << " Z "
            << num(b["Z"]) << "  bf_lhs " << num(b["bf_lhs"]) << " bf_rhs "
            << num(b["bf_rhs"]) << "\n";
  std::cout << "aggregate_ops_per_s " << num(report["model"]["aggregate_ops_per_s"])
            << "  bound " << report["layers"][0]["timing"]["bound"].get<std::string>()
            << "\n";

  std::string sched = a.schedule;
  if (sched.empty() && !a.out.empty()) {
    sched = a.out;
    if (sched.size() > 5 && sched.ends_with(".json")) sched.resize(sched.size() - 5);
    sched += ".schedule.json";
  }
  if (!sched.empty()) {
    write_json(sched, to_json(make_schedule_export(res.best, spec)));
    std::cout << "schedule written to " << sched << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int run_roofline(Inputs& in, const std::string& out) {
  in.load();
  const auto& spec = in.spec;
  Json rows = Json::array();
  for (const auto& dt : spec.dtypes) {
    const double peak = peak_throughput(spec, dt, spec.cores());
    rows.push_back({{"dtype", std::string(to_string(dt.name))},
                    {"peak_ops_per_s", peak},
                    {"offchip_bw_bytes_per_s", spec.offchip_bw_bytes_per_s},
                    {"required_ctc", required_ctc(peak, spec.offchip_bw_bytes_per_s)}});
  }
  if (!out.empty())
    write_json(out, Json{{"command", "roofline"},
                         {"provenance", in.provenance()},
                         {"platform", to_json(spec)},
                         {"rows", rows}});
  std::cout << "dtype  peak_ops_per_s  offchip_bw_bytes_per_s  required_ctc\n";
  for (const auto& r : rows)
    std::cout << r["dtype"].get<std::string>() << "  " << num(r["peak_ops_per_s"])
              << "  " << num(r["offchip_bw_bytes_per_s"]) << "  "
              << num(r["required_ctc"]) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix-multiply mapping explorer for core-array accelerators"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::int64_t seed = 0;
  app.add_option("--seed", seed, "Reserved; all commands are deterministic");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Metrics for one explicit mapping");
  analyze->add_option("--platform", an.in.platform_path)->required()->check(CLI::ExistingFile);
  analyze->add_option("--workload", an.in.workload_path)->required()->check(CLI::ExistingFile);
  analyze->add_option("--TI", an.cfg.tile.TI)->required();
  analyze->add_option("--TJ", an.cfg.tile.TJ)->required();
  analyze->add_option("--TK", an.cfg.tile.TK)->required();
  analyze->add_option("--A", an.cfg.array.A)->capture_default_str();
  analyze->add_option("--B", an.cfg.array.B)->capture_default_str();
  analyze->add_option("--C", an.cfg.array.C)->capture_default_str();
  analyze->add_option("--X", an.cfg.batch.X)->capture_default_str();
  analyze->add_option("--Y", an.cfg.batch.Y)->capture_default_str();
  analyze->add_option("--Z", an.cfg.batch.Z)->capture_default_str();
  analyze->add_option("--bf_lhs", an.cfg.bf_lhs)->capture_default_str();
  analyze->add_option("--bf_rhs", an.cfg.bf_rhs)->capture_default_str();
  analyze->add_flag("--strict-memory,!--relaxed-memory", an.strict,
                    "Per-core memory cap: own bank (default) or with neighbours");
  analyze->add_flag("--simulate", an.simulate, "Also simulate one chain (zigzag)");
  analyze->add_option("--out", an.out, "Structured report (JSON)");
  analyze->add_option("--seed", seed, "Reserved");

  SimulateArgs sm;
  auto* simulate = app.add_subcommand("simulate", "Step simulation of one reduction chain");
  simulate->add_option("--order", sm.order)->check(CLI::IsMember({"lex", "zigzag"}))->capture_default_str();
  simulate->add_option("--depth", sm.params.depth)->required();
  simulate->add_option("--batches", sm.params.num_batches)->required();
  simulate->add_option("--ctc", sm.params.ctc_steps)->required();
  simulate->add_option("--banks", sm.params.banks_per_core)->capture_default_str();
  simulate->add_option("--drain", sm.params.drain_steps)->capture_default_str();
  simulate->add_option("--out", sm.out, "Timeline CSV");
  simulate->add_option("--report", sm.report, "Summary JSON");
  simulate->add_option("--seed", seed, "Reserved");

  DseArgs ds;
  auto* dse = app.add_subcommand("dse", "Search for the best mapping");
  dse->add_option("--platform", ds.in.platform_path)->required()->check(CLI::ExistingFile);
  dse->add_option("--workload", ds.in.workload_path)->required()->check(CLI::ExistingFile);
  dse->add_option("--tiles", ds.tiles, "Candidate tiles, e.g. 32x32x32,64x32x32");
  dse->add_option("--A-values", ds.a_values, "Comma list");
  dse->add_option("--B-values", ds.b_values, "Comma list");
  dse->add_option("--C-values", ds.c_values, "Comma list");
  dse->add_option("--X-values", ds.x_values, "Comma list");
  dse->add_option("--Y-values", ds.y_values, "Comma list");
  dse->add_option("--Z-values", ds.z_values, "Comma list");
  dse->add_option("--budget", ds.budget, "Refuse spaces with more candidates (0: no limit)");
  dse->add_option("--top-k", ds.top_k)->capture_default_str();
  dse->add_option("--threads", ds.threads)->capture_default_str();
  dse->add_flag("--strict-memory,!--relaxed-memory", ds.strict);
  dse->add_option("--out", ds.out, "Structured report (JSON)");
  dse->add_option("--schedule", ds.schedule, "Schedule export (JSON)");
  dse->add_option("--seed", seed, "Reserved");

  Inputs rf;
  std::string rf_out;
  auto* roofline = app.add_subcommand("roofline", "Peak and required CTC per data type");
  roofline->add_option("--platform", rf.platform_path)->required()->check(CLI::ExistingFile);
  roofline->add_option("--out", rf_out, "Structured report (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*analyze) return run_analyze(an);
    if (*simulate) return run_simulate(sm);
    if (*dse) return run_dse(ds);
    if (*roofline) return run_roofline(rf, rf_out);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const SimulationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

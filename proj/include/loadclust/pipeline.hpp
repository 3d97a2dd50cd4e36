#pragma once

// Manifest-driven pipeline stages. Each stage reads its inputs from and writes
// its outputs to the manifest's output directory, so the stages can run as
// separate processes:
//
//   models/<bus>.json, basics/<bus>.json, labels.csv           gen
//   pfr/<bus>/m<index>_<scenario>.csv                          pfr
//   temporal/<bus>/{rlms.json,membership.csv,decision_graph.csv}
//   temporal/summary.csv                                       cluster-temporal
//   spatial/nc<k>/{ra,rr,rd}.json, compressed.csv,
//   spatial/nc<k>/decision_{active,reactive,dynamic}.csv       cluster-spatial
//   validation/...                                             validate
//   report/storage*.{csv,txt}                                  report

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadclust/datagen.hpp"
#include "loadclust/errors.hpp"
#include "loadclust/fdc.hpp"
#include "loadclust/hierarchy.hpp"
#include "loadclust/io.hpp"
#include "loadclust/pfr.hpp"
#include "loadclust/validation.hpp"

namespace loadclust {

namespace fs = std::filesystem;

struct BusFile {
  std::string bus_id;
  fs::path path;
};

struct Manifest {
  std::uint64_t seed = 1;
  fs::path output_dir = "out";
  unsigned workers = 1;
  GenSpec gen;
  /// External model files. Empty means the generated models in output_dir.
  std::vector<BusFile> buses;
  std::vector<FaultScenario> suite = standard_fault_suite();
  SimConfig sim;
  std::size_t nc_temporal = 10;
  std::vector<std::size_t> nc_spatial{3, 5, 7};
  FdcOptions fdc;
  DistanceBasis basis = DistanceBasis::pfr;
  bool export_distances = false;
  ValidationOptions validation;
  bool compare_bases = true;
  StorageInputs storage;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!obj.is_object()) throw InvalidArgument(ctx + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw InvalidArgument(ctx + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& field, const std::string& ctx) {
  if (!obj.contains(key)) return;
  try {
    field = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument(ctx + ": key '" + key + "' has the wrong type");
  }
}

inline std::size_t positive(std::size_t v, const std::string& what) {
  if (v < 1) throw InvalidArgument(what + " must be >= 1");
  return v;
}

}  // namespace detail

/// Parses a manifest document. Relative paths resolve against base_dir.
inline Manifest parse_manifest(const nlohmann::json& j, const fs::path& base_dir,
                               const std::string& origin = "manifest") {
  using detail::read_opt;
  Manifest m;
  detail::check_keys(j,
                     {"seed", "output_dir", "workers", "generation", "buses", "suite", "suite_file",
                      "simulation", "clustering", "validation", "storage"},
                     origin);
  read_opt(j, "seed", m.seed, origin);
  std::string out_dir = m.output_dir.string();
  read_opt(j, "output_dir", out_dir, origin);
  m.output_dir = base_dir / out_dir;
  read_opt(j, "workers", m.workers, origin);
  if (m.workers == 0) m.workers = default_workers();
  m.gen.seed = m.seed;

  if (j.contains("generation")) {
    const auto& g = j.at("generation");
    const std::string ctx = origin + ".generation";
    detail::check_keys(g, {"n_buses", "models_per_bus", "basics_per_bus", "noise_rel_std", "max_retries"},
                       ctx);
    read_opt(g, "n_buses", m.gen.n_buses, ctx);
    read_opt(g, "models_per_bus", m.gen.models_per_bus, ctx);
    read_opt(g, "basics_per_bus", m.gen.basics_per_bus, ctx);
    read_opt(g, "noise_rel_std", m.gen.noise_rel_std, ctx);
    read_opt(g, "max_retries", m.gen.max_retries, ctx);
  }
  validate(m.gen);

  if (j.contains("buses")) {
    const auto& arr = j.at("buses");
    if (!arr.is_array()) throw InvalidArgument(origin + ".buses must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string ctx = origin + ".buses[" + std::to_string(i) + "]";
      detail::check_keys(arr[i], {"bus_id", "model_file"}, ctx);
      BusFile bf;
      std::string path;
      read_opt(arr[i], "bus_id", bf.bus_id, ctx);
      read_opt(arr[i], "model_file", path, ctx);
      if (bf.bus_id.empty() || path.empty()) throw InvalidArgument(ctx + ": needs bus_id and model_file");
      bf.path = base_dir / path;
      m.buses.push_back(bf);
    }
  }

  if (j.contains("suite") && j.contains("suite_file")) {
    throw InvalidArgument(origin + ": give either 'suite' or 'suite_file', not both");
  }
  if (j.contains("suite")) m.suite = io::suite_from_json(j.at("suite"), origin + ".suite");
  if (j.contains("suite_file")) {
    std::string path;
    read_opt(j, "suite_file", path, origin);
    m.suite = io::read_suite(base_dir / path);
  }

  if (j.contains("simulation")) {
    const auto& s = j.at("simulation");
    const std::string ctx = origin + ".simulation";
    detail::check_keys(s, {"dt", "horizon"}, ctx);
    read_opt(s, "dt", m.sim.dt, ctx);
    read_opt(s, "horizon", m.sim.horizon, ctx);
  }
  for (const auto& sc : m.suite) validate(m.sim, sc);
  m.gen.screen_suite = m.suite;
  m.gen.screen_cfg = m.sim;

  if (j.contains("clustering")) {
    const auto& c = j.at("clustering");
    const std::string ctx = origin + ".clustering";
    detail::check_keys(c,
                       {"nc_temporal", "nc_spatial", "neighbor_fraction", "outlier_rho", "distance",
                        "export_distances"},
                       ctx);
    read_opt(c, "nc_temporal", m.nc_temporal, ctx);
    read_opt(c, "nc_spatial", m.nc_spatial, ctx);
    read_opt(c, "neighbor_fraction", m.fdc.neighbor_fraction, ctx);
    read_opt(c, "outlier_rho", m.fdc.outlier_rho, ctx);
    read_opt(c, "export_distances", m.export_distances, ctx);
    std::string basis = "pfr";
    read_opt(c, "distance", basis, ctx);
    if (basis == "pfr") {
      m.basis = DistanceBasis::pfr;
    } else if (basis == "parameter") {
      m.basis = DistanceBasis::parameter;
    } else {
      throw InvalidArgument(ctx + ": distance must be 'pfr' or 'parameter'");
    }
  }
  detail::positive(m.nc_temporal, origin + ": nc_temporal");
  if (m.nc_spatial.empty()) throw InvalidArgument(origin + ": nc_spatial is empty");
  for (std::size_t nc : m.nc_spatial) detail::positive(nc, origin + ": nc_spatial entries");
  std::set<std::size_t> unique(m.nc_spatial.begin(), m.nc_spatial.end());
  m.nc_spatial.assign(unique.begin(), unique.end());
  if (!(m.fdc.neighbor_fraction > 0.0 && m.fdc.neighbor_fraction < 1.0)) {
    throw InvalidArgument(origin + ": neighbor_fraction must be in (0, 1)");
  }

  m.validation.seed = m.seed;
  m.validation.cfg.dt = m.sim.dt;
  m.validation.cfg.horizon = m.sim.horizon;
  if (j.contains("validation")) {
    const auto& v = j.at("validation");
    const std::string ctx = origin + ".validation";
    detail::check_keys(v, {"n_cases", "fault", "excitation_mode", "thevenin_reactance", "compare_bases"},
                       ctx);
    read_opt(v, "n_cases", m.validation.n_cases, ctx);
    if (v.contains("fault")) {
      m.validation.fault = io::fault_from_json(v.at("fault"), ctx + ".fault", m.validation.fault);
    }
    std::string mode = "thevenin";
    read_opt(v, "excitation_mode", mode, ctx);
    if (mode == "thevenin") {
      m.validation.cfg.excitation_mode = ExcitationMode::thevenin;
    } else if (mode == "playback") {
      m.validation.cfg.excitation_mode = ExcitationMode::playback;
    } else {
      throw InvalidArgument(ctx + ": excitation_mode must be 'thevenin' or 'playback'");
    }
    read_opt(v, "thevenin_reactance", m.validation.cfg.thevenin_reactance, ctx);
    read_opt(v, "compare_bases", m.compare_bases, ctx);
  }
  detail::positive(m.validation.n_cases, origin + ": n_cases");
  validate(m.validation.cfg, m.validation.fault);

  if (j.contains("storage")) {
    const auto& s = j.at("storage");
    const std::string ctx = origin + ".storage";
    detail::check_keys(s, {"motor_param_count", "static_param_count", "float_bytes", "index_bytes"}, ctx);
    read_opt(s, "motor_param_count", m.storage.motor_param_count, ctx);
    read_opt(s, "static_param_count", m.storage.static_param_count, ctx);
    read_opt(s, "float_bytes", m.storage.float_bytes, ctx);
    read_opt(s, "index_bytes", m.storage.index_bytes, ctx);
  }
  return m;
}

inline Manifest read_manifest(const fs::path& path) {
  const auto j = io::read_json(path);
  return parse_manifest(j, path.parent_path(), path.string());
}

/// Bus ids in pipeline order.
inline std::vector<std::string> bus_ids(const Manifest& m) {
  std::vector<std::string> ids;
  if (!m.buses.empty()) {
    for (const auto& b : m.buses) ids.push_back(b.bus_id);
  } else {
    for (std::size_t i = 0; i < m.gen.n_buses; ++i) ids.push_back(bus_name(i));
  }
  return ids;
}

namespace paths {

inline fs::path model_file(const Manifest& m, const std::string& bus) {
  for (const auto& b : m.buses) {
    if (b.bus_id == bus) return b.path;
  }
  return m.output_dir / "models" / (bus + ".json");
}
inline fs::path temporal_dir(const Manifest& m, const std::string& bus) {
  return m.output_dir / "temporal" / bus;
}
inline fs::path spatial_dir(const Manifest& m, std::size_t nc) {
  return m.output_dir / "spatial" / ("nc" + std::to_string(nc));
}

}  // namespace paths

// ---------------------------------------------------------------------------
// Loading stage outputs

inline std::vector<BusModelSet> load_buses(const Manifest& m, std::ostream* log = nullptr) {
  std::vector<BusModelSet> buses;
  for (const auto& id : bus_ids(m)) {
    std::vector<std::string> warnings;
    auto bus = io::read_bus(paths::model_file(m, id), &warnings);
    if (bus.bus_id != id) {
      throw InvalidArgument(paths::model_file(m, id).string() + ": bus_id '" + bus.bus_id +
                            "' does not match the manifest's '" + id + "'");
    }
    if (log) {
      for (const auto& w : warnings) *log << "warning: " << w << "\n";
    }
    buses.push_back(std::move(bus));
  }
  return buses;
}

/// Temporal result as handed to the control center: RLMs, their sources and
/// the membership of every original model.
inline TemporalResult load_temporal(const Manifest& m, const std::string& bus) {
  const fs::path dir = paths::temporal_dir(m, bus);
  const auto j = io::read_json(dir / "rlms.json");
  TemporalResult t;
  const auto set = io::bus_from_json(j, (dir / "rlms.json").string());
  t.bus_id = set.bus_id;
  t.rlms = set.models;
  t.r_count = t.rlms.size();
  detail::read_opt(j, "sources", t.rlm_sources, (dir / "rlms.json").string());
  const std::string origin = (dir / "membership.csv").string();
  const auto rows = io::parse_csv(io::read_text(dir / "membership.csv"));
  if (rows.empty() || rows[0] != std::vector<std::string>{"model_index", "k", "source_model"}) {
    throw InvalidArgument(origin + ": unexpected header");
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw InvalidArgument(origin + ": malformed row " + std::to_string(i));
    const auto k = static_cast<std::size_t>(io::parse_double(rows[i][1], origin));
    if (k < 1 || k > t.r_count) throw IndexOutOfRange(origin + ": k out of range in row " + std::to_string(i));
    t.membership.push_back(k - 1);
  }
  return t;
}

inline SpatialResult load_spatial(const Manifest& m, std::size_t nc) {
  const fs::path dir = paths::spatial_dir(m, nc);
  SpatialResult sp;
  sp.nc = nc;
  sp.ra = io::zip_set_from_json(io::read_json(dir / "ra.json"), (dir / "ra.json").string());
  sp.rr = io::zip_set_from_json(io::read_json(dir / "rr.json"), (dir / "rr.json").string());
  sp.rd = io::motor_set_from_json(io::read_json(dir / "rd.json"), (dir / "rd.json").string());
  sp.compressed = io::compressed_from_csv(io::read_text(dir / "compressed.csv"),
                                          (dir / "compressed.csv").string());
  return sp;
}

// ---------------------------------------------------------------------------
// Stages

struct GenSummary {
  std::size_t buses = 0;
  std::size_t models = 0;
  std::size_t clamp_events = 0;
};

inline GenSummary run_gen(const Manifest& m) {
  const auto ds = generate_dataset(m.gen, m.workers);
  std::vector<std::string> ids;
  GenSummary s;
  for (std::size_t b = 0; b < ds.buses.size(); ++b) {
    io::write_bus(m.output_dir / "models" / (ds.buses[b].bus_id + ".json"), ds.buses[b]);
    io::write_bus(m.output_dir / "basics" / (ds.buses[b].bus_id + ".json"),
                  {ds.buses[b].bus_id, ds.basics[b]});
    ids.push_back(ds.buses[b].bus_id);
    s.models += ds.buses[b].models.size();
  }
  io::write_text(m.output_dir / "labels.csv", io::labels_csv(ids, ds.labels));
  s.buses = ds.buses.size();
  s.clamp_events = ds.clamp_events;
  return s;
}

struct PfrSelection {
  std::vector<std::string> buses;        // empty: every bus
  std::vector<std::size_t> model_indices;  // empty: every model
};

/// Writes one time,p,q CSV per (model, scenario); returns the file count.
inline std::size_t run_pfr(const Manifest& m, const PfrSelection& sel) {
  auto ids = sel.buses.empty() ? bus_ids(m) : sel.buses;
  std::size_t files = 0;
  for (const auto& id : ids) {
    auto bus = io::read_bus(paths::model_file(m, id));
    std::vector<std::size_t> idx = sel.model_indices;
    if (idx.empty()) {
      for (std::size_t i = 0; i < bus.models.size(); ++i) idx.push_back(i);
    }
    for (std::size_t i : idx) {
      if (i >= bus.models.size()) {
        throw IndexOutOfRange("pfr: model index " + std::to_string(i) + " outside bus " + id);
      }
    }
    std::vector<PfrBundle> bundles(idx.size());
    parallel_for(idx.size(), m.workers, [&](std::size_t n) {
      try {
        bundles[n] = simulate_bundle(bus.models[idx[n]], m.suite, m.sim);
      } catch (const Error&) {
        detail::rethrow_with_context("bus " + id + " model " + std::to_string(idx[n]));
      }
    });
    for (std::size_t n = 0; n < idx.size(); ++n) {
      for (std::size_t s = 0; s < m.suite.size(); ++s) {
        const auto name = "m" + std::to_string(idx[n]) + "_" + m.suite[s].label + ".csv";
        io::write_text(m.output_dir / "pfr" / id / name, io::curve_csv(bundles[n].curves[s]));
        ++files;
      }
    }
  }
  return files;
}

inline ClusteringOptions clustering_options(const Manifest& m) {
  return {m.fdc, m.basis, m.workers};
}

inline void write_temporal(const Manifest& m, const TemporalResult& t) {
  const fs::path dir = paths::temporal_dir(m, t.bus_id);
  io::write_json(dir / "rlms.json", io::rlms_to_json(t));
  io::write_text(dir / "membership.csv", io::membership_csv(t));
  io::write_text(dir / "decision_graph.csv", io::decision_graph_csv(t.run.graph));
  if (m.export_distances) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < t.distances.size(); ++i) ids.push_back("m" + std::to_string(i));
    io::write_text(dir / "distances.csv", io::distance_csv(t.distances, ids));
  }
}

inline std::string temporal_summary_csv(std::span<const TemporalResult> results,
                                        std::span<const BusModelSet> buses) {
  io::CsvWriter w{"bus", "models", "rlms", "centers", "outliers", "d_c"};
  for (std::size_t b = 0; b < results.size(); ++b) {
    const auto& t = results[b];
    w.field(t.bus_id).field(buses[b].models.size()).field(t.r_count);
    w.field(t.run.result.centers.size()).field(t.run.result.outliers.size()).field(t.run.dc.value);
    w.end_row();
  }
  return w.str();
}

inline std::vector<TemporalResult> run_cluster_temporal(const Manifest& m, std::ostream* log = nullptr) {
  const auto buses = load_buses(m, log);
  std::vector<TemporalResult> results;
  for (const auto& bus : buses) {
    results.push_back(temporal_cluster(bus, m.nc_temporal, m.suite, m.sim, clustering_options(m)));
    write_temporal(m, results.back());
    if (log) {
      *log << bus.bus_id << ": " << bus.models.size() << " models -> " << results.back().r_count
           << " RLMs (" << results.back().run.result.outliers.size() << " outliers)\n";
    }
  }
  io::write_text(m.output_dir / "temporal" / "summary.csv", temporal_summary_csv(results, buses));
  return results;
}

inline void write_spatial(const Manifest& m, std::size_t nc, const SpatialResult& sp) {
  const fs::path dir = paths::spatial_dir(m, nc);
  io::write_json(dir / "ra.json", io::zip_set_to_json(sp.ra));
  io::write_json(dir / "rr.json", io::zip_set_to_json(sp.rr));
  io::write_json(dir / "rd.json", io::motor_set_to_json(sp.rd));
  io::write_text(dir / "compressed.csv", io::compressed_csv(sp.compressed));
  io::write_text(dir / "decision_active.csv", io::decision_graph_csv(sp.active.run.graph));
  io::write_text(dir / "decision_reactive.csv", io::decision_graph_csv(sp.reactive.run.graph));
  io::write_text(dir / "decision_dynamic.csv", io::decision_graph_csv(sp.dynamic.run.graph));
}

inline std::vector<TemporalResult> load_all_temporal(const Manifest& m) {
  std::vector<TemporalResult> out;
  for (const auto& id : bus_ids(m)) out.push_back(load_temporal(m, id));
  return out;
}

inline std::map<std::size_t, SpatialResult> run_cluster_spatial(const Manifest& m,
                                                                std::ostream* log = nullptr) {
  const auto temporal = load_all_temporal(m);
  std::map<std::size_t, SpatialResult> out;
  for (std::size_t nc : m.nc_spatial) {
    auto sp = spatial_cluster(temporal, nc, m.suite, m.sim, clustering_options(m));
    write_spatial(m, nc, sp);
    if (log) {
      *log << "nc=" << nc << ": |RA|=" << sp.ra.size() << " |RR|=" << sp.rr.size()
           << " |RD|=" << sp.rd.size() << " over " << sp.compressed.size() << " RLMs\n";
    }
    out.emplace(nc, std::move(sp));
  }
  return out;
}

inline void write_fitting(const fs::path& dir, const FittingReport& rep) {
  io::write_text(dir / "fitting_summary.csv", io::fitting_summary_csv(rep));
  io::write_text(dir / "fitting_rows.csv", io::fitting_rows_csv(rep));
  io::write_text(dir / "fitting_summary.txt", io::fitting_summary_text(rep));
}

struct ValidateOutcome {
  FittingReport primary;  // scored on the stored hierarchy
  std::optional<BasisComparison> comparison;
};

/// Validates the stored hierarchy. With compare_bases the hierarchy is rerun
/// in memory on raw parameter distances and scored on the same cases.
inline ValidateOutcome run_validate(const Manifest& m, std::ostream* log = nullptr) {
  const auto buses = load_buses(m, log);
  const auto temporal = load_all_temporal(m);
  std::map<std::size_t, SpatialResult> spatial;
  for (std::size_t nc : m.nc_spatial) spatial.emplace(nc, load_spatial(m, nc));
  ValidationOptions vopt = m.validation;
  vopt.workers = m.workers;

  ValidateOutcome out;
  out.primary = run_validation(buses, temporal, spatial, vopt);
  const fs::path dir = m.output_dir / "validation";
  write_fitting(dir, out.primary);
  if (log) *log << io::fitting_summary_text(out.primary);

  if (m.compare_bases) {
    ClusteringOptions opt = clustering_options(m);
    opt.basis = m.basis == DistanceBasis::pfr ? DistanceBasis::parameter : DistanceBasis::pfr;
    const auto h = run_hierarchy(buses, m.nc_temporal, m.nc_spatial, m.suite, m.sim, opt);
    FittingReport other = run_validation(buses, h.temporal, h.spatial_by_nc, vopt);
    const char* other_name = opt.basis == DistanceBasis::parameter ? "parameter" : "pfr";
    write_fitting(dir / (std::string(other_name) + "_basis"), other);

    BasisComparison cmp;
    cmp.pfr = m.basis == DistanceBasis::pfr ? out.primary : other;
    cmp.parameter = m.basis == DistanceBasis::pfr ? std::move(other) : out.primary;
    io::CsvWriter w{"scenario", "mean_f_pfr", "mean_f_parameter"};
    for (const auto& s : cmp.pfr.summaries) {
      w.field(s.scenario).field(s.mean_f).field(cmp.parameter.summary(s.scenario).mean_f);
      w.end_row();
    }
    io::write_text(dir / "basis_comparison.csv", w.str());
    if (log) *log << "basis comparison\n" << w.str();
    out.comparison = std::move(cmp);
  }
  return out;
}

/// Storage of the stored pipeline outputs, one report per spatial nc.
inline std::map<std::size_t, StorageReport> run_report(const Manifest& m, std::ostream* log = nullptr) {
  StorageInputs in = m.storage;
  const auto ids = bus_ids(m);
  std::size_t models = 0;
  for (const auto& id : ids) models += io::read_bus(paths::model_file(m, id)).models.size();
  std::size_t rlms = 0;
  for (const auto& t : load_all_temporal(m)) rlms += t.r_count;
  // Only the product n_buses * models_per_bus enters the original size, so
  // uneven buses are folded into a single count.
  in.n_buses = 1;
  in.models_per_bus = models;
  in.total_rlms = rlms;

  std::map<std::size_t, StorageReport> out;
  io::CsvWriter summary{"nc", "na", "nr", "nd", "ori_bytes", "tem_bytes", "spa_bytes",
                        "reduction_ori_tem_pct", "reduction_tem_spa_pct"};
  for (std::size_t nc : m.nc_spatial) {
    const auto sp = load_spatial(m, nc);
    in.nc = nc;
    const auto rep = storage_report(in, sp.ra.size(), sp.rr.size(), sp.rd.size());
    const std::string stem = "storage_nc" + std::to_string(nc);
    io::write_text(m.output_dir / "report" / (stem + ".csv"), io::storage_csv(rep));
    io::write_text(m.output_dir / "report" / (stem + ".txt"), io::storage_text(rep));
    summary.field(nc).field(sp.ra.size()).field(sp.rr.size()).field(sp.rd.size());
    summary.field(rep.ori.total_bytes).field(rep.tem.total_bytes).field(rep.spa.total_bytes);
    summary.field(100.0 * rep.reduction_ori_tem()).field(100.0 * rep.reduction_tem_spa());
    summary.end_row();
    if (log) *log << "nc=" << nc << "\n" << io::storage_text(rep);
    out.emplace(nc, rep);
  }
  io::write_text(m.output_dir / "report" / "storage_summary.csv", summary.str());
  return out;
}

/// gen (unless external model files are given), then every clustering,
/// validation and report stage.
inline void run_all(const Manifest& m, std::ostream* log = nullptr) {
  if (m.buses.empty()) run_gen(m);
  run_cluster_temporal(m, log);
  run_cluster_spatial(m, log);
  run_validate(m, log);
  run_report(m, log);
}

}  // namespace loadclust

#pragma once

// File formats: JSON for models, fault suites and representative sets; CSV
// with a header row for every table. Doubles are written in the shortest form
// that reads back to the same value, so files are byte-stable across runs.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadclust/distance.hpp"
#include "loadclust/errors.hpp"
#include "loadclust/fdc.hpp"
#include "loadclust/hierarchy.hpp"
#include "loadclust/load_model.hpp"
#include "loadclust/pfr.hpp"
#include "loadclust/validation.hpp"

namespace loadclust::io {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Text files

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return os.str();
}

inline void write_text(const fs::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(origin + ": malformed JSON: " + e.what());
  }
}

inline json read_json(const fs::path& path) { return parse_json(read_text(path), path.string()); }

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// CSV

/// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& origin) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InvalidArgument(origin + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

/// Builds a CSV document row by row. Fields are never quoted, so callers must
/// not pass commas or newlines inside a field.
class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<std::string_view> header) {
    for (auto h : header) field(h);
    end_row();
  }

  CsvWriter& field(std::string_view s) {
    if (!first_) text_ += ',';
    text_ += s;
    first_ = false;
    return *this;
  }
  CsvWriter& field(double v) { return field(format_double(v)); }
  CsvWriter& field(std::size_t v) { return field(std::to_string(v)); }
  CsvWriter& field(long long v) { return field(std::to_string(v)); }

  void end_row() {
    text_ += '\n';
    first_ = true;
  }

  const std::string& str() const { return text_; }

 private:
  std::string text_;
  bool first_ = true;
};

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Model schema

namespace detail {

inline double number(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw InvalidArgument(ctx + ": missing field '" + key + "'");
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw InvalidArgument(ctx + ": field '" + key + "' is not a number");
  return v.get<double>();
}

inline std::string string_field(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_string()) {
    throw InvalidArgument(ctx + ": missing string field '" + key + "'");
  }
  return obj.at(key).get<std::string>();
}

inline const json& array_field(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_array()) {
    throw InvalidArgument(ctx + ": missing array field '" + key + "'");
  }
  return obj.at(key);
}

}  // namespace detail

inline json to_json(const ZipParams& z) {
  return {{"z_coeff", z.z_coeff}, {"i_coeff", z.i_coeff}, {"p_coeff", z.p_coeff}};
}

inline json to_json(const MotorParams& m) {
  return {{"x_open", m.x_open},           {"x_transient", m.x_transient},
          {"t_open", m.t_open},           {"inertia", m.inertia},
          {"torque_mech", m.torque_mech}, {"omega_sync", m.omega_sync}};
}

inline json to_json(const CompositeLoadModel& m) {
  return {{"dyn_proportion", m.dyn_proportion}, {"active_static", to_json(m.active_static)},
          {"reactive_static", to_json(m.reactive_static)}, {"motor", to_json(m.motor)},
          {"nominal_p", m.nominal_p}, {"nominal_q", m.nominal_q}};
}

/// Reads ZIP coefficients and rescales them to sum to one. A sum further than
/// 1e-6 from one is reported through `warnings`.
inline ZipParams zip_from_json(const json& j, const std::string& ctx,
                               std::vector<std::string>* warnings = nullptr) {
  const ZipParams raw{detail::number(j, "z_coeff", ctx), detail::number(j, "i_coeff", ctx),
                      detail::number(j, "p_coeff", ctx)};
  if (raw.z_coeff < 0.0 || raw.i_coeff < 0.0 || raw.p_coeff < 0.0) {
    throw InvalidArgument(ctx + ": ZIP coefficients must be >= 0");
  }
  // Values already summing to one within the model tolerance are kept as
  // written, so files round-trip bit for bit.
  if (std::abs(raw.sum() - 1.0) <= kZipSumTolerance) return raw;
  const auto norm = normalize_zip(raw);
  if (norm.deviated() && warnings) {
    warnings->push_back(ctx + ": ZIP coefficients summed to " + format_double(norm.raw_sum) +
                        ", renormalized");
  }
  return norm.zip;
}

inline MotorParams motor_from_json(const json& j, const std::string& ctx) {
  MotorParams m;
  m.x_open = detail::number(j, "x_open", ctx);
  m.x_transient = detail::number(j, "x_transient", ctx);
  m.t_open = detail::number(j, "t_open", ctx);
  m.inertia = detail::number(j, "inertia", ctx);
  m.torque_mech = detail::number(j, "torque_mech", ctx);
  if (j.contains("omega_sync")) m.omega_sync = detail::number(j, "omega_sync", ctx);
  validate(m);
  return m;
}

inline CompositeLoadModel model_from_json(const json& j, const std::string& ctx,
                                          std::vector<std::string>* warnings = nullptr) {
  if (!j.is_object()) throw InvalidArgument(ctx + ": model must be an object");
  CompositeLoadModel m;
  m.dyn_proportion = detail::number(j, "dyn_proportion", ctx);
  m.active_static = zip_from_json(j.value("active_static", json::object()), ctx + ".active_static", warnings);
  m.reactive_static =
      zip_from_json(j.value("reactive_static", json::object()), ctx + ".reactive_static", warnings);
  m.motor = motor_from_json(j.value("motor", json::object()), ctx + ".motor");
  m.nominal_p = detail::number(j, "nominal_p", ctx);
  m.nominal_q = detail::number(j, "nominal_q", ctx);
  try {
    validate(m);
  } catch (const Error& e) {
    throw InvalidArgument(ctx + ": " + e.what());
  }
  return m;
}

/// Model file: {"bus_id": ..., "models": [model, ...]}.
inline json bus_to_json(const BusModelSet& bus) {
  json models = json::array();
  for (const auto& m : bus.models) models.push_back(to_json(m));
  return {{"bus_id", bus.bus_id}, {"models", std::move(models)}};
}

inline BusModelSet bus_from_json(const json& j, const std::string& origin,
                                 std::vector<std::string>* warnings = nullptr) {
  BusModelSet bus;
  bus.bus_id = detail::string_field(j, "bus_id", origin);
  const json& models = detail::array_field(j, "models", origin);
  for (std::size_t i = 0; i < models.size(); ++i) {
    bus.models.push_back(
        model_from_json(models[i], origin + ": models[" + std::to_string(i) + "]", warnings));
  }
  return bus;
}

inline void write_bus(const fs::path& path, const BusModelSet& bus) { write_json(path, bus_to_json(bus)); }

inline BusModelSet read_bus(const fs::path& path, std::vector<std::string>* warnings = nullptr) {
  return bus_from_json(read_json(path), path.string(), warnings);
}

// ---------------------------------------------------------------------------
// Fault suites and simulation settings

inline json to_json(const FaultScenario& sc) {
  return {{"label", sc.label},
          {"pre_fault_voltage", sc.pre_fault_voltage},
          {"fault_depth", sc.fault_depth},
          {"t_fault_on", sc.t_fault_on},
          {"t_clear", sc.t_clear},
          {"recovery_time_constant", sc.recovery_time_constant}};
}

/// Missing numeric fields fall back to `defaults`; the label is required.
inline FaultScenario fault_from_json(const json& j, const std::string& ctx,
                                     const FaultScenario& defaults = {}) {
  if (!j.is_object()) throw InvalidArgument(ctx + ": fault scenario must be an object");
  FaultScenario sc = defaults;
  if (j.contains("label")) sc.label = detail::string_field(j, "label", ctx);
  if (sc.label.empty()) throw InvalidArgument(ctx + ": fault scenario needs a label");
  const auto opt = [&](const char* key, double& field) {
    if (j.contains(key)) field = detail::number(j, key, ctx);
  };
  opt("pre_fault_voltage", sc.pre_fault_voltage);
  opt("fault_depth", sc.fault_depth);
  opt("t_fault_on", sc.t_fault_on);
  opt("t_clear", sc.t_clear);
  opt("recovery_time_constant", sc.recovery_time_constant);
  try {
    validate(sc);
  } catch (const Error& e) {
    throw InvalidArgument(ctx + ": " + e.what());
  }
  return sc;
}

/// Suite file: {"scenarios": [scenario, ...]} with unique labels.
inline std::vector<FaultScenario> suite_from_json(const json& j, const std::string& origin) {
  const json& arr = j.is_array() ? j : detail::array_field(j, "scenarios", origin);
  std::vector<FaultScenario> suite;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    suite.push_back(fault_from_json(arr[i], origin + ": scenarios[" + std::to_string(i) + "]"));
    for (std::size_t k = 0; k + 1 < suite.size(); ++k) {
      if (suite[k].label == suite.back().label) {
        throw InvalidArgument(origin + ": duplicate scenario label '" + suite.back().label + "'");
      }
    }
  }
  if (suite.empty()) throw InvalidArgument(origin + ": fault suite is empty");
  return suite;
}

inline json suite_to_json(std::span<const FaultScenario> suite) {
  json arr = json::array();
  for (const auto& sc : suite) arr.push_back(to_json(sc));
  return {{"scenarios", std::move(arr)}};
}

inline std::vector<FaultScenario> read_suite(const fs::path& path) {
  return suite_from_json(read_json(path), path.string());
}

// ---------------------------------------------------------------------------
// Tables

/// One file per (model, scenario): columns time, p, q.
inline std::string curve_csv(const PfrCurve& c) {
  CsvWriter w{"time", "p", "q"};
  for (std::size_t t = 0; t < c.size(); ++t) {
    w.field(c.times[t]).field(c.p_values[t]).field(c.q_values[t]);
    w.end_row();
  }
  return w.str();
}

/// Header "id,<id_0>,...,<id_n-1>", then one row per element starting with its id.
inline std::string distance_csv(const DistanceMatrix& d, std::span<const std::string> ids) {
  if (ids.size() != d.size()) throw InvalidArgument("distance_csv: id count differs from matrix size");
  std::string text = "id";
  for (const auto& id : ids) text += "," + id;
  text += '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    text += ids[i];
    for (double v : d.row(i)) text += "," + format_double(v);
    text += '\n';
  }
  return text;
}

struct LabeledMatrix {
  std::vector<std::string> ids;
  DistanceMatrix matrix;
};

inline LabeledMatrix distance_from_csv(const std::string& text, const std::string& origin) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0].empty() || rows[0][0] != "id") {
    throw InvalidArgument(origin + ": distance matrix needs an 'id' header");
  }
  LabeledMatrix out;
  out.ids.assign(rows[0].begin() + 1, rows[0].end());
  const std::size_t n = out.ids.size();
  if (rows.size() != n + 1) throw InvalidArgument(origin + ": expected " + std::to_string(n) + " rows");
  std::vector<double> values;
  values.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i + 1];
    if (r.size() != n + 1 || r[0] != out.ids[i]) {
      throw InvalidArgument(origin + ": malformed row " + std::to_string(i + 1));
    }
    for (std::size_t j = 0; j < n; ++j) values.push_back(parse_double(r[j + 1], origin));
  }
  try {
    out.matrix = DistanceMatrix(n, std::move(values));
  } catch (const Error& e) {
    throw InvalidArgument(origin + ": " + e.what());
  }
  return out;
}

/// Columns index, rho, delta, rho_delta, nhd (-1 for the density maximum).
inline std::string decision_graph_csv(const DecisionGraph& g) {
  CsvWriter w{"index", "rho", "delta", "rho_delta", "nhd"};
  for (std::size_t i = 0; i < g.size(); ++i) {
    w.field(i).field(g.rho[i]).field(g.delta[i]).field(g.gamma(i));
    w.field(g.nhd[i] ? static_cast<long long>(*g.nhd[i]) : -1LL);
    w.end_row();
  }
  return w.str();
}

/// Columns bus, k, rp, ia, ir, id (indexes 1-based).
inline std::string compressed_csv(std::span<const CompressedRecord> records) {
  CsvWriter w{"bus", "k", "rp", "ia", "ir", "id"};
  for (const auto& r : records) {
    w.field(r.bus_id).field(r.k).field(r.rp).field(r.ia).field(r.ir).field(r.id);
    w.end_row();
  }
  return w.str();
}

inline std::vector<CompressedRecord> compressed_from_csv(const std::string& text,
                                                         const std::string& origin) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"bus", "k", "rp", "ia", "ir", "id"}) {
    throw InvalidArgument(origin + ": expected header bus,k,rp,ia,ir,id");
  }
  const auto index = [&](const std::string& s) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw InvalidArgument(origin + ": not an index: '" + s + "'");
    }
    return v;
  };
  std::vector<CompressedRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 6) throw InvalidArgument(origin + ": row " + std::to_string(i) + " needs 6 fields");
    out.push_back({r[0], index(r[1]), parse_double(r[2], origin), index(r[3]), index(r[4]), index(r[5])});
  }
  return out;
}

/// Columns bus, model_index, basic_index.
inline std::string labels_csv(std::span<const std::string> bus_ids,
                              std::span<const std::vector<std::size_t>> labels) {
  CsvWriter w{"bus", "model_index", "basic_index"};
  for (std::size_t b = 0; b < bus_ids.size(); ++b) {
    for (std::size_t i = 0; i < labels[b].size(); ++i) {
      w.field(bus_ids[b]).field(i).field(labels[b][i]);
      w.end_row();
    }
  }
  return w.str();
}

/// Columns model_index, k (1-based RLM), source_model.
inline std::string membership_csv(const TemporalResult& t) {
  CsvWriter w{"model_index", "k", "source_model"};
  for (std::size_t i = 0; i < t.membership.size(); ++i) {
    const std::size_t k = t.membership[i];
    w.field(i).field(k + 1).field(t.rlm_sources[k]);
    w.end_row();
  }
  return w.str();
}

/// RLM file: the model-file schema plus the source index of every RLM.
inline json rlms_to_json(const TemporalResult& t) {
  json j = bus_to_json({t.bus_id, t.rlms});
  j["sources"] = t.rlm_sources;
  return j;
}

inline json zip_set_to_json(std::span<const ZipParams> set) {
  json arr = json::array();
  for (const auto& z : set) arr.push_back(to_json(z));
  return arr;
}

inline json motor_set_to_json(std::span<const MotorParams> set) {
  json arr = json::array();
  for (const auto& m : set) arr.push_back(to_json(m));
  return arr;
}

inline std::vector<ZipParams> zip_set_from_json(const json& j, const std::string& origin) {
  if (!j.is_array()) throw InvalidArgument(origin + ": expected an array of ZIP sets");
  std::vector<ZipParams> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(zip_from_json(j[i], origin + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline std::vector<MotorParams> motor_set_from_json(const json& j, const std::string& origin) {
  if (!j.is_array()) throw InvalidArgument(origin + ": expected an array of motor sets");
  std::vector<MotorParams> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(motor_from_json(j[i], origin + "[" + std::to_string(i) + "]"));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string percent(double fraction) { return format_double(100.0 * fraction); }

/// Scenarios as columns and the aggregate rows of the fitting table.
inline std::string fitting_summary_csv(const FittingReport& rep) {
  std::string text = "metric";
  for (const auto& s : rep.summaries) text += "," + s.scenario;
  text += '\n';
  const auto row = [&](const char* name, auto&& get) {
    text += name;
    for (const auto& s : rep.summaries) text += "," + get(s);
    text += '\n';
  };
  row("mean_fp", [](const ScenarioSummary& s) { return format_double(s.mean_fp); });
  row("mean_fq", [](const ScenarioSummary& s) { return format_double(s.mean_fq); });
  row("mean_f", [](const ScenarioSummary& s) { return format_double(s.mean_f); });
  row("pct_f_above_0.9", [](const ScenarioSummary& s) { return percent(s.frac_above_090); });
  row("pct_f_above_0.95", [](const ScenarioSummary& s) { return percent(s.frac_above_095); });
  return text;
}

inline std::string fitting_rows_csv(const FittingReport& rep) {
  CsvWriter w{"case", "bus", "scenario", "fp", "fq", "f"};
  for (const auto& r : rep.rows) {
    w.field(r.case_index).field(r.bus_id).field(r.scenario).field(r.fp).field(r.fq).field(r.f);
    w.end_row();
  }
  return w.str();
}

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

inline std::string fitting_summary_text(const FittingReport& rep) {
  std::ostringstream os;
  os << "validation cases: " << rep.n_cases << " (" << rep.excluded_cases << " excluded)\n";
  os << "scenario    mean FP   mean FQ   mean F   F>0.9 %  F>0.95 %\n";
  for (const auto& s : rep.summaries) {
    os << s.scenario << std::string(s.scenario.size() < 10 ? 10 - s.scenario.size() : 1, ' ')
       << "  " << fixed(s.mean_fp, 4) << "    " << fixed(s.mean_fq, 4) << "    " << fixed(s.mean_f, 4)
       << "   " << fixed(100.0 * s.frac_above_090, 1) << "     " << fixed(100.0 * s.frac_above_095, 1)
       << "\n";
  }
  for (const auto& reason : rep.exclusion_reasons) os << "excluded " << reason << "\n";
  return os.str();
}

inline std::string storage_csv(const StorageReport& rep) {
  CsvWriter w{"scenario", "motor_params", "static_params", "dyn_proportions", "indexes", "total_bytes"};
  for (const StorageRow* r : {&rep.ori, &rep.tem, &rep.spa}) {
    w.field(r->label).field(r->motor_params).field(r->static_params).field(r->dyn_proportions);
    w.field(r->indexes).field(r->total_bytes);
    w.end_row();
  }
  return w.str();
}

inline std::string storage_text(const StorageReport& rep) {
  std::ostringstream os;
  for (const StorageRow* r : {&rep.ori, &rep.tem, &rep.spa}) {
    os << r->label << ": " << r->total_bytes << " bytes (motor params " << r->motor_params
       << ", static params " << r->static_params << ", dynamic proportions " << r->dyn_proportions
       << ", indexes " << r->indexes << ")\n";
  }
  os << "reduction Ori->Tem: " << fixed(100.0 * rep.reduction_ori_tem(), 2) << " %\n";
  os << "reduction Tem->Spa: " << fixed(100.0 * rep.reduction_tem_spa(), 2) << " %\n";
  return os.str();
}

}  // namespace loadclust::io

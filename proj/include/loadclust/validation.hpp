#pragma once

// How well representative models stand in for the originals: responses of
// the original model of each bus are compared with the responses of its
// temporal RLM and of its spatially reconstructed model, per validation case.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "loadclust/errors.hpp"
#include "loadclust/hierarchy.hpp"
#include "loadclust/parallel.hpp"
#include "loadclust/pfr.hpp"
#include "loadclust/rng.hpp"

namespace loadclust {

/// 1 - sum (ref - test)^2 / sum (ref - mean(ref))^2.
inline double fitting_degree(std::span<const double> y_ref, std::span<const double> y_test) {
  if (y_ref.size() != y_test.size()) throw InvalidArgument("fitting_degree: length mismatch");
  if (y_ref.size() < 2) throw InvalidArgument("fitting_degree: needs at least two samples");
  double mean = 0.0;
  for (double v : y_ref) mean += v;
  mean /= static_cast<double>(y_ref.size());
  double err = 0.0;
  double var = 0.0;
  for (std::size_t t = 0; t < y_ref.size(); ++t) {
    err += (y_ref[t] - y_test[t]) * (y_ref[t] - y_test[t]);
    var += (y_ref[t] - mean) * (y_ref[t] - mean);
  }
  if (var == 0.0) throw ConstantReference("fitting_degree: reference series is constant");
  return 1.0 - err / var;
}

struct ValidationCase {
  std::size_t index = 0;
  std::vector<std::size_t> model_indices;  // one drawn original model per bus
};

struct FittingRow {
  std::size_t case_index = 0;
  std::string bus_id;
  std::string scenario;  // "Tem" or "Spa<nc>"
  double fp = 0.0;
  double fq = 0.0;
  double f = 0.0;
};

struct ScenarioSummary {
  std::string scenario;
  std::size_t rows = 0;
  double mean_fp = 0.0;
  double mean_fq = 0.0;
  double mean_f = 0.0;
  double frac_above_090 = 0.0;
  double frac_above_095 = 0.0;
};

struct FittingReport {
  std::size_t n_cases = 0;
  std::size_t excluded_cases = 0;
  std::vector<std::string> exclusion_reasons;
  std::vector<FittingRow> rows;
  std::vector<ScenarioSummary> summaries;  // Tem first, then Spa by increasing nc

  const ScenarioSummary& summary(const std::string& scenario) const {
    for (const auto& s : summaries) {
      if (s.scenario == scenario) return s;
    }
    throw InvalidArgument("fitting report has no scenario '" + scenario + "'");
  }
};

struct ValidationOptions {
  std::size_t n_cases = 100;
  FaultScenario fault = default_validation_fault();
  SimConfig cfg = [] {
    SimConfig c;
    c.excitation_mode = ExcitationMode::thevenin;
    return c;
  }();
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

inline std::string spa_label(std::size_t nc) { return "Spa" + std::to_string(nc); }

inline std::vector<ValidationCase> draw_cases(std::span<const BusModelSet> buses, std::size_t n_cases,
                                              std::uint64_t seed) {
  Rng rng = make_rng(seed, "validation-cases");
  std::vector<ValidationCase> cases(n_cases);
  for (std::size_t c = 0; c < n_cases; ++c) {
    cases[c].index = c;
    for (const auto& bus : buses) {
      if (bus.models.empty()) throw InvalidArgument("validation: bus " + bus.bus_id + " has no models");
      std::uniform_int_distribution<std::size_t> pick(0, bus.models.size() - 1);
      cases[c].model_indices.push_back(pick(rng));
    }
  }
  return cases;
}

inline ScenarioSummary summarize(const std::string& scenario, std::span<const FittingRow> rows) {
  ScenarioSummary s;
  s.scenario = scenario;
  std::size_t above90 = 0;
  std::size_t above95 = 0;
  for (const auto& r : rows) {
    if (r.scenario != scenario) continue;
    ++s.rows;
    s.mean_fp += r.fp;
    s.mean_fq += r.fq;
    s.mean_f += r.f;
    above90 += r.f > 0.9;
    above95 += r.f > 0.95;
  }
  if (s.rows) {
    const auto n = static_cast<double>(s.rows);
    s.mean_fp /= n;
    s.mean_fq /= n;
    s.mean_f /= n;
    s.frac_above_090 = static_cast<double>(above90) / n;
    s.frac_above_095 = static_cast<double>(above95) / n;
  }
  return s;
}

namespace detail {

struct SimOutcome {
  std::optional<PfrCurve> curve;
  std::string error;
};

inline SimOutcome try_simulate(const CompositeLoadModel& m, const FaultScenario& fault,
                               const SimConfig& cfg) {
  try {
    return {simulate_pfr(m, fault, cfg), {}};
  } catch (const Error& e) {
    return {std::nullopt, e.what()};
  }
}

}  // namespace detail

/// Replaces every bus's drawn model by its temporal RLM (Tem) and by its
/// spatial reconstruction for each nc (Spa<nc>) and scores the responses
/// against the original. A case with any failed simulation or undefined
/// fitting degree is excluded as a whole and counted.
inline FittingReport run_validation(std::span<const BusModelSet> buses,
                                    std::span<const TemporalResult> temporal,
                                    const std::map<std::size_t, SpatialResult>& spatial_by_nc,
                                    const ValidationOptions& opt = {}) {
  if (buses.size() != temporal.size()) {
    throw InvalidArgument("validation: bus and temporal result counts differ");
  }
  for (std::size_t b = 0; b < buses.size(); ++b) {
    if (buses[b].bus_id != temporal[b].bus_id) {
      throw InvalidArgument("validation: temporal result order does not match buses at " +
                            buses[b].bus_id);
    }
    if (temporal[b].membership.size() != buses[b].models.size()) {
      throw InvalidArgument("validation: membership size mismatch for " + buses[b].bus_id);
    }
  }
  validate(opt.cfg, opt.fault);
  const auto cases = draw_cases(buses, opt.n_cases, opt.seed);

  // Every distinct response is simulated once: originals that were drawn,
  // each bus's temporal RLMs and each bus's reconstructed models per nc.
  struct Job {
    CompositeLoadModel model;
  };
  std::vector<Job> jobs;
  std::vector<std::map<std::size_t, std::size_t>> ori_job(buses.size());
  std::vector<std::vector<std::size_t>> tem_job(buses.size());
  std::map<std::size_t, std::vector<std::vector<std::size_t>>> spa_job;
  for (const auto& c : cases) {
    for (std::size_t b = 0; b < buses.size(); ++b) {
      const std::size_t j = c.model_indices[b];
      if (!ori_job[b].count(j)) {
        ori_job[b][j] = jobs.size();
        jobs.push_back({buses[b].models[j]});
      }
    }
  }
  for (std::size_t b = 0; b < buses.size(); ++b) {
    for (const auto& rlm : temporal[b].rlms) {
      tem_job[b].push_back(jobs.size());
      jobs.push_back({rlm});
    }
  }
  for (const auto& [nc, sp] : spatial_by_nc) {
    auto& per_bus = spa_job[nc];
    per_bus.resize(buses.size());
    for (std::size_t b = 0; b < buses.size(); ++b) {
      const auto& nominal = buses[b].models.front();
      for (std::size_t k = 0; k < temporal[b].rlms.size(); ++k) {
        const auto& rec = find_record(sp, buses[b].bus_id, k);
        per_bus[b].push_back(jobs.size());
        jobs.push_back({reconstruct_model(rec, sp, nominal.nominal_p, nominal.nominal_q)});
      }
    }
  }

  std::vector<detail::SimOutcome> outcomes(jobs.size());
  parallel_for(jobs.size(), opt.workers, [&](std::size_t i) {
    outcomes[i] = detail::try_simulate(jobs[i].model, opt.fault, opt.cfg);
  });

  FittingReport rep;
  rep.n_cases = cases.size();
  std::vector<std::string> scenarios{"Tem"};
  for (const auto& [nc, sp] : spatial_by_nc) scenarios.push_back(spa_label(nc));

  for (const auto& c : cases) {
    std::vector<FittingRow> case_rows;
    std::string failure;
    try {
      for (std::size_t b = 0; b < buses.size() && failure.empty(); ++b) {
        const std::size_t j = c.model_indices[b];
        const std::size_t k = temporal[b].membership[j];
        const auto& ori = outcomes[ori_job[b].at(j)];
        if (!ori.curve) {
          failure = buses[b].bus_id + " Ori: " + ori.error;
          break;
        }
        const auto score = [&](const std::string& label, const detail::SimOutcome& rep_out) {
          if (!rep_out.curve) {
            failure = buses[b].bus_id + " " + label + ": " + rep_out.error;
            return;
          }
          FittingRow row;
          row.case_index = c.index;
          row.bus_id = buses[b].bus_id;
          row.scenario = label;
          row.fp = fitting_degree(ori.curve->p_values, rep_out.curve->p_values);
          row.fq = fitting_degree(ori.curve->q_values, rep_out.curve->q_values);
          row.f = 0.5 * (row.fp + row.fq);
          case_rows.push_back(row);
        };
        score("Tem", outcomes[tem_job[b][k]]);
        for (const auto& [nc, per_bus] : spa_job) {
          if (!failure.empty()) break;
          score(spa_label(nc), outcomes[per_bus[b][k]]);
        }
      }
    } catch (const Error& e) {
      failure = e.what();
    }
    if (!failure.empty()) {
      ++rep.excluded_cases;
      rep.exclusion_reasons.push_back("case " + std::to_string(c.index) + ": " + failure);
      continue;
    }
    rep.rows.insert(rep.rows.end(), case_rows.begin(), case_rows.end());
  }
  for (const auto& s : scenarios) rep.summaries.push_back(summarize(s, rep.rows));
  return rep;
}

// ---------------------------------------------------------------------------
// Full hierarchy and basis comparison

struct HierarchyRun {
  std::vector<TemporalResult> temporal;
  std::map<std::size_t, SpatialResult> spatial_by_nc;
};

inline HierarchyRun run_hierarchy(std::span<const BusModelSet> buses, std::size_t nc_temporal,
                                  std::span<const std::size_t> nc_spatial,
                                  std::span<const FaultScenario> suite, const SimConfig& cfg,
                                  const ClusteringOptions& opt = {}) {
  HierarchyRun run;
  run.temporal.resize(buses.size());
  // Buses are independent; parallelism lives inside each bus's stage.
  for (std::size_t b = 0; b < buses.size(); ++b) {
    run.temporal[b] = temporal_cluster(buses[b], nc_temporal, suite, cfg, opt);
  }
  for (std::size_t nc : nc_spatial) {
    run.spatial_by_nc[nc] = spatial_cluster(run.temporal, nc, suite, cfg, opt);
  }
  return run;
}

struct BasisComparison {
  FittingReport pfr;
  FittingReport parameter;
};

/// Runs the hierarchy and validation once with the PFR distance and once
/// with the raw parameter distance, on the same validation cases.
inline BasisComparison compare_clustering_bases(std::span<const BusModelSet> buses,
                                                std::size_t nc_temporal,
                                                std::span<const std::size_t> nc_spatial,
                                                std::span<const FaultScenario> suite,
                                                const SimConfig& cfg, const ClusteringOptions& opt,
                                                const ValidationOptions& vopt) {
  BasisComparison out;
  for (DistanceBasis basis : {DistanceBasis::pfr, DistanceBasis::parameter}) {
    ClusteringOptions o = opt;
    o.basis = basis;
    const auto h = run_hierarchy(buses, nc_temporal, nc_spatial, suite, cfg, o);
    auto rep = run_validation(buses, h.temporal, h.spatial_by_nc, vopt);
    (basis == DistanceBasis::pfr ? out.pfr : out.parameter) = std::move(rep);
  }
  return out;
}

}  // namespace loadclust

#pragma once

// Two-stage compression of load-model sets.
//
// Temporal stage (per bus): cluster the bus's models by their full composite
// post-fault responses and keep the seeds of each cluster as the bus's
// representative load models (RLMs).
//
// Spatial stage (control center): pool every bus's RLMs, split them into
// active static, reactive static and motor components, cluster each
// component separately and replace every RLM by a compressed record
// [rp, ia, ir, id] pointing into the three representative sets.

#include <algorithm>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "loadclust/distance.hpp"
#include "loadclust/errors.hpp"
#include "loadclust/fdc.hpp"
#include "loadclust/load_model.hpp"
#include "loadclust/parallel.hpp"
#include "loadclust/pfr.hpp"

namespace loadclust {

struct BusModelSet {
  std::string bus_id;
  std::vector<CompositeLoadModel> models;
};

enum class DistanceBasis { pfr, parameter };

struct ClusteringOptions {
  FdcOptions fdc;
  DistanceBasis basis = DistanceBasis::pfr;
  unsigned workers = 1;
};

struct TemporalResult {
  std::string bus_id;
  std::vector<CompositeLoadModel> rlms;
  /// Index into the bus's model list of the element each RLM was taken from.
  std::vector<std::size_t> rlm_sources;
  /// RLM index (0-based) of every original model.
  std::vector<std::size_t> membership;
  std::size_t r_count = 0;
  FdcRun run;
  DistanceMatrix distances;
};

/// Compressed RLM record. k, ia, ir and id are 1-based like the published
/// record layout; everything else in the library is 0-based.
struct CompressedRecord {
  std::string bus_id;
  std::size_t k = 1;
  double rp = 0.0;
  std::size_t ia = 1;
  std::size_t ir = 1;
  std::size_t id = 1;

  bool operator==(const CompressedRecord&) const = default;
};

struct ComponentClustering {
  FdcRun run;
  DistanceMatrix distances;
};

struct SpatialResult {
  std::vector<ZipParams> ra;
  std::vector<ZipParams> rr;
  std::vector<MotorParams> rd;
  std::vector<CompressedRecord> compressed;
  std::size_t nc = 0;
  ComponentClustering active;
  ComponentClustering reactive;
  ComponentClustering dynamic;
};

namespace detail {

/// Rethrows the library error being handled with `context` prefixed to its
/// message, keeping its concrete type.
[[noreturn]] inline void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const NoEquilibrium& e) {
    throw NoEquilibrium(e.torque_gap(), context + ": " + e.what());
  } catch (const Diverged& e) {
    throw Diverged(e.time(), context + ": " + e.what());
  } catch (const GridMismatch& e) {
    throw GridMismatch(e.first(), e.second(), context + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(context + ": " + e.what());
  } catch (const IndexOutOfRange& e) {
    throw IndexOutOfRange(context + ": " + e.what());
  } catch (const ConstantReference& e) {
    throw ConstantReference(context + ": " + e.what());
  } catch (const InfeasibleAfterRetries& e) {
    throw InfeasibleAfterRetries(context + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(context + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.category(), context + ": " + e.what());
  }
}

template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error&) {
    rethrow_with_context(context);
  }
}

template <typename Item, typename Simulate>
std::vector<PfrBundle> bundles_for(std::span<const Item> items, unsigned workers,
                                   Simulate&& simulate) {
  std::vector<PfrBundle> out(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) {
    try {
      out[i] = simulate(items[i]);
    } catch (const Error&) {
      rethrow_with_context("element " + std::to_string(i));
    }
  });
  return out;
}

template <typename Vec>
DistanceMatrix euclidean_matrix(const std::vector<Vec>& vecs, unsigned workers) {
  return build_matrix(
      vecs.size(), [&](std::size_t i, std::size_t j) { return euclidean(vecs[i], vecs[j]); },
      workers);
}

}  // namespace detail

/// Temporal clustering of one bus. nc is clamped to the number of models.
inline TemporalResult temporal_cluster(const BusModelSet& bus, std::size_t nc,
                                       std::span<const FaultScenario> suite, const SimConfig& cfg,
                                       const ClusteringOptions& opt = {}) {
  return detail::with_context("bus " + bus.bus_id, [&] {
    if (bus.models.empty()) throw InvalidArgument("bus has no models");
    if (nc < 1) throw InvalidArgument("nc must be >= 1");
    for (const auto& m : bus.models) {
      if (m.nominal_p != bus.models.front().nominal_p ||
          m.nominal_q != bus.models.front().nominal_q) {
        throw InvalidArgument("models do not share the bus nominal powers");
      }
    }
    const std::size_t n = bus.models.size();
    TemporalResult res;
    res.bus_id = bus.bus_id;
    if (opt.basis == DistanceBasis::pfr) {
      const auto bundles = detail::bundles_for<CompositeLoadModel>(
          bus.models, opt.workers,
          [&](const CompositeLoadModel& m) { return simulate_bundle(m, suite, cfg); });
      res.distances = build_distance_matrix(bundles, opt.workers);
    } else {
      std::vector<std::array<double, 12>> vecs;
      for (const auto& m : bus.models) vecs.push_back(parameter_vector(m));
      res.distances = detail::euclidean_matrix(vecs, opt.workers);
    }
    res.run = cluster(res.distances, std::min(nc, n), opt.fdc);
    res.rlm_sources = res.run.result.seeds();
    for (std::size_t s : res.rlm_sources) res.rlms.push_back(bus.models[s]);
    res.membership = res.run.result.assignment;
    res.r_count = res.rlms.size();
    return res;
  });
}

/// Spatial clustering over the pooled RLMs of every bus. The same nc is used
/// for the active, reactive and dynamic components; it is clamped to the
/// pooled count. Component responses are simulated on unit-nominal loads.
inline SpatialResult spatial_cluster(std::span<const TemporalResult> temporal, std::size_t nc,
                                     std::span<const FaultScenario> suite, const SimConfig& cfg,
                                     const ClusteringOptions& opt = {}) {
  struct Pooled {
    std::size_t bus;
    std::size_t k;
  };
  std::vector<Pooled> pool;
  std::vector<ZipParams> rba;
  std::vector<ZipParams> rbr;
  std::vector<MotorParams> rbd;
  for (std::size_t b = 0; b < temporal.size(); ++b) {
    for (std::size_t k = 0; k < temporal[b].rlms.size(); ++k) {
      const auto& rlm = temporal[b].rlms[k];
      pool.push_back({b, k});
      rba.push_back(rlm.active_static);
      rbr.push_back(rlm.reactive_static);
      rbd.push_back(rlm.motor);
    }
  }
  if (pool.empty()) throw InvalidArgument("spatial_cluster: no RLMs to cluster");
  if (nc < 1) throw InvalidArgument("spatial_cluster: nc must be >= 1");
  const std::size_t nc_eff = std::min(nc, pool.size());

  const auto run_component = [&](const std::string& tag, auto&& bundles_fn, auto&& vectors_fn) {
    return detail::with_context(tag, [&] {
      ComponentClustering cc;
      if (opt.basis == DistanceBasis::pfr) {
        cc.distances = build_distance_matrix(bundles_fn(), opt.workers);
      } else {
        cc.distances = detail::euclidean_matrix(vectors_fn(), opt.workers);
      }
      cc.run = cluster(cc.distances, nc_eff, opt.fdc);
      return cc;
    });
  };

  const auto zip_vectors = [](const std::vector<ZipParams>& zs) {
    std::vector<std::array<double, 3>> v;
    for (const auto& z : zs) v.push_back(zip_vector(z));
    return v;
  };

  SpatialResult sp;
  sp.nc = nc_eff;
  sp.active = run_component(
      "active",
      [&] {
        return detail::bundles_for<ZipParams>(rba, opt.workers, [&](const ZipParams& z) {
          return static_only_bundle(z, StaticComponent::active, suite, cfg);
        });
      },
      [&] { return zip_vectors(rba); });
  sp.reactive = run_component(
      "reactive",
      [&] {
        return detail::bundles_for<ZipParams>(rbr, opt.workers, [&](const ZipParams& z) {
          return static_only_bundle(z, StaticComponent::reactive, suite, cfg);
        });
      },
      [&] { return zip_vectors(rbr); });
  sp.dynamic = run_component(
      "dynamic",
      [&] {
        return detail::bundles_for<MotorParams>(
            rbd, opt.workers, [&](const MotorParams& m) { return dynamic_only_bundle(m, suite, cfg); });
      },
      [&] {
        std::vector<std::array<double, 5>> v;
        for (const auto& m : rbd) v.push_back(motor_vector(m));
        return v;
      });

  for (std::size_t s : sp.active.run.result.seeds()) sp.ra.push_back(rba[s]);
  for (std::size_t s : sp.reactive.run.result.seeds()) sp.rr.push_back(rbr[s]);
  for (std::size_t s : sp.dynamic.run.result.seeds()) sp.rd.push_back(rbd[s]);

  for (std::size_t l = 0; l < pool.size(); ++l) {
    const auto& tr = temporal[pool[l].bus];
    sp.compressed.push_back({tr.bus_id, pool[l].k + 1, tr.rlms[pool[l].k].dyn_proportion,
                             sp.active.run.result.assignment[l] + 1,
                             sp.reactive.run.result.assignment[l] + 1,
                             sp.dynamic.run.result.assignment[l] + 1});
  }
  return sp;
}

/// Expands a compressed record back into a full model. Nominal powers come
/// from the bus, since spatial representatives are unit-normalized shapes.
inline CompositeLoadModel reconstruct_model(const CompressedRecord& rec, const SpatialResult& sp,
                                            double nominal_p, double nominal_q) {
  const auto check = [&](std::size_t idx, std::size_t size, const char* name) {
    if (idx < 1 || idx > size) {
      std::ostringstream os;
      os << "reconstruct_model: " << name << "=" << idx << " outside [1, " << size << "] for "
         << rec.bus_id << " k=" << rec.k;
      throw IndexOutOfRange(os.str());
    }
  };
  check(rec.ia, sp.ra.size(), "ia");
  check(rec.ir, sp.rr.size(), "ir");
  check(rec.id, sp.rd.size(), "id");
  CompositeLoadModel m;
  m.dyn_proportion = rec.rp;
  m.active_static = sp.ra[rec.ia - 1];
  m.reactive_static = sp.rr[rec.ir - 1];
  m.motor = sp.rd[rec.id - 1];
  m.nominal_p = nominal_p;
  m.nominal_q = nominal_q;
  return m;
}

/// Compressed record of RLM k (0-based) of the given bus.
inline const CompressedRecord& find_record(const SpatialResult& sp, const std::string& bus_id,
                                           std::size_t k) {
  for (const auto& r : sp.compressed) {
    if (r.bus_id == bus_id && r.k == k + 1) return r;
  }
  std::ostringstream os;
  os << "no compressed record for " << bus_id << " k=" << k + 1;
  throw IndexOutOfRange(os.str());
}

// ---------------------------------------------------------------------------
// Storage accounting

struct StorageInputs {
  std::size_t n_buses = 10;
  std::size_t models_per_bus = 500;
  std::size_t total_rlms = 100;  // sum of r_i over buses
  std::size_t nc = 7;
  std::size_t motor_param_count = 4;
  std::size_t static_param_count = 6;
  std::size_t float_bytes = 4;
  std::size_t index_bytes = 1;
};

struct StorageRow {
  std::string label;
  std::size_t motor_params = 0;   // IMPs
  std::size_t static_params = 0;  // SPs
  std::size_t dyn_proportions = 0;
  std::size_t indexes = 0;
  std::size_t total_bytes = 0;
};

struct StorageReport {
  StorageRow ori;
  StorageRow tem;
  StorageRow spa;

  /// Fractional reductions Ori -> Tem and Tem -> Spa (0 when undefined).
  double reduction_ori_tem() const {
    return ori.total_bytes ? 1.0 - double(tem.total_bytes) / double(ori.total_bytes) : 0.0;
  }
  double reduction_tem_spa() const {
    return tem.total_bytes ? 1.0 - double(spa.total_bytes) / double(tem.total_bytes) : 0.0;
  }
};

/// Storage with explicit representative-set sizes (na, nr, nd).
inline StorageReport storage_report(const StorageInputs& in, std::size_t na, std::size_t nr,
                                    std::size_t nd) {
  if (in.static_param_count % 2 != 0) {
    throw InvalidArgument("storage_report: static_param_count must split evenly into P and Q");
  }
  const std::size_t half_static = in.static_param_count / 2;
  const auto bytes = [&](const StorageRow& r) {
    return (r.motor_params + r.static_params + r.dyn_proportions) * in.float_bytes +
           r.indexes * in.index_bytes;
  };
  StorageReport rep;
  const std::size_t n_models = in.models_per_bus * in.n_buses;
  rep.ori = {"Ori", in.motor_param_count * n_models, in.static_param_count * n_models, n_models, 0, 0};
  rep.tem = {"Tem", in.motor_param_count * in.total_rlms, in.static_param_count * in.total_rlms,
             in.total_rlms, 0, 0};
  rep.spa = {"Spa", in.motor_param_count * nd, half_static * (na + nr), in.total_rlms,
             3 * in.total_rlms, 0};
  rep.ori.total_bytes = bytes(rep.ori);
  rep.tem.total_bytes = bytes(rep.tem);
  rep.spa.total_bytes = bytes(rep.spa);
  return rep;
}

/// Storage with na = nr = nd = nc (clamped to the number of RLMs).
inline StorageReport storage_report(const StorageInputs& in) {
  const std::size_t nc = std::min(in.nc, in.total_rlms);
  return storage_report(in, nc, nc, nc);
}

}  // namespace loadclust

#pragma once

// Synthetic "identified" load-model datasets: a handful of basic models per
// bus and many Gaussian-perturbed variants around them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "loadclust/errors.hpp"
#include "loadclust/hierarchy.hpp"
#include "loadclust/load_model.hpp"
#include "loadclust/parallel.hpp"
#include "loadclust/pfr.hpp"
#include "loadclust/rng.hpp"

namespace loadclust {

struct Range {
  double lo;
  double hi;

  double draw(Rng& rng) const { return std::uniform_real_distribution<double>(lo, hi)(rng); }
};

/// Ranges the basic models are drawn from.
struct BasicModelRanges {
  Range dyn_proportion{0.3, 0.8};
  double zip_dirichlet_alpha = 1.0;
  Range x_open{2.0, 3.5};
  Range x_transient{0.15, 0.30};
  Range t_open{0.5, 1.5};
  // H_2 enters ds/dt = (T_m - T_e)/H_2 directly, i.e. it plays the role of
  // the mechanical starting time 2H.
  Range inertia{2.0, 4.0};
  // T_m as a fraction of the pull-out torque at U = 1.
  Range torque_loading{0.3, 0.5};
  Range nominal_p{0.5, 1.0};
  Range power_factor{0.85, 0.95};
};

struct GenSpec {
  std::size_t n_buses = 10;
  std::size_t models_per_bus = 500;
  std::size_t basics_per_bus = 10;
  double noise_rel_std = 0.03;
  std::uint64_t seed = 1;
  BasicModelRanges ranges;
  /// Every emitted model must simulate this suite without diverging.
  /// Empty disables the dynamic screen (steady-state screening only).
  std::vector<FaultScenario> screen_suite = standard_fault_suite();
  SimConfig screen_cfg;
  std::size_t max_retries = 100;
};

inline void validate(const GenSpec& spec) {
  if (spec.n_buses < 1) throw InvalidArgument("gen: n_buses must be >= 1");
  if (spec.basics_per_bus < 1) throw InvalidArgument("gen: basics_per_bus must be >= 1");
  if (spec.models_per_bus < spec.basics_per_bus) {
    throw InvalidArgument("gen: basics_per_bus exceeds models_per_bus");
  }
  if (!(spec.noise_rel_std >= 0.0 && spec.noise_rel_std < 0.5)) {
    throw InvalidArgument("gen: noise_rel_std must be in [0, 0.5)");
  }
}

struct GeneratedModels {
  std::vector<CompositeLoadModel> models;
  std::vector<std::size_t> labels;  // index of the originating basic model
  std::size_t clamp_events = 0;
  std::size_t retries = 0;
};

struct GeneratedDataset {
  std::vector<BusModelSet> buses;
  std::vector<std::vector<std::size_t>> labels;
  std::vector<std::vector<CompositeLoadModel>> basics;
  std::size_t clamp_events = 0;
};

inline std::string bus_name(std::size_t index) {
  std::ostringstream os;
  os << "bus" << (index + 1 < 10 ? "0" : "") << index + 1;
  return os.str();
}

namespace detail {

inline ZipParams dirichlet_zip(Rng& rng, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  double g[3];
  do {
    for (double& v : g) v = gamma(rng);
  } while (g[0] + g[1] + g[2] <= 0.0);
  return normalize_zip({g[0], g[1], g[2]}).zip;
}

inline bool passes_screen(const CompositeLoadModel& m, const GenSpec& spec) {
  try {
    validate(m);
    initialize(m, 1.0);
    if (!spec.screen_suite.empty()) simulate_bundle(m, spec.screen_suite, spec.screen_cfg);
  } catch (const Error&) {
    return false;
  }
  return true;
}

}  // namespace detail

/// Basic models of one bus, deterministic in (seed, bus_index).
inline std::vector<CompositeLoadModel> default_basic_models(std::size_t bus_index, std::size_t count,
                                                            std::uint64_t seed,
                                                            const GenSpec& spec = {}) {
  if (count < 1) throw InvalidArgument("default_basic_models: count must be >= 1");
  const BasicModelRanges& r = spec.ranges;
  Rng bus_rng = make_rng(seed, "bus-nominal", bus_index);
  const double nominal_p = r.nominal_p.draw(bus_rng);
  const double pf = r.power_factor.draw(bus_rng);
  const double nominal_q = nominal_p * std::tan(std::acos(pf));

  Rng rng = make_rng(seed, "basics", bus_index);
  std::vector<CompositeLoadModel> out;
  out.reserve(count);
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > count * spec.max_retries) {
      throw InfeasibleAfterRetries("default_basic_models: could not draw feasible basic models");
    }
    CompositeLoadModel m;
    m.nominal_p = nominal_p;
    m.nominal_q = nominal_q;
    m.dyn_proportion = r.dyn_proportion.draw(rng);
    m.active_static = detail::dirichlet_zip(rng, r.zip_dirichlet_alpha);
    m.reactive_static = detail::dirichlet_zip(rng, r.zip_dirichlet_alpha);
    m.motor.x_open = r.x_open.draw(rng);
    m.motor.x_transient = r.x_transient.draw(rng);
    m.motor.t_open = r.t_open.draw(rng);
    m.motor.inertia = r.inertia.draw(rng);
    m.motor.torque_mech = 0.0;
    m.motor.torque_mech = r.torque_loading.draw(rng) * motor_pullout_torque(m.motor, 1.0);
    if (detail::passes_screen(m, spec)) out.push_back(m);
  }
  return out;
}

namespace detail {

struct Perturber {
  Rng& rng;
  double rel_std;
  std::size_t clamps = 0;

  double operator()(double x) {
    return x + std::normal_distribution<double>(0.0, rel_std * std::abs(x))(rng);
  }

  double clamp(double x, double lo, double hi) {
    if (x < lo || x > hi) {
      ++clamps;
      return std::clamp(x, lo, hi);
    }
    return x;
  }

  ZipParams zip(const ZipParams& z) {
    ZipParams out{clamp((*this)(z.z_coeff), 0.0, 1.0), clamp((*this)(z.i_coeff), 0.0, 1.0),
                  clamp((*this)(z.p_coeff), 0.0, 1.0)};
    if (out.sum() <= 0.0) {
      ++clamps;
      return z;
    }
    return normalize_zip(out).zip;
  }
};

inline CompositeLoadModel perturb(const CompositeLoadModel& basic, Perturber& pert) {
  constexpr double big = 1e9;
  constexpr double tiny = 1e-6;
  CompositeLoadModel m = basic;
  m.dyn_proportion = pert.clamp(pert(basic.dyn_proportion), 0.0, 1.0);
  m.active_static = pert.zip(basic.active_static);
  m.reactive_static = pert.zip(basic.reactive_static);
  m.motor.x_transient = pert.clamp(pert(basic.motor.x_transient), tiny, big);
  m.motor.x_open = pert.clamp(pert(basic.motor.x_open), m.motor.x_transient * (1.0 + tiny), big);
  m.motor.t_open = pert.clamp(pert(basic.motor.t_open), tiny, big);
  m.motor.inertia = pert.clamp(pert(basic.motor.inertia), tiny, big);
  m.motor.torque_mech = pert.clamp(pert(basic.motor.torque_mech), 0.0, big);
  return m;
}

}  // namespace detail

/// Draws `total` models: each picks a basic uniformly and perturbs every
/// identified parameter with zero-mean Gaussian noise of standard deviation
/// noise_rel_std * |value|. Nominal powers and omega_sync are not perturbed.
inline GeneratedModels generate_models(std::span<const CompositeLoadModel> basics, std::size_t total,
                                       double noise_rel_std, std::uint64_t seed,
                                       const GenSpec& spec = {}) {
  if (basics.empty()) throw InvalidArgument("generate_models: no basic models");
  if (total < basics.size()) throw InvalidArgument("generate_models: total < number of basics");
  if (!(noise_rel_std >= 0.0 && noise_rel_std < 0.5)) {
    throw InvalidArgument("generate_models: noise_rel_std must be in [0, 0.5)");
  }
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, basics.size() - 1);
  detail::Perturber pert{rng, noise_rel_std};
  GeneratedModels out;
  out.models.reserve(total);
  out.labels.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    const std::size_t label = pick(rng);
    if (noise_rel_std == 0.0) {
      out.models.push_back(basics[label]);
      out.labels.push_back(label);
      continue;
    }
    std::size_t attempt = 0;
    for (;; ++attempt) {
      if (attempt > spec.max_retries) {
        std::ostringstream os;
        os << "generate_models: model " << n << " (basic " << label << ") failed screening after "
           << spec.max_retries << " retries";
        throw InfeasibleAfterRetries(os.str());
      }
      CompositeLoadModel m = detail::perturb(basics[label], pert);
      if (detail::passes_screen(m, spec)) {
        out.models.push_back(m);
        break;
      }
    }
    out.retries += attempt;
    out.labels.push_back(label);
  }
  out.clamp_events = pert.clamps;
  return out;
}

/// Basic and perturbed models for every bus; buses use independent
/// sub-streams of spec.seed.
inline GeneratedDataset generate_dataset(const GenSpec& spec, unsigned workers = 1) {
  validate(spec);
  GeneratedDataset ds;
  ds.buses.resize(spec.n_buses);
  ds.labels.resize(spec.n_buses);
  ds.basics.resize(spec.n_buses);
  std::vector<std::size_t> clamps(spec.n_buses, 0);
  parallel_for(spec.n_buses, workers, [&](std::size_t b) {
    ds.basics[b] = default_basic_models(b, spec.basics_per_bus, spec.seed, spec);
    auto gen = generate_models(ds.basics[b], spec.models_per_bus, spec.noise_rel_std,
                               substream_seed(spec.seed, "models", b), spec);
    ds.buses[b].bus_id = bus_name(b);
    ds.buses[b].models = std::move(gen.models);
    ds.labels[b] = std::move(gen.labels);
    clamps[b] = gen.clamp_events;
  });
  for (std::size_t c : clamps) ds.clamp_events += c;
  return ds;
}

}  // namespace loadclust

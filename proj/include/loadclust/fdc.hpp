#pragma once

// Density-peaks clustering over a precomputed distance matrix.
//
// Every element gets a density rho (fraction of other elements closer than
// the cutoff d_c) and a separation delta (distance to the nearest element of
// higher density). Elements with large rho*delta become centers; sparse,
// isolated elements become outlier clusters of their own; everything else
// follows its nearest higher-density neighbour. The run is a single pass over
// the matrix with no iteration.
//
// Ties are resolved by index everywhere: among equal densities the lower
// index ranks higher, which makes the density order a strict total order.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "loadclust/distance.hpp"
#include "loadclust/errors.hpp"

namespace loadclust {

inline constexpr double kDefaultNeighborFraction = 0.015;
inline constexpr double kDefaultOutlierRho = 0.001;

struct DcSelection {
  double value = 0.0;
  bool degenerate = false;  // every off-diagonal distance is equal
};

struct DecisionGraph {
  std::vector<double> rho;
  std::vector<double> delta;
  std::vector<std::optional<std::size_t>> nhd;
  /// Indices sorted by decreasing density (ties: lower index first).
  std::vector<std::size_t> order;

  std::size_t size() const { return rho.size(); }
  std::size_t root() const { return order.front(); }
  double gamma(std::size_t i) const { return rho[i] * delta[i]; }
};

struct ClusterResult {
  std::vector<std::size_t> centers;
  std::vector<std::size_t> outliers;
  /// Cluster id per element: centers take ids [0, |centers|) in selection
  /// order, outliers the ids after them.
  std::vector<std::size_t> assignment;
  std::size_t k_effective = 0;

  /// Seed element of each cluster id.
  std::vector<std::size_t> seeds() const {
    std::vector<std::size_t> s = centers;
    s.insert(s.end(), outliers.begin(), outliers.end());
    return s;
  }
};

/// Optional instrumentation: number of matrix entries read.
struct FdcCounters {
  std::size_t distance_reads = 0;
};

/// The q-th smallest of the pooled distances with q = round(fraction * count),
/// clamped to [1, count]. A zero quantile is raised to the smallest positive
/// distance so duplicated elements do not collapse the cutoff.
inline DcSelection quantile_dc(std::vector<double> pooled, double neighbor_fraction) {
  if (pooled.empty()) throw InvalidArgument("select_dc: no distances to pool");
  if (!(neighbor_fraction > 0.0 && neighbor_fraction < 1.0)) {
    throw InvalidArgument("select_dc: neighbor_fraction must be in (0, 1)");
  }
  const auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
  if (*lo == *hi) return {*lo, true};

  const auto count = static_cast<double>(pooled.size());
  auto q = static_cast<std::size_t>(std::llround(neighbor_fraction * count));
  q = std::clamp<std::size_t>(q, 1, pooled.size());
  std::nth_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(q - 1), pooled.end());
  double value = pooled[q - 1];
  if (value <= 0.0) {
    value = std::numeric_limits<double>::infinity();
    for (double v : pooled) {
      if (v > 0.0) value = std::min(value, v);
    }
  }
  return {value, false};
}

inline DcSelection select_dc(const DistanceMatrix& d,
                             double neighbor_fraction = kDefaultNeighborFraction) {
  const std::size_t n = d.size();
  if (n < 2) throw InvalidArgument("select_dc: needs at least two elements");
  std::vector<double> pooled;
  pooled.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pooled.push_back(d(i, j));
  }
  return quantile_dc(std::move(pooled), neighbor_fraction);
}

/// rho_i = |{j != i : d_ij < d_c}| / (n - 1).
inline std::vector<double> compute_density(const DistanceMatrix& d, double d_c,
                                           FdcCounters* counters = nullptr) {
  if (!(d_c >= 0.0)) throw InvalidArgument("compute_density: d_c must be >= 0");
  const std::size_t n = d.size();
  std::vector<double> rho(n, 0.0);
  if (n < 2) return rho;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = d.row(i);
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && row[j] < d_c) ++count;
    }
    rho[i] = static_cast<double>(count) / static_cast<double>(n - 1);
  }
  if (counters) counters->distance_reads += n * n;
  return rho;
}

inline std::vector<std::size_t> density_order(std::span<const double> rho) {
  std::vector<std::size_t> order(rho.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rho[a] > rho[b]; });
  return order;
}

inline DecisionGraph compute_delta(const DistanceMatrix& d, std::span<const double> rho,
                                   FdcCounters* counters = nullptr) {
  const std::size_t n = d.size();
  if (rho.size() != n) throw InvalidArgument("compute_delta: rho length differs from matrix size");
  DecisionGraph g;
  g.rho.assign(rho.begin(), rho.end());
  g.delta.assign(n, 0.0);
  g.nhd.assign(n, std::nullopt);
  g.order = density_order(rho);
  if (n == 0) return g;

  std::size_t reads = 0;
  const std::size_t root = g.order.front();
  const auto root_row = d.row(root);
  g.delta[root] = n > 1 ? *std::max_element(root_row.begin(), root_row.end()) : 0.0;
  reads += n;

  for (std::size_t r = 1; r < n; ++r) {
    const std::size_t i = g.order[r];
    const auto row = d.row(i);
    std::size_t best = g.order[0];
    double best_d = row[best];
    for (std::size_t s = 1; s < r; ++s) {
      const std::size_t j = g.order[s];
      if (row[j] < best_d || (row[j] == best_d && j < best)) {
        best = j;
        best_d = row[j];
      }
    }
    reads += r;
    g.delta[i] = best_d;
    g.nhd[i] = best;
  }
  if (counters) counters->distance_reads += reads;
  return g;
}

/// The nc elements with the largest rho*delta (ties: larger delta, then lower
/// index), in rank order.
inline std::vector<std::size_t> select_centers(const DecisionGraph& g, std::size_t nc) {
  const std::size_t n = g.size();
  if (nc < 1 || nc > n) {
    std::ostringstream os;
    os << "select_centers: nc=" << nc << " outside [1, " << n << "]";
    throw InvalidArgument(os.str());
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double ga = g.gamma(a);
    const double gb = g.gamma(b);
    if (ga != gb) return ga > gb;
    if (g.delta[a] != g.delta[b]) return g.delta[a] > g.delta[b];
    return a < b;
  });
  idx.resize(nc);
  return idx;
}

/// Non-center elements with rho below the threshold and delta above the mean
/// delta of the centers, in ascending index order.
inline std::vector<std::size_t> detect_outliers(const DecisionGraph& g,
                                                std::span<const std::size_t> centers,
                                                double rho_threshold = kDefaultOutlierRho) {
  std::vector<std::size_t> out;
  if (centers.empty()) return out;
  double mean_delta = 0.0;
  std::vector<bool> is_center(g.size(), false);
  for (std::size_t c : centers) {
    mean_delta += g.delta[c];
    is_center[c] = true;
  }
  mean_delta /= static_cast<double>(centers.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!is_center[i] && g.rho[i] < rho_threshold && g.delta[i] > mean_delta) out.push_back(i);
  }
  return out;
}

inline ClusterResult assign(const DecisionGraph& g, std::span<const std::size_t> centers,
                            std::span<const std::size_t> outliers) {
  const std::size_t n = g.size();
  if (centers.empty() && outliers.empty()) {
    throw InvalidArgument("assign: no centers or outliers to seed clusters");
  }
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  ClusterResult res;
  res.centers.assign(centers.begin(), centers.end());
  res.outliers.assign(outliers.begin(), outliers.end());
  res.assignment.assign(n, unset);
  const auto seeds = res.seeds();
  for (std::size_t c = 0; c < seeds.size(); ++c) {
    if (seeds[c] >= n) throw IndexOutOfRange("assign: seed index out of range");
    if (res.assignment[seeds[c]] != unset) throw InvalidArgument("assign: duplicate seed");
    res.assignment[seeds[c]] = c;
  }
  for (std::size_t i : g.order) {
    if (res.assignment[i] != unset) continue;
    if (!g.nhd[i]) throw InvalidArgument("assign: the density maximum must be a seed");
    res.assignment[i] = res.assignment[*g.nhd[i]];
  }
  res.k_effective = seeds.size();
  return res;
}

struct FdcOptions {
  double neighbor_fraction = kDefaultNeighborFraction;
  double outlier_rho = kDefaultOutlierRho;
};

struct FdcRun {
  DcSelection dc;
  DecisionGraph graph;
  ClusterResult result;
};

inline FdcRun cluster(const DistanceMatrix& d, std::size_t nc, const FdcOptions& opt = {},
                      FdcCounters* counters = nullptr) {
  const std::size_t n = d.size();
  if (n == 0) throw InvalidArgument("cluster: empty distance matrix");
  FdcRun run;
  if (n == 1) {
    if (nc != 1) throw InvalidArgument("cluster: a single element admits only nc=1");
    run.graph.rho = {0.0};
    run.graph.delta = {0.0};
    run.graph.nhd = {std::nullopt};
    run.graph.order = {0};
    run.result.centers = {0};
    run.result.assignment = {0};
    run.result.k_effective = 1;
    return run;
  }
  run.dc = select_dc(d, opt.neighbor_fraction);
  const auto rho = compute_density(d, run.dc.value, counters);
  run.graph = compute_delta(d, rho, counters);
  const auto centers = select_centers(run.graph, nc);
  const auto outliers = detect_outliers(run.graph, centers, opt.outlier_rho);
  run.result = assign(run.graph, centers, outliers);
  return run;
}

}  // namespace loadclust

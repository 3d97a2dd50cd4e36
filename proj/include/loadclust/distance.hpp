#pragma once

// Pairwise distances between load models: the post-fault response distance
// (sum of squared P and Q differences over every fault and sample) and the
// plain Euclidean distance between raw parameter vectors.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "loadclust/errors.hpp"
#include "loadclust/load_model.hpp"
#include "loadclust/parallel.hpp"
#include "loadclust/pfr.hpp"

namespace loadclust {

/// Dense symmetric matrix with zero diagonal. Values are squared distances
/// when built from PFR bundles; the triangle inequality is not assumed.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  /// Takes a row-major n x n buffer and checks the matrix invariants.
  DistanceMatrix(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {
    if (values_.size() != n_ * n_) throw InvalidArgument("distance matrix: wrong element count");
    for (std::size_t i = 0; i < n_; ++i) {
      if (at(i, i) != 0.0) throw InvalidArgument("distance matrix: non-zero diagonal");
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double v = at(i, j);
        if (!std::isfinite(v) || v < 0.0 || v != at(j, i)) {
          std::ostringstream os;
          os << "distance matrix: invalid or asymmetric entry at (" << i << ", " << j << ")";
          throw InvalidArgument(os.str());
        }
      }
    }
  }

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }

  void set(std::size_t i, std::size_t j, double v) {
    values_[i * n_ + j] = v;
    values_[j * n_ + i] = v;
  }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * n_, n_};
  }
  const std::vector<double>& values() const { return values_; }

  /// Returns a copy with every entry multiplied by c.
  DistanceMatrix scaled(double c) const {
    DistanceMatrix out(n_);
    for (std::size_t k = 0; k < values_.size(); ++k) out.values_[k] = values_[k] * c;
    return out;
  }

  bool operator==(const DistanceMatrix&) const = default;

 private:
  double at(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }

  std::size_t n_ = 0;
  std::vector<double> values_;
};

inline bool same_grid(const PfrBundle& a, const PfrBundle& b) {
  if (a.fault_count() != b.fault_count()) return false;
  for (std::size_t k = 0; k < a.fault_count(); ++k) {
    const auto& ta = a.curves[k].times;
    const auto& tb = b.curves[k].times;
    if (ta.size() != tb.size()) return false;
    for (std::size_t t = 0; t < ta.size(); ++t) {
      if (std::abs(ta[t] - tb[t]) > 1e-9) return false;
    }
  }
  return true;
}

inline double pfr_distance(const PfrBundle& a, const PfrBundle& b) {
  if (!same_grid(a, b)) throw GridMismatch(0, 1, "pfr_distance: bundles do not share a grid");
  double total = 0.0;
  for (std::size_t k = 0; k < a.fault_count(); ++k) {
    const PfrCurve& ca = a.curves[k];
    const PfrCurve& cb = b.curves[k];
    for (std::size_t t = 0; t < ca.size(); ++t) {
      const double dp = ca.p_values[t] - cb.p_values[t];
      const double dq = ca.q_values[t] - cb.q_values[t];
      total += dp * dp + dq * dq;
    }
  }
  return total;
}

/// Fills the upper triangle with dist(i, j) and mirrors it.
template <typename Dist>
DistanceMatrix build_matrix(std::size_t n, Dist&& dist, unsigned workers = 1) {
  DistanceMatrix m(n);
  parallel_for(n, workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, dist(i, j));
  });
  return m;
}

inline DistanceMatrix build_distance_matrix(std::span<const PfrBundle> bundles,
                                            unsigned workers = 1) {
  for (std::size_t i = 1; i < bundles.size(); ++i) {
    if (!same_grid(bundles[0], bundles[i])) {
      std::ostringstream os;
      os << "build_distance_matrix: bundle " << i << " does not share the grid of bundle 0";
      throw GridMismatch(0, i, os.str());
    }
  }
  return build_matrix(
      bundles.size(), [&](std::size_t i, std::size_t j) { return pfr_distance(bundles[i], bundles[j]); },
      workers);
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("euclidean: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

inline double parameter_distance(const CompositeLoadModel& a, const CompositeLoadModel& b) {
  const auto va = parameter_vector(a);
  const auto vb = parameter_vector(b);
  return euclidean(va, vb);
}

inline std::array<double, 3> zip_vector(const ZipParams& z) {
  return {z.z_coeff, z.i_coeff, z.p_coeff};
}

inline std::array<double, 5> motor_vector(const MotorParams& m) {
  return {m.x_open, m.x_transient, m.t_open, m.inertia, m.torque_mech};
}

}  // namespace loadclust

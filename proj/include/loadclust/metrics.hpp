#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <utility>

#include "loadclust/errors.hpp"

namespace loadclust {

/// Adjusted Rand index between two labelings of the same elements.
inline double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw InvalidArgument("adjusted_rand_index: length mismatch");
  const auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> rows;
  std::map<std::size_t, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0;
  double sum_rows = 0.0;
  double sum_cols = 0.0;
  for (const auto& [key, n] : joint) index += choose2(n);
  for (const auto& [key, n] : rows) sum_rows += choose2(n);
  for (const auto& [key, n] : cols) sum_cols += choose2(n);
  const double total = choose2(static_cast<double>(a.size()));
  if (total == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// True when both labelings induce the same partition.
inline bool same_partition(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) return false;
  std::map<std::size_t, std::size_t> fwd;
  std::map<std::size_t, std::size_t> back;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto [f, f_new] = fwd.emplace(a[i], b[i]);
    const auto [g, g_new] = back.emplace(b[i], a[i]);
    if (f->second != b[i] || g->second != a[i]) return false;
  }
  return true;
}

}  // namespace loadclust

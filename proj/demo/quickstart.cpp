// Generates a small two-bus dataset, compresses it temporally and spatially,
// and prints how well the compressed models reproduce the originals.

#include <array>
#include <cstdio>

#include "loadclust/datagen.hpp"
#include "loadclust/hierarchy.hpp"
#include "loadclust/metrics.hpp"
#include "loadclust/validation.hpp"

int main() {
  using namespace loadclust;

  GenSpec spec;
  spec.n_buses = 2;
  spec.models_per_bus = 60;
  spec.basics_per_bus = 4;
  spec.seed = 7;
  const auto ds = generate_dataset(spec);

  const auto suite = standard_fault_suite();
  const SimConfig cfg;
  const std::array<std::size_t, 2> nc_spatial{2, 4};
  const auto h = run_hierarchy(ds.buses, 4, nc_spatial, suite, cfg);

  for (std::size_t b = 0; b < h.temporal.size(); ++b) {
    const auto& t = h.temporal[b];
    std::printf("%s: %zu models -> %zu RLMs, ARI vs. generating basics %.3f\n", t.bus_id.c_str(),
                ds.buses[b].models.size(), t.r_count,
                adjusted_rand_index(t.membership, ds.labels[b]));
  }

  ValidationOptions vopt;
  vopt.n_cases = 20;
  const auto rep = run_validation(ds.buses, h.temporal, h.spatial_by_nc, vopt);
  for (const auto& s : rep.summaries) {
    std::printf("%-5s mean F %.4f  (F > 0.95 in %.0f%% of rows)\n", s.scenario.c_str(), s.mean_f,
                100.0 * s.frac_above_095);
  }

  const auto storage = storage_report({});
  std::printf("storage at the reference scale: %zu / %zu / %zu bytes\n", storage.ori.total_bytes,
              storage.tem.total_bytes, storage.spa.total_bytes);
}

// Command-line front end for the load-model compression pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 simulation failure,
// 4 I/O failure, 1 anything unexpected.

#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "loadclust/errors.hpp"
#include "loadclust/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSimulation = 3;
constexpr int kExitIo = 4;

int exit_code(const loadclust::Error& e) {
  switch (e.category()) {
    case loadclust::Error::Category::config:
      return kExitConfig;
    case loadclust::Error::Category::simulation:
      return kExitSimulation;
    case loadclust::Error::Category::io:
      return kExitIo;
  }
  return 1;
}

struct Common {
  std::string manifest;
  std::optional<unsigned> workers;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> nc_temporal;
  std::vector<std::size_t> nc_spatial;
};

loadclust::Manifest load(const Common& c) {
  auto m = loadclust::read_manifest(c.manifest);
  if (c.workers) m.workers = *c.workers == 0 ? loadclust::default_workers() : *c.workers;
  if (c.output_dir) m.output_dir = *c.output_dir;
  if (c.nc_temporal) {
    if (*c.nc_temporal < 1) throw loadclust::InvalidArgument("--nc must be >= 1");
    m.nc_temporal = *c.nc_temporal;
  }
  if (!c.nc_spatial.empty()) {
    std::set<std::size_t> unique(c.nc_spatial.begin(), c.nc_spatial.end());
    if (*unique.begin() < 1) throw loadclust::InvalidArgument("--nc must be >= 1");
    m.nc_spatial.assign(unique.begin(), unique.end());
  }
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compress identified load-model sets into representative load models"};
  app.require_subcommand(1);

  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-m,--manifest", common.manifest, "Pipeline manifest (JSON)")->required();
    sub->add_option("-j,--workers", common.workers, "Worker threads (0: one per core)");
    sub->add_option("-o,--output-dir", common.output_dir, "Override the manifest's output directory");
  };

  auto* gen = app.add_subcommand("gen", "Generate synthetic model files and ground-truth labels");
  add_common(gen);

  loadclust::PfrSelection selection;
  auto* pfr = app.add_subcommand("pfr", "Export post-fault response curves as CSV");
  add_common(pfr);
  pfr->add_option("--bus", selection.buses, "Bus id (repeatable; default every bus)");
  pfr->add_option("--index", selection.model_indices, "Model index (repeatable; default every model)");

  // nc is normally read off the decision graphs and then passed here.
  auto* temporal = app.add_subcommand("cluster-temporal", "Per-bus clustering into RLMs");
  add_common(temporal);
  temporal->add_option("--nc", common.nc_temporal, "Cluster count per bus (overrides the manifest)");
  const auto add_spatial_nc = [&](CLI::App* sub) {
    sub->add_option("--nc", common.nc_spatial, "Spatial cluster count (repeatable; overrides the manifest)");
  };
  auto* spatial = app.add_subcommand("cluster-spatial", "Control-center clustering of pooled RLMs");
  add_common(spatial);
  add_spatial_nc(spatial);
  auto* validate = app.add_subcommand("validate", "Fitting degrees of Tem and Spa replacements");
  add_common(validate);
  add_spatial_nc(validate);
  auto* report = app.add_subcommand("report", "Storage report");
  add_common(report);
  add_spatial_nc(report);
  auto* all = app.add_subcommand("run", "Every stage in order");
  add_common(all);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const auto m = load(common);
    if (gen->parsed()) {
      const auto s = loadclust::run_gen(m);
      std::cout << "generated " << s.models << " models over " << s.buses << " buses ("
                << s.clamp_events << " clamp events) in " << m.output_dir.string() << "\n";
    } else if (pfr->parsed()) {
      const auto files = loadclust::run_pfr(m, selection);
      std::cout << "wrote " << files << " curve files\n";
    } else if (temporal->parsed()) {
      loadclust::run_cluster_temporal(m, &std::cout);
    } else if (spatial->parsed()) {
      loadclust::run_cluster_spatial(m, &std::cout);
    } else if (validate->parsed()) {
      loadclust::run_validate(m, &std::cout);
    } else if (report->parsed()) {
      loadclust::run_report(m, &std::cout);
    } else if (all->parsed()) {
      loadclust::run_all(m, &std::cout);
    }
  } catch (const loadclust::Error& e) {
    std::cerr << "loadclust: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "loadclust: internal error: " << e.what() << "\n";
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}

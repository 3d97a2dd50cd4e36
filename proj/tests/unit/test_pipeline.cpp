#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>

#include "loadclust/io.hpp"
#include "loadclust/pipeline.hpp"

namespace lc = loadclust;
namespace io = loadclust::io;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& root() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "loadclust_test_pipeline";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

json small_manifest(const std::string& out) {
  auto j = json::parse(R"({
    "seed": 5,
    "generation": {"n_buses": 2, "models_per_bus": 24, "basics_per_bus": 3},
    "simulation": {"horizon": 2.0},
    "clustering": {"nc_temporal": 3, "nc_spatial": [2, 3], "export_distances": true},
    "validation": {"n_cases": 6}
  })");
  j["output_dir"] = out;
  return j;
}

fs::path write_manifest(const std::string& name, const json& j) {
  const auto path = root() / name;
  io::write_json(path, j);
  return path;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LOADCLUST_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = io::read_text(e.path());
  }
  return files;
}

std::string header(const fs::path& file) {
  const auto text = io::read_text(file);
  return text.substr(0, text.find('\n'));
}

}  // namespace

TEST(Manifest, DefaultsAndOverrides) {
  const auto m = lc::parse_manifest(small_manifest("o"), "/base");
  EXPECT_EQ(m.output_dir, fs::path("/base/o"));
  EXPECT_EQ(m.gen.seed, 5u);
  EXPECT_EQ(m.validation.seed, 5u);
  EXPECT_EQ(m.gen.models_per_bus, 24u);
  EXPECT_EQ(m.nc_spatial, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(m.sim.horizon, 2.0);
  EXPECT_EQ(m.validation.cfg.horizon, 2.0);
  EXPECT_EQ(m.validation.cfg.excitation_mode, lc::ExcitationMode::thevenin);
  EXPECT_EQ(m.gen.screen_suite, m.suite);
}

TEST(Manifest, RejectsBadConfiguration) {
  auto j = small_manifest("o");
  j["typo"] = 1;
  EXPECT_THROW(lc::parse_manifest(j, "."), lc::InvalidArgument);
  j = small_manifest("o");
  j["clustering"]["distance"] = "cosine";
  EXPECT_THROW(lc::parse_manifest(j, "."), lc::InvalidArgument);
  j = small_manifest("o");
  j["clustering"]["nc_spatial"] = json::array();
  EXPECT_THROW(lc::parse_manifest(j, "."), lc::InvalidArgument);
  j = small_manifest("o");
  j["generation"]["models_per_bus"] = "many";
  EXPECT_THROW(lc::parse_manifest(j, "."), lc::InvalidArgument);
  j = small_manifest("o");
  j["validation"]["excitation_mode"] = "infinite_bus";
  EXPECT_THROW(lc::parse_manifest(j, "."), lc::InvalidArgument);
}

TEST(Cli, FullRunWritesEveryStageWithHeaders) {
  const auto manifest = write_manifest("full.json", small_manifest("full_out"));
  ASSERT_EQ(run_cli("run -m " + manifest.string()), 0);
  const auto out = root() / "full_out";
  EXPECT_EQ(header(out / "labels.csv"), "bus,model_index,basic_index");
  EXPECT_EQ(header(out / "temporal" / "summary.csv"), "bus,models,rlms,centers,outliers,d_c");
  EXPECT_EQ(header(out / "temporal" / "bus01" / "membership.csv"), "model_index,k,source_model");
  EXPECT_EQ(header(out / "temporal" / "bus01" / "decision_graph.csv"), "index,rho,delta,rho_delta,nhd");
  EXPECT_TRUE(fs::exists(out / "temporal" / "bus02" / "distances.csv"));
  EXPECT_EQ(header(out / "spatial" / "nc2" / "compressed.csv"), "bus,k,rp,ia,ir,id");
  EXPECT_TRUE(fs::exists(out / "spatial" / "nc3" / "rd.json"));
  EXPECT_EQ(header(out / "validation" / "fitting_summary.csv"), "metric,Tem,Spa2,Spa3");
  EXPECT_EQ(header(out / "validation" / "fitting_rows.csv"), "case,bus,scenario,fp,fq,f");
  EXPECT_EQ(header(out / "validation" / "basis_comparison.csv"), "scenario,mean_f_pfr,mean_f_parameter");
  EXPECT_TRUE(fs::exists(out / "validation" / "parameter_basis" / "fitting_summary.csv"));
  EXPECT_EQ(header(out / "report" / "storage_summary.csv").substr(0, 9), "nc,na,nr,");
  EXPECT_TRUE(fs::exists(out / "report" / "storage_nc3.txt"));

  // Stored results reload into the same structures the stages produced.
  const auto m = lc::read_manifest(manifest);
  const auto t = lc::load_temporal(m, "bus01");
  EXPECT_EQ(t.membership.size(), 24u);
  const auto sp = lc::load_spatial(m, 3);
  EXPECT_EQ(sp.compressed.size(), t.r_count + lc::load_temporal(m, "bus02").r_count);
}

TEST(Cli, StagesAreDeterministicAcrossWorkerCounts) {
  const auto a = write_manifest("det_a.json", small_manifest("det_a"));
  const auto b = write_manifest("det_b.json", small_manifest("det_b"));
  ASSERT_EQ(run_cli("run -j 1 -m " + a.string()), 0);
  ASSERT_EQ(run_cli("run -j 3 -m " + b.string()), 0);
  const auto sa = snapshot(root() / "det_a");
  const auto sb = snapshot(root() / "det_b");
  EXPECT_GT(sa.size(), 20u);
  EXPECT_EQ(sa, sb);
}

TEST(Cli, IndividualStagesAndPfrExport) {
  const auto manifest = write_manifest("stages.json", small_manifest("stages_out"));
  const auto m = manifest.string();
  ASSERT_EQ(run_cli("gen -m " + m), 0);
  ASSERT_EQ(run_cli("pfr -m " + m + " --bus bus02 --index 0 --index 5"), 0);
  const auto pfr_dir = root() / "stages_out" / "pfr" / "bus02";
  EXPECT_EQ(header(pfr_dir / "m5_dip045.csv"), "time,p,q");
  EXPECT_FALSE(fs::exists(root() / "stages_out" / "pfr" / "bus01"));
  ASSERT_EQ(run_cli("cluster-temporal -m " + m), 0);
  ASSERT_EQ(run_cli("cluster-spatial -m " + m), 0);
  ASSERT_EQ(run_cli("report -m " + m), 0);
  EXPECT_TRUE(fs::exists(root() / "stages_out" / "report" / "storage_nc2.csv"));
  ASSERT_EQ(run_cli("cluster-spatial -m " + m + " --nc 1"), 0);
  const auto sp = lc::load_spatial(lc::read_manifest(manifest), 1);
  EXPECT_EQ(sp.nc, 1u);
  EXPECT_EQ(run_cli("cluster-spatial -m " + m + " --nc 0"), 2);
  ASSERT_EQ(run_cli("cluster-temporal -m " + m + " --nc 2"), 0);
  const auto summary = io::parse_csv(io::read_text(root() / "stages_out" / "temporal" / "summary.csv"));
  ASSERT_EQ(summary.size(), 3u);
  EXPECT_EQ(summary[1][3], "2");  // centers column
  EXPECT_EQ(summary[2][3], "2");
  EXPECT_EQ(run_cli("pfr -m " + m + " --index 99"), 2);
}

TEST(Cli, ExitCodesByErrorCategory) {
  EXPECT_EQ(run_cli("run -m " + (root() / "missing.json").string()), 4);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("run"), 2);

  auto bad = small_manifest("bad_out");
  bad["unknown_key"] = true;
  EXPECT_EQ(run_cli("run -m " + write_manifest("bad.json", bad).string()), 2);

  // Missing stored outputs: nothing has been clustered for this directory.
  EXPECT_EQ(run_cli("cluster-spatial -m " + write_manifest("empty.json", small_manifest("empty_out")).string()), 4);

  // A motor loaded past its pull-out torque has no operating point.
  lc::CompositeLoadModel model;
  model.motor.torque_mech = 50.0;
  io::write_bus(root() / "stall_models.json", {"busS", {model, model}});
  auto stall = small_manifest("stall_out");
  stall["buses"] = json::array({{{"bus_id", "busS"}, {"model_file", "stall_models.json"}}});
  EXPECT_EQ(run_cli("cluster-temporal -m " + write_manifest("stall.json", stall).string()), 3);
}

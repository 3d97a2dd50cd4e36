#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <vector>

#include "loadclust/datagen.hpp"
#include "loadclust/io.hpp"

namespace lc = loadclust;
namespace io = loadclust::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "loadclust_test_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(FormatDouble, RoundTripsExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = uni(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    EXPECT_EQ(io::parse_double(io::format_double(v), "t"), v);
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
  EXPECT_EQ(io::format_double(3.0), "3");
  EXPECT_THROW(io::parse_double("1.5x", "t"), lc::InvalidArgument);
  EXPECT_THROW(io::parse_double("", "t"), lc::InvalidArgument);
}

TEST(Csv, WriterAndParserAgree) {
  io::CsvWriter w{"a", "b"};
  w.field(std::size_t{1}).field(2.25);
  w.end_row();
  w.field("x").field(-3LL);
  w.end_row();
  EXPECT_EQ(w.str(), "a,b\n1,2.25\nx,-3\n");
  const auto rows = io::parse_csv(w.str() + "\r\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2], (std::vector<std::string>{"x", "-3"}));
}

TEST(Models, BusFileRoundTripsBitExact) {
  const auto basics = lc::default_basic_models(0, 3, 2);
  const auto gen = lc::generate_models(basics, 20, 0.03, 4);
  const lc::BusModelSet bus{"bus01", gen.models};
  const auto path = scratch("bus.json");
  io::write_bus(path, bus);
  std::vector<std::string> warnings;
  const auto back = io::read_bus(path, &warnings);
  EXPECT_EQ(back.bus_id, "bus01");
  EXPECT_EQ(back.models, bus.models);
  EXPECT_TRUE(warnings.empty());
}

TEST(Models, ZipSumIsRenormalizedWithWarning) {
  auto j = io::to_json(lc::CompositeLoadModel{});
  j["active_static"] = {{"z_coeff", 0.2}, {"i_coeff", 0.2}, {"p_coeff", 0.2}};
  std::vector<std::string> warnings;
  const auto m = io::model_from_json(j, "m", &warnings);
  EXPECT_NEAR(m.active_static.z_coeff, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.active_static.sum(), 1.0, 1e-15);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("active_static"), std::string::npos);
}

TEST(Models, MalformedInputIsRejected) {
  auto j = io::to_json(lc::CompositeLoadModel{});
  j.erase("dyn_proportion");
  EXPECT_THROW(io::model_from_json(j, "m"), lc::InvalidArgument);
  j = io::to_json(lc::CompositeLoadModel{});
  j["dyn_proportion"] = "half";
  EXPECT_THROW(io::model_from_json(j, "m"), lc::InvalidArgument);
  j = io::to_json(lc::CompositeLoadModel{});
  j["dyn_proportion"] = 1.5;
  EXPECT_THROW(io::model_from_json(j, "m"), lc::InvalidArgument);
  j = io::to_json(lc::CompositeLoadModel{});
  j["active_static"]["z_coeff"] = -0.1;
  EXPECT_THROW(io::model_from_json(j, "m"), lc::InvalidArgument);
  EXPECT_THROW(io::parse_json("{\"bus_id\": ", "x"), lc::InvalidArgument);
  EXPECT_THROW(io::bus_from_json(nlohmann::json::object(), "x"), lc::InvalidArgument);
}

TEST(Files, MissingFileIsAnIoError) {
  EXPECT_THROW(io::read_text(scratch("does_not_exist.json")), lc::IoError);
  try {
    io::read_bus(scratch("does_not_exist.json"));
    FAIL();
  } catch (const lc::Error& e) {
    EXPECT_EQ(e.category(), lc::Error::Category::io);
  }
}

TEST(Files, WriteCreatesParentDirectories) {
  const auto path = scratch("nested/a/b.txt");
  fs::remove_all(scratch("nested"));
  io::write_text(path, "hello\n");
  EXPECT_EQ(io::read_text(path), "hello\n");
}

TEST(Suite, RoundTripAndDefaults) {
  const auto suite = lc::standard_fault_suite();
  const auto back = io::suite_from_json(io::suite_to_json(suite), "s");
  EXPECT_EQ(back, suite);
  const auto partial = io::suite_from_json(nlohmann::json::parse(R"([{"label": "x", "fault_depth": 0.3}])"), "s");
  ASSERT_EQ(partial.size(), 1u);
  EXPECT_EQ(partial[0].fault_depth, 0.3);
  EXPECT_EQ(partial[0].t_fault_on, lc::FaultScenario{}.t_fault_on);
}

TEST(Suite, RejectsDuplicatesAndBadScenarios) {
  EXPECT_THROW(io::suite_from_json(nlohmann::json::parse(R"([{"label": "x"}, {"label": "x"}])"), "s"),
               lc::InvalidArgument);
  EXPECT_THROW(io::suite_from_json(nlohmann::json::parse(R"([])"), "s"), lc::InvalidArgument);
  EXPECT_THROW(io::suite_from_json(nlohmann::json::parse(R"([{"label": "x", "t_clear": 0.1}])"), "s"),
               lc::InvalidArgument);
}

TEST(Tables, DistanceMatrixRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(0.0, 10.0);
  lc::DistanceMatrix d(4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) d.set(i, j, uni(rng));
  }
  const std::vector<std::string> ids{"m0", "m1", "m2", "m3"};
  const auto text = io::distance_csv(d, ids);
  EXPECT_EQ(text.substr(0, text.find('\n')), "id,m0,m1,m2,m3");
  const auto back = io::distance_from_csv(text, "d");
  EXPECT_EQ(back.ids, ids);
  EXPECT_EQ(back.matrix, d);
  EXPECT_THROW(io::distance_from_csv("id,a,b\na,0,1\nb,2,0\n", "d"), lc::InvalidArgument);
  EXPECT_THROW(io::distance_from_csv("x,a\na,0\n", "d"), lc::InvalidArgument);
}

TEST(Tables, CompressedRecordsRoundTrip) {
  const std::vector<lc::CompressedRecord> recs{{"bus01", 1, 0.4375, 2, 1, 3},
                                              {"bus02", 4, 0.1 + 0.2, 1, 7, 2}};
  const auto text = io::compressed_csv(recs);
  EXPECT_EQ(text.substr(0, text.find('\n')), "bus,k,rp,ia,ir,id");
  EXPECT_EQ(io::compressed_from_csv(text, "c"), recs);
  EXPECT_THROW(io::compressed_from_csv("bus,k,rp,ia,ir,id\nb,1,0.5,x,1,1\n", "c"), lc::InvalidArgument);
  EXPECT_THROW(io::compressed_from_csv("bus,k\n", "c"), lc::InvalidArgument);
}

TEST(Tables, ComponentSetsRoundTrip) {
  const std::vector<lc::ZipParams> zs{{0.2, 0.3, 0.5}, {0.1, 0.1, 0.8}};
  EXPECT_EQ(io::zip_set_from_json(io::zip_set_to_json(zs), "z"), zs);
  lc::MotorParams m;
  m.inertia = 2.75;
  const std::vector<lc::MotorParams> ms{m, lc::MotorParams{}};
  EXPECT_EQ(io::motor_set_from_json(io::motor_set_to_json(ms), "m"), ms);
}

TEST(Tables, CurveAndDecisionGraphHeaders) {
  lc::PfrCurve c{{0.0, 0.01}, {1.0, 0.9}, {0.5, 0.45}};
  EXPECT_EQ(io::curve_csv(c), "time,p,q\n0,1,0.5\n0.01,0.9,0.45\n");
  lc::DecisionGraph g;
  g.rho = {0.5, 0.25};
  g.delta = {2.0, 1.0};
  g.nhd = {std::nullopt, 0};
  g.order = {0, 1};
  EXPECT_EQ(io::decision_graph_csv(g), "index,rho,delta,rho_delta,nhd\n0,0.5,2,1,-1\n1,0.25,1,0.25,0\n");
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "cplane/error.hpp"
#include "cplane/io.hpp"
#include "cplane/random.hpp"
#include "json.hpp"

namespace cplane {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("cplane_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write(const std::string& name, const std::string& text) { std::ofstream(dir_ / name) << text; }
  [[nodiscard]] std::string read(const fs::path& path) const {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

TEST(Format, DoublesRoundTrip) {
  Stream s(1, "doubles");
  std::vector<double> values{0.0, -0.0, 1.0 / 3.0, 1e-300, 1.7976931348623157e308, 4.9e-324, -2.5};
  for (int k = 0; k < 1000; ++k) values.push_back(s.normal() * std::pow(10.0, s.uniform(-20.0, 20.0)));
  for (double v : values) EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v) << format_double(v);
}

TEST_F(IoTest, DatasetRoundTripsExactly) {
  DGPSpec spec;
  spec.n = 25;
  spec.M = 7;
  const SimulatedData sim = generate(spec);
  write_dataset(sim.dataset, dir_);
  LoadOptions options;
  options.xtilde = {"x1", "x2"};
  const FunctionalDataset back = load_dataset(dir_ / "responses.csv", dir_ / "covariates.csv", options);
  EXPECT_EQ(back.y(), sim.dataset.y());
  EXPECT_EQ(back.x(), sim.dataset.x());
  EXPECT_EQ(back.z1(), sim.dataset.z1());
  EXPECT_EQ(back.z2(), sim.dataset.z2());
  EXPECT_EQ(back.grid(), sim.dataset.grid());
  EXPECT_EQ(back.xtilde_idx(), sim.dataset.xtilde_idx());
  EXPECT_EQ(back.subject_ids(), sim.dataset.subject_ids());
  EXPECT_EQ(dataset_digest(back), dataset_digest(sim.dataset));
}

TEST_F(IoTest, GridOutsideUnitIntervalIsRescaled) {
  write("r.csv", "subject_id,s,y\nA,10,1\nA,0,2\nA,5,3\nB,0,4\nB,10,5\nB,5,6\n"
                 "C,0,1\nC,5,1\nC,10,1\nD,0,1\nD,5,2\nD,10,3\n");
  write("c.csv", "subject_id,x1,z1\nA,1,0.5\nB,2,-0.5\nC,0.5,1\nD,-1,2\n");
  const FunctionalDataset d = load_dataset(dir_ / "r.csv", dir_ / "c.csv");
  EXPECT_EQ(d.grid(), Eigen::Vector3d(0.0, 0.5, 1.0));
  EXPECT_DOUBLE_EQ(d.grid_transform().to_original(0.5), 5.0);
  EXPECT_EQ(d.y().row(0), Eigen::RowVector3d(2.0, 3.0, 1.0));
  EXPECT_EQ(d.q(), 1);
  EXPECT_EQ(d.subject_ids()[1], "B");
  write_dataset(d, dir_ / "out");
  const FunctionalDataset back = load_dataset(dir_ / "out" / "responses.csv", dir_ / "out" / "covariates.csv");
  EXPECT_EQ(back.y(), d.y());
  EXPECT_EQ(back.grid(), d.grid());
}

TEST_F(IoTest, ValidationErrorsNameTheProblem) {
  auto message = [&](const std::string& responses, const std::string& covariates) {
    write("r.csv", responses);
    write("c.csv", covariates);
    try {
      (void)load_dataset(dir_ / "r.csv", dir_ / "c.csv");
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  const std::string cov = "subject_id,x1,z1\nA,1,0\nB,2,1\nC,3,2\n";
  EXPECT_EQ(message("subject_id,s,y\nA,0,1\nA,1,2\nB,0,1\nC,0,1\nC,1,1\nB,1,1\n", cov), "no error");
  EXPECT_NE(message("subject_id,s,y\nA,0,1\nA,1,2\nB,0,1\nC,0,1\nC,1,1\n", cov).find("ragged"), std::string::npos);
  EXPECT_NE(message("subject_id,s,y\nA,0,oops\n", cov).find(":2: column 'y'"), std::string::npos);
  EXPECT_NE(message("subject_id,s,y\nZ,0,1\n", cov).find("'Z'"), std::string::npos);
  EXPECT_NE(message("subject_id,s,y\nA,0,1\n", "subject_id,x1\nA,1\n").find("'z1'"), std::string::npos);
  EXPECT_NE(message("subject_id,s,y\nA,0,1\n", "subject_id,x1,z1\nA,1,0\nA,2,0\n").find("duplicate"),
            std::string::npos);
  EXPECT_NE(message("subject_id,s,y\nA,0,1\nA,1,1\nB,0,1\nB,0.5,1\nC,0,1\nC,1,1\n", cov).find("off the common grid"),
            std::string::npos);
  try {
    (void)load_dataset(dir_ / "missing.csv", dir_ / "c.csv");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.csv"), std::string::npos);
    EXPECT_EQ(e.exit_code(), 2);
  }
}

TEST(Config, DefaultsAndOverrides) {
  const RunConfig defaults = parse_config("{}");
  EXPECT_DOUBLE_EQ(defaults.fit.lambda, 0.01);
  EXPECT_EQ(defaults.test.B, 1000);
  const RunConfig c = parse_config(R"({
    "seed": 7,
    "fit": {"lambda": 0.05, "h": 0.2, "gamma_init": [-1, 1], "search": {"mode": "grid", "grid_points": 11}},
    "test": {"B": 200, "Q": 50, "family": "random_directions"},
    "simulate": {"n": 80, "mode": "testing", "c": 0.5},
    "study": {"cells": [[100, 10], [200, 30]], "reps": 5, "power": {"c_grid": [0, 1], "reps": 4}}
  })");
  EXPECT_EQ(c.seed, 7U);
  EXPECT_EQ(c.fit.seed, 7U);
  EXPECT_DOUBLE_EQ(c.fit.lambda, 0.05);
  EXPECT_DOUBLE_EQ(*c.fit.h, 0.2);
  EXPECT_EQ(*c.fit.gamma_init, Eigen::Vector2d(-1.0, 1.0));
  EXPECT_EQ(c.fit.search.mode, GammaSearchMode::kGrid);
  EXPECT_EQ(c.test.family, FamilyMode::kRandomDirections);
  EXPECT_EQ(c.power.test.B, 200);
  EXPECT_EQ(c.simulate.mode, DgpMode::kTesting);
  EXPECT_EQ(c.estimation.cells.size(), 2U);
  EXPECT_EQ(c.estimation.fit.lambda, 0.05);
  EXPECT_EQ(c.power.reps, 4);
}

TEST(Config, ResolvedJsonRoundTrips) {
  const RunConfig c = parse_config(R"({"fit": {"lambda": 0.02, "gamma_init": [0.5, -1]}, "test": {"B": 300}})");
  const std::string text = config_to_json(c);
  EXPECT_EQ(config_to_json(parse_config(text)), text);
}

TEST(Config, ErrorsAreConfigurationErrors) {
  EXPECT_THROW((void)parse_config("{"), ConfigError);
  EXPECT_THROW((void)parse_config(R"({"fitt": {}})"), ConfigError);
  EXPECT_THROW((void)parse_config(R"({"fit": {"lamda": 1}})"), ConfigError);
  EXPECT_THROW((void)parse_config(R"({"fit": {"lambda": "big"}})"), ConfigError);
  EXPECT_THROW((void)parse_config(R"({"test": {"B": 10}})"), ConfigError);
  EXPECT_THROW((void)parse_config(R"({"test": {"family": "spiral"}})"), ConfigError);
  EXPECT_THROW((void)parse_config(R"({"bands": {"n_boot": 20}})"), ConfigError);
  try {
    (void)parse_config(R"({"test": {"B": 10}})");
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.exit_code(), 4);
  }
}

TEST_F(IoTest, FitArtifactsAreWritten) {
  DGPSpec spec;
  spec.n = 60;
  spec.M = 6;
  const SimulatedData sim = generate(spec);
  const ChangePlaneFit f = fit(sim.dataset, FitConfig{});
  write_fit_artifacts(dir_, sim.dataset, f, std::nullopt, std::nullopt);
  const auto fit_json = nlohmann::json::parse(read(dir_ / "fit.json"));
  EXPECT_EQ(fit_json["ls"]["gamma"][0].get<double>(), f.gamma[0]);
  EXPECT_EQ(fit_json["manifest"], "manifest.json");
  const std::string curves = read(dir_ / "curves.csv");
  EXPECT_EQ(std::count(curves.begin(), curves.end(), '\n'), 1 + 5 * 6);
  const std::string members = read(dir_ / "membership.csv");
  EXPECT_EQ(std::count(members.begin(), members.end(), '\n'), 1 + 60);
}

}  // namespace
}  // namespace cplane

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cplane/config.hpp"
#include "cplane/dataset.hpp"
#include "cplane/estimator.hpp"
#include "cplane/simulation.hpp"
#include "cplane/study.hpp"
#include "cplane/subgroup_test.hpp"

namespace cplane {

inline constexpr std::string_view kVersion = "0.1.0";

/// Shortest text that parses back to the same double (17 significant digits).
[[nodiscard]] std::string format_double(double value);

struct LoadOptions {
  /// Names of the subgroup covariates among x1..xp; empty means all of them.
  std::vector<std::string> xtilde;
  /// Tolerance when matching subject grids to the first subject's grid.
  double grid_tolerance = 1e-12;
};

/// Reads the two-file format:
///   responses.csv   subject_id,s,y          (long, one row per observation)
///   covariates.csv  subject_id,x1..xp,z1,z2_1..z2_{q-1}
/// An intercept column is prepended to Z2. Grids outside [0, 1] are mapped
/// onto [0, 1] and the map is kept in the dataset's grid transform.
[[nodiscard]] FunctionalDataset load_dataset(const std::filesystem::path& responses,
                                             const std::filesystem::path& covariates, const LoadOptions& options = {});

/// Writes responses.csv and covariates.csv (original grid scale) into dir.
void write_dataset(const FunctionalDataset& dataset, const std::filesystem::path& dir);

/// Every setting a command may need, read from one JSON file.
struct RunConfig {
  std::uint64_t seed = 20240101;
  FitConfig fit;
  LoadOptions data;
  double band_level = 0.95;
  int band_boot = 0;  ///< 0 disables pointwise bands.
  TestConfig test;
  DGPSpec simulate;
  EstimationStudyConfig estimation;
  PowerStudyConfig power;
  bool run_power = true;
};

/// Missing keys keep their defaults; unknown keys are configuration errors.
[[nodiscard]] RunConfig parse_config(std::string_view json_text);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
/// Fully resolved configuration as JSON text.
[[nodiscard]] std::string config_to_json(const RunConfig& config);

struct RunManifest {
  std::string command;
  std::string config_json;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, double> timings_seconds;
};

/// Hex FNV-1a digest of a file's bytes.
[[nodiscard]] std::string file_digest(const std::filesystem::path& path);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

/// fit.json, curves.csv and membership.csv. Curves and membership come from
/// the weighted fit when present; bands, when given, fill lower/upper.
void write_fit_artifacts(const std::filesystem::path& dir, const FunctionalDataset& dataset,
                         const ChangePlaneFit& ls, const std::optional<ChangePlaneFit>& wls,
                         const std::optional<PointwiseBands>& bands);

/// test.json with the statistic, p-value, per-candidate trace and a digest
/// of the bootstrap draws.
void write_test_artifacts(const std::filesystem::path& dir, const SubgroupTestResult& result);

/// truth.csv (component, s, value) and truth_membership.csv for simulated data.
void write_truth(const std::filesystem::path& dir, const SimulatedData& sim);

/// tables/records.csv plus Table-1/2/3-shaped summaries and covariance.csv.
void write_estimation_tables(const std::filesystem::path& dir, const EstimationStudyResult& result);
/// power.csv (c, power, mc_se, rejections, reps, failures).
void write_power_csv(const std::filesystem::path& path, const PowerStudyResult& result);

}  // namespace cplane

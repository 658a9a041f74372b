#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cplane/config.hpp"
#include "cplane/simulation.hpp"

namespace cplane {

/// Coefficient functions reported by the studies: beta1..beta3, delta1, delta2.
inline constexpr int kStudyComponents = 5;
[[nodiscard]] const std::array<std::string, kStudyComponents>& study_component_names();

struct EstimationStudyConfig {
  std::vector<std::pair<int, int>> cells{{400, 30}};  ///< (n, M)
  int reps = 200;
  FitConfig fit;
  bool weighted = true;
  std::uint64_t seed = 20240101;
  unsigned threads = 1;
};

struct MethodRecord {
  Eigen::Vector2d gamma = Eigen::Vector2d::Zero();
  double accuracy = 0.0;
  std::array<double, kStudyComponents> rase{};
};

struct ReplicationRecord {
  int n = 0;
  int M = 0;
  int rep = 0;
  std::uint64_t data_seed = 0;
  bool ok = false;
  std::string error;
  MethodRecord ls;
  MethodRecord wls;
  /// sup |Lambda_hat - Lambda| over the grid.
  double lambda_sup_error = 0.0;
  /// Digest of the generated dataset, shared by both methods.
  std::uint64_t data_digest = 0;
};

struct MethodSummary {
  Eigen::Vector2d gamma_bias = Eigen::Vector2d::Zero();
  Eigen::Vector2d gamma_sd = Eigen::Vector2d::Zero();
  double gamma_error_median = 0.0;  ///< median ||gamma_hat - gamma_0||
  double accuracy_mean = 0.0;
  double accuracy_sd = 0.0;
  std::array<double, kStudyComponents> rase_mean{};
  std::array<double, kStudyComponents> rase_sd{};
  std::array<double, kStudyComponents> rase_median{};
};

struct CellSummary {
  int n = 0;
  int M = 0;
  int reps = 0;
  int failures = 0;
  MethodSummary ls;
  MethodSummary wls;
  bool weighted = false;
  double lambda_sup_median = 0.0;
  double lambda_sup_below_quarter = 0.0;  ///< fraction of reps with sup error < 0.25
};

struct EstimationStudyResult {
  std::vector<ReplicationRecord> records;
  std::vector<CellSummary> cells;
};

/// LS and WLS fits on matched datasets for every (n, M) cell. Individual
/// failures are recorded; more than 5% failures in a cell is an error.
[[nodiscard]] EstimationStudyResult run_estimation_study(const EstimationStudyConfig& config);

struct PowerStudyConfig {
  std::vector<double> c_grid{0.0, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3};
  int n = 200;
  int M = 30;
  int reps = 200;
  FitConfig fit;
  TestConfig test;
  std::uint64_t seed = 20240101;
  unsigned threads = 1;
};

struct PowerPoint {
  double c = 0.0;
  int reps = 0;
  int failures = 0;
  int rejections = 0;
  double power = 0.0;
  double mc_se = 0.0;
};

struct PowerStudyResult {
  std::vector<PowerPoint> points;
  /// p-values indexed [c][rep]; NaN for failed replications.
  std::vector<std::vector<double>> p_values;
  /// max |power - isotonic(power)| over the c grid.
  double isotonic_deviation = 0.0;
};

/// Rejection frequency at level alpha for each c. Replication r uses the same
/// covariates and noise for every c, so the power curve is estimated with
/// common random numbers.
[[nodiscard]] PowerStudyResult run_power_study(const PowerStudyConfig& config);

/// Nondecreasing least-squares fit (pool-adjacent-violators).
[[nodiscard]] std::vector<double> isotonic_fit(const std::vector<double>& values);

/// Order-sensitive FNV-1a digest of the dataset's numeric payload.
[[nodiscard]] std::uint64_t dataset_digest(const FunctionalDataset& dataset);

}  // namespace cplane

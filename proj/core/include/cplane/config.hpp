#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cplane/kernel.hpp"

namespace cplane {

enum class GammaSearchMode {
  kMultiStart,  ///< Latin-hypercube screen seeding Nelder-Mead restarts.
  kGrid,        ///< Exhaustive evaluation of a candidate grid (q <= 2).
};

struct GammaSearchConfig {
  GammaSearchMode mode = GammaSearchMode::kMultiStart;
  /// Per-coordinate box; scalars broadcast to every coordinate.
  double lower = -5.0;
  double upper = 5.0;
  int screen_points = 256;
  int restarts = 5;
  int max_evaluations = 400;  ///< Per Nelder-Mead run.
  double x_tol = 1e-6;
  double f_tol = 1e-12;
  int grid_points = 41;  ///< Per coordinate in grid mode.
  /// Explicit candidates for grid mode (rows are gamma vectors).
  std::optional<Eigen::MatrixXd> candidates;
};

struct FitConfig {
  double lambda = 0.01;
  /// Smoothing bandwidth; defaults to log(n) / sqrt(n) when unset.
  std::optional<double> h;
  double kernel_nu = 0.2;
  int max_iter = 50;
  double tol = 1e-6;
  std::optional<Eigen::VectorXd> gamma_init;
  std::vector<double> lambda_grid;
  int cv_folds = 5;
  /// Ridge for covariance smoothing; defaults to lambda.
  std::optional<double> lambda_cov;
  GammaSearchConfig search;
  std::uint64_t seed = 20240101;
  unsigned threads = 1;

  [[nodiscard]] KernelSpec kernel_spec() const { return {KernelFamily::kGaussian, kernel_nu}; }
  [[nodiscard]] double bandwidth_for(Eigen::Index n) const;
  [[nodiscard]] double covariance_lambda() const { return lambda_cov.value_or(lambda); }
  void validate() const;
};

/// log(n) / sqrt(n).
[[nodiscard]] double default_bandwidth(Eigen::Index n);

enum class FamilyMode { kPercentileLine, kRandomDirections };

struct TestConfig {
  int B = 1000;
  int Q = 1000;
  FamilyMode family = FamilyMode::kPercentileLine;
  double frac_min = 0.1;
  /// Fixed slope coordinates (gamma_2..gamma_q) for the percentile line.
  std::vector<double> slopes = {1.0};
  double alpha = 0.05;
  /// Ridge for the null fit; defaults to the fit lambda.
  std::optional<double> lambda;
  static constexpr int kMinBootstrap = 100;

  void validate() const;
};

}  // namespace cplane

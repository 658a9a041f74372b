#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "cplane/dataset.hpp"

namespace cplane {

enum class DgpMode { kEstimation, kTesting };

struct DGPSpec {
  int n = 400;
  int M = 30;
  /// Local-alternative scale; used only in testing mode.
  double c = 0.0;
  DgpMode mode = DgpMode::kEstimation;
  Eigen::Vector2d gamma_true{-1.0, 1.0};
  double noise_sd_e = 0.31622776601683794;  // sqrt(0.1)
  Eigen::Vector2d fpc_sds{1.0, 0.70710678118654757};
  std::uint64_t seed = 1;

  void validate() const;
};

/// Ground truth on the generated grid.
struct SimulationTruth {
  Eigen::MatrixXd beta;   ///< 3 x M
  Eigen::MatrixXd delta;  ///< 2 x M, already scaled in testing mode
  std::vector<bool> labels;
  Eigen::VectorXd gamma;
};

struct SimulatedData {
  FunctionalDataset dataset;
  SimulationTruth truth;
};

[[nodiscard]] Eigen::VectorXd true_beta(int component, const Eigen::VectorXd& s);
[[nodiscard]] Eigen::VectorXd true_delta(int component, const Eigen::VectorXd& s);
/// Covariance of the subject-level process (without measurement error).
[[nodiscard]] Eigen::MatrixXd true_lambda(const Eigen::VectorXd& s);

[[nodiscard]] SimulatedData generate(const DGPSpec& spec);

/// Fraction of agreeing labels.
[[nodiscard]] double accuracy_rate(const std::vector<bool>& truth, const std::vector<bool>& estimate);
/// Root-average squared error over the grid.
[[nodiscard]] double rase(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth);

}  // namespace cplane

#pragma once

#include <Eigen/Dense>

#include "cplane/config.hpp"
#include "cplane/covariance_model.hpp"
#include "cplane/dataset.hpp"
#include "cplane/estimator.hpp"
#include "cplane/kernel.hpp"

namespace cplane {

/// Y - fitted mean, with the smoothed membership at the fitted gamma (n x M).
[[nodiscard]] Eigen::MatrixXd residual_processes(const FunctionalDataset& dataset, const ChangePlaneFit& fit);

struct NuSmoothing {
  Eigen::MatrixXd f_hat;   ///< n x M representer coefficients.
  Eigen::MatrixXd nu_hat;  ///< n x M smoothed processes on the grid.
};

/// Per-subject kernel ridge smoothing: f_i = (K + lambda M I)^{-1} y*_i and
/// nu_i = K f_i.
[[nodiscard]] NuSmoothing smooth_nu(const Eigen::MatrixXd& residuals, const KernelModel& kernel, double lambda);

/// n^{-1} sum_i nu_i nu_i^T, exactly symmetric.
[[nodiscard]] Eigen::MatrixXd estimate_lambda(const Eigen::MatrixXd& nu_hat);

/// 1e-8 * mean(diag(Lambda) + 1).
[[nodiscard]] double error_variance_floor(const Eigen::MatrixXd& lambda_hat);

/// Smoothed measurement-error variance on the grid, floored at
/// error_variance_floor of the implied Lambda.
[[nodiscard]] Eigen::VectorXd estimate_e(const Eigen::MatrixXd& residuals, const Eigen::MatrixXd& nu_hat,
                                         const KernelModel& kernel, double lambda);

/// Phi = Lambda + diag(max(E, floor)) and its inverse. When the condition
/// number exceeds 1e10 a ridge of stabilization_eps * mean(diag Phi) is added
/// before inverting. Throws NumericalError if Phi is not PSD within tolerance.
[[nodiscard]] CovarianceModel assemble_phi(const Eigen::MatrixXd& lambda_hat, const Eigen::VectorXd& e_hat_diag,
                                           double stabilization_eps = 1e-8);

/// Full pipeline from a fit: residuals, smoothing, Lambda, E and Phi.
[[nodiscard]] CovarianceModel estimate_covariance(const FunctionalDataset& dataset, const ChangePlaneFit& fit,
                                                  const KernelModel& kernel, double lambda_cov);

/// Weighted refit: estimate Phi from init_fit, then rerun the alternating
/// loop with the Phi^{-1} quadratic form, starting from init_fit.gamma.
[[nodiscard]] ChangePlaneFit weighted_fit(const FunctionalDataset& dataset, const FitConfig& config,
                                          const ChangePlaneFit& init_fit);
/// Same with a caller-supplied covariance.
[[nodiscard]] ChangePlaneFit weighted_fit(const FunctionalDataset& dataset, const FitConfig& config,
                                          const ChangePlaneFit& init_fit, const CovarianceModel& covariance);

}  // namespace cplane

#pragma once

#include <Eigen/Dense>

namespace cplane {

/// Across-grid covariance Phi = Lambda + diag(E) used for weighted fits.
struct CovarianceModel {
  Eigen::MatrixXd lambda_hat;   ///< M x M, symmetric PSD.
  Eigen::VectorXd e_hat_diag;   ///< Measurement-error variance on the grid.
  Eigen::MatrixXd phi_hat;      ///< lambda_hat + diag(max(e_hat_diag, floor)).
  Eigen::MatrixXd phi_inv;      ///< Inverse of phi_hat + ridge_added * I.
  double ridge_added = 0.0;

  /// phi_hat + ridge_added * I, the matrix actually inverted.
  [[nodiscard]] Eigen::MatrixXd stabilized_phi() const {
    Eigen::MatrixXd out = phi_hat;
    out.diagonal().array() += ridge_added;
    return out;
  }

  /// Phi = I: a weighted fit with this model reproduces the unweighted fit.
  [[nodiscard]] static CovarianceModel identity(Eigen::Index grid_size) {
    CovarianceModel out;
    out.lambda_hat = Eigen::MatrixXd::Zero(grid_size, grid_size);
    out.e_hat_diag = Eigen::VectorXd::Ones(grid_size);
    out.phi_hat = Eigen::MatrixXd::Identity(grid_size, grid_size);
    out.phi_inv = Eigen::MatrixXd::Identity(grid_size, grid_size);
    return out;
  }
};

}  // namespace cplane

#include "cplane/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cplane/error.hpp"

namespace cplane {

Eigen::MatrixXd residual_processes(const FunctionalDataset& dataset, const ChangePlaneFit& fit) {
  return dataset.y() - fitted_values(dataset, fit);
}

namespace {

Eigen::LLT<Eigen::MatrixXd> shifted_gram(const KernelModel& kernel, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("covariance smoothing lambda must be positive");
  Eigen::MatrixXd lhs = kernel.gram();
  lhs.diagonal().array() += lambda * static_cast<double>(kernel.size());
  Eigen::LLT<Eigen::MatrixXd> llt(lhs);
  if (llt.info() != Eigen::Success) throw SingularSystemError("K + lambda M I is not positive definite", 0.0);
  return llt;
}

}  // namespace

NuSmoothing smooth_nu(const Eigen::MatrixXd& residuals, const KernelModel& kernel, double lambda) {
  if (residuals.cols() != kernel.size()) throw ValidationError("residual columns do not match the kernel grid");
  const auto llt = shifted_gram(kernel, lambda);
  NuSmoothing out;
  out.f_hat = llt.solve(residuals.transpose()).transpose();
  out.nu_hat = out.f_hat * kernel.gram();
  return out;
}

Eigen::MatrixXd estimate_lambda(const Eigen::MatrixXd& nu_hat) {
  if (nu_hat.rows() < 1) throw ValidationError("need at least one subject to estimate Lambda");
  const Eigen::Index m = nu_hat.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
  out.selfadjointView<Eigen::Lower>().rankUpdate(nu_hat.transpose(), 1.0 / static_cast<double>(nu_hat.rows()));
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

double error_variance_floor(const Eigen::MatrixXd& lambda_hat) {
  return 1e-8 * (lambda_hat.diagonal().array() + 1.0).mean();
}

Eigen::VectorXd estimate_e(const Eigen::MatrixXd& residuals, const Eigen::MatrixXd& nu_hat, const KernelModel& kernel,
                           double lambda) {
  if (residuals.rows() != nu_hat.rows() || residuals.cols() != nu_hat.cols()) {
    throw ValidationError("residual and smoothed-process shapes differ");
  }
  const Eigen::VectorXd target = (residuals - nu_hat).array().square().colwise().mean().transpose();
  const auto llt = shifted_gram(kernel, lambda);
  const Eigen::VectorXd g = llt.solve(target);
  const double floor = error_variance_floor(estimate_lambda(nu_hat));
  return (kernel.gram() * g).cwiseMax(floor);
}

CovarianceModel assemble_phi(const Eigen::MatrixXd& lambda_hat, const Eigen::VectorXd& e_hat_diag,
                             double stabilization_eps) {
  const Eigen::Index m = lambda_hat.rows();
  if (lambda_hat.cols() != m || e_hat_diag.size() != m) throw ValidationError("covariance shapes do not match");
  if (!(stabilization_eps > 0.0)) throw ValidationError("stabilization_eps must be positive");

  CovarianceModel out;
  out.lambda_hat = lambda_hat;
  out.e_hat_diag = e_hat_diag;
  const double floor = error_variance_floor(lambda_hat);
  out.phi_hat = lambda_hat;
  out.phi_hat.diagonal() += e_hat_diag.cwiseMax(floor);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.phi_hat);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of Phi failed");
  const Eigen::VectorXd& vals = eig.eigenvalues();
  const double max_eig = vals.maxCoeff();
  const double min_eig = vals.minCoeff();
  if (min_eig < -1e-10 * std::max(1.0, std::abs(max_eig))) {
    throw NumericalError("covariance assembly: Phi is not positive semidefinite (smallest eigenvalue " +
                         std::to_string(min_eig) + ")");
  }
  const double condition = min_eig > 0.0 ? max_eig / min_eig : std::numeric_limits<double>::infinity();
  if (condition > 1e10) out.ridge_added = stabilization_eps * out.phi_hat.diagonal().mean();

  const Eigen::VectorXd inv = (vals.array() + out.ridge_added).inverse();
  out.phi_inv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  out.phi_inv = 0.5 * (out.phi_inv + out.phi_inv.transpose()).eval();
  return out;
}

CovarianceModel estimate_covariance(const FunctionalDataset& dataset, const ChangePlaneFit& fit,
                                    const KernelModel& kernel, double lambda_cov) {
  const Eigen::MatrixXd residuals = residual_processes(dataset, fit);
  const NuSmoothing smooth = smooth_nu(residuals, kernel, lambda_cov);
  const Eigen::MatrixXd lambda_hat = estimate_lambda(smooth.nu_hat);
  const Eigen::VectorXd e_hat = estimate_e(residuals, smooth.nu_hat, kernel, lambda_cov);
  return assemble_phi(lambda_hat, e_hat);
}

ChangePlaneFit weighted_fit(const FunctionalDataset& dataset, const FitConfig& config,
                            const ChangePlaneFit& init_fit, const CovarianceModel& covariance) {
  FitConfig refit = config;
  refit.gamma_init = init_fit.gamma;
  return fit_with(dataset, refit, init_fit.theta.kernel, &covariance);
}

ChangePlaneFit weighted_fit(const FunctionalDataset& dataset, const FitConfig& config,
                            const ChangePlaneFit& init_fit) {
  const CovarianceModel covariance =
      estimate_covariance(dataset, init_fit, *init_fit.theta.kernel, config.covariance_lambda());
  return weighted_fit(dataset, config, init_fit, covariance);
}

}  // namespace cplane

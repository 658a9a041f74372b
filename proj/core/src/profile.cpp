#include "cplane/profile.hpp"

#include <cmath>

#include "cplane/error.hpp"
#include "cplane/smoother.hpp"

namespace cplane {

std::shared_ptr<const KernelModel> make_kernel(const FunctionalDataset& dataset, const FitConfig& config) {
  return std::make_shared<const KernelModel>(dataset.grid(), config.kernel_spec());
}

ProfileSolver::ProfileSolver(const FunctionalDataset& dataset, std::shared_ptr<const KernelModel> kernel,
                             double lambda, double h, const CovarianceModel* weight)
    : dataset_(std::make_shared<const FunctionalDataset>(dataset)),
      kernel_(std::move(kernel)),
      lambda_(lambda),
      h_(h),
      weighted_(weight != nullptr),
      n_(dataset.n()),
      m_(dataset.grid_size()),
      p_(dataset.p()),
      d_(dataset.d()) {
  if (!kernel_) throw ValidationError("profile solver needs a kernel model");
  if (kernel_->size() != m_) throw ValidationError("kernel grid does not match the dataset grid");
  if (!(lambda_ > 0.0)) throw ValidationError("lambda must be positive");
  if (!(h_ > 0.0)) throw ValidationError("smoothing bandwidth h must be positive");

  if (weight == nullptr) {
    basis_ = kernel_->eigenvectors();
    sigma_ = kernel_->eigenvalues();
  } else {
    const Eigen::MatrixXd phi = weight->stabilized_phi();
    if (phi.rows() != m_ || phi.cols() != m_) throw ValidationError("covariance weight does not match the grid");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> phi_eig(phi);
    if (phi_eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the covariance failed");
    const Eigen::VectorXd& phi_vals = phi_eig.eigenvalues();
    if (!(phi_vals.minCoeff() > 0.0)) {
      throw SingularSystemError("covariance weight is not positive definite", phi_vals.minCoeff());
    }
    const Eigen::MatrixXd& v = phi_eig.eigenvectors();
    const Eigen::MatrixXd inv_sqrt = v * phi_vals.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
    Eigen::MatrixXd a = inv_sqrt * kernel_->stabilized_gram() * inv_sqrt;
    a = 0.5 * (a + a.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> a_eig(a);
    if (a_eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the whitened Gram failed");
    basis_ = inv_sqrt * a_eig.eigenvectors();
    // Phi^{-1/2} K_stab Phi^{-1/2} >= jitter / max eig(Phi); clamp rounding below that bound.
    sigma_ = a_eig.eigenvalues().cwiseMax(kernel_->jitter() / phi_vals.maxCoeff());
  }
  y_white_ = dataset_->y() * basis_;
  y_sq_ = y_white_.rowwise().squaredNorm();
}

bool ProfileSolver::is_degenerate(const Eigen::VectorXd& g) const {
  if (g.size() < 2) return true;
  const double mean = g.mean();
  const double var = (g.array() - mean).square().sum() / static_cast<double>(g.size() - 1);
  return std::sqrt(var) < kDegenerateSd;
}

Eigen::MatrixXd ProfileSolver::design(const Eigen::VectorXd& gamma) const { return design_from(smoothed_weights(gamma)); }

ProfileSolver::Core ProfileSolver::solve_core(const Eigen::MatrixXd& w, const Eigen::VectorXd* row_counts) const {
  const Eigen::Index k = w.cols();
  Eigen::MatrixXd gram_w;
  Eigen::MatrixXd cross;
  double y_sq = 0.0;
  double n_eff = static_cast<double>(n_);
  if (row_counts == nullptr) {
    gram_w = w.transpose() * w;
    cross = w.transpose() * y_white_;
    y_sq = y_sq_.sum();
  } else {
    const Eigen::MatrixXd cw = w.array().colwise() * row_counts->array();
    gram_w = cw.transpose() * w;
    cross = cw.transpose() * y_white_;
    y_sq = row_counts->dot(y_sq_);
    n_eff = row_counts->sum();
  }
  const double nm = n_eff * static_cast<double>(m_);
  const double shift = lambda_ * nm;

  Core core;
  core.coef.resize(k, m_);
  double fit_cross = 0.0;
  double fit_quad = 0.0;
  double penalty = 0.0;
  Eigen::MatrixXd lhs(k, k);
  for (Eigen::Index m = 0; m < m_; ++m) {
    const double s = sigma_[m];
    lhs = s * gram_w;
    lhs.diagonal().array() += shift;
    Eigen::LLT<Eigen::MatrixXd> llt(lhs);
    if (llt.info() != Eigen::Success) {
      throw SingularSystemError("profiled normal equations are not positive definite", 0.0);
    }
    const Eigen::VectorXd e = llt.solve(cross.col(m));
    core.coef.col(m) = e;
    const Eigen::VectorXd fitted = s * e;
    fit_cross += fitted.dot(cross.col(m));
    fit_quad += fitted.dot(gram_w * fitted);
    penalty += s * e.squaredNorm();
  }
  core.unpenalized = std::max(0.0, (y_sq - 2.0 * fit_cross + fit_quad) / (2.0 * nm));
  core.penalty = 0.5 * lambda_ * penalty;
  return core;
}

ProfiledSolve ProfileSolver::finish(const Core& core, const Eigen::VectorXd& gamma, Eigen::Index active,
                                    bool degenerate) const {
  // d = P e, stored component-major.
  Eigen::MatrixXd d_mat = Eigen::MatrixXd::Zero(p_ + d_, m_);
  d_mat.topRows(active) = core.coef * basis_.transpose();
  ProfiledSolve out;
  out.d_vec.resize((p_ + d_) * m_);
  for (Eigen::Index c = 0; c < p_ + d_; ++c) out.d_vec.segment(c * m_, m_) = d_mat.row(c).transpose();
  out.unpenalized_loss = core.unpenalized;
  out.loss = core.unpenalized + core.penalty;
  out.gamma = gamma;
  out.degenerate = degenerate;
  return out;
}

Eigen::VectorXd ProfileSolver::smoothed_weights(const Eigen::VectorXd& gamma) const {
  return smooth_indicator(dataset_->plane_index(gamma), SmootherSpec{SmootherFamily::kNormalCdf, h_});
}

Eigen::MatrixXd ProfileSolver::design_from(const Eigen::VectorXd& g) const {
  Eigen::MatrixXd w(n_, p_ + d_);
  w.leftCols(p_) = dataset_->x();
  w.rightCols(d_) = dataset_->xtilde().array().colwise() * g.array();
  return w;
}

ProfiledSolve ProfileSolver::solve(const Eigen::VectorXd& gamma) const {
  const Eigen::VectorXd g = smoothed_weights(gamma);
  if (is_degenerate(g)) return finish(solve_core(dataset_->x(), nullptr), gamma, p_, true);
  return finish(solve_core(design_from(g), nullptr), gamma, p_ + d_, false);
}

ProfiledSolve ProfileSolver::solve(const Eigen::VectorXd& gamma, const Eigen::VectorXd& row_counts) const {
  if (row_counts.size() != n_) throw ValidationError("row count vector does not match the number of subjects");
  const Eigen::VectorXd g = smoothed_weights(gamma);
  if (is_degenerate(g)) return finish(solve_core(dataset_->x(), &row_counts), gamma, p_, true);
  return finish(solve_core(design_from(g), &row_counts), gamma, p_ + d_, false);
}

double ProfileSolver::profile_loss(const Eigen::VectorXd& gamma) const {
  const Eigen::VectorXd g = smoothed_weights(gamma);
  if (is_degenerate(g)) return solve_core(dataset_->x(), nullptr).unpenalized;
  return solve_core(design_from(g), nullptr).unpenalized;
}

ProfiledSolve ProfileSolver::solve_beta_only() const {
  return finish(solve_core(dataset_->x(), nullptr), Eigen::VectorXd(), p_, false);
}

CoefficientFunctions ProfileSolver::coefficients(const ProfiledSolve& solve) const {
  CoefficientFunctions theta;
  theta.kernel = kernel_;
  theta.b.resize(p_, m_);
  theta.c.resize(d_, m_);
  for (Eigen::Index k = 0; k < p_; ++k) theta.b.row(k) = solve.d_vec.segment(k * m_, m_).transpose();
  for (Eigen::Index l = 0; l < d_; ++l) theta.c.row(l) = solve.d_vec.segment((p_ + l) * m_, m_).transpose();
  return theta;
}

ProfiledSolve profiled_coefficients(const FunctionalDataset& dataset, const Eigen::VectorXd& gamma,
                                    const FitConfig& config, const CovarianceModel* weight) {
  config.validate();
  const ProfileSolver solver(dataset, make_kernel(dataset, config), config.lambda, config.bandwidth_for(dataset.n()),
                             weight);
  return solver.solve(gamma);
}

double profile_loss(const FunctionalDataset& dataset, const Eigen::VectorXd& gamma, const FitConfig& config,
                    const CovarianceModel* weight) {
  config.validate();
  const ProfileSolver solver(dataset, make_kernel(dataset, config), config.lambda, config.bandwidth_for(dataset.n()),
                             weight);
  return solver.profile_loss(gamma);
}

}  // namespace cplane

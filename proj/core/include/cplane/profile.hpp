#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>

#include "cplane/coefficients.hpp"
#include "cplane/config.hpp"
#include "cplane/covariance_model.hpp"
#include "cplane/dataset.hpp"
#include "cplane/kernel.hpp"

namespace cplane {

/// Coefficients minimizing the smoothed penalized loss at a fixed gamma.
struct ProfiledSolve {
  /// (b_1, ..., b_p, c_1, ..., c_d) stacked, length (p + d) * M.
  Eigen::VectorXd d_vec;
  /// Penalized smoothed objective at the solution.
  double loss = 0.0;
  /// Same objective without the roughness penalty.
  double unpenalized_loss = 0.0;
  Eigen::VectorXd gamma;
  /// True when the smoothed weights were numerically constant and only the
  /// beta part was fitted (c is zero).
  bool degenerate = false;
};

/// Solves the representer-form normal equations
///
///   [sum_i (w_i w_i^T) (x) K A K + lambda n M (I (x) K)] d = sum_i (w_i (x) K A) Y_i
///
/// with w_i = (X_i, Xtilde_i G_h(Z1_i + Z2_i gamma)) and A = I (unweighted) or
/// A = Phi^{-1} (weighted). Setup finds a basis P with P^T K P = diag(sigma)
/// and P P^T = A, after which every gamma costs M small (p+d)-dimensional
/// solves. Instances are immutable and safe to share across threads.
class ProfileSolver {
 public:
  /// Sample standard deviation of the smoothed weights below which the
  /// change-plane term is treated as unidentified.
  static constexpr double kDegenerateSd = 1e-12;

  ProfileSolver(const FunctionalDataset& dataset, std::shared_ptr<const KernelModel> kernel, double lambda, double h,
                const CovarianceModel* weight = nullptr);

  [[nodiscard]] const FunctionalDataset& dataset() const noexcept { return *dataset_; }
  [[nodiscard]] const std::shared_ptr<const KernelModel>& kernel() const noexcept { return kernel_; }
  [[nodiscard]] double lambda() const noexcept { return lambda_; }
  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] bool weighted() const noexcept { return weighted_; }
  [[nodiscard]] Eigen::Index components() const noexcept { return p_ + d_; }

  /// Smoothed design rows w_i (n x (p + d)).
  [[nodiscard]] Eigen::MatrixXd design(const Eigen::VectorXd& gamma) const;

  [[nodiscard]] ProfiledSolve solve(const Eigen::VectorXd& gamma) const;
  /// As solve(), with subject i counted row_counts[i] times (bootstrap).
  [[nodiscard]] ProfiledSolve solve(const Eigen::VectorXd& gamma, const Eigen::VectorXd& row_counts) const;
  /// Unpenalized smoothed loss at the profiled coefficients.
  [[nodiscard]] double profile_loss(const Eigen::VectorXd& gamma) const;
  /// True when the smoothed weights at gamma are numerically constant.
  [[nodiscard]] bool degenerate_at(const Eigen::VectorXd& gamma) const { return is_degenerate(smoothed_weights(gamma)); }
  /// delta-free fit (w_i = X_i), the null model.
  [[nodiscard]] ProfiledSolve solve_beta_only() const;

  [[nodiscard]] CoefficientFunctions coefficients(const ProfiledSolve& solve) const;

  /// Basis with P^T K P = diag(sigma) and P P^T = A.
  [[nodiscard]] const Eigen::MatrixXd& basis() const noexcept { return basis_; }
  [[nodiscard]] const Eigen::VectorXd& basis_eigenvalues() const noexcept { return sigma_; }

 private:
  struct Core {
    Eigen::MatrixXd coef;  // (components) x M in the basis
    double unpenalized = 0.0;
    double penalty = 0.0;
  };
  [[nodiscard]] Core solve_core(const Eigen::MatrixXd& w, const Eigen::VectorXd* row_counts) const;
  [[nodiscard]] ProfiledSolve finish(const Core& core, const Eigen::VectorXd& gamma, Eigen::Index active,
                                     bool degenerate) const;
  [[nodiscard]] bool is_degenerate(const Eigen::VectorXd& g) const;
  [[nodiscard]] Eigen::VectorXd smoothed_weights(const Eigen::VectorXd& gamma) const;
  [[nodiscard]] Eigen::MatrixXd design_from(const Eigen::VectorXd& g) const;

  std::shared_ptr<const FunctionalDataset> dataset_;
  std::shared_ptr<const KernelModel> kernel_;
  double lambda_;
  double h_;
  bool weighted_;
  Eigen::Index n_, m_, p_, d_;
  Eigen::MatrixXd basis_;    // P, M x M
  Eigen::VectorXd sigma_;    // M
  Eigen::MatrixXd y_white_;  // Y P, n x M
  Eigen::VectorXd y_sq_;     // squared norms of the rows of y_white_
};

/// One-shot wrappers over ProfileSolver.
[[nodiscard]] ProfiledSolve profiled_coefficients(const FunctionalDataset& dataset, const Eigen::VectorXd& gamma,
                                                  const FitConfig& config, const CovarianceModel* weight = nullptr);
[[nodiscard]] double profile_loss(const FunctionalDataset& dataset, const Eigen::VectorXd& gamma,
                                  const FitConfig& config, const CovarianceModel* weight = nullptr);

/// Kernel model on the dataset grid for the configured kernel.
[[nodiscard]] std::shared_ptr<const KernelModel> make_kernel(const FunctionalDataset& dataset,
                                                             const FitConfig& config);

}  // namespace cplane

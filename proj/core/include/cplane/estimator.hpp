#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "cplane/coefficients.hpp"
#include "cplane/config.hpp"
#include "cplane/covariance_model.hpp"
#include "cplane/dataset.hpp"
#include "cplane/profile.hpp"

namespace cplane {

struct ChangePlaneFit {
  CoefficientFunctions theta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd d_vec;
  /// Profiled (unpenalized) loss after each gamma update.
  std::vector<double> loss_trace;
  double penalized_loss = 0.0;
  bool converged = false;
  int n_iter = 0;
  bool weighted = false;
  double lambda = 0.0;
  double h = 0.0;
  /// Set when every screened gamma gave numerically constant weights.
  bool flat_objective = false;
  int evaluations = 0;
  /// Covariance used by a weighted fit.
  std::optional<CovarianceModel> covariance;
};

enum class SearchScope {
  kGlobal,  ///< Screen the box, then restart Nelder-Mead from the best points.
  kLocal,   ///< Nelder-Mead from the initial point only.
};

struct GammaSearchResult {
  Eigen::VectorXd gamma;
  double loss = 0.0;
  int evaluations = 0;
  bool flat_objective = false;
};

/// Minimizes the profiled loss over gamma with a prepared solver.
[[nodiscard]] GammaSearchResult search_gamma(const ProfileSolver& solver, const FitConfig& config,
                                             const std::optional<Eigen::VectorXd>& init, SearchScope scope);

/// Global gamma search including `init` as a start point. In grid mode the
/// best candidate is returned; otherwise the result is never worse than init.
[[nodiscard]] GammaSearchResult optimize_gamma(const FunctionalDataset& dataset, const FitConfig& config,
                                               const CovarianceModel* weight, const Eigen::VectorXd& init);

/// Alternates the coefficient solve and the gamma update until the relative
/// change in profiled loss is at most config.tol, or max_iter is reached.
[[nodiscard]] ChangePlaneFit fit(const FunctionalDataset& dataset, const FitConfig& config);
/// Same loop with an explicit kernel and optional covariance weight.
[[nodiscard]] ChangePlaneFit fit_with(const FunctionalDataset& dataset, const FitConfig& config,
                                      std::shared_ptr<const KernelModel> kernel, const CovarianceModel* weight);

/// Fitted mean on the grid (n x M) using the smoothed membership at fit.gamma.
[[nodiscard]] Eigen::MatrixXd fitted_values(const FunctionalDataset& dataset, const ChangePlaneFit& fit);

struct LambdaSelection {
  double lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> cv_error;
  Eigen::VectorXd gamma;
};

/// Subject-level K-fold cross-validation of lambda at a fixed gamma
/// (config.gamma_init, or the gamma of a preliminary fit at config.lambda).
[[nodiscard]] LambdaSelection select_lambda(const FunctionalDataset& dataset, const FitConfig& config);

struct PointwiseBands {
  double level = 0.95;
  int n_boot = 0;
  int failures = 0;
  Eigen::MatrixXd estimate;  ///< (p + d) x M
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;
};

/// Percentile bootstrap over subjects with gamma held at fit.gamma. A weighted
/// fit reuses its covariance for every refit.
[[nodiscard]] PointwiseBands pointwise_bands(const FunctionalDataset& dataset, const FitConfig& config,
                                             const ChangePlaneFit& fit, double level, int n_boot,
                                             std::uint64_t seed);

}  // namespace cplane

#include "cplane/config.hpp"

#include <cmath>

#include "cplane/error.hpp"

namespace cplane {

double default_bandwidth(Eigen::Index n) {
  const auto nn = static_cast<double>(n);
  return std::log(nn) / std::sqrt(nn);
}

double FitConfig::bandwidth_for(Eigen::Index n) const { return h.value_or(default_bandwidth(n)); }

void FitConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
  if (h && !(*h > 0.0)) throw ConfigError("h must be positive");
  if (!(kernel_nu > 0.0)) throw ConfigError("kernel_nu must be positive");
  if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
  for (double l : lambda_grid) {
    if (!(l > 0.0)) throw ConfigError("lambda_grid entries must be positive");
  }
  if (lambda_cov && !(*lambda_cov > 0.0)) throw ConfigError("lambda_cov must be positive");
  if (!(search.lower < search.upper)) throw ConfigError("gamma box lower bound must be below the upper bound");
  if (search.screen_points < 1) throw ConfigError("screen_points must be positive");
  if (search.restarts < 1) throw ConfigError("restarts must be positive");
  if (search.max_evaluations < 1) throw ConfigError("max_evaluations must be positive");
  if (search.grid_points < 1) throw ConfigError("grid_points must be positive");
}

void TestConfig::validate() const {
  if (B < kMinBootstrap) throw ConfigError("B must be at least " + std::to_string(kMinBootstrap));
  if (Q < 1) throw ConfigError("Q must be at least 1");
  if (!(frac_min >= 0.0 && frac_min < 0.5)) throw ConfigError("frac_min must lie in [0, 0.5)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (lambda && !(*lambda > 0.0)) throw ConfigError("test lambda must be positive");
}

}  // namespace cplane

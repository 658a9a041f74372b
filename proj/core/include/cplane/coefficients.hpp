#pragma once

#include <Eigen/Dense>

#include <memory>

#include "cplane/kernel.hpp"

namespace cplane {

/// Representer-form coefficient functions: beta_k(s) = b_k . K_s and
/// delta_l(s) = c_l . K_s, with rows b_k of `b` (p x M) and c_l of `c` (d x M).
struct CoefficientFunctions {
  Eigen::MatrixXd b;
  Eigen::MatrixXd c;
  std::shared_ptr<const KernelModel> kernel;

  [[nodiscard]] Eigen::Index p() const noexcept { return b.rows(); }
  [[nodiscard]] Eigen::Index d() const noexcept { return c.rows(); }

  /// (p + d) x M matrix of every component evaluated on the kernel grid.
  [[nodiscard]] Eigen::MatrixXd on_grid() const;
  /// (p + d) x points.size() matrix of every component at arbitrary points.
  [[nodiscard]] Eigen::MatrixXd at(const Eigen::VectorXd& points) const;
};

/// (beta_1(s), ..., beta_p(s), delta_1(s), ..., delta_d(s)).
[[nodiscard]] Eigen::VectorXd evaluate_theta(const CoefficientFunctions& theta, double s);

}  // namespace cplane

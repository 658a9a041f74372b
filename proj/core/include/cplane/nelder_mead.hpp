#pragma once

#include <Eigen/Dense>

#include <functional>

#include "cplane/random.hpp"

namespace cplane {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct NelderMeadOptions {
  double initial_step = 0.5;
  int max_evaluations = 400;
  /// Stop when the simplex diameter (inf-norm) drops below x_tol and the
  /// spread of vertex values below f_tol * (1 + |f_best|).
  double x_tol = 1e-6;
  double f_tol = 1e-12;
  /// Optional box; points are projected onto it before evaluation.
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2) on the box-projected objective. The returned value is never
/// worse than the value at the start point.
[[nodiscard]] NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& start,
                                           const NelderMeadOptions& options);

/// `count` Latin-hypercube points in the box [lower, upper] (rows).
[[nodiscard]] Eigen::MatrixXd latin_hypercube(int count, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                              Stream& stream);

}  // namespace cplane

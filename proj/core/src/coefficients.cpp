#include "cplane/coefficients.hpp"

#include "cplane/error.hpp"

namespace cplane {

namespace {

Eigen::MatrixXd stacked(const CoefficientFunctions& theta) {
  if (!theta.kernel) throw ValidationError("coefficient functions have no kernel");
  const Eigen::Index m = theta.kernel->size();
  if (theta.b.cols() != m || (theta.c.size() > 0 && theta.c.cols() != m)) {
    throw ValidationError("coefficient matrices do not match the kernel grid");
  }
  Eigen::MatrixXd coef(theta.b.rows() + theta.c.rows(), m);
  coef.topRows(theta.b.rows()) = theta.b;
  if (theta.c.rows() > 0) coef.bottomRows(theta.c.rows()) = theta.c;
  return coef;
}

}  // namespace

Eigen::MatrixXd CoefficientFunctions::on_grid() const { return stacked(*this) * kernel->gram(); }

Eigen::MatrixXd CoefficientFunctions::at(const Eigen::VectorXd& points) const {
  return stacked(*this) * kernel->cross_gram(points).transpose();
}

Eigen::VectorXd evaluate_theta(const CoefficientFunctions& theta, double s) {
  return stacked(theta) * theta.kernel->section(s);
}

}  // namespace cplane

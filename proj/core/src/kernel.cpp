#include "cplane/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cplane/error.hpp"

namespace cplane {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::kGaussian:
      return "gaussian";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "gaussian") return KernelFamily::kGaussian;
  throw ConfigError("unknown kernel family '" + std::string(name) + "'");
}

double KernelSpec::operator()(double s, double t) const {
  const double diff = s - t;
  return std::exp(-diff * diff / (2.0 * bandwidth * bandwidth));
}

void KernelSpec::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ValidationError("kernel bandwidth must be positive and finite");
  }
}

namespace {

void check_grid(const Eigen::VectorXd& grid) {
  if (grid.size() < 2) throw ValidationError("kernel grid needs at least two points");
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw ValidationError("kernel grid has a non-finite point");
  }
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    for (Eigen::Index j = i + 1; j < grid.size(); ++j) {
      if (grid[i] == grid[j]) {
        std::ostringstream msg;
        msg << "degenerate grid: points " << i << " and " << j << " coincide at " << grid[i];
        throw ValidationError(msg.str());
      }
    }
  }
}

}  // namespace

Eigen::MatrixXd gram_matrix(const Eigen::VectorXd& grid, const KernelSpec& spec) {
  spec.validate();
  check_grid(grid);
  const Eigen::Index m = grid.size();
  Eigen::MatrixXd gram(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    gram(j, j) = spec(grid[j], grid[j]);
    for (Eigen::Index i = j + 1; i < m; ++i) {
      const double k = spec(grid[i], grid[j]);
      gram(i, j) = k;
      gram(j, i) = k;
    }
  }
  return gram;
}

KernelModel::KernelModel(Eigen::VectorXd grid, KernelSpec spec) : spec_(spec), grid_(std::move(grid)) {
  if (!std::is_sorted(grid_.begin(), grid_.end())) {
    throw ValidationError("kernel grid must be sorted ascending");
  }
  gram_ = gram_matrix(grid_, spec_);
  const auto m = static_cast<double>(grid_.size());
  jitter_ = kStabilization * gram_.trace() / m;
  stabilized_ = gram_;
  stabilized_.diagonal().array() += jitter_;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(stabilized_);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of Gram matrix failed");
  eigenvectors_ = eig.eigenvectors();
  // Rounding can push the smallest eigenvalues of a dense Gaussian Gram
  // matrix just below the jitter; clamp so the basis stays positive.
  eigenvalues_ = eig.eigenvalues().cwiseMax(jitter_);
}

Eigen::VectorXd KernelModel::section(double s) const {
  Eigen::VectorXd out(grid_.size());
  for (Eigen::Index m = 0; m < grid_.size(); ++m) out[m] = spec_(s, grid_[m]);
  return out;
}

Eigen::MatrixXd KernelModel::cross_gram(const Eigen::VectorXd& points) const {
  Eigen::MatrixXd out(points.size(), grid_.size());
  for (Eigen::Index r = 0; r < points.size(); ++r) {
    for (Eigen::Index m = 0; m < grid_.size(); ++m) out(r, m) = spec_(points[r], grid_[m]);
  }
  return out;
}

Eigen::MatrixXd KernelModel::solve_shifted(double ridge, const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != grid_.size()) throw ValidationError("solve_shifted: right-hand side has wrong row count");
  const Eigen::VectorXd inv = (eigenvalues_.array() + ridge).inverse();
  return eigenvectors_ * (inv.asDiagonal() * (eigenvectors_.transpose() * rhs));
}

Eigen::VectorXd kernel_section(double s, const KernelModel& model) { return model.section(s); }

Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& a, double ridge, const Eigen::MatrixXd& b) {
  if (a.rows() != a.cols()) throw ValidationError("ridge_solve: matrix is not square");
  if (b.rows() != a.rows()) throw ValidationError("ridge_solve: right-hand side has wrong row count");
  if (!(ridge >= 0.0)) throw ValidationError("ridge_solve: ridge must be nonnegative");
  const Eigen::Index n = a.rows();
  if (n == 0) return Eigen::MatrixXd(0, b.cols());

  Eigen::MatrixXd lhs = 0.5 * (a + a.transpose());
  lhs.diagonal().array() += ridge;
  const double scale = std::max(lhs.diagonal().cwiseAbs().maxCoeff(), std::abs(lhs.trace()) / static_cast<double>(n));
  lhs.diagonal().array() += KernelModel::kStabilization * scale;

  Eigen::LLT<Eigen::MatrixXd> llt(lhs);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd x = llt.solve(b);
    // One step of iterative refinement keeps the residual tight for
    // moderately conditioned systems.
    const Eigen::MatrixXd residual = b - lhs * x;
    x += llt.solve(residual);
    return x;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lhs, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues()[0];
  std::ostringstream msg;
  msg << "singular system: smallest eigenvalue " << min_eig << " after stabilization";
  throw SingularSystemError(msg.str(), min_eig);
}

}  // namespace cplane

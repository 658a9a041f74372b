#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace cplane {

enum class KernelFamily { kGaussian };

[[nodiscard]] std::string_view to_string(KernelFamily family);
[[nodiscard]] KernelFamily parse_kernel_family(std::string_view name);

struct KernelSpec {
  KernelFamily family = KernelFamily::kGaussian;
  double bandwidth = 0.2;

  /// k(s, t). Symmetric; k(s, s) = 1 for the Gaussian family.
  [[nodiscard]] double operator()(double s, double t) const;
  void validate() const;
};

/// Gram matrix of `spec` over `grid`. Throws ValidationError on duplicate
/// grid points, too few points, or a nonpositive bandwidth.
[[nodiscard]] Eigen::MatrixXd gram_matrix(const Eigen::VectorXd& grid, const KernelSpec& spec);

/// Kernel evaluated on a sorted grid with its Gram matrix and a cached
/// eigendecomposition of the stabilized Gram matrix. Immutable once built.
class KernelModel {
 public:
  /// Relative diagonal jitter applied before factorization (times trace / M).
  static constexpr double kStabilization = 1e-10;

  KernelModel(Eigen::VectorXd grid, KernelSpec spec);

  [[nodiscard]] const KernelSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const Eigen::VectorXd& grid() const noexcept { return grid_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return grid_.size(); }
  [[nodiscard]] const Eigen::MatrixXd& gram() const noexcept { return gram_; }

  /// gram + jitter * I.
  [[nodiscard]] const Eigen::MatrixXd& stabilized_gram() const noexcept { return stabilized_; }
  [[nodiscard]] double jitter() const noexcept { return jitter_; }
  /// Orthonormal eigenvectors of the stabilized Gram matrix (columns).
  [[nodiscard]] const Eigen::MatrixXd& eigenvectors() const noexcept { return eigenvectors_; }
  /// Matching eigenvalues, ascending, all positive.
  [[nodiscard]] const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }

  /// (k(s, grid[0]), ..., k(s, grid[M-1])).
  [[nodiscard]] Eigen::VectorXd section(double s) const;
  /// Rows are sections at each point of `points`.
  [[nodiscard]] Eigen::MatrixXd cross_gram(const Eigen::VectorXd& points) const;

  /// Solves (stabilized_gram + ridge I) X = B using the cached eigenbasis.
  [[nodiscard]] Eigen::MatrixXd solve_shifted(double ridge, const Eigen::MatrixXd& rhs) const;

 private:
  KernelSpec spec_;
  Eigen::VectorXd grid_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd stabilized_;
  double jitter_ = 0.0;
  Eigen::MatrixXd eigenvectors_;
  Eigen::VectorXd eigenvalues_;
};

[[nodiscard]] Eigen::VectorXd kernel_section(double s, const KernelModel& model);

/// Solves (A + ridge I) X = B for symmetric A. The left-hand side gets the
/// same relative jitter as Gram matrices; if it is still not positive
/// definite a SingularSystemError carrying the smallest eigenvalue is thrown.
[[nodiscard]] Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& a, double ridge, const Eigen::MatrixXd& b);

}  // namespace cplane

#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace cplane {

/// Affine map from the stored [0, 1] grid back to the original scale:
/// original = offset + scale * s.
struct GridTransform {
  double offset = 0.0;
  double scale = 1.0;

  [[nodiscard]] double to_original(double s) const noexcept { return offset + scale * s; }
  [[nodiscard]] double to_unit(double original) const noexcept { return (original - offset) / scale; }
};

/// Functional responses on a common grid with scalar, subgroup and
/// change-plane covariates.
///
///   Y   n x M responses, row i is subject i on the grid
///   X   n x p covariates; the subgroup covariates are the columns named by
///       xtilde_idx (so they are a subset of X by construction)
///   Z1  n change-plane variable whose coefficient is fixed at one
///   Z2  n x q change-plane covariates, first column is the intercept
///
/// The constructor enforces every invariant and throws ValidationError.
class FunctionalDataset {
 public:
  FunctionalDataset(Eigen::MatrixXd y, Eigen::MatrixXd x, std::vector<int> xtilde_idx, Eigen::VectorXd z1,
                    Eigen::MatrixXd z2, Eigen::VectorXd grid, std::vector<std::string> subject_ids = {},
                    GridTransform transform = {});

  [[nodiscard]] Eigen::Index n() const noexcept { return y_.rows(); }
  [[nodiscard]] Eigen::Index grid_size() const noexcept { return y_.cols(); }
  [[nodiscard]] Eigen::Index p() const noexcept { return x_.cols(); }
  [[nodiscard]] Eigen::Index d() const noexcept { return static_cast<Eigen::Index>(xtilde_idx_.size()); }
  [[nodiscard]] Eigen::Index q() const noexcept { return z2_.cols(); }

  [[nodiscard]] const Eigen::MatrixXd& y() const noexcept { return y_; }
  [[nodiscard]] const Eigen::MatrixXd& x() const noexcept { return x_; }
  [[nodiscard]] const std::vector<int>& xtilde_idx() const noexcept { return xtilde_idx_; }
  [[nodiscard]] const Eigen::MatrixXd& xtilde() const noexcept { return xtilde_; }
  [[nodiscard]] const Eigen::VectorXd& z1() const noexcept { return z1_; }
  [[nodiscard]] const Eigen::MatrixXd& z2() const noexcept { return z2_; }
  [[nodiscard]] const Eigen::VectorXd& grid() const noexcept { return grid_; }
  [[nodiscard]] const std::vector<std::string>& subject_ids() const noexcept { return subject_ids_; }
  [[nodiscard]] const GridTransform& grid_transform() const noexcept { return transform_; }

  /// Z1 + Z2 * gamma for every subject.
  [[nodiscard]] Eigen::VectorXd plane_index(const Eigen::VectorXd& gamma) const;

  /// Copy restricted to the given subject rows (duplicates allowed).
  [[nodiscard]] FunctionalDataset subset(const std::vector<Eigen::Index>& rows) const;
  /// Same covariates and grid with the responses replaced.
  [[nodiscard]] FunctionalDataset with_responses(Eigen::MatrixXd y) const;

 private:
  Eigen::MatrixXd y_;
  Eigen::MatrixXd x_;
  std::vector<int> xtilde_idx_;
  Eigen::MatrixXd xtilde_;
  Eigen::VectorXd z1_;
  Eigen::MatrixXd z2_;
  Eigen::VectorXd grid_;
  std::vector<std::string> subject_ids_;
  GridTransform transform_;
};

/// Hard subgroup labels I(Z1 + Z2 * gamma > 0).
[[nodiscard]] std::vector<bool> membership(const FunctionalDataset& dataset, const Eigen::VectorXd& gamma);

}  // namespace cplane

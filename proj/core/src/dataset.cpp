#include "cplane/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cplane/error.hpp"

namespace cplane {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* name) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j))) {
        std::ostringstream msg;
        msg << name << " has a non-finite value at row " << i << ", column " << j;
        throw ValidationError(msg.str());
      }
    }
  }
}

}  // namespace

FunctionalDataset::FunctionalDataset(Eigen::MatrixXd y, Eigen::MatrixXd x, std::vector<int> xtilde_idx,
                                     Eigen::VectorXd z1, Eigen::MatrixXd z2, Eigen::VectorXd grid,
                                     std::vector<std::string> subject_ids, GridTransform transform)
    : y_(std::move(y)),
      x_(std::move(x)),
      xtilde_idx_(std::move(xtilde_idx)),
      z1_(std::move(z1)),
      z2_(std::move(z2)),
      grid_(std::move(grid)),
      subject_ids_(std::move(subject_ids)),
      transform_(transform) {
  const Eigen::Index n = y_.rows();
  if (n == 0) throw ValidationError("dataset has no subjects");
  if (y_.cols() != grid_.size()) throw ValidationError("response columns do not match grid length");
  if (x_.rows() != n || z1_.size() != n || z2_.rows() != n) {
    throw ValidationError("covariate row counts do not match the number of subjects");
  }
  if (x_.cols() < 1) throw ValidationError("dataset needs at least one covariate in X");
  if (xtilde_idx_.empty() || static_cast<Eigen::Index>(xtilde_idx_.size()) > x_.cols()) {
    throw ValidationError("subgroup covariate count d must satisfy 1 <= d <= p");
  }
  std::set<int> seen;
  for (int idx : xtilde_idx_) {
    if (idx < 0 || idx >= x_.cols()) throw ValidationError("subgroup covariate index out of range");
    if (!seen.insert(idx).second) throw ValidationError("subgroup covariate index repeated");
  }
  if (z2_.cols() < 1) throw ValidationError("Z2 needs at least the intercept column");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (z2_(i, 0) != 1.0) {
      std::ostringstream msg;
      msg << "Z2 intercept column must be 1 (row " << i << " has " << z2_(i, 0) << ")";
      throw ValidationError(msg.str());
    }
  }
  require_finite(y_, "Y");
  require_finite(x_, "X");
  require_finite(z1_, "Z1");
  require_finite(z2_, "Z2");
  require_finite(grid_, "grid");
  if (!std::is_sorted(grid_.begin(), grid_.end())) throw ValidationError("grid must be sorted ascending");
  for (Eigen::Index m = 1; m < grid_.size(); ++m) {
    if (grid_[m] == grid_[m - 1]) throw ValidationError("grid points must be distinct");
  }
  if (n < x_.cols() + d() + z2_.cols()) {
    std::ostringstream msg;
    msg << "need n >= p + d + q subjects (n=" << n << ", p=" << x_.cols() << ", d=" << d() << ", q=" << z2_.cols()
        << ")";
    throw ValidationError(msg.str());
  }
  if (!subject_ids_.empty() && static_cast<Eigen::Index>(subject_ids_.size()) != n) {
    throw ValidationError("subject id count does not match the number of subjects");
  }
  if (subject_ids_.empty()) {
    subject_ids_.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) subject_ids_.push_back(std::to_string(i + 1));
  }
  if (!(transform_.scale > 0.0)) throw ValidationError("grid transform scale must be positive");

  xtilde_.resize(n, d());
  for (Eigen::Index l = 0; l < d(); ++l) xtilde_.col(l) = x_.col(xtilde_idx_[static_cast<std::size_t>(l)]);
}

Eigen::VectorXd FunctionalDataset::plane_index(const Eigen::VectorXd& gamma) const {
  if (gamma.size() != q()) throw ValidationError("gamma length does not match q");
  return z1_ + z2_ * gamma;
}

FunctionalDataset FunctionalDataset::subset(const std::vector<Eigen::Index>& rows) const {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd y(n, y_.cols());
  Eigen::MatrixXd x(n, x_.cols());
  Eigen::VectorXd z1(n);
  Eigen::MatrixXd z2(n, z2_.cols());
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index src = rows[static_cast<std::size_t>(r)];
    y.row(r) = y_.row(src);
    x.row(r) = x_.row(src);
    z1[r] = z1_[src];
    z2.row(r) = z2_.row(src);
    ids.push_back(subject_ids_[static_cast<std::size_t>(src)]);
  }
  return {std::move(y), std::move(x), xtilde_idx_, std::move(z1), std::move(z2), grid_, std::move(ids), transform_};
}

FunctionalDataset FunctionalDataset::with_responses(Eigen::MatrixXd y) const {
  return {std::move(y), x_, xtilde_idx_, z1_, z2_, grid_, subject_ids_, transform_};
}

std::vector<bool> membership(const FunctionalDataset& dataset, const Eigen::VectorXd& gamma) {
  const Eigen::VectorXd index = dataset.plane_index(gamma);
  std::vector<bool> labels(static_cast<std::size_t>(index.size()));
  for (Eigen::Index i = 0; i < index.size(); ++i) labels[static_cast<std::size_t>(i)] = index[i] > 0.0;
  return labels;
}

}  // namespace cplane

#include "cplane/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cplane/error.hpp"
#include "cplane/random.hpp"

namespace cplane {

namespace {

constexpr int kP = 3;
constexpr int kD = 2;

/// Cholesky factor of the 0.5^{|j-k|} covariance.
Eigen::Matrix3d covariate_factor() {
  Eigen::Matrix3d cov;
  for (int j = 0; j < kP; ++j) {
    for (int k = 0; k < kP; ++k) cov(j, k) = std::pow(0.5, std::abs(j - k));
  }
  return cov.llt().matrixL();
}

}  // namespace

void DGPSpec::validate() const {
  if (n < 2 || M < 2) throw ConfigError("simulation needs n >= 2 and M >= 2");
  if (c < 0.0) throw ConfigError("local-alternative scale c must be nonnegative");
  if (!(noise_sd_e > 0.0)) throw ConfigError("noise_sd_e must be positive");
  if (fpc_sds.minCoeff() < 0.0) throw ConfigError("fpc_sds must be nonnegative");
}

Eigen::VectorXd true_beta(int component, const Eigen::VectorXd& s) {
  const auto a = s.array();
  switch (component) {
    case 0: return (1.0 - a).cube().matrix();
    case 1: return (-a.square()).exp().matrix();
    case 2: return ((std::numbers::pi * a).sin() + a.cube()).matrix();
    default: throw ValidationError("beta component out of range");
  }
}

Eigen::VectorXd true_delta(int component, const Eigen::VectorXd& s) {
  const auto a = s.array();
  switch (component) {
    case 0: return (1.0 - a).square().matrix();
    case 1: return (-5.0 * a).exp().matrix();
    default: throw ValidationError("delta component out of range");
  }
}

Eigen::MatrixXd true_lambda(const Eigen::VectorXd& s) {
  const Eigen::ArrayXd sn = (2.0 * std::numbers::pi * s.array()).sin();
  const Eigen::ArrayXd cs = (2.0 * std::numbers::pi * s.array()).cos();
  return 2.0 * sn.matrix() * sn.matrix().transpose() + cs.matrix() * cs.matrix().transpose();
}

SimulatedData generate(const DGPSpec& spec) {
  spec.validate();
  const Eigen::Index n = spec.n;
  const Eigen::Index m_count = spec.M;

  Stream grid_stream(spec.seed, "grid");
  std::vector<double> points(static_cast<std::size_t>(m_count));
  for (auto& v : points) v = grid_stream.uniform();
  std::sort(points.begin(), points.end());
  const Eigen::VectorXd grid = Eigen::Map<Eigen::VectorXd>(points.data(), m_count);

  const Eigen::Matrix3d chol = covariate_factor();
  Eigen::MatrixXd x(n, kP);
  Eigen::VectorXd z1(n);
  Eigen::MatrixXd z2(n, 2);
  Eigen::MatrixXd y(n, m_count);

  SimulationTruth truth;
  truth.gamma = spec.gamma_true;
  truth.beta.resize(kP, m_count);
  for (int k = 0; k < kP; ++k) truth.beta.row(k) = true_beta(k, grid).transpose();
  truth.delta.resize(kD, m_count);
  for (int k = 0; k < kD; ++k) truth.delta.row(k) = true_delta(k, grid).transpose();
  if (spec.mode == DgpMode::kTesting) truth.delta *= spec.c / std::sqrt(static_cast<double>(n));
  truth.labels.resize(static_cast<std::size_t>(n));

  const double root2 = std::numbers::sqrt2;
  const Eigen::RowVectorXd fpc1 = root2 * (2.0 * std::numbers::pi * grid.array()).sin().matrix().transpose();
  const Eigen::RowVectorXd fpc2 = root2 * (2.0 * std::numbers::pi * grid.array()).cos().matrix().transpose();

  for (Eigen::Index i = 0; i < n; ++i) {
    Stream stream(spec.seed, "subject", {static_cast<std::uint64_t>(i)});
    Eigen::Vector3d raw;
    for (int k = 0; k < kP; ++k) raw[k] = stream.normal();
    x.row(i) = (chol * raw).transpose();
    z1[i] = stream.normal();
    z2(i, 0) = 1.0;
    z2(i, 1) = stream.normal(1.0, 1.0);
    const double xi1 = spec.fpc_sds[0] * stream.normal();
    const double xi2 = spec.fpc_sds[1] * stream.normal();
    const bool member = z1[i] + z2.row(i).dot(spec.gamma_true) > 0.0;
    truth.labels[static_cast<std::size_t>(i)] = member;

    Eigen::RowVectorXd row = x.row(i) * truth.beta + xi1 * fpc1 + xi2 * fpc2;
    if (member) row += x.row(i).head(kD) * truth.delta;
    for (Eigen::Index m = 0; m < m_count; ++m) row[m] += spec.noise_sd_e * stream.normal();
    y.row(i) = row;
  }

  FunctionalDataset dataset(std::move(y), std::move(x), {0, 1}, std::move(z1), std::move(z2), grid);
  return SimulatedData{std::move(dataset), std::move(truth)};
}

double accuracy_rate(const std::vector<bool>& truth, const std::vector<bool>& estimate) {
  if (truth.size() != estimate.size()) throw ValidationError("label vectors differ in length");
  if (truth.empty()) throw ValidationError("label vectors are empty");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) agree += truth[i] == estimate[i] ? 1 : 0;
  return static_cast<double>(agree) / static_cast<double>(truth.size());
}

double rase(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
  if (estimate.size() != truth.size()) throw ValidationError("rase arguments differ in length");
  if (estimate.size() == 0) throw ValidationError("rase arguments are empty");
  return std::sqrt((estimate - truth).squaredNorm() / static_cast<double>(estimate.size()));
}

}  // namespace cplane

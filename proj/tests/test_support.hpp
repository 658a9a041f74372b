#pragma once

#include <cmath>

#include "cplane/dataset.hpp"
#include "cplane/kernel.hpp"
#include "cplane/simulation.hpp"

namespace cplane::testing {

/// Small simulated dataset from the estimation design.
inline SimulatedData small_sim(int n, int m, std::uint64_t seed) {
  DGPSpec spec;
  spec.n = n;
  spec.M = m;
  spec.seed = seed;
  return generate(spec);
}

/// Normal CDF written independently of the library smoother.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Design rows (X_i, Xtilde_i * Phi(index_i / h)).
inline Eigen::MatrixXd oracle_design(const FunctionalDataset& data, const Eigen::VectorXd& gamma, double h) {
  Eigen::MatrixXd w(data.n(), data.p() + data.d());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    double index = data.z1()[i];
    for (Eigen::Index k = 0; k < data.q(); ++k) index += data.z2()(i, k) * gamma[k];
    const double g = normal_cdf(index / h);
    for (Eigen::Index k = 0; k < data.p(); ++k) w(i, k) = data.x()(i, k);
    for (Eigen::Index l = 0; l < data.d(); ++l) w(i, data.p() + l) = data.x()(i, data.xtilde_idx()[l]) * g;
  }
  return w;
}

/// Penalized loss (2nM)^{-1} sum_i ||Y_i - N_i d||^2 + (lambda/2) d^T (I kron K) d
/// with N_i = w_i^T kron K, evaluated by explicit loops.
inline double literal_loss(const FunctionalDataset& data, const Eigen::MatrixXd& w, const Eigen::MatrixXd& k,
                           double lambda, const Eigen::VectorXd& d_vec) {
  const Eigen::Index m_count = data.grid_size();
  const Eigen::Index comps = w.cols();
  double sse = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index m = 0; m < m_count; ++m) {
      double fit = 0.0;
      for (Eigen::Index c = 0; c < comps; ++c) {
        for (Eigen::Index j = 0; j < m_count; ++j) fit += w(i, c) * k(m, j) * d_vec[c * m_count + j];
      }
      const double r = data.y()(i, m) - fit;
      sse += r * r;
    }
  }
  double pen = 0.0;
  for (Eigen::Index c = 0; c < comps; ++c) {
    const Eigen::VectorXd b = d_vec.segment(c * m_count, m_count);
    pen += b.dot(k * b);
  }
  return sse / (2.0 * static_cast<double>(data.n() * m_count)) + 0.5 * lambda * pen;
}

}  // namespace cplane::testing

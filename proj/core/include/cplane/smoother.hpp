#pragma once

#include <Eigen/Dense>

namespace cplane {

enum class SmootherFamily { kNormalCdf };

/// G_h(w) = G(w / h) with G the standard normal CDF.
struct SmootherSpec {
  SmootherFamily family = SmootherFamily::kNormalCdf;
  double h = 1.0;
};

[[nodiscard]] double smooth_indicator(double w, const SmootherSpec& spec);
[[nodiscard]] Eigen::VectorXd smooth_indicator(const Eigen::VectorXd& w, const SmootherSpec& spec);

}  // namespace cplane

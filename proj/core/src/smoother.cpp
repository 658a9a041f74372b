#include "cplane/smoother.hpp"

#include <cmath>
#include <numbers>

#include "cplane/error.hpp"

namespace cplane {

double smooth_indicator(double w, const SmootherSpec& spec) {
  if (!(spec.h > 0.0)) throw ValidationError("smoothing bandwidth h must be positive");
  // erfc form keeps full relative precision in the lower tail.
  return 0.5 * std::erfc(-w / (spec.h * std::numbers::sqrt2));
}

Eigen::VectorXd smooth_indicator(const Eigen::VectorXd& w, const SmootherSpec& spec) {
  Eigen::VectorXd out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = smooth_indicator(w[i], spec);
  return out;
}

}  // namespace cplane

#include "cplane/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "cplane/error.hpp"

namespace cplane {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const NelderMeadOptions& options) {
  if (options.lower.size() == 0) return x;
  return x.cwiseMax(options.lower).cwiseMin(options.upper);
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& start, const NelderMeadOptions& options) {
  const Eigen::Index dim = start.size();
  if (dim == 0) throw ValidationError("nelder_mead: empty start point");
  if (options.lower.size() != 0 && (options.lower.size() != dim || options.upper.size() != dim)) {
    throw ValidationError("nelder_mead: box dimensions do not match the start point");
  }

  int evaluations = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.reserve(static_cast<std::size_t>(dim + 1));
  simplex.push_back(project(start, options));
  values.push_back(eval(simplex.front()));
  for (Eigen::Index j = 0; j < dim; ++j) {
    Eigen::VectorXd vertex = simplex.front();
    vertex[j] += options.initial_step;
    if (options.lower.size() != 0 && vertex[j] > options.upper[j]) vertex[j] = simplex.front()[j] - options.initial_step;
    vertex = project(vertex, options);
    values.push_back(eval(vertex));
    simplex.push_back(std::move(vertex));
  }

  std::vector<std::size_t> order(simplex.size());
  bool converged = false;
  while (evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double diameter = 0.0;
    for (const auto& v : simplex) diameter = std::max(diameter, (v - simplex[best]).cwiseAbs().maxCoeff());
    const double spread = values[worst] - values[best];
    if (diameter <= options.x_tol && spread <= options.f_tol * (1.0 + std::abs(values[best]))) {
      converged = true;
      break;
    }
    if (diameter <= 1e-3 * options.x_tol) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t k = 0; k < simplex.size(); ++k) {
      if (k != worst) centroid += simplex[k];
    }
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd reflected = project(centroid + (centroid - simplex[worst]), options);
    const double f_reflected = eval(reflected);
    if (f_reflected < values[best]) {
      const Eigen::VectorXd expanded = project(centroid + 2.0 * (centroid - simplex[worst]), options);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[worst];
    const Eigen::VectorXd contracted = outside ? project(centroid + 0.5 * (reflected - centroid), options)
                                               : project(centroid + 0.5 * (simplex[worst] - centroid), options);
    const double f_contracted = eval(contracted);
    if (f_contracted < (outside ? f_reflected : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = f_contracted;
      continue;
    }
    for (std::size_t k = 0; k < simplex.size(); ++k) {
      if (k == best) continue;
      simplex[k] = project(simplex[best] + 0.5 * (simplex[k] - simplex[best]), options);
      values[k] = eval(simplex[k]);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(best_it - values.begin());
  return {simplex[best], values[best], evaluations, converged};
}

Eigen::MatrixXd latin_hypercube(int count, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                Stream& stream) {
  if (count < 1) throw ValidationError("latin_hypercube: count must be positive");
  const Eigen::Index dim = lower.size();
  Eigen::MatrixXd points(count, dim);
  std::vector<int> perm(static_cast<std::size_t>(count));
  for (Eigen::Index j = 0; j < dim; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = count - 1; i > 0; --i) {
      const auto k = static_cast<int>(stream.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)]);
    }
    const double width = upper[j] - lower[j];
    for (int i = 0; i < count; ++i) {
      const double u = (perm[static_cast<std::size_t>(i)] + stream.uniform()) / count;
      points(i, j) = lower[j] + width * u;
    }
  }
  return points;
}

}  // namespace cplane

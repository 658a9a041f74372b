#include "cplane/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cplane/error.hpp"
#include "cplane/nelder_mead.hpp"
#include "cplane/parallel.hpp"
#include "cplane/random.hpp"
#include "cplane/smoother.hpp"

namespace cplane {

namespace {

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

Box make_box(const FitConfig& config, Eigen::Index q) {
  return {Eigen::VectorXd::Constant(q, config.search.lower), Eigen::VectorXd::Constant(q, config.search.upper)};
}

double simplex_step(const FitConfig& config, Eigen::Index q) {
  const double per_axis = std::ceil(std::pow(static_cast<double>(config.search.screen_points), 1.0 / q));
  return (config.search.upper - config.search.lower) / (2.0 * per_axis);
}

Eigen::MatrixXd grid_candidates(const FitConfig& config, Eigen::Index q) {
  if (config.search.candidates) {
    if (config.search.candidates->cols() != q) throw ConfigError("gamma candidates have the wrong dimension");
    return *config.search.candidates;
  }
  if (q > 2) throw ConfigError("grid search without explicit candidates requires q <= 2");
  const int k = config.search.grid_points;
  const double lo = config.search.lower;
  const double hi = config.search.upper;
  auto axis = [&](int i) { return k == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (k - 1); };
  if (q == 1) {
    Eigen::MatrixXd out(k, 1);
    for (int i = 0; i < k; ++i) out(i, 0) = axis(i);
    return out;
  }
  Eigen::MatrixXd out(k * k, 2);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      out(i * k + j, 0) = axis(i);
      out(i * k + j, 1) = axis(j);
    }
  }
  return out;
}

}  // namespace

GammaSearchResult search_gamma(const ProfileSolver& solver, const FitConfig& config,
                               const std::optional<Eigen::VectorXd>& init, SearchScope scope) {
  const Eigen::Index q = solver.dataset().q();
  if (init && init->size() != q) throw ValidationError("initial gamma has the wrong length");
  if (init && !init->allFinite()) throw ValidationError("initial gamma must be finite");
  const Box box = make_box(config, q);
  auto objective = [&solver](const Eigen::VectorXd& g) { return solver.profile_loss(g); };

  GammaSearchResult result;
  if (config.search.mode == GammaSearchMode::kGrid) {
    const Eigen::MatrixXd candidates = grid_candidates(config, q);
    result.loss = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < candidates.rows(); ++r) {
      const double v = objective(candidates.row(r).transpose());
      ++result.evaluations;
      if (v < result.loss) {
        result.loss = v;
        result.gamma = candidates.row(r).transpose();
      }
    }
    if (!std::isfinite(result.loss)) throw NumericalError("profiled loss is not finite at any grid candidate");
    return result;
  }

  NelderMeadOptions nm;
  nm.initial_step = simplex_step(config, q);
  nm.max_evaluations = config.search.max_evaluations;
  nm.x_tol = config.search.x_tol;
  nm.f_tol = config.search.f_tol;
  nm.lower = box.lower;
  nm.upper = box.upper;

  std::vector<Eigen::VectorXd> starts;
  if (init) starts.push_back(init->cwiseMax(box.lower).cwiseMin(box.upper));

  if (scope == SearchScope::kGlobal) {
    Stream stream(config.seed, "gamma-screen");
    const Eigen::MatrixXd screen = latin_hypercube(config.search.screen_points, box.lower, box.upper, stream);
    std::vector<double> values(static_cast<std::size_t>(screen.rows()));
    int degenerate = 0;
    for (Eigen::Index r = 0; r < screen.rows(); ++r) {
      const Eigen::VectorXd g = screen.row(r).transpose();
      if (solver.degenerate_at(g)) ++degenerate;
      values[static_cast<std::size_t>(r)] = objective(g);
    }
    result.evaluations += static_cast<int>(screen.rows());
    if (degenerate == screen.rows()) {
      result.flat_objective = true;
      result.gamma = init.value_or(0.5 * (box.lower + box.upper));
      result.loss = objective(result.gamma);
      ++result.evaluations;
      return result;
    }
    std::vector<Eigen::Index> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return values[static_cast<std::size_t>(a)] < values[static_cast<std::size_t>(b)];
    });
    int picked = 0;
    for (Eigen::Index r : order) {
      if (picked >= config.search.restarts) break;
      const Eigen::VectorXd g = screen.row(r).transpose();
      const bool close = std::any_of(starts.begin(), starts.end(), [&](const Eigen::VectorXd& s) {
        return (s - g).cwiseAbs().maxCoeff() < 0.5 * nm.initial_step;
      });
      if (close) continue;
      starts.push_back(g);
      ++picked;
    }
  }
  if (starts.empty()) throw ValidationError("local gamma search needs an initial gamma");

  result.loss = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    const NelderMeadResult run = nelder_mead(objective, start, nm);
    result.evaluations += run.evaluations;
    if (run.value < result.loss) {
      result.loss = run.value;
      result.gamma = run.x;
    }
  }
  if (!std::isfinite(result.loss)) throw NumericalError("profiled loss is not finite at any gamma");
  return result;
}

GammaSearchResult optimize_gamma(const FunctionalDataset& dataset, const FitConfig& config,
                                 const CovarianceModel* weight, const Eigen::VectorXd& init) {
  config.validate();
  const ProfileSolver solver(dataset, make_kernel(dataset, config), config.lambda, config.bandwidth_for(dataset.n()),
                             weight);
  return search_gamma(solver, config, init, SearchScope::kGlobal);
}

ChangePlaneFit fit_with(const FunctionalDataset& dataset, const FitConfig& config,
                        std::shared_ptr<const KernelModel> kernel, const CovarianceModel* weight) {
  config.validate();
  const double h = config.bandwidth_for(dataset.n());
  const ProfileSolver solver(dataset, std::move(kernel), config.lambda, h, weight);

  ChangePlaneFit out;
  out.weighted = weight != nullptr;
  out.lambda = config.lambda;
  out.h = h;
  if (weight != nullptr) out.covariance = *weight;

  std::optional<Eigen::VectorXd> gamma = config.gamma_init;
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    // Step 1 (coefficients at the current gamma) is folded into the profiled
    // objective; step 2 updates gamma against it.
    const SearchScope scope = (iter == 1 && !gamma) ? SearchScope::kGlobal : SearchScope::kLocal;
    const GammaSearchResult step = search_gamma(solver, config, gamma, scope);
    out.evaluations += step.evaluations;
    out.flat_objective = out.flat_objective || step.flat_objective;
    gamma = step.gamma;
    out.loss_trace.push_back(step.loss);
    out.n_iter = iter;
    if (step.flat_objective) break;
    if (out.loss_trace.size() >= 2) {
      const double prev = out.loss_trace[out.loss_trace.size() - 2];
      if (std::abs(step.loss - prev) <= config.tol * (1.0 + std::abs(prev))) {
        out.converged = true;
        break;
      }
    }
  }

  const ProfiledSolve final_solve = solver.solve(*gamma);
  out.gamma = *gamma;
  out.d_vec = final_solve.d_vec;
  out.penalized_loss = final_solve.loss;
  out.theta = solver.coefficients(final_solve);
  return out;
}

ChangePlaneFit fit(const FunctionalDataset& dataset, const FitConfig& config) {
  return fit_with(dataset, config, make_kernel(dataset, config), nullptr);
}

Eigen::MatrixXd fitted_values(const FunctionalDataset& dataset, const ChangePlaneFit& fit) {
  const Eigen::MatrixXd curves = fit.theta.on_grid();  // (p + d) x M
  const Eigen::VectorXd g =
      smooth_indicator(dataset.plane_index(fit.gamma), SmootherSpec{SmootherFamily::kNormalCdf, fit.h});
  const Eigen::Index p = dataset.p();
  const Eigen::Index d = dataset.d();
  Eigen::MatrixXd w(dataset.n(), p + d);
  w.leftCols(p) = dataset.x();
  w.rightCols(d) = dataset.xtilde().array().colwise() * g.array();
  return w * curves;
}

LambdaSelection select_lambda(const FunctionalDataset& dataset, const FitConfig& config) {
  config.validate();
  if (config.lambda_grid.empty()) throw ConfigError("lambda_grid must not be empty");
  LambdaSelection out;
  out.grid = config.lambda_grid;
  if (config.lambda_grid.size() == 1) {
    out.lambda = config.lambda_grid.front();
    out.cv_error.assign(1, std::numeric_limits<double>::quiet_NaN());
    out.gamma = config.gamma_init.value_or(Eigen::VectorXd());
    return out;
  }

  const Eigen::Index n = dataset.n();
  const int folds = config.cv_folds;
  const Eigen::Index min_fold = n / folds;
  if (min_fold < dataset.p() + dataset.d()) {
    throw ConfigError("cross-validation folds hold fewer than p + d subjects");
  }

  auto kernel = make_kernel(dataset, config);
  out.gamma = config.gamma_init ? *config.gamma_init : fit_with(dataset, config, kernel, nullptr).gamma;
  const double h = config.bandwidth_for(n);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Stream stream(config.seed, "cv-folds");
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto k = static_cast<Eigen::Index>(stream.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)]);
  }
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])] = r % folds;

  out.cv_error.assign(config.lambda_grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
    for (Eigen::Index i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    const FunctionalDataset train_set = dataset.subset(train);
    const FunctionalDataset test_set = dataset.subset(test);
    for (std::size_t li = 0; li < config.lambda_grid.size(); ++li) {
      const ProfileSolver solver(train_set, kernel, config.lambda_grid[li], h, nullptr);
      const ProfiledSolve solve = solver.solve(out.gamma);
      ChangePlaneFit partial;
      partial.theta = solver.coefficients(solve);
      partial.gamma = out.gamma;
      partial.h = h;
      const Eigen::MatrixXd pred = fitted_values(test_set, partial);
      out.cv_error[li] += (test_set.y() - pred).squaredNorm();
    }
  }
  const double denom = static_cast<double>(n * dataset.grid_size());
  for (double& e : out.cv_error) e /= denom;
  const auto best = std::min_element(out.cv_error.begin(), out.cv_error.end()) - out.cv_error.begin();
  out.lambda = config.lambda_grid[static_cast<std::size_t>(best)];
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

PointwiseBands pointwise_bands(const FunctionalDataset& dataset, const FitConfig& config, const ChangePlaneFit& fit,
                               double level, int n_boot, std::uint64_t seed) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("band level must lie in (0, 1)");
  if (n_boot < 100) throw ConfigError("pointwise bands need at least 100 bootstrap draws");
  const CovarianceModel* weight = fit.covariance ? &*fit.covariance : nullptr;
  const ProfileSolver solver(dataset, fit.theta.kernel, fit.lambda, fit.h, weight);
  const Eigen::Index n = dataset.n();
  const Eigen::Index comps = dataset.p() + dataset.d();
  const Eigen::Index m = dataset.grid_size();

  std::vector<Eigen::MatrixXd> draws(static_cast<std::size_t>(n_boot));
  std::vector<char> failed(static_cast<std::size_t>(n_boot), 0);
  parallel_for(static_cast<std::size_t>(n_boot), resolve_threads(config.threads), [&](std::size_t b) {
    Stream stream(seed, "pointwise-bands", {b});
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) counts[static_cast<Eigen::Index>(stream.below(static_cast<std::uint64_t>(n)))] += 1.0;
    try {
      const ProfiledSolve solve = solver.solve(fit.gamma, counts);
      draws[b] = solver.coefficients(solve).on_grid();
      if (!draws[b].allFinite()) failed[b] = 1;
    } catch (const Error&) {
      failed[b] = 1;
    }
  });

  PointwiseBands out;
  out.level = level;
  out.n_boot = n_boot;
  out.failures = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  if (out.failures * 10 > n_boot) {
    throw NumericalError("bootstrap refit failure rate above 10% (" + std::to_string(out.failures) + " of " +
                         std::to_string(n_boot) + ")");
  }
  out.estimate = fit.theta.on_grid();
  out.lower.resize(comps, m);
  out.upper.resize(comps, m);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n_boot));
  const double lo_prob = 0.5 * (1.0 - level);
  const double hi_prob = 0.5 * (1.0 + level);
  for (Eigen::Index c = 0; c < comps; ++c) {
    for (Eigen::Index j = 0; j < m; ++j) {
      values.clear();
      for (int b = 0; b < n_boot; ++b) {
        if (!failed[static_cast<std::size_t>(b)]) values.push_back(draws[static_cast<std::size_t>(b)](c, j));
      }
      std::sort(values.begin(), values.end());
      out.lower(c, j) = std::min(quantile_sorted(values, lo_prob), out.estimate(c, j));
      out.upper(c, j) = std::max(quantile_sorted(values, hi_prob), out.estimate(c, j));
    }
  }
  return out;
}

}  // namespace cplane

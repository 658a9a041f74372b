#include <gtest/gtest.h>

#include <algorithm>

#include "cplane/error.hpp"
#include "cplane/estimator.hpp"
#include "cplane/profile.hpp"
#include "test_support.hpp"

namespace cplane {
namespace {

using testing::small_sim;

TEST(Estimator, RecoversGroupingParameter) {
  const SimulatedData sim = small_sim(400, 20, 42);
  const ChangePlaneFit f = fit(sim.dataset, FitConfig{});
  EXPECT_LT((f.gamma - sim.truth.gamma).norm(), 0.35);
  EXPECT_GT(accuracy_rate(sim.truth.labels, membership(sim.dataset, f.gamma)), 0.93);
  EXPECT_TRUE(f.converged);
  EXPECT_FALSE(f.weighted);
  EXPECT_DOUBLE_EQ(f.h, default_bandwidth(400));
  EXPECT_EQ(f.theta.b.rows(), 3);
  EXPECT_EQ(f.theta.c.rows(), 2);
}

TEST(Estimator, LossTraceNeverIncreases) {
  const SimulatedData sim = small_sim(150, 12, 8);
  FitConfig config;
  config.tol = 1e-14;
  config.max_iter = 6;
  const ChangePlaneFit f = fit(sim.dataset, config);
  ASSERT_FALSE(f.loss_trace.empty());
  for (std::size_t k = 1; k < f.loss_trace.size(); ++k) {
    EXPECT_LE(f.loss_trace[k], f.loss_trace[k - 1] + 1e-14);
  }
}

TEST(Estimator, FinalSolveMatchesProfileAtGammaHat) {
  const SimulatedData sim = small_sim(120, 10, 9);
  const FitConfig config;
  const ChangePlaneFit f = fit(sim.dataset, config);
  const ProfiledSolve direct = profiled_coefficients(sim.dataset, f.gamma, config, nullptr);
  EXPECT_EQ(direct.d_vec, f.d_vec);
  EXPECT_DOUBLE_EQ(direct.loss, f.penalized_loss);
}

TEST(Estimator, GridModeReturnsBestCandidate) {
  const SimulatedData sim = small_sim(120, 10, 10);
  FitConfig config;
  config.search.mode = GammaSearchMode::kGrid;
  Eigen::MatrixXd cand(4, 2);
  cand << -1.0, 1.0, 0.0, 0.0, -2.0, 0.5, 1.0, -1.0;
  config.search.candidates = cand;
  const auto kernel = make_kernel(sim.dataset, config);
  const ProfileSolver solver(sim.dataset, kernel, config.lambda, config.bandwidth_for(120));
  Eigen::Index best = 0;
  double best_loss = solver.profile_loss(cand.row(0).transpose());
  for (Eigen::Index j = 1; j < cand.rows(); ++j) {
    const double loss = solver.profile_loss(cand.row(j).transpose());
    if (loss < best_loss) {
      best_loss = loss;
      best = j;
    }
  }
  const GammaSearchResult r = search_gamma(solver, config, std::nullopt, SearchScope::kGlobal);
  EXPECT_EQ(r.gamma, cand.row(best).transpose());
  EXPECT_DOUBLE_EQ(r.loss, best_loss);
}

TEST(Estimator, SearchIsNeverWorseThanInit) {
  const SimulatedData sim = small_sim(100, 8, 12);
  const FitConfig config;
  const auto kernel = make_kernel(sim.dataset, config);
  const ProfileSolver solver(sim.dataset, kernel, config.lambda, config.bandwidth_for(100));
  Eigen::VectorXd init(2);
  init << 3.0, -2.0;
  const GammaSearchResult local = search_gamma(solver, config, init, SearchScope::kLocal);
  EXPECT_LE(local.loss, solver.profile_loss(init));
  const GammaSearchResult global = search_gamma(solver, config, init, SearchScope::kGlobal);
  EXPECT_LE(global.loss, solver.profile_loss(init));
  EXPECT_LE(global.loss, local.loss + 1e-12);
}

TEST(Estimator, FlatObjectiveWhenIndexIsConstant) {
  SimulatedData sim = small_sim(60, 6, 13);
  const FunctionalDataset& d = sim.dataset;
  // Z1 constant and no slope covariates: the plane index never varies.
  FunctionalDataset flat(d.y(), d.x(), d.xtilde_idx(), Eigen::VectorXd::Constant(d.n(), 0.3),
                         Eigen::MatrixXd::Ones(d.n(), 1), d.grid());
  const ChangePlaneFit f = fit(flat, FitConfig{});
  EXPECT_TRUE(f.flat_objective);
  EXPECT_TRUE(f.gamma.allFinite());
}

TEST(Estimator, ThreadsDoNotChangeTheFit) {
  const SimulatedData sim = small_sim(150, 10, 14);
  FitConfig one;
  FitConfig many;
  many.threads = 4;
  const ChangePlaneFit a = fit(sim.dataset, one);
  const ChangePlaneFit b = fit(sim.dataset, many);
  EXPECT_EQ(a.gamma, b.gamma);
  EXPECT_EQ(a.d_vec, b.d_vec);
}

TEST(Estimator, GammaInitRunsLocalSearchOnly) {
  const SimulatedData sim = small_sim(150, 10, 15);
  FitConfig config;
  config.gamma_init = Eigen::Vector2d(-1.0, 1.0);
  const ChangePlaneFit f = fit(sim.dataset, config);
  EXPECT_LT((f.gamma - Eigen::Vector2d(-1.0, 1.0)).norm(), 0.5);
  config.gamma_init = Eigen::Vector3d(0.0, 0.0, 0.0);
  EXPECT_THROW((void)fit(sim.dataset, config), ValidationError);
}

TEST(Estimator, FittedValuesUseSmoothedMembership) {
  const SimulatedData sim = small_sim(80, 8, 16);
  const ChangePlaneFit f = fit(sim.dataset, FitConfig{});
  const Eigen::MatrixXd fitted = fitted_values(sim.dataset, f);
  const Eigen::MatrixXd w = testing::oracle_design(sim.dataset, f.gamma, f.h);
  const Eigen::MatrixXd want = w * f.theta.on_grid();
  EXPECT_LT((fitted - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Estimator, LambdaSelectionPicksCvMinimum) {
  const SimulatedData sim = small_sim(100, 8, 17);
  FitConfig config;
  config.gamma_init = Eigen::Vector2d(-1.0, 1.0);
  config.lambda_grid = {1e-4, 1e-2, 1.0};
  const LambdaSelection sel = select_lambda(sim.dataset, config);
  ASSERT_EQ(sel.cv_error.size(), 3U);
  const auto best = std::min_element(sel.cv_error.begin(), sel.cv_error.end()) - sel.cv_error.begin();
  EXPECT_DOUBLE_EQ(sel.lambda, config.lambda_grid[static_cast<std::size_t>(best)]);
  EXPECT_EQ(select_lambda(sim.dataset, config).cv_error, sel.cv_error);

  config.lambda_grid = {0.05};
  EXPECT_DOUBLE_EQ(select_lambda(sim.dataset, config).lambda, 0.05);
  config.lambda_grid = {0.1, 0.2};
  config.cv_folds = 40;
  EXPECT_THROW((void)select_lambda(sim.dataset, config), ConfigError);
}

TEST(Estimator, PointwiseBandsContainEstimate) {
  const SimulatedData sim = small_sim(100, 8, 18);
  const FitConfig config;
  const ChangePlaneFit f = fit(sim.dataset, config);
  const PointwiseBands bands = pointwise_bands(sim.dataset, config, f, 0.9, 100, 5);
  EXPECT_EQ(bands.n_boot, 100);
  EXPECT_TRUE((bands.lower.array() <= bands.estimate.array()).all());
  EXPECT_TRUE((bands.upper.array() >= bands.estimate.array()).all());
  EXPECT_TRUE((bands.upper.array() > bands.lower.array()).any());
  const PointwiseBands again = pointwise_bands(sim.dataset, config, f, 0.9, 100, 5);
  EXPECT_EQ(bands.lower, again.lower);
  EXPECT_THROW((void)pointwise_bands(sim.dataset, config, f, 0.9, 50, 5), ConfigError);
}

TEST(Estimator, ConfigValidation) {
  FitConfig c;
  c.lambda = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FitConfig{};
  c.search.lower = 1.0;
  c.search.upper = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FitConfig{};
  c.h = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NEAR(default_bandwidth(400), std::log(400.0) / 20.0, 1e-15);
}

}  // namespace
}  // namespace cplane

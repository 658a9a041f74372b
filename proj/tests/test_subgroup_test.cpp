#include <gtest/gtest.h>

#include <cmath>

#include "cplane/error.hpp"
#include "cplane/profile.hpp"
#include "cplane/random.hpp"
#include "cplane/subgroup_test.hpp"
#include "oracles.hpp"

namespace cplane {
namespace {

using testing::loop_influence;
using testing::loop_residuals;
using testing::loop_statistic;
using testing::null_setup;
using testing::NullSetup;

TEST(SubgroupTest, ScoresMatchLoops) {
  const NullSetup s = null_setup(25, 6, 1);
  const Eigen::Vector2d gamma(-0.5, 1.0);
  const Eigen::MatrixXd r = loop_residuals(s);
  const ScoreTensor psi1 = score_psi1(s.sim.dataset, s.beta, gamma);
  const ScoreTensor psi2 = score_psi2(s.sim.dataset, s.beta, *s.kernel);
  const FunctionalDataset& d = s.sim.dataset;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const bool in = d.z1()[i] + d.z2().row(i).dot(gamma) > 0.0;
    for (Eigen::Index m = 0; m < d.grid_size(); ++m) {
      for (Eigen::Index l = 0; l < d.d(); ++l) {
        EXPECT_NEAR(psi1(i, l, m), in ? r(i, m) * d.xtilde()(i, l) : 0.0, 1e-12);
      }
      for (Eigen::Index k = 0; k < d.p(); ++k) {
        double want = 0.0;
        for (Eigen::Index j = 0; j < d.grid_size(); ++j) want += r(i, j) * d.x()(i, k) * s.kernel->gram()(j, m);
        EXPECT_NEAR(psi2(i, k, m), want / static_cast<double>(d.grid_size()), 1e-12);
      }
    }
  }
}

TEST(SubgroupTest, MeanSecondScoreIsPenaltyGradient) {
  // Null-fit normal equations: n^{-1} sum_i psi2_i(s) = lambda beta(s).
  const NullSetup s = null_setup(60, 10, 2);
  const ScoreTensor psi2 = score_psi2(s.sim.dataset, s.beta, *s.kernel);
  const Eigen::MatrixXd beta_grid = s.beta.b * s.kernel->gram();
  for (Eigen::Index k = 0; k < s.sim.dataset.p(); ++k) {
    for (Eigen::Index m = 0; m < s.sim.dataset.grid_size(); ++m) {
      double mean = 0.0;
      for (Eigen::Index i = 0; i < s.sim.dataset.n(); ++i) mean += psi2(i, k, m) / 60.0;
      EXPECT_NEAR(mean, 0.01 * beta_grid(k, m), 1e-8);
    }
  }
}

TEST(SubgroupTest, CorrectedInfluenceMatchesLoops) {
  const NullSetup s = null_setup(30, 5, 3);
  const Eigen::Vector2d gamma(-1.2, 1.0);
  const CorrectedInfluence got = corrected_influence(s.sim.dataset, s.beta, gamma, *s.kernel);
  EXPECT_FALSE(got.pseudo_inverse);
  const auto want = loop_influence(s, gamma);
  for (Eigen::Index i = 0; i < 30; ++i) {
    for (Eigen::Index m = 0; m < 5; ++m) {
      const Eigen::VectorXd& w = want[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)];
      for (Eigen::Index l = 0; l < 2; ++l) EXPECT_NEAR(got.psi(i, l, m), w[l], 1e-10 * (1.0 + std::abs(w[l])));
    }
  }
}

TEST(SubgroupTest, VectorizedStatisticMatchesNestedLoops) {
  const NullSetup s = null_setup(30, 8, 4);
  const GammaFamily family = build_gamma_family(s.sim.dataset, 6, FamilyMode::kPercentileLine, 0);
  const StatisticResult got = test_statistic(s.sim.dataset, s.beta, family, *s.kernel);
  double t_max = 0.0;
  for (Eigen::Index j = 0; j < family.candidates.rows(); ++j) {
    const double want = loop_statistic(s, family.candidates.row(j).transpose());
    EXPECT_NEAR(got.per_gamma[j], want, 1e-10 * (1.0 + want)) << "candidate " << j;
    t_max = std::max(t_max, want);
  }
  EXPECT_NEAR(got.t_obs, t_max, 1e-10 * (1.0 + t_max));
}

TEST(SubgroupTest, PercentileFamilySplitsAtRequestedFractions) {
  const NullSetup s = null_setup(200, 5, 5);
  const GammaFamily family = build_gamma_family(s.sim.dataset, 7, FamilyMode::kPercentileLine, 0);
  ASSERT_EQ(family.candidates.rows(), 7);
  for (Eigen::Index j = 0; j < 7; ++j) {
    const double a = 0.2 + 0.1 * static_cast<double>(j);
    EXPECT_DOUBLE_EQ(family.candidates(j, 1), 1.0);
    EXPECT_NEAR(family.fractions[static_cast<std::size_t>(j)], 1.0 - a, 1.5 / 200.0);
  }
}

TEST(SubgroupTest, RandomFamilyIsSeededAndAdmissible) {
  const NullSetup s = null_setup(150, 5, 6);
  TestConfig config;
  config.frac_min = 0.15;
  const GammaFamily a = build_gamma_family(s.sim.dataset, 40, FamilyMode::kRandomDirections, 9, config);
  const GammaFamily b = build_gamma_family(s.sim.dataset, 40, FamilyMode::kRandomDirections, 9, config);
  EXPECT_EQ(a.candidates, b.candidates);
  for (double f : a.fractions) {
    EXPECT_GE(f, 0.15);
    EXPECT_LE(f, 0.85);
  }
}

TEST(SubgroupTest, FamilyConstructionFailsWhenNoPlaneSplits) {
  const NullSetup s = null_setup(40, 5, 7);
  const FunctionalDataset& d = s.sim.dataset;
  const FunctionalDataset flat(d.y(), d.x(), d.xtilde_idx(), Eigen::VectorXd::Zero(d.n()),
                               Eigen::MatrixXd::Ones(d.n(), 1), d.grid());
  TestConfig config;
  config.slopes = {};
  EXPECT_THROW((void)build_gamma_family(flat, 10, FamilyMode::kRandomDirections, 1, config), ValidationError);
  EXPECT_THROW((void)build_gamma_family(flat, 10, FamilyMode::kPercentileLine, 1, config), ValidationError);
  EXPECT_THROW((void)build_gamma_family(d, 10, FamilyMode::kPercentileLine, 1, config), ConfigError);
}

TEST(SubgroupTest, BootstrapDrawsMatchLoopDefinition) {
  const NullSetup s = null_setup(30, 6, 8);
  const GammaFamily family = build_gamma_family(s.sim.dataset, 4, FamilyMode::kPercentileLine, 0);
  const SubgroupTestResult got = bootstrap_pvalue(s.sim.dataset, s.beta, family, *s.kernel, 100, 77);
  ASSERT_EQ(got.boot_draws.size(), 100);
  std::vector<std::vector<std::vector<Eigen::VectorXd>>> psi;
  for (Eigen::Index j = 0; j < 4; ++j) psi.push_back(loop_influence(s, family.candidates.row(j).transpose()));
  int exceed = 0;
  for (int b = 0; b < 100; ++b) {
    Stream stream(77, "multiplier", {static_cast<std::uint64_t>(b)});
    std::vector<double> xi(30);
    for (auto& v : xi) v = stream.normal();
    double t_max = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      double total = 0.0;
      for (std::size_t m = 0; m < 6; ++m) {
        Eigen::Vector2d sum = Eigen::Vector2d::Zero();
        Eigen::Matrix2d v = Eigen::Matrix2d::Zero();
        for (std::size_t i = 0; i < 30; ++i) {
          sum += xi[i] * psi[j][i][m];
          v += psi[j][i][m] * psi[j][i][m].transpose() / 30.0;
        }
        total += sum.dot(v.inverse() * sum) / 30.0;
      }
      t_max = std::max(t_max, total / 6.0);
    }
    EXPECT_NEAR(got.boot_draws[b], t_max, 1e-10 * (1.0 + t_max)) << "draw " << b;
    if (t_max > got.t_obs) ++exceed;
  }
  EXPECT_DOUBLE_EQ(got.p_value, exceed / 100.0);
}

TEST(SubgroupTest, ThreadCountDoesNotChangeResult) {
  const NullSetup s = null_setup(80, 10, 9);
  const GammaFamily family = build_gamma_family(s.sim.dataset, 30, FamilyMode::kPercentileLine, 0);
  const auto a = bootstrap_pvalue(s.sim.dataset, s.beta, family, *s.kernel, 150, 3, 1);
  const auto b = bootstrap_pvalue(s.sim.dataset, s.beta, family, *s.kernel, 150, 3, 4);
  EXPECT_EQ(a.boot_draws, b.boot_draws);
  EXPECT_EQ(a.per_gamma, b.per_gamma);
  EXPECT_EQ(a.p_value, b.p_value);
}

TEST(SubgroupTest, BandwidthDoesNotEnterTheTest) {
  const NullSetup s = null_setup(80, 10, 10);
  FitConfig f1;
  f1.h = 0.05;
  FitConfig f2;
  f2.h = 0.9;
  TestConfig t;
  t.B = 100;
  t.Q = 20;
  const auto a = run_subgroup_test(s.sim.dataset, f1, t, 5);
  const auto b = run_subgroup_test(s.sim.dataset, f2, t, 5);
  EXPECT_EQ(a.t_obs, b.t_obs);
  EXPECT_EQ(a.boot_draws, b.boot_draws);
}

TEST(SubgroupTest, StrongSignalGivesSmallPValue) {
  const NullSetup s = null_setup(200, 15, 11, 40.0);
  TestConfig t;
  t.B = 200;
  t.Q = 30;
  const auto result = run_subgroup_test(s.sim.dataset, FitConfig{}, t, 6);
  EXPECT_LE(result.p_value, 1.0 / 200.0);
}

TEST(SubgroupTest, RejectsSmallBootstrap) {
  const NullSetup s = null_setup(40, 5, 12);
  const GammaFamily family = build_gamma_family(s.sim.dataset, 3, FamilyMode::kPercentileLine, 0);
  EXPECT_THROW((void)bootstrap_pvalue(s.sim.dataset, s.beta, family, *s.kernel, 99, 1), ConfigError);
}

TEST(SubgroupTest, SingularScoresAreFlagged) {
  const NullSetup s = null_setup(40, 5, 13);
  const FunctionalDataset& d = s.sim.dataset;
  Eigen::MatrixXd x = d.x();
  x.col(0).setZero();  // Xtilde_1 = 0: singular score variance and J
  const FunctionalDataset degenerate(d.y(), x, d.xtilde_idx(), d.z1(), d.z2(), d.grid());
  const CoefficientFunctions beta = null_beta(degenerate, 0.01, s.kernel);
  const GammaFamily family = build_gamma_family(degenerate, 5, FamilyMode::kPercentileLine, 0);
  const StatisticResult r = test_statistic(degenerate, beta, family, *s.kernel);
  EXPECT_TRUE(r.pseudo_inverse);
  EXPECT_TRUE(std::isfinite(r.t_obs));
}

}  // namespace
}  // namespace cplane

#include "cplane/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "cplane/covariance.hpp"
#include "cplane/error.hpp"
#include "cplane/estimator.hpp"
#include "cplane/parallel.hpp"
#include "cplane/random.hpp"
#include "cplane/subgroup_test.hpp"

namespace cplane {

namespace {

/// Share of failed replications a cell tolerates.
constexpr double kMaxFailureRate = 0.05;

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

/// Sample standard deviation (n - 1 denominator).
double stdev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mu = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

MethodRecord evaluate(const SimulatedData& sim, const ChangePlaneFit& fit) {
  MethodRecord rec;
  rec.gamma = fit.gamma.head<2>();
  rec.accuracy = accuracy_rate(sim.truth.labels, membership(sim.dataset, fit.gamma));
  const Eigen::MatrixXd curves = fit.theta.on_grid();
  for (int k = 0; k < kStudyComponents; ++k) {
    const Eigen::VectorXd truth = k < 3 ? Eigen::VectorXd(sim.truth.beta.row(k).transpose())
                                        : Eigen::VectorXd(sim.truth.delta.row(k - 3).transpose());
    rec.rase[static_cast<std::size_t>(k)] = rase(curves.row(k).transpose(), truth);
  }
  return rec;
}

MethodSummary summarize(const std::vector<const MethodRecord*>& recs, const Eigen::Vector2d& gamma_true) {
  MethodSummary out;
  for (int coord = 0; coord < 2; ++coord) {
    std::vector<double> values;
    for (const auto* r : recs) values.push_back(r->gamma[coord]);
    out.gamma_bias[coord] = mean(values) - gamma_true[coord];
    out.gamma_sd[coord] = stdev(values);
  }
  std::vector<double> errors;
  std::vector<double> accuracy;
  for (const auto* r : recs) {
    errors.push_back((r->gamma - gamma_true).norm());
    accuracy.push_back(r->accuracy);
  }
  out.gamma_error_median = median(errors);
  out.accuracy_mean = mean(accuracy);
  out.accuracy_sd = stdev(accuracy);
  for (std::size_t k = 0; k < kStudyComponents; ++k) {
    std::vector<double> values;
    for (const auto* r : recs) values.push_back(r->rase[k]);
    out.rase_mean[k] = mean(values);
    out.rase_sd[k] = stdev(values);
    out.rase_median[k] = median(values);
  }
  return out;
}

ReplicationRecord run_replication(const EstimationStudyConfig& config, int n, int m_count, int rep) {
  ReplicationRecord rec;
  rec.n = n;
  rec.M = m_count;
  rec.rep = rep;
  rec.data_seed = derive_key(config.seed, "estimation",
                             {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(m_count),
                              static_cast<std::uint64_t>(rep)});
  try {
    DGPSpec spec;
    spec.n = n;
    spec.M = m_count;
    spec.seed = rec.data_seed;
    const SimulatedData sim = generate(spec);
    rec.data_digest = dataset_digest(sim.dataset);

    FitConfig fit_config = config.fit;
    fit_config.seed = derive_key(rec.data_seed, "fit");
    fit_config.threads = 1;
    const ChangePlaneFit ls = fit(sim.dataset, fit_config);
    rec.ls = evaluate(sim, ls);

    auto kernel = ls.theta.kernel;
    const CovarianceModel cov = estimate_covariance(sim.dataset, ls, *kernel, fit_config.covariance_lambda());
    rec.lambda_sup_error = (cov.lambda_hat - true_lambda(sim.dataset.grid())).cwiseAbs().maxCoeff();
    if (config.weighted) rec.wls = evaluate(sim, weighted_fit(sim.dataset, fit_config, ls, cov));
    rec.ok = true;
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

}  // namespace

const std::array<std::string, kStudyComponents>& study_component_names() {
  static const std::array<std::string, kStudyComponents> names{"beta1", "beta2", "beta3", "delta1", "delta2"};
  return names;
}

std::uint64_t dataset_digest(const FunctionalDataset& dataset) {
  std::uint64_t hash = 1469598103934665603ULL;
  auto absorb = [&hash](const double* data, Eigen::Index size) {
    for (Eigen::Index k = 0; k < size; ++k) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, data + k, sizeof bits);
      for (int byte = 0; byte < 8; ++byte) {
        hash ^= (bits >> (8 * byte)) & 0xffU;
        hash *= 1099511628211ULL;
      }
    }
  };
  absorb(dataset.y().data(), dataset.y().size());
  absorb(dataset.x().data(), dataset.x().size());
  absorb(dataset.z1().data(), dataset.z1().size());
  absorb(dataset.z2().data(), dataset.z2().size());
  absorb(dataset.grid().data(), dataset.grid().size());
  return hash;
}

EstimationStudyResult run_estimation_study(const EstimationStudyConfig& config) {
  if (config.reps < 1) throw ConfigError("study needs reps >= 1");
  if (config.cells.empty()) throw ConfigError("study needs at least one (n, M) cell");
  config.fit.validate();

  struct Task {
    int n, m, rep;
  };
  std::vector<Task> tasks;
  for (const auto& [n, m] : config.cells) {
    for (int r = 0; r < config.reps; ++r) tasks.push_back({n, m, r});
  }
  EstimationStudyResult result;
  result.records.resize(tasks.size());
  parallel_for(tasks.size(), resolve_threads(config.threads), [&](std::size_t k) {
    result.records[k] = run_replication(config, tasks[k].n, tasks[k].m, tasks[k].rep);
  });

  const DGPSpec defaults;
  for (std::size_t cell = 0; cell < config.cells.size(); ++cell) {
    CellSummary summary;
    summary.n = config.cells[cell].first;
    summary.M = config.cells[cell].second;
    summary.reps = config.reps;
    summary.weighted = config.weighted;
    std::vector<const MethodRecord*> ls;
    std::vector<const MethodRecord*> wls;
    std::vector<double> sup_errors;
    for (int r = 0; r < config.reps; ++r) {
      const auto& rec = result.records[cell * static_cast<std::size_t>(config.reps) + static_cast<std::size_t>(r)];
      if (!rec.ok) {
        ++summary.failures;
        continue;
      }
      ls.push_back(&rec.ls);
      wls.push_back(&rec.wls);
      sup_errors.push_back(rec.lambda_sup_error);
    }
    if (static_cast<double>(summary.failures) > kMaxFailureRate * config.reps) {
      throw NumericalError("estimation study cell n=" + std::to_string(summary.n) + ", M=" +
                           std::to_string(summary.M) + " failed in " + std::to_string(summary.failures) + " of " +
                           std::to_string(config.reps) + " replications");
    }
    summary.ls = summarize(ls, defaults.gamma_true);
    if (config.weighted) summary.wls = summarize(wls, defaults.gamma_true);
    summary.lambda_sup_median = median(sup_errors);
    summary.lambda_sup_below_quarter =
        static_cast<double>(std::count_if(sup_errors.begin(), sup_errors.end(), [](double e) { return e < 0.25; })) /
        static_cast<double>(config.reps);
    result.cells.push_back(summary);
  }
  return result;
}

std::vector<double> isotonic_fit(const std::vector<double>& values) {
  // Blocks of (mean, weight) merged whenever they violate monotonicity.
  std::vector<double> block_mean;
  std::vector<double> block_weight;
  for (double v : values) {
    block_mean.push_back(v);
    block_weight.push_back(1.0);
    while (block_mean.size() > 1 && block_mean[block_mean.size() - 2] > block_mean.back()) {
      const double w = block_weight[block_weight.size() - 2] + block_weight.back();
      const double mu = (block_mean[block_mean.size() - 2] * block_weight[block_weight.size() - 2] +
                         block_mean.back() * block_weight.back()) /
                        w;
      block_mean.pop_back();
      block_weight.pop_back();
      block_mean.back() = mu;
      block_weight.back() = w;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t b = 0; b < block_mean.size(); ++b) {
    out.insert(out.end(), static_cast<std::size_t>(block_weight[b]), block_mean[b]);
  }
  return out;
}

PowerStudyResult run_power_study(const PowerStudyConfig& config) {
  if (config.reps < 1) throw ConfigError("power study needs reps >= 1");
  if (config.c_grid.empty()) throw ConfigError("power study needs a nonempty c grid");
  config.fit.validate();
  config.test.validate();

  const std::size_t c_count = config.c_grid.size();
  const auto reps = static_cast<std::size_t>(config.reps);
  PowerStudyResult result;
  result.p_values.assign(c_count, std::vector<double>(reps, std::numeric_limits<double>::quiet_NaN()));

  parallel_for(c_count * reps, resolve_threads(config.threads), [&](std::size_t k) {
    const std::size_t ci = k / reps;
    const std::size_t r = k % reps;
    const std::uint64_t rep_seed = derive_key(config.seed, "power", {static_cast<std::uint64_t>(r)});
    try {
      DGPSpec spec;
      spec.n = config.n;
      spec.M = config.M;
      spec.mode = DgpMode::kTesting;
      spec.c = config.c_grid[ci];
      spec.seed = rep_seed;
      const SimulatedData sim = generate(spec);
      FitConfig fit_config = config.fit;
      fit_config.threads = 1;
      const SubgroupTestResult test =
          run_subgroup_test(sim.dataset, fit_config, config.test, derive_key(rep_seed, "test"));
      result.p_values[ci][r] = test.p_value;
    } catch (const Error&) {
      // Left as NaN and counted as a failure below.
    }
  });

  std::vector<double> powers;
  for (std::size_t ci = 0; ci < c_count; ++ci) {
    PowerPoint point;
    point.c = config.c_grid[ci];
    for (double p : result.p_values[ci]) {
      if (std::isnan(p)) {
        ++point.failures;
      } else {
        ++point.reps;
        if (p <= config.test.alpha) ++point.rejections;
      }
    }
    if (static_cast<double>(point.failures) > kMaxFailureRate * config.reps) {
      throw NumericalError("power study at c=" + std::to_string(point.c) + " failed in " +
                           std::to_string(point.failures) + " of " + std::to_string(config.reps) + " replications");
    }
    point.power = point.reps > 0 ? static_cast<double>(point.rejections) / point.reps : 0.0;
    point.mc_se = point.reps > 0 ? std::sqrt(point.power * (1.0 - point.power) / point.reps) : 0.0;
    powers.push_back(point.power);
    result.points.push_back(point);
  }
  // Monotonicity is judged along increasing c.
  std::vector<std::size_t> order(c_count);
  for (std::size_t k = 0; k < c_count; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return config.c_grid[a] < config.c_grid[b]; });
  std::vector<double> sorted;
  for (auto k : order) sorted.push_back(powers[k]);
  const std::vector<double> iso = isotonic_fit(sorted);
  for (std::size_t k = 0; k < c_count; ++k) {
    result.isotonic_deviation = std::max(result.isotonic_deviation, std::abs(sorted[k] - iso[k]));
  }
  return result;
}

}  // namespace cplane

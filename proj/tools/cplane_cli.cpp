// cplane: simulate, fit, test and study change-plane models for functional
// responses.
//
//   cplane simulate --out data/
//   cplane fit --responses data/responses.csv --covariates data/covariates.csv --out fit/ --weighted
//   cplane test --responses data/responses.csv --covariates data/covariates.csv --out test/
//   cplane study --config study.json --out study/
//
// Exit codes: 0 success, 2 input/validation, 3 numerical failure, 4 configuration.

#include <chrono>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cplane/covariance.hpp"
#include "cplane/error.hpp"
#include "cplane/estimator.hpp"
#include "cplane/io.hpp"
#include "cplane/random.hpp"
#include "cplane/simulation.hpp"
#include "cplane/study.hpp"
#include "cplane/subgroup_test.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cplane;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  std::string responses;
  std::string covariates;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
  // simulate
  std::optional<int> n;
  std::optional<int> m;
  std::optional<double> c;
  std::optional<std::string> mode;
  // fit
  bool weighted = false;
  bool identity_weight = false;
  std::optional<int> bands;
  // test
  std::optional<int> B;
  std::optional<int> Q;
  // study
  std::optional<int> reps;
  bool no_power = false;
};

class Timer {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return seconds;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

RunConfig resolve_config(const Options& opts) {
  RunConfig config = opts.config_path.empty() ? parse_config("{}") : load_config(opts.config_path);
  if (opts.seed) {
    config.seed = *opts.seed;
    config.fit.seed = config.simulate.seed = config.estimation.seed = config.power.seed = *opts.seed;
    config.estimation.fit.seed = config.power.fit.seed = *opts.seed;
  }
  if (opts.n) config.simulate.n = *opts.n;
  if (opts.m) config.simulate.M = *opts.m;
  if (opts.c) config.simulate.c = *opts.c;
  if (opts.mode) {
    if (*opts.mode == "testing") {
      config.simulate.mode = DgpMode::kTesting;
    } else if (*opts.mode == "estimation") {
      config.simulate.mode = DgpMode::kEstimation;
    } else {
      throw ConfigError("--mode must be 'estimation' or 'testing'");
    }
  }
  if (opts.bands) config.band_boot = *opts.bands;
  if (opts.B) config.test.B = config.power.test.B = *opts.B;
  if (opts.Q) config.test.Q = config.power.test.Q = *opts.Q;
  if (opts.reps) config.estimation.reps = config.power.reps = *opts.reps;
  if (opts.no_power) config.run_power = false;
  config.fit.threads = opts.threads;
  config.estimation.threads = config.power.threads = opts.threads;
  config.simulate.validate();
  config.test.validate();
  if (config.band_boot != 0 && config.band_boot < 100) throw ConfigError("--bands must be 0 or at least 100");
  return config;
}

FunctionalDataset load_inputs(const Options& opts, const RunConfig& config, RunManifest& manifest) {
  if (opts.responses.empty() || opts.covariates.empty()) {
    throw ValidationError("--responses and --covariates are required");
  }
  for (const auto& path : {opts.responses, opts.covariates}) {
    if (!fs::exists(path)) throw ValidationError("input file not found: " + path);
    manifest.input_digests[path] = file_digest(path);
  }
  return load_dataset(opts.responses, opts.covariates, config.data);
}

void cmd_simulate(const Options& opts) {
  Timer timer;
  const RunConfig config = resolve_config(opts);
  const SimulatedData sim = generate(config.simulate);
  write_dataset(sim.dataset, opts.out_dir);
  write_truth(opts.out_dir, sim);
  RunManifest manifest{"simulate", config_to_json(config), config.seed, {}, {{"total", timer.lap()}}};
  write_manifest(manifest, fs::path(opts.out_dir) / "manifest.json");
  std::cout << "simulated n=" << sim.dataset.n() << " M=" << sim.dataset.grid_size() << " into " << opts.out_dir
            << "\n";
}

void cmd_fit(const Options& opts) {
  Timer timer;
  RunConfig config = resolve_config(opts);
  RunManifest manifest{"fit", "", config.seed, {}, {}};
  const FunctionalDataset dataset = load_inputs(opts, config, manifest);
  if (!config.fit.lambda_grid.empty()) {
    const LambdaSelection selection = select_lambda(dataset, config.fit);
    config.fit.lambda = selection.lambda;
    manifest.timings_seconds["lambda_selection"] = timer.lap();
  }
  const ChangePlaneFit ls = fit(dataset, config.fit);
  manifest.timings_seconds["fit"] = timer.lap();

  std::optional<ChangePlaneFit> wls;
  if (opts.identity_weight) {
    const CovarianceModel identity = CovarianceModel::identity(dataset.grid_size());
    wls = fit_with(dataset, config.fit, ls.theta.kernel, &identity);
  } else if (opts.weighted) {
    wls = weighted_fit(dataset, config.fit, ls);
  }
  if (wls) manifest.timings_seconds["weighted_fit"] = timer.lap();

  std::optional<PointwiseBands> bands;
  if (config.band_boot > 0) {
    bands = pointwise_bands(dataset, config.fit, wls ? *wls : ls, config.band_level, config.band_boot,
                            derive_key(config.seed, "bands"));
    manifest.timings_seconds["bands"] = timer.lap();
  }
  write_fit_artifacts(opts.out_dir, dataset, ls, wls, bands);
  manifest.config_json = config_to_json(config);
  write_manifest(manifest, fs::path(opts.out_dir) / "manifest.json");
  const ChangePlaneFit& final_fit = wls ? *wls : ls;
  std::cout << "gamma_hat = [";
  for (Eigen::Index k = 0; k < final_fit.gamma.size(); ++k) std::cout << (k ? ", " : "") << final_fit.gamma[k];
  std::cout << "]  converged=" << (final_fit.converged ? "yes" : "no") << "  iterations=" << final_fit.n_iter << "\n";
}

void cmd_test(const Options& opts) {
  Timer timer;
  const RunConfig config = resolve_config(opts);
  RunManifest manifest{"test", config_to_json(config), config.seed, {}, {}};
  const FunctionalDataset dataset = load_inputs(opts, config, manifest);
  const SubgroupTestResult result = run_subgroup_test(dataset, config.fit, config.test, config.seed);
  manifest.timings_seconds["test"] = timer.lap();
  write_test_artifacts(opts.out_dir, result);
  write_manifest(manifest, fs::path(opts.out_dir) / "manifest.json");
  std::cout << "T_obs = " << result.t_obs << "  p-value = " << result.p_value << "  (B=" << result.B << ")\n";
}

void cmd_study(const Options& opts) {
  Timer timer;
  const RunConfig config = resolve_config(opts);
  RunManifest manifest{"study", config_to_json(config), config.seed, {}, {}};
  const EstimationStudyResult estimation = run_estimation_study(config.estimation);
  manifest.timings_seconds["estimation"] = timer.lap();
  write_estimation_tables(fs::path(opts.out_dir) / "tables", estimation);
  for (const auto& cell : estimation.cells) {
    std::cout << "n=" << cell.n << " M=" << cell.M << "  LS accuracy " << cell.ls.accuracy_mean;
    if (cell.weighted) std::cout << "  WLS accuracy " << cell.wls.accuracy_mean;
    std::cout << "  failures " << cell.failures << "\n";
  }
  if (config.run_power) {
    const PowerStudyResult power = run_power_study(config.power);
    manifest.timings_seconds["power"] = timer.lap();
    write_power_csv(fs::path(opts.out_dir) / "power.csv", power);
    for (const auto& point : power.points) std::cout << "c=" << point.c << "  power " << point.power << "\n";
  }
  write_manifest(manifest, fs::path(opts.out_dir) / "manifest.json");
}

/// Machine-readable error record on stderr and, when possible, in the output
/// directory.
int report(const std::string& kind, int code, const std::string& message, const std::string& out_dir) {
  const nlohmann::json record{{"error", kind}, {"exit_code", code}, {"message", message}};
  std::cerr << record.dump() << "\n";
  if (out_dir.empty()) return code;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!ec) std::ofstream(fs::path(out_dir) / "error.json") << record.dump(2) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change-plane subgroup learning for functional responses"};
  app.require_subcommand(1);
  Options opts;
  app.add_option("--threads", opts.threads, "Worker threads (0 = all cores); results do not depend on it");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON configuration file");
    sub->add_option("--out", opts.out_dir, "Output directory");
    sub->add_option("--seed", opts.seed, "Top-level seed (overrides the config)");
  };
  auto add_inputs = [&](CLI::App* sub) {
    sub->add_option("--responses", opts.responses, "Long-format responses CSV (subject_id,s,y)");
    sub->add_option("--covariates", opts.covariates, "Covariates CSV (subject_id,x1..xp,z1,z2_1..)");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate a dataset from the simulation design");
  add_common(simulate);
  simulate->add_option("--n", opts.n, "Number of subjects");
  simulate->add_option("--M", opts.m, "Grid size");
  simulate->add_option("--c", opts.c, "Local-alternative scale (testing mode)");
  simulate->add_option("--mode", opts.mode, "estimation or testing");

  auto* fit_cmd = app.add_subcommand("fit", "Estimate the change-plane model");
  add_common(fit_cmd);
  add_inputs(fit_cmd);
  fit_cmd->add_flag("--weighted", opts.weighted, "Refit with the estimated covariance weight");
  fit_cmd->add_flag("--identity-weight", opts.identity_weight, "Weighted refit with the identity weight");
  fit_cmd->add_option("--bands", opts.bands, "Bootstrap replicates for pointwise bands (0 = none)");

  auto* test_cmd = app.add_subcommand("test", "Test for the existence of subgroups");
  add_common(test_cmd);
  add_inputs(test_cmd);
  test_cmd->add_option("--B", opts.B, "Bootstrap draws");
  test_cmd->add_option("--Q", opts.Q, "Candidate change planes");

  auto* study = app.add_subcommand("study", "Run the Monte-Carlo estimation and power studies");
  add_common(study);
  study->add_option("--reps", opts.reps, "Replications per cell");
  study->add_flag("--no-power", opts.no_power, "Skip the power study");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kConfiguration);
  }

  try {
    if (*simulate) cmd_simulate(opts);
    if (*fit_cmd) cmd_fit(opts);
    if (*test_cmd) cmd_test(opts);
    if (*study) cmd_study(opts);
  } catch (const ValidationError& e) {
    return report("validation", e.exit_code(), e.what(), opts.out_dir);
  } catch (const ConfigError& e) {
    return report("configuration", e.exit_code(), e.what(), opts.out_dir);
  } catch (const NumericalError& e) {
    return report("numerical", e.exit_code(), e.what(), opts.out_dir);
  } catch (const std::exception& e) {
    return report("numerical", static_cast<int>(ErrorKind::kNumerical), e.what(), opts.out_dir);
  }
  return 0;
}

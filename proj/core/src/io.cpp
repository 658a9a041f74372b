#include "cplane/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "cplane/error.hpp"
#include "json.hpp"

namespace cplane {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? std::string{} : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw ValidationError(path.string() + ": missing header row");
  return table;
}

double parse_number(const std::string& text, const fs::path& path, std::size_t line, const std::string& column) {
  double value = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw ValidationError(path.string() + ":" + std::to_string(line) + ": column '" + column +
                          "' is not a finite number: '" + text + "'");
  }
  return value;
}

std::size_t column_index(const CsvTable& table, const std::string& name, const fs::path& path) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) throw ValidationError(path.string() + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - table.header.begin());
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write output file: " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd json_vector(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string hex64(std::uint64_t value) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << value;
  return out.str();
}

std::uint64_t fnv1a(const char* data, std::size_t size, std::uint64_t hash = 1469598103934665603ULL) {
  for (std::size_t k = 0; k < size; ++k) {
    hash ^= static_cast<unsigned char>(data[k]);
    hash *= 1099511628211ULL;
  }
  return hash;
}

json fit_json(const FunctionalDataset& dataset, const ChangePlaneFit& fit) {
  json out;
  out["gamma"] = vector_json(fit.gamma);
  out["weighted"] = fit.weighted;
  out["lambda"] = fit.lambda;
  out["h"] = fit.h;
  out["converged"] = fit.converged;
  out["n_iter"] = fit.n_iter;
  out["flat_objective"] = fit.flat_objective;
  out["evaluations"] = fit.evaluations;
  out["penalized_loss"] = fit.penalized_loss;
  out["loss_trace"] = fit.loss_trace;
  out["beta_on_grid"] = matrix_json(fit.theta.on_grid().topRows(dataset.p()));
  out["delta_on_grid"] = matrix_json(fit.theta.on_grid().bottomRows(dataset.d()));
  out["representer_b"] = matrix_json(fit.theta.b);
  out["representer_c"] = matrix_json(fit.theta.c);
  if (fit.covariance) {
    out["covariance"] = {{"ridge_added", fit.covariance->ridge_added},
                         {"e_hat_diag", vector_json(fit.covariance->e_hat_diag)},
                         {"lambda_hat", matrix_json(fit.covariance->lambda_hat)}};
  }
  return out;
}

/// Rejects keys outside `allowed` so that typos surface as errors.
void check_keys(const json& object, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!object.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key '" + where + "." + key + "'");
    }
  }
}

template <typename T>
void read_key(const json& object, const char* key, T& target) {
  if (object.contains(key)) target = object.at(key).get<T>();
}

std::string search_mode_name(GammaSearchMode mode) {
  return mode == GammaSearchMode::kGrid ? "grid" : "multistart";
}

std::string family_name(FamilyMode mode) {
  return mode == FamilyMode::kRandomDirections ? "random_directions" : "percentile_line";
}

}  // namespace

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

FunctionalDataset load_dataset(const fs::path& responses, const fs::path& covariates, const LoadOptions& options) {
  const CsvTable cov = read_csv(covariates);
  const CsvTable resp = read_csv(responses);

  // Covariate columns: x1..xp, z1, z2_1..z2_k, in numeric order.
  const std::size_t id_col = column_index(cov, "subject_id", covariates);
  const std::size_t z1_col = column_index(cov, "z1", covariates);
  std::vector<std::size_t> x_cols;
  std::vector<std::size_t> z2_cols;
  for (int k = 1;; ++k) {
    const auto it = std::find(cov.header.begin(), cov.header.end(), "x" + std::to_string(k));
    if (it == cov.header.end()) break;
    x_cols.push_back(static_cast<std::size_t>(it - cov.header.begin()));
  }
  for (int k = 1;; ++k) {
    const auto it = std::find(cov.header.begin(), cov.header.end(), "z2_" + std::to_string(k));
    if (it == cov.header.end()) break;
    z2_cols.push_back(static_cast<std::size_t>(it - cov.header.begin()));
  }
  if (x_cols.empty()) throw ValidationError(covariates.string() + ": no covariate columns x1..xp");
  const std::size_t expected = 2 + x_cols.size() + z2_cols.size();
  if (cov.header.size() != expected) {
    throw ValidationError(covariates.string() + ": unexpected columns; need subject_id, x1..xp, z1, z2_1..z2_k");
  }

  std::vector<int> xtilde_idx;
  if (options.xtilde.empty()) {
    for (std::size_t k = 0; k < x_cols.size(); ++k) xtilde_idx.push_back(static_cast<int>(k));
  } else {
    for (const auto& name : options.xtilde) {
      int index = -1;
      for (std::size_t k = 0; k < x_cols.size(); ++k) {
        if (cov.header[x_cols[k]] == name) index = static_cast<int>(k);
      }
      if (index < 0) throw ConfigError("subgroup covariate '" + name + "' is not a column of " + covariates.string());
      xtilde_idx.push_back(index);
    }
  }

  const auto n = static_cast<Eigen::Index>(cov.rows.size());
  const auto p = static_cast<Eigen::Index>(x_cols.size());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd z1(n);
  Eigen::MatrixXd z2(n, static_cast<Eigen::Index>(z2_cols.size()) + 1);
  std::vector<std::string> ids;
  std::unordered_map<std::string, Eigen::Index> row_of;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = cov.rows[static_cast<std::size_t>(i)];
    const std::size_t line = cov.line_numbers[static_cast<std::size_t>(i)];
    const std::string& id = row[id_col];
    if (id.empty()) throw ValidationError(covariates.string() + ":" + std::to_string(line) + ": empty subject_id");
    if (!row_of.emplace(id, i).second) {
      throw ValidationError(covariates.string() + ":" + std::to_string(line) + ": duplicate subject_id '" + id + "'");
    }
    ids.push_back(id);
    for (Eigen::Index k = 0; k < p; ++k) {
      const std::size_t col = x_cols[static_cast<std::size_t>(k)];
      x(i, k) = parse_number(row[col], covariates, line, cov.header[col]);
    }
    z1[i] = parse_number(row[z1_col], covariates, line, "z1");
    z2(i, 0) = 1.0;
    for (std::size_t k = 0; k < z2_cols.size(); ++k) {
      z2(i, static_cast<Eigen::Index>(k) + 1) = parse_number(row[z2_cols[k]], covariates, line, cov.header[z2_cols[k]]);
    }
  }

  const std::size_t rid = column_index(resp, "subject_id", responses);
  const std::size_t rs = column_index(resp, "s", responses);
  const std::size_t ry = column_index(resp, "y", responses);
  std::vector<std::vector<std::pair<double, double>>> obs(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < resp.rows.size(); ++r) {
    const auto& row = resp.rows[r];
    const std::size_t line = resp.line_numbers[r];
    const auto it = row_of.find(row[rid]);
    if (it == row_of.end()) {
      throw ValidationError(responses.string() + ":" + std::to_string(line) + ": subject_id '" + row[rid] +
                            "' has no covariates");
    }
    obs[static_cast<std::size_t>(it->second)].emplace_back(parse_number(row[rs], responses, line, "s"),
                                                           parse_number(row[ry], responses, line, "y"));
  }
  for (auto& series : obs) std::sort(series.begin(), series.end());

  const auto& first = obs.front();
  const auto m_count = static_cast<Eigen::Index>(first.size());
  if (m_count == 0) throw ValidationError(responses.string() + ": subject '" + ids.front() + "' has no responses");
  Eigen::VectorXd grid(m_count);
  for (Eigen::Index m = 0; m < m_count; ++m) grid[m] = first[static_cast<std::size_t>(m)].first;
  Eigen::MatrixXd y(n, m_count);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& series = obs[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(series.size()) != m_count) {
      throw ValidationError(responses.string() + ": ragged grid: subject '" + ids[static_cast<std::size_t>(i)] +
                            "' has " + std::to_string(series.size()) + " observations, expected " +
                            std::to_string(m_count));
    }
    for (Eigen::Index m = 0; m < m_count; ++m) {
      const auto& [s, value] = series[static_cast<std::size_t>(m)];
      if (std::abs(s - grid[m]) > options.grid_tolerance) {
        throw ValidationError(responses.string() + ": subject '" + ids[static_cast<std::size_t>(i)] +
                              "' is observed off the common grid at s=" + format_double(s));
      }
      y(i, m) = value;
    }
  }

  GridTransform transform;
  if (grid.minCoeff() < 0.0 || grid.maxCoeff() > 1.0) {
    transform.offset = grid.minCoeff();
    transform.scale = grid.maxCoeff() - grid.minCoeff();
    if (!(transform.scale > 0.0)) throw ValidationError(responses.string() + ": grid has a single point");
    grid = ((grid.array() - transform.offset) / transform.scale).matrix();
  }
  return FunctionalDataset(std::move(y), std::move(x), std::move(xtilde_idx), std::move(z1), std::move(z2),
                           std::move(grid), std::move(ids), transform);
}

void write_dataset(const FunctionalDataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_output(dir / "responses.csv");
    out << "subject_id,s,y\n";
    for (Eigen::Index i = 0; i < dataset.n(); ++i) {
      for (Eigen::Index m = 0; m < dataset.grid_size(); ++m) {
        out << dataset.subject_ids()[static_cast<std::size_t>(i)] << ','
            << format_double(dataset.grid_transform().to_original(dataset.grid()[m])) << ','
            << format_double(dataset.y()(i, m)) << '\n';
      }
    }
  }
  auto out = open_output(dir / "covariates.csv");
  out << "subject_id";
  for (Eigen::Index k = 0; k < dataset.p(); ++k) out << ",x" << k + 1;
  out << ",z1";
  for (Eigen::Index k = 1; k < dataset.q(); ++k) out << ",z2_" << k;
  out << '\n';
  for (Eigen::Index i = 0; i < dataset.n(); ++i) {
    out << dataset.subject_ids()[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < dataset.p(); ++k) out << ',' << format_double(dataset.x()(i, k));
    out << ',' << format_double(dataset.z1()[i]);
    for (Eigen::Index k = 1; k < dataset.q(); ++k) out << ',' << format_double(dataset.z2()(i, k));
    out << '\n';
  }
}

RunConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig config;
  try {
    check_keys(root, {"seed", "fit", "data", "bands", "test", "simulate", "study"}, "root");
    read_key(root, "seed", config.seed);

    if (root.contains("fit")) {
      const json& f = root.at("fit");
      check_keys(f, {"lambda", "h", "kernel_nu", "max_iter", "tol", "gamma_init", "lambda_grid", "cv_folds",
                     "lambda_cov", "search"},
                 "fit");
      read_key(f, "lambda", config.fit.lambda);
      if (f.contains("h")) config.fit.h = f.at("h").get<double>();
      read_key(f, "kernel_nu", config.fit.kernel_nu);
      read_key(f, "max_iter", config.fit.max_iter);
      read_key(f, "tol", config.fit.tol);
      if (f.contains("gamma_init")) config.fit.gamma_init = json_vector(f.at("gamma_init"));
      read_key(f, "lambda_grid", config.fit.lambda_grid);
      read_key(f, "cv_folds", config.fit.cv_folds);
      if (f.contains("lambda_cov")) config.fit.lambda_cov = f.at("lambda_cov").get<double>();
      if (f.contains("search")) {
        const json& s = f.at("search");
        check_keys(s, {"mode", "lower", "upper", "screen_points", "restarts", "max_evaluations", "x_tol", "f_tol",
                       "grid_points", "candidates"},
                   "fit.search");
        auto& g = config.fit.search;
        if (s.contains("mode")) {
          const auto mode = s.at("mode").get<std::string>();
          if (mode == "grid") {
            g.mode = GammaSearchMode::kGrid;
          } else if (mode == "multistart") {
            g.mode = GammaSearchMode::kMultiStart;
          } else {
            throw ConfigError("fit.search.mode must be 'multistart' or 'grid'");
          }
        }
        read_key(s, "lower", g.lower);
        read_key(s, "upper", g.upper);
        read_key(s, "screen_points", g.screen_points);
        read_key(s, "restarts", g.restarts);
        read_key(s, "max_evaluations", g.max_evaluations);
        read_key(s, "x_tol", g.x_tol);
        read_key(s, "f_tol", g.f_tol);
        read_key(s, "grid_points", g.grid_points);
        if (s.contains("candidates")) {
          const auto rows = s.at("candidates").get<std::vector<std::vector<double>>>();
          if (rows.empty()) throw ConfigError("fit.search.candidates is empty");
          Eigen::MatrixXd cand(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
          for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows[0].size()) throw ConfigError("fit.search.candidates rows differ in length");
            for (std::size_t k = 0; k < rows[i].size(); ++k) {
              cand(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
            }
          }
          g.candidates = cand;
        }
      }
    }
    if (root.contains("data")) {
      const json& d = root.at("data");
      check_keys(d, {"xtilde"}, "data");
      read_key(d, "xtilde", config.data.xtilde);
    }
    if (root.contains("bands")) {
      const json& b = root.at("bands");
      check_keys(b, {"level", "n_boot"}, "bands");
      read_key(b, "level", config.band_level);
      read_key(b, "n_boot", config.band_boot);
    }
    if (root.contains("test")) {
      const json& t = root.at("test");
      check_keys(t, {"B", "Q", "family", "frac_min", "slopes", "alpha", "lambda"}, "test");
      read_key(t, "B", config.test.B);
      read_key(t, "Q", config.test.Q);
      if (t.contains("family")) {
        const auto family = t.at("family").get<std::string>();
        if (family == "percentile_line") {
          config.test.family = FamilyMode::kPercentileLine;
        } else if (family == "random_directions") {
          config.test.family = FamilyMode::kRandomDirections;
        } else {
          throw ConfigError("test.family must be 'percentile_line' or 'random_directions'");
        }
      }
      read_key(t, "frac_min", config.test.frac_min);
      read_key(t, "slopes", config.test.slopes);
      read_key(t, "alpha", config.test.alpha);
      if (t.contains("lambda")) config.test.lambda = t.at("lambda").get<double>();
    }
    if (root.contains("simulate")) {
      const json& s = root.at("simulate");
      check_keys(s, {"n", "M", "c", "mode", "noise_sd_e"}, "simulate");
      read_key(s, "n", config.simulate.n);
      read_key(s, "M", config.simulate.M);
      read_key(s, "c", config.simulate.c);
      read_key(s, "noise_sd_e", config.simulate.noise_sd_e);
      if (s.contains("mode")) {
        const auto mode = s.at("mode").get<std::string>();
        if (mode == "estimation") {
          config.simulate.mode = DgpMode::kEstimation;
        } else if (mode == "testing") {
          config.simulate.mode = DgpMode::kTesting;
        } else {
          throw ConfigError("simulate.mode must be 'estimation' or 'testing'");
        }
      }
    }
    if (root.contains("study")) {
      const json& s = root.at("study");
      check_keys(s, {"cells", "reps", "weighted", "power"}, "study");
      if (s.contains("cells")) {
        config.estimation.cells.clear();
        for (const auto& cell : s.at("cells")) {
          const auto pair = cell.get<std::vector<int>>();
          if (pair.size() != 2) throw ConfigError("study.cells entries must be [n, M]");
          config.estimation.cells.emplace_back(pair[0], pair[1]);
        }
      }
      read_key(s, "reps", config.estimation.reps);
      read_key(s, "weighted", config.estimation.weighted);
      if (s.contains("power")) {
        const json& pw = s.at("power");
        if (pw.is_null()) {
          config.run_power = false;
        } else {
          check_keys(pw, {"c_grid", "n", "M", "reps", "enabled"}, "study.power");
          read_key(pw, "c_grid", config.power.c_grid);
          read_key(pw, "n", config.power.n);
          read_key(pw, "M", config.power.M);
          read_key(pw, "reps", config.power.reps);
          read_key(pw, "enabled", config.run_power);
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }

  config.fit.seed = config.seed;
  config.simulate.seed = config.seed;
  config.estimation.fit = config.fit;
  config.estimation.seed = config.seed;
  config.power.fit = config.fit;
  config.power.test = config.test;
  config.power.seed = config.seed;
  config.fit.validate();
  config.test.validate();
  config.simulate.validate();
  if (config.band_boot != 0 && config.band_boot < 100) throw ConfigError("bands.n_boot must be 0 or at least 100");
  if (!(config.band_level > 0.0 && config.band_level < 1.0)) throw ConfigError("bands.level must lie in (0, 1)");
  return config;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string config_to_json(const RunConfig& config) {
  json root;
  root["seed"] = config.seed;
  const FitConfig& f = config.fit;
  json fit{{"lambda", f.lambda},         {"kernel_nu", f.kernel_nu},     {"max_iter", f.max_iter},
           {"tol", f.tol},               {"lambda_grid", f.lambda_grid}, {"cv_folds", f.cv_folds},
           {"lambda_cov", f.covariance_lambda()}};
  if (f.h) fit["h"] = *f.h;
  if (f.gamma_init) fit["gamma_init"] = vector_json(*f.gamma_init);
  json search{{"mode", search_mode_name(f.search.mode)},
              {"lower", f.search.lower},
              {"upper", f.search.upper},
              {"screen_points", f.search.screen_points},
              {"restarts", f.search.restarts},
              {"max_evaluations", f.search.max_evaluations},
              {"x_tol", f.search.x_tol},
              {"f_tol", f.search.f_tol},
              {"grid_points", f.search.grid_points}};
  if (f.search.candidates) search["candidates"] = matrix_json(*f.search.candidates);
  fit["search"] = std::move(search);
  root["fit"] = std::move(fit);
  root["data"] = {{"xtilde", config.data.xtilde}};
  root["bands"] = {{"level", config.band_level}, {"n_boot", config.band_boot}};
  json test{{"B", config.test.B},
            {"Q", config.test.Q},
            {"family", family_name(config.test.family)},
            {"frac_min", config.test.frac_min},
            {"slopes", config.test.slopes},
            {"alpha", config.test.alpha}};
  if (config.test.lambda) test["lambda"] = *config.test.lambda;
  root["test"] = std::move(test);
  root["simulate"] = {{"n", config.simulate.n},
                      {"M", config.simulate.M},
                      {"c", config.simulate.c},
                      {"mode", config.simulate.mode == DgpMode::kTesting ? "testing" : "estimation"},
                      {"noise_sd_e", config.simulate.noise_sd_e}};
  json cells = json::array();
  for (const auto& [n, m] : config.estimation.cells) cells.push_back({n, m});
  root["study"] = {{"cells", cells},
                   {"reps", config.estimation.reps},
                   {"weighted", config.estimation.weighted},
                   {"power",
                    {{"c_grid", config.power.c_grid},
                     {"n", config.power.n},
                     {"M", config.power.M},
                     {"reps", config.power.reps},
                     {"enabled", config.run_power}}}};
  return root.dump(2);
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open input file: " + path.string());
  std::uint64_t hash = 1469598103934665603ULL;
  char buffer[1 << 16];
  while (in.read(buffer, sizeof buffer) || in.gcount() > 0) {
    hash = fnv1a(buffer, static_cast<std::size_t>(in.gcount()), hash);
  }
  return hex64(hash);
}

void write_manifest(const RunManifest& manifest, const fs::path& path) {
  json out;
  out["command"] = manifest.command;
  out["version"] = std::string(kVersion);
  out["seed"] = manifest.seed;
  out["config"] = json::parse(manifest.config_json);
  out["input_digests"] = manifest.input_digests;
  out["timings_seconds"] = manifest.timings_seconds;
  write_text(path, out.dump(2) + "\n");
}

void write_fit_artifacts(const fs::path& dir, const FunctionalDataset& dataset, const ChangePlaneFit& ls,
                         const std::optional<ChangePlaneFit>& wls, const std::optional<PointwiseBands>& bands) {
  const ChangePlaneFit& final_fit = wls ? *wls : ls;
  json out;
  out["manifest"] = "manifest.json";
  out["n"] = dataset.n();
  out["M"] = dataset.grid_size();
  out["grid"] = vector_json(dataset.grid());
  out["grid_transform"] = {{"offset", dataset.grid_transform().offset}, {"scale", dataset.grid_transform().scale}};
  out["ls"] = fit_json(dataset, ls);
  if (wls) out["wls"] = fit_json(dataset, *wls);
  if (bands) {
    out["bands"] = {{"level", bands->level}, {"n_boot", bands->n_boot}, {"failures", bands->failures}};
  }
  write_text(dir / "fit.json", out.dump(2) + "\n");

  const Eigen::MatrixXd curves = final_fit.theta.on_grid();
  std::vector<std::string> names;
  for (Eigen::Index k = 0; k < dataset.p(); ++k) names.push_back("beta" + std::to_string(k + 1));
  for (Eigen::Index k = 0; k < dataset.d(); ++k) names.push_back("delta" + std::to_string(k + 1));
  {
    auto csv = open_output(dir / "curves.csv");
    csv << "component,s,estimate,lower,upper\n";
    for (Eigen::Index k = 0; k < curves.rows(); ++k) {
      for (Eigen::Index m = 0; m < curves.cols(); ++m) {
        csv << names[static_cast<std::size_t>(k)] << ','
            << format_double(dataset.grid_transform().to_original(dataset.grid()[m])) << ','
            << format_double(curves(k, m)) << ',';
        if (bands) csv << format_double(bands->lower(k, m)) << ',' << format_double(bands->upper(k, m));
        else csv << ',';
        csv << '\n';
      }
    }
  }
  const Eigen::VectorXd index = dataset.plane_index(final_fit.gamma);
  auto csv = open_output(dir / "membership.csv");
  csv << "subject_id,label,index\n";
  for (Eigen::Index i = 0; i < dataset.n(); ++i) {
    csv << dataset.subject_ids()[static_cast<std::size_t>(i)] << ',' << (index[i] > 0.0 ? 1 : 0) << ','
        << format_double(index[i]) << '\n';
  }
}

void write_test_artifacts(const fs::path& dir, const SubgroupTestResult& result) {
  json out;
  out["manifest"] = "manifest.json";
  out["t_obs"] = result.t_obs;
  out["p_value"] = result.p_value;
  out["B"] = result.B;
  out["seed"] = result.seed;
  out["singular_candidates"] = result.singular_candidates;
  out["pseudo_inverse"] = result.pseudo_inverse;
  out["per_gamma"] = vector_json(result.per_gamma);
  out["candidates"] = matrix_json(result.candidates);
  const auto* bytes = reinterpret_cast<const char*>(result.boot_draws.data());
  out["boot_draws_digest"] = hex64(fnv1a(bytes, sizeof(double) * static_cast<std::size_t>(result.boot_draws.size())));
  write_text(dir / "test.json", out.dump(2) + "\n");
}

void write_truth(const fs::path& dir, const SimulatedData& sim) {
  const Eigen::VectorXd& grid = sim.dataset.grid();
  {
    auto csv = open_output(dir / "truth.csv");
    csv << "component,s,value\n";
    auto emit = [&](const std::string& name, const Eigen::RowVectorXd& values) {
      for (Eigen::Index m = 0; m < grid.size(); ++m) {
        csv << name << ',' << format_double(grid[m]) << ',' << format_double(values[m]) << '\n';
      }
    };
    for (Eigen::Index k = 0; k < sim.truth.beta.rows(); ++k) emit("beta" + std::to_string(k + 1), sim.truth.beta.row(k));
    for (Eigen::Index k = 0; k < sim.truth.delta.rows(); ++k) {
      emit("delta" + std::to_string(k + 1), sim.truth.delta.row(k));
    }
  }
  auto csv = open_output(dir / "truth_membership.csv");
  csv << "subject_id,label\n";
  for (std::size_t i = 0; i < sim.truth.labels.size(); ++i) {
    csv << sim.dataset.subject_ids()[i] << ',' << (sim.truth.labels[i] ? 1 : 0) << '\n';
  }
}

void write_estimation_tables(const fs::path& dir, const EstimationStudyResult& result) {
  const auto& names = study_component_names();
  {
    auto csv = open_output(dir / "records.csv");
    csv << "n,M,rep,data_seed,ok,method,gamma1,gamma2,accuracy";
    for (const auto& name : names) csv << ",rase_" << name;
    csv << ",lambda_sup_error,error\n";
    for (const auto& rec : result.records) {
      auto emit = [&](const char* method, const MethodRecord& m) {
        csv << rec.n << ',' << rec.M << ',' << rec.rep << ',' << rec.data_seed << ',' << (rec.ok ? 1 : 0) << ','
            << method << ',' << format_double(m.gamma[0]) << ',' << format_double(m.gamma[1]) << ','
            << format_double(m.accuracy);
        for (double r : m.rase) csv << ',' << format_double(r);
        std::string error = rec.error;
        std::replace(error.begin(), error.end(), ',', ';');
        csv << ',' << format_double(rec.lambda_sup_error) << ',' << error << '\n';
      };
      emit("LS", rec.ls);
      if (!result.cells.empty() && result.cells.front().weighted) emit("WLS", rec.wls);
    }
  }
  auto methods = [](const CellSummary& cell) {
    std::vector<std::pair<const char*, const MethodSummary*>> out{{"LS", &cell.ls}};
    if (cell.weighted) out.emplace_back("WLS", &cell.wls);
    return out;
  };
  {
    auto csv = open_output(dir / "table1_gamma.csv");
    csv << "n,M,method,coordinate,bias,sd\n";
    for (const auto& cell : result.cells) {
      for (const auto& [method, s] : methods(cell)) {
        for (int k = 0; k < 2; ++k) {
          csv << cell.n << ',' << cell.M << ',' << method << ",gamma" << k + 1 << ',' << format_double(s->gamma_bias[k])
              << ',' << format_double(s->gamma_sd[k]) << '\n';
        }
      }
    }
  }
  {
    auto csv = open_output(dir / "table2_accuracy.csv");
    csv << "n,M,method,mean,sd,failures\n";
    for (const auto& cell : result.cells) {
      for (const auto& [method, s] : methods(cell)) {
        csv << cell.n << ',' << cell.M << ',' << method << ',' << format_double(s->accuracy_mean) << ','
            << format_double(s->accuracy_sd) << ',' << cell.failures << '\n';
      }
    }
  }
  {
    auto csv = open_output(dir / "table3_rase.csv");
    csv << "n,M,method,component,mean,sd,median\n";
    for (const auto& cell : result.cells) {
      for (const auto& [method, s] : methods(cell)) {
        for (std::size_t k = 0; k < names.size(); ++k) {
          csv << cell.n << ',' << cell.M << ',' << method << ',' << names[k] << ',' << format_double(s->rase_mean[k])
              << ',' << format_double(s->rase_sd[k]) << ',' << format_double(s->rase_median[k]) << '\n';
        }
      }
    }
  }
  auto csv = open_output(dir / "covariance.csv");
  csv << "n,M,sup_error_median,fraction_below_0.25\n";
  for (const auto& cell : result.cells) {
    csv << cell.n << ',' << cell.M << ',' << format_double(cell.lambda_sup_median) << ','
        << format_double(cell.lambda_sup_below_quarter) << '\n';
  }
}

void write_power_csv(const fs::path& path, const PowerStudyResult& result) {
  auto csv = open_output(path);
  csv << "c,power,mc_se,rejections,reps,failures\n";
  for (const auto& point : result.points) {
    csv << format_double(point.c) << ',' << format_double(point.power) << ',' << format_double(point.mc_se) << ','
        << point.rejections << ',' << point.reps << ',' << point.failures << '\n';
  }
}

}  // namespace cplane

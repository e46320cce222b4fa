#include "robmarg/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "robmarg/error.hpp"
#include "robmarg/inference.hpp"
#include "robmarg/regfit.hpp"

namespace robmarg {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
      cell.push_back(ch);
    } else if (ch == ',' && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <typename E>
E parse_enum(const json& value, const std::string& field,
             const std::vector<std::pair<std::string, E>>& options) {
  if (!value.is_string()) throw InputError(field + ": expected a string");
  const auto s = value.get<std::string>();
  for (const auto& [name, e] : options) {
    if (name == s) return e;
  }
  throw InputError(field + ": unknown value '" + s + "'");
}

const std::vector<std::pair<std::string, MarginalMethod>> kEstimators{
    {"ipw", MarginalMethod::ipw}, {"conv", MarginalMethod::conv}, {"aipw", MarginalMethod::aipw}};
const std::vector<std::pair<std::string, PropensityMethod>> kPropensities{
    {"logistic", PropensityMethod::logistic},
    {"kernel", PropensityMethod::kernel},
    {"constant", PropensityMethod::constant}};
const std::vector<std::pair<std::string, ModelId>> kModels{{"exp_linear", ModelId::exp_linear},
                                                           {"linear", ModelId::linear}};
const std::vector<std::pair<std::string, ScaleCentering>> kCentering{
    {"median", ScaleCentering::median}, {"minimized", ScaleCentering::minimized}};
const std::vector<std::pair<std::string, Contamination>> kContamination{
    {"C0", Contamination::C0}, {"C1", Contamination::C1}};
const std::vector<std::pair<std::string, Missingness>> kMissing{{"M1", Missingness::M1},
                                                               {"MH", Missingness::MH}};
const std::vector<std::pair<std::string, SimPropensity>> kSimPropensities{
    {"true_p", SimPropensity::true_p},
    {"logistic", SimPropensity::logistic},
    {"kernel", SimPropensity::kernel},
    {"constant", SimPropensity::constant}};
const std::vector<std::pair<std::string, RegressionSpec>> kRegressionSpecs{
    {"true_nonlinear", RegressionSpec::true_nonlinear},
    {"misspecified_linear", RegressionSpec::misspecified_linear}};
const std::vector<std::pair<std::string, Functional>> kFunctionals{
    {"mean", Functional::mean}, {"median", Functional::median}, {"m_est", Functional::m_est}};

template <typename E>
std::vector<E> parse_enum_list(const json& j, const std::string& field,
                               const std::vector<std::pair<std::string, E>>& options) {
  if (!j.is_array() || j.empty()) throw InputError(field + ": expected a nonempty array");
  std::vector<E> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    out.push_back(parse_enum(j[k], field + "[" + std::to_string(k) + "]", options));
  }
  return out;
}

std::vector<std::string> string_list(const json& j, const std::string& field) {
  if (!j.is_array()) throw InputError(field + ": expected an array of names");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw InputError(field + ": expected an array of names");
    out.push_back(v.get<std::string>());
  }
  return out;
}

template <typename T>
T number(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  if (!j[key].is_number()) throw InputError(key + ": expected a number");
  return j[key].get<T>();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

struct Fitted {
  std::vector<std::pair<PropensityMethod, PropensityFit>> propensities;
  std::vector<std::pair<std::string, RegressionFit>> fits;
  double a_n = 0.0;
};

RegressionModel model_for(const RegressionChoice& choice, int covariates) {
  if (choice.model == ModelId::linear) return RegressionModel::linear(covariates);
  if (covariates != 2) throw InputError("exp_linear needs exactly two covariates");
  return RegressionModel::exp_linear(ExpVariant::ozone);
}

Fitted fit_nuisance(const ObservedDataset& data, const EstimateConfig& cfg) {
  Fitted f;
  const Eigen::MatrixXd z = data.z();
  const auto& delta = data.delta();
  const bool all_observed =
      std::all_of(delta.begin(), delta.end(), [](int d) { return d == 1; });
  for (PropensityMethod m : cfg.propensities) {
    if (all_observed) {
      f.propensities.emplace_back(m, PropensityFit::constant(1.0, cfg.propensity_floor));
      continue;
    }
    switch (m) {
      case PropensityMethod::logistic:
        f.propensities.emplace_back(m, fit_logistic(z, delta, cfg.propensity_floor));
        break;
      case PropensityMethod::kernel: {
        std::vector<double> grid = default_bandwidth_grid(z);
        if (!cfg.bandwidth_fractions.empty()) {
          const double range = z.col(0).maxCoeff() - z.col(0).minCoeff();
          grid.clear();
          for (double fr : cfg.bandwidth_fractions) grid.push_back(fr * range);
        }
        f.propensities.emplace_back(
            m, kernel_propensity(z, delta, cv_bandwidth(z, delta, grid), cfg.propensity_floor));
        break;
      }
      case PropensityMethod::constant:
        f.propensities.emplace_back(m, constant_propensity(delta, cfg.propensity_floor));
        break;
      case PropensityMethod::known:
        throw InputError("propensities: 'known' is not available for data analyses");
    }
  }

  if (std::find(cfg.estimators.begin(), cfg.estimators.end(), MarginalMethod::conv) !=
      cfg.estimators.end()) {
    const int d = static_cast<int>(data.x().cols());
    for (const auto& choice : cfg.regressions) {
      MMOptions opt;
      opt.subsets = cfg.mm_subsets;
      opt.seed = cfg.mm_seed;
      const CovariateWeights w =
          choice.hard_rejection ? hard_rejection_weights(data, 0) : CovariateWeights{};
      f.fits.emplace_back(choice.name, fit_mm(model_for(choice, d), data, w, opt));
    }
  }

  double a_n = cfg.a_n.value_or(default_aipw_bandwidth(data.size()));
  const Eigen::VectorXd z0 = z.col(0);
  if (cfg.a_n_units == EstimateConfig::BandwidthUnits::sd) {
    const double mean = z0.mean();
    a_n *= std::sqrt((z0.array() - mean).square().sum() / static_cast<double>(z0.size() - 1));
  } else if (cfg.a_n_units == EstimateConfig::BandwidthUnits::range) {
    a_n *= z0.maxCoeff() - z0.minCoeff();
  }
  f.a_n = a_n;
  return f;
}

std::vector<EstimateRow> estimate_all(const ObservedDataset& data, const EstimateConfig& cfg,
                                      const Fitted& f) {
  std::vector<EstimateRow> rows;
  const int d = static_cast<int>(data.x().cols());
  for (MarginalMethod e : cfg.estimators) {
    for (const auto& [pm, pf] : f.propensities) {
      auto fill = [&](const MarginalEstimate& est, std::string regression, bool converged) {
        EstimateRow row{e, pm, std::move(regression)};
        row.theta_mean = est.theta_mean;
        row.theta_median = est.theta_median;
        row.theta_m = est.theta_m;
        row.scale = est.scale;
        row.negative_aipw_weights = est.negative_weights_floored;
        row.fit_converged = converged;
        rows.push_back(row);
      };
      switch (e) {
        case MarginalMethod::ipw:
          fill(estimate_ipw(data, pf, cfg.location), "", true);
          break;
        case MarginalMethod::aipw:
          fill(estimate_aipw(data, pf, f.a_n, cfg.location), "", true);
          break;
        case MarginalMethod::conv:
          for (std::size_t r = 0; r < cfg.regressions.size(); ++r) {
            const RegressionFit& fit = f.fits[r].second;
            fill(estimate_conv(data, pf, model_for(cfg.regressions[r], d), fit, cfg.location),
                 cfg.regressions[r].name, fit.converged);
          }
          break;
      }
    }
  }
  return rows;
}

std::string row_label(const EstimateRow& r) {
  std::string label = to_string(r.estimator);
  if (!r.regression.empty()) label += "_" + r.regression;
  return label;
}

}  // namespace

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] == name) return static_cast<int>(k);
  }
  return -1;
}

CsvTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  CsvTable table;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (table.columns.empty()) {
      table.columns = cells;
      continue;
    }
    if (cells.size() != table.columns.size()) {
      throw InputError("row " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.columns.size()) + " fields, found " +
                       std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const std::string& c = cells[k];
      if (c.empty() || c == "NA") {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size() || !std::isfinite(v)) {
        throw InputError("row " + std::to_string(line_no) + ", column '" + table.columns[k] +
                         "': not a number: '" + c + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw InputError("CSV has no header row");
  return table;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

EstimateConfig parse_estimate_config(const json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  EstimateConfig cfg;
  if (!j.contains("response") || !j["response"].is_string()) {
    throw InputError("response: expected a column name");
  }
  cfg.response = j["response"].get<std::string>();
  if (!j.contains("covariates")) throw InputError("covariates: missing");
  cfg.covariates = string_list(j["covariates"], "covariates");
  if (!j.contains("z")) throw InputError("z: missing");
  cfg.z = string_list(j["z"], "z");
  if (cfg.covariates.empty() || cfg.z.empty()) {
    throw InputError("covariates and z must be nonempty");
  }
  for (const auto& name : cfg.z) {
    if (std::find(cfg.covariates.begin(), cfg.covariates.end(), name) == cfg.covariates.end()) {
      throw InputError("z: '" + name + "' is not a covariate");
    }
  }
  if (j.contains("estimators")) cfg.estimators = parse_enum_list(j["estimators"], "estimators", kEstimators);
  if (j.contains("propensities")) {
    cfg.propensities = parse_enum_list(j["propensities"], "propensities", kPropensities);
  }
  if (j.contains("regressions")) {
    const auto& regs = j["regressions"];
    if (!regs.is_array()) throw InputError("regressions: expected an array");
    for (std::size_t k = 0; k < regs.size(); ++k) {
      const std::string field = "regressions[" + std::to_string(k) + "]";
      RegressionChoice rc;
      rc.name = regs[k].value("name", std::string("model") + std::to_string(k));
      if (!regs[k].contains("model")) throw InputError(field + ".model: missing");
      rc.model = parse_enum(regs[k]["model"], field + ".model", kModels);
      const std::string weights = regs[k].value("weights", std::string("none"));
      if (weights == "hard_rejection") {
        rc.hard_rejection = true;
      } else if (weights != "none") {
        throw InputError(field + ".weights: unknown value '" + weights + "'");
      }
      cfg.regressions.push_back(rc);
    }
  }
  if (std::find(cfg.estimators.begin(), cfg.estimators.end(), MarginalMethod::conv) !=
          cfg.estimators.end() &&
      cfg.regressions.empty()) {
    throw InputError("regressions: conv needs at least one regression model");
  }

  const json tuning = j.value("tuning", json::object());
  const double c = number(tuning, "c", kBisquareLocationC);
  const double c0 = number(tuning, "c0", kBisquareScaleC);
  cfg.location.location = ScoreFamily::bisquare(c);
  cfg.location.rho0 = ScoreFamily::bisquare(c0);
  cfg.location.b = number(tuning, "b", kScaleB);
  if (!(cfg.location.b > 0.0 && cfg.location.b < 1.0)) throw InputError("b: must lie in (0, 1)");
  if (tuning.contains("scale_centering")) {
    cfg.location.centering = parse_enum(tuning["scale_centering"], "scale_centering", kCentering);
  }
  cfg.propensity_floor = number(tuning, "propensity_floor", kDefaultPropensityFloor);
  if (tuning.contains("a_n") && !tuning["a_n"].is_null()) {
    cfg.a_n = number(tuning, "a_n", 0.0);
    if (!(*cfg.a_n > 0.0)) throw InputError("a_n: must be positive");
  }
  const std::string units = tuning.value("a_n_units", std::string("raw"));
  if (units == "sd") {
    cfg.a_n_units = EstimateConfig::BandwidthUnits::sd;
  } else if (units == "range") {
    cfg.a_n_units = EstimateConfig::BandwidthUnits::range;
  } else if (units != "raw") {
    throw InputError("a_n_units: unknown value '" + units + "'");
  }
  if (tuning.contains("bandwidth_fractions")) {
    for (const auto& v : tuning["bandwidth_fractions"]) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) {
        throw InputError("bandwidth_fractions: expected positive numbers");
      }
      cfg.bandwidth_fractions.push_back(v.get<double>());
    }
  }
  cfg.mm_subsets = number(tuning, "mm_subsets", 500);
  cfg.mm_seed = number<std::uint64_t>(tuning, "mm_seed", 20190501);
  cfg.jackknife = j.value("jackknife", true);
  cfg.level = number(j, "level", 0.95);
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw InputError("level: must lie in (0, 1)");
  cfg.workers = number(j, "workers", 0u);
  return cfg;
}

ObservedDataset build_dataset(const CsvTable& table, const EstimateConfig& cfg) {
  auto column = [&](const std::string& name) {
    const int k = table.column_index(name);
    if (k < 0) throw InputError("column '" + name + "' not found");
    return static_cast<std::size_t>(k);
  };
  const std::size_t ycol = column(cfg.response);
  std::vector<std::size_t> xcols;
  std::vector<int> z_index;
  for (std::size_t k = 0; k < cfg.covariates.size(); ++k) {
    xcols.push_back(column(cfg.covariates[k]));
    if (std::find(cfg.z.begin(), cfg.z.end(), cfg.covariates[k]) != cfg.z.end()) {
      z_index.push_back(static_cast<int>(k));
    }
  }
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  if (n == 0) throw InputError("CSV has no data rows");
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(xcols.size()));
  std::vector<int> delta(static_cast<std::size_t>(n), 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    y[i] = row[ycol];
    if (std::isnan(y[i])) delta[static_cast<std::size_t>(i)] = 0;
    for (std::size_t k = 0; k < xcols.size(); ++k) {
      x(i, static_cast<Eigen::Index>(k)) = row[xcols[k]];
      const bool in_z =
          std::find(z_index.begin(), z_index.end(), static_cast<int>(k)) != z_index.end();
      if (!in_z && std::isnan(row[xcols[k]])) delta[static_cast<std::size_t>(i)] = 0;
    }
  }
  return ObservedDataset(std::move(y), std::move(x), std::move(z_index), std::move(delta));
}

EstimateReport run_estimate(const CsvTable& table, const EstimateConfig& cfg) {
  const ObservedDataset data = build_dataset(table, cfg);
  EstimateReport report;
  report.n = data.size();
  report.complete_cases = data.complete_count();
  {
    std::vector<std::string> names{cfg.response};
    names.insert(names.end(), cfg.covariates.begin(), cfg.covariates.end());
    for (const auto& name : names) {
      const auto k = static_cast<std::size_t>(table.column_index(name));
      std::size_t missing = 0;
      for (const auto& row : table.rows) missing += std::isnan(row[k]) ? 1 : 0;
      report.missing_by_column.emplace_back(name, missing);
    }
  }

  const Fitted f = fit_nuisance(data, cfg);
  report.a_n = f.a_n;
  for (const auto& [m, pf] : f.propensities) {
    if (pf.method() == PropensityMethod::logistic) report.logistic_coefficients = pf.coefficients();
    if (pf.method() == PropensityMethod::kernel) report.kernel_bandwidth = pf.bandwidth();
    if (pf.method() == PropensityMethod::constant) report.constant_propensity = pf.constant_value();
  }
  for (const auto& [name, fit] : f.fits) report.regression_coefficients.emplace_back(name, fit.beta);
  report.rows = estimate_all(data, cfg, f);

  if (cfg.jackknife) {
    const bool quiet = warnings_enabled();
    set_warnings_enabled(false);
    std::vector<VarianceEstimate> ses;
    try {
      ses = jackknife_se_multi(
          [&](const ObservedDataset& d) {
            const std::vector<EstimateRow> rows = estimate_all(d, cfg, fit_nuisance(d, cfg));
            std::vector<double> out;
            for (const auto& r : rows) out.push_back(r.theta_m);
            return out;
          },
          data, cfg.workers);
    } catch (...) {
      set_warnings_enabled(quiet);
      throw;
    }
    set_warnings_enabled(quiet);
    for (std::size_t k = 0; k < report.rows.size(); ++k) {
      auto& row = report.rows[k];
      row.jackknife_n = ses[k].n_effective;
      if (std::isnan(ses[k].se)) {
        log_warning("jackknife for " + row_label(row) + " failed");
        continue;
      }
      row.se = ses[k].se;
      row.ci = confidence_interval(row.theta_m, ses[k], cfg.level);
      if (ses[k].n_effective + report.n / 20 < report.n) {
        log_warning("jackknife for " + row_label(row) + " skipped " +
                    std::to_string(report.n - ses[k].n_effective) + " rows");
      }
    }
  }
  return report;
}

nlohmann::ordered_json report_json(const EstimateReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.n;
  j["complete_cases"] = report.complete_cases;
  nlohmann::ordered_json missing = nlohmann::ordered_json::object();
  for (const auto& [name, count] : report.missing_by_column) missing[name] = count;
  j["missing_by_column"] = missing;
  nlohmann::ordered_json prop = nlohmann::ordered_json::object();
  if (report.logistic_coefficients) {
    const auto& g = *report.logistic_coefficients;
    prop["logistic_coefficients"] = std::vector<double>(g.data(), g.data() + g.size());
  }
  if (report.kernel_bandwidth) prop["kernel_bandwidth"] = *report.kernel_bandwidth;
  if (report.constant_propensity) prop["constant"] = *report.constant_propensity;
  j["propensity"] = prop;
  j["aipw_bandwidth"] = report.a_n;
  nlohmann::ordered_json regs = nlohmann::ordered_json::object();
  for (const auto& [name, beta] : report.regression_coefficients) {
    regs[name] = std::vector<double>(beta.data(), beta.data() + beta.size());
  }
  j["regression_coefficients"] = regs;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["estimator"] = to_string(r.estimator);
    row["propensity"] = to_string(r.propensity);
    row["regression"] = r.regression.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(r.regression);
    row["theta_m"] = r.theta_m;
    row["theta_mean"] = r.theta_mean;
    row["theta_median"] = r.theta_median;
    row["scale"] = r.scale;
    row["se"] = r.se ? nlohmann::ordered_json(*r.se) : nlohmann::ordered_json();
    row["ci_lower"] = r.ci ? nlohmann::ordered_json(r.ci->first) : nlohmann::ordered_json();
    row["ci_upper"] = r.ci ? nlohmann::ordered_json(r.ci->second) : nlohmann::ordered_json();
    row["jackknife_n"] = r.jackknife_n;
    row["negative_aipw_weights"] = r.negative_aipw_weights;
    row["fit_converged"] = r.fit_converged;
    rows.push_back(row);
  }
  j["results"] = rows;
  return j;
}

std::string report_table_csv(const EstimateReport& report) {
  std::vector<std::string> labels;
  std::vector<std::string> props;
  std::map<std::pair<std::string, std::string>, double> cell;
  for (const auto& r : report.rows) {
    const std::string label = row_label(r);
    const std::string p = to_string(r.propensity);
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    if (std::find(props.begin(), props.end(), p) == props.end()) props.push_back(p);
    cell[{label, p}] = r.theta_m;
  }
  std::ostringstream out;
  out << "estimator";
  for (const auto& p : props) out << ',' << p;
  out << '\n';
  for (const auto& label : labels) {
    out << label;
    for (const auto& p : props) {
      const auto it = cell.find({label, p});
      out << ',' << (it == cell.end() ? std::string() : fmt6(it->second));
    }
    out << '\n';
  }
  return out.str();
}

std::string report_intervals_csv(const EstimateReport& report) {
  std::ostringstream out;
  out << "estimator,propensity,theta_m,se,ci_lower,ci_upper\n";
  for (const auto& r : report.rows) {
    out << row_label(r) << ',' << to_string(r.propensity) << ',' << fmt6(r.theta_m) << ','
        << (r.se ? fmt6(*r.se) : "") << ',' << (r.ci ? fmt6(r.ci->first) : "") << ','
        << (r.ci ? fmt6(r.ci->second) : "") << '\n';
  }
  return out.str();
}

SimulateConfig parse_simulate_config(const json& j) {
  if (!j.is_object() || !j.contains("scenarios") || !j["scenarios"].is_array() ||
      j["scenarios"].empty()) {
    throw InputError("scenarios: expected a nonempty array");
  }
  const unsigned workers = number(j, "workers", 0u);
  SimulateConfig out;
  for (std::size_t k = 0; k < j["scenarios"].size(); ++k) {
    const json& s = j["scenarios"][k];
    const std::string field = "scenarios[" + std::to_string(k) + "]";
    ScenarioConfig cfg;
    cfg.workers = workers;
    const std::string id = s.value("id", "scenario" + std::to_string(k));
    cfg.n = number<std::size_t>(s, "n", cfg.n);
    cfg.reps = number<std::size_t>(s, "reps", cfg.reps);
    cfg.seed = number<std::uint64_t>(s, "seed", cfg.seed);
    if (s.contains("contamination")) {
      cfg.contamination = parse_enum(s["contamination"], field + ".contamination", kContamination);
    }
    if (s.contains("missing")) cfg.missing = parse_enum(s["missing"], field + ".missing", kMissing);
    if (s.contains("propensity")) {
      cfg.propensity = parse_enum(s["propensity"], field + ".propensity", kSimPropensities);
    }
    if (s.contains("regression")) {
      cfg.regression = parse_enum(s["regression"], field + ".regression", kRegressionSpecs);
    }
    if (s.contains("missing_model")) {
      const json& mm = s["missing_model"];
      if (!mm.is_object()) throw InputError(field + ".missing_model: expected an object");
      cfg.missing_model.intercept = number(mm, "intercept", cfg.missing_model.intercept);
      cfg.missing_model.slope = number(mm, "slope", cfg.missing_model.slope);
    }
    if (s.contains("estimators")) {
      cfg.estimators = parse_enum_list(s["estimators"], field + ".estimators", kEstimators);
    }
    if (s.contains("functionals")) {
      cfg.functionals = parse_enum_list(s["functionals"], field + ".functionals", kFunctionals);
    }
    if (cfg.reps < 1) throw InputError(field + ".reps: must be at least 1");
    if (cfg.n < 20) throw InputError(field + ".n: must be at least 20");
    out.scenarios.emplace_back(id, cfg);
  }
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

int cmd_estimate(const fs::path& data, const fs::path& config, const fs::path& out) {
  const EstimateConfig cfg = parse_estimate_config(read_json(config));
  const EstimateReport report = run_estimate(read_csv(data), cfg);
  write_file_atomic(out / "report.json", report_json(report).dump(2) + "\n");
  write_file_atomic(out / "table.csv", report_table_csv(report));
  write_file_atomic(out / "intervals.csv", report_intervals_csv(report));
  return 0;
}

int cmd_simulate(const fs::path& config, const fs::path& out) {
  const SimulateConfig cfg = parse_simulate_config(read_json(config));
  int status = 0;
  std::ostringstream combined;
  combined << "scenario,functional,estimator,propensity,bias,sd,mse,L10,L20,L1,L2\n";
  set_warnings_enabled(false);
  for (const auto& [id, sc] : cfg.scenarios) {
    try {
      const SummaryTable table = run_scenario(sc);
      write_file_atomic(out / (id + ".csv"), summary_csv(table));
      write_file_atomic(out / (id + ".json"), summary_json(table));
      std::istringstream lines(summary_csv(table));
      std::string line;
      std::getline(lines, line);  // header
      while (std::getline(lines, line)) combined << id << ',' << line << '\n';
      std::cerr << id << ": " << table.reps_used << " replications, " << table.failures
                << " failed, observed fraction " << fmt6(table.observed_fraction) << '\n';
    } catch (const NumericalError& e) {
      std::cerr << id << ": " << e.what() << '\n';
      status = 2;
    }
  }
  set_warnings_enabled(true);
  write_file_atomic(out / "combined.csv", combined.str());
  return status;
}

int cmd_targets(std::size_t reps, std::size_t n, std::uint64_t seed) {
  const TargetEstimate t = target_values(reps, n, seed);
  nlohmann::ordered_json j;
  j["reps"] = reps;
  j["n"] = n;
  j["seed"] = seed;
  j["mean"] = t.mean;
  j["median"] = t.median;
  j["m_est"] = t.m_est;
  j["se_mean"] = t.se_mean;
  j["se_median"] = t.se_median;
  j["se_m_est"] = t.se_m_est;
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace robmarg

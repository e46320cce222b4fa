#include "robmarg/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "robmarg/distweight.hpp"
#include "robmarg/error.hpp"
#include "robmarg/regfit.hpp"

namespace robmarg {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Thetas {
  double mean = kNaN;
  double median = kNaN;
  double m_est = kNaN;
  double get(Functional f) const {
    switch (f) {
      case Functional::mean: return mean;
      case Functional::median: return median;
      case Functional::m_est: return m_est;
    }
    return kNaN;
  }
};

Thetas thetas_of(const MarginalEstimate& est) {
  return {est.theta_mean, est.theta_median, est.theta_m};
}

Thetas complete_thetas(const Eigen::VectorXd& y) {
  return thetas_of(summarize_distribution(
      WeightedSample::uniform(std::vector<double>(y.data(), y.data() + y.size())), {}));
}

struct Replication {
  bool ok = false;
  double observed = 0.0;
  Thetas clean;
  Thetas contaminated;
  std::vector<Thetas> estimates;
};

double target_of(const TargetValues& t, Functional f) {
  switch (f) {
    case Functional::mean: return t.mean;
    case Functional::median: return t.median;
    case Functional::m_est: return t.m_est;
  }
  return kNaN;
}

SummaryRow summarize_row(const std::vector<double>& est, const std::vector<double>& clean,
                         const std::vector<double>& contaminated, double target) {
  SummaryRow row{};
  const double m = static_cast<double>(est.size());
  CompensatedSum sum;
  for (double v : est) sum.add(v);
  const double avg = sum.value() / m;
  CompensatedSum var;
  CompensatedSum sq;
  for (double v : est) {
    var.add((v - avg) * (v - avg));
    sq.add((v - target) * (v - target));
  }
  row.bias = avg - target;
  row.sd = std::sqrt(var.value() / m);
  row.mse = sq.value() / m;
  const LMeasures l0 = l_measures(est, clean);
  const LMeasures l1 = l_measures(est, contaminated);
  row.L10 = l0.L1;
  row.L20 = l0.L2;
  row.L1 = l1.L1;
  row.L2 = l1.L2;
  return row;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double true_regression(double x1, double x2) { return 0.1 * x2 + 5.0 * std::exp(2.0 * x1); }

double MissingLogistic::operator()(double x1) const {
  return 1.0 / (1.0 + std::exp(-slope * x1 - intercept));
}

double true_propensity(double x1) { return MissingLogistic{}(x1); }

std::uint64_t replication_seed(std::uint64_t master, std::uint64_t j) {
  return splitmix64(master ^ j);
}

SimSample generate_sample(std::size_t n, std::uint64_t seed, Contamination contamination,
                          Missingness missing, const MissingLogistic& missing_model) {
  if (n < 1) throw InputError("sample size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> norm(0.0, 1.0);
  const auto m = static_cast<Eigen::Index>(n);
  Eigen::VectorXd x1(m), x2(m), eps(m), u(m);
  for (Eigen::Index i = 0; i < m; ++i) x1[i] = unif(rng);
  for (Eigen::Index i = 0; i < m; ++i) x2[i] = norm(rng);
  for (Eigen::Index i = 0; i < m; ++i) eps[i] = norm(rng);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t n_bad = n / 10;
  for (std::size_t k = 0; k < n_bad; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n - 1);
    std::swap(order[k], order[pick(rng)]);
  }
  for (Eigen::Index i = 0; i < m; ++i) u[i] = unif(rng);

  TruthRecord truth;
  truth.x2 = x2;
  truth.mu.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) truth.mu[i] = true_regression(x1[i], x2[i]);
  truth.y_clean = truth.mu + eps;
  truth.y_contaminated = truth.y_clean;
  if (contamination == Contamination::C1) {
    truth.contaminated_rows.assign(order.begin(), order.begin() + static_cast<long>(n_bad));
    std::sort(truth.contaminated_rows.begin(), truth.contaminated_rows.end());
    for (std::size_t i : truth.contaminated_rows) {
      const auto r = static_cast<Eigen::Index>(i);
      truth.y_contaminated[r] = 2.0 * truth.mu[r];
    }
  }

  std::vector<int> delta(n, 1);
  Eigen::MatrixXd x(m, 2);
  x.col(0) = x1;
  x.col(1) = x2;
  Eigen::VectorXd y = truth.y_contaminated;
  if (missing == Missingness::MH) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (u[i] >= missing_model(x1[i])) {
        delta[static_cast<std::size_t>(i)] = 0;
        y[i] = kNaN;
        x(i, 1) = kNaN;
      }
    }
  }
  // Every row missing: keep one so the dataset stays valid.
  if (std::none_of(delta.begin(), delta.end(), [](int d) { return d == 1; })) {
    delta[0] = 1;
    y[0] = truth.y_contaminated[0];
    x(0, 1) = x2[0];
  }
  return {ObservedDataset(std::move(y), std::move(x), {0}, std::move(delta)), std::move(truth)};
}

void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& body) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t j = next++; j < count; j = next++) body(j);
  };
  if (workers <= 1) {
    run();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
}

std::vector<double> default_bandwidth_grid(const Eigen::MatrixXd& z) {
  const double range = z.col(0).maxCoeff() - z.col(0).minCoeff();
  const double base = range > 0.0 ? range : 1.0;
  std::vector<double> grid;
  for (int k = 1; k <= 10; ++k) grid.push_back(0.05 * k * base);
  return grid;
}

PropensityFit fit_sim_propensity(const ObservedDataset& data, SimPropensity method,
                                 const MissingLogistic& missing_model) {
  const auto& delta = data.delta();
  if (std::all_of(delta.begin(), delta.end(), [](int d) { return d == 1; })) {
    return PropensityFit::constant(1.0);
  }
  const Eigen::MatrixXd z = data.z();
  switch (method) {
    case SimPropensity::true_p:
      return PropensityFit::known(
          [missing_model](std::span<const double> zz) { return missing_model(zz[0]); });
    case SimPropensity::logistic:
      return fit_logistic(z, delta);
    case SimPropensity::kernel:
      return kernel_propensity(z, delta, cv_bandwidth(z, delta, default_bandwidth_grid(z)));
    case SimPropensity::constant:
      return constant_propensity(delta);
  }
  throw InputError("unknown propensity method");
}

SummaryTable run_scenario(const ScenarioConfig& cfg) {
  if (cfg.reps < 1) throw InputError("reps must be at least 1");
  if (cfg.n < 20) throw InputError("n must be at least 20");
  const bool needs_fit = std::find(cfg.estimators.begin(), cfg.estimators.end(),
                                   MarginalMethod::conv) != cfg.estimators.end();
  const RegressionModel model = cfg.regression == RegressionSpec::true_nonlinear
                                    ? RegressionModel::exp_linear(ExpVariant::simulation)
                                    : RegressionModel::linear(2);

  std::vector<Replication> reps(cfg.reps);
  parallel_for(cfg.reps, cfg.workers, [&](std::size_t j) {
    Replication& rep = reps[j];
    try {
      const SimSample s =
          generate_sample(cfg.n, replication_seed(cfg.seed, j), cfg.contamination, cfg.missing,
                          cfg.missing_model);
      rep.observed = static_cast<double>(s.data.complete_count()) / static_cast<double>(cfg.n);
      rep.clean = complete_thetas(s.truth.y_clean);
      rep.contaminated = complete_thetas(s.truth.y_contaminated);
      const PropensityFit pf = fit_sim_propensity(s.data, cfg.propensity, cfg.missing_model);
      std::optional<RegressionFit> fit;
      if (needs_fit) fit = fit_mm(model, s.data);
      for (MarginalMethod e : cfg.estimators) {
        switch (e) {
          case MarginalMethod::ipw:
            rep.estimates.push_back(thetas_of(estimate_ipw(s.data, pf)));
            break;
          case MarginalMethod::conv:
            rep.estimates.push_back(thetas_of(estimate_conv(s.data, pf, model, *fit)));
            break;
          case MarginalMethod::aipw:
            rep.estimates.push_back(thetas_of(
                estimate_aipw(s.data, pf, default_aipw_bandwidth(cfg.n))));
            break;
        }
      }
      rep.ok = true;
    } catch (const std::exception&) {
      rep.ok = false;
    }
  });

  SummaryTable table;
  CompensatedSum observed;
  for (const auto& r : reps) {
    if (r.ok) {
      ++table.reps_used;
      observed.add(r.observed);
    } else {
      ++table.failures;
    }
  }
  if (table.failures * 50 > cfg.reps) {
    throw NumericalError("scenario aborted: " + std::to_string(table.failures) + " of " +
                         std::to_string(cfg.reps) + " replications failed");
  }
  if (table.reps_used == 0) throw NumericalError("scenario aborted: no replication succeeded");
  table.observed_fraction = observed.value() / static_cast<double>(table.reps_used);

  for (Functional f : cfg.functionals) {
    std::vector<double> clean;
    std::vector<double> contaminated;
    for (const auto& r : reps) {
      if (!r.ok) continue;
      clean.push_back(r.clean.get(f));
      contaminated.push_back(r.contaminated.get(f));
    }
    const double target = target_of(cfg.targets, f);
    SummaryRow complete = summarize_row(contaminated, clean, contaminated, target);
    complete.functional = f;
    complete.estimator = MarginalMethod::ipw;
    complete.propensity = cfg.propensity;
    complete.complete_data = true;
    table.rows.push_back(complete);
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      std::vector<double> est;
      for (const auto& r : reps) {
        if (r.ok) est.push_back(r.estimates[e].get(f));
      }
      SummaryRow row = summarize_row(est, clean, contaminated, target);
      row.functional = f;
      row.estimator = cfg.estimators[e];
      row.propensity = cfg.propensity;
      table.rows.push_back(row);
    }
  }
  return table;
}

LMeasures l_measures(const std::vector<double>& est, const std::vector<double>& ref) {
  if (est.size() != ref.size()) throw InputError("l_measures: length mismatch");
  if (est.empty()) return {};
  CompensatedSum a;
  CompensatedSum b;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double d = est[i] - ref[i];
    a.add(std::abs(d));
    b.add(d * d);
  }
  const double m = static_cast<double>(est.size());
  return {a.value() / m, b.value() / m};
}

std::string to_string(Contamination v) { return v == Contamination::C0 ? "C0" : "C1"; }
std::string to_string(Missingness v) { return v == Missingness::M1 ? "M1" : "MH"; }

std::string to_string(SimPropensity v) {
  switch (v) {
    case SimPropensity::true_p: return "true_p";
    case SimPropensity::logistic: return "logistic";
    case SimPropensity::kernel: return "kernel";
    case SimPropensity::constant: return "constant";
  }
  return "?";
}

std::string to_string(RegressionSpec v) {
  return v == RegressionSpec::true_nonlinear ? "true_nonlinear" : "misspecified_linear";
}

std::string to_string(Functional v) {
  switch (v) {
    case Functional::mean: return "mean";
    case Functional::median: return "median";
    case Functional::m_est: return "m_est";
  }
  return "?";
}

std::string to_string(MarginalMethod v) {
  switch (v) {
    case MarginalMethod::ipw: return "ipw";
    case MarginalMethod::conv: return "conv";
    case MarginalMethod::aipw: return "aipw";
  }
  return "?";
}

std::string to_string(PropensityMethod v) {
  switch (v) {
    case PropensityMethod::known: return "known";
    case PropensityMethod::constant: return "constant";
    case PropensityMethod::logistic: return "logistic";
    case PropensityMethod::kernel: return "kernel";
  }
  return "?";
}

std::string summary_csv(const SummaryTable& table) {
  std::ostringstream out;
  out << "functional,estimator,propensity,bias,sd,mse,L10,L20,L1,L2\n";
  for (const auto& r : table.rows) {
    out << to_string(r.functional) << ','
        << (r.complete_data ? std::string("complete") : to_string(r.estimator)) << ','
        << (r.complete_data ? std::string("none") : to_string(r.propensity));
    for (double v : {r.bias, r.sd, r.mse, r.L10, r.L20, r.L1, r.L2}) out << ',' << fmt6(v);
    out << '\n';
  }
  return out.str();
}

std::string summary_json(const SummaryTable& table) {
  nlohmann::ordered_json j;
  j["reps_used"] = table.reps_used;
  j["failures"] = table.failures;
  j["observed_fraction"] = table.observed_fraction;
  j["sd_convention"] = "population (divisor = reps)";
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) {
    nlohmann::ordered_json row;
    row["functional"] = to_string(r.functional);
    row["estimator"] = r.complete_data ? std::string("complete") : to_string(r.estimator);
    row["propensity"] = r.complete_data ? std::string("none") : to_string(r.propensity);
    row["bias"] = r.bias;
    row["sd"] = r.sd;
    row["mse"] = r.mse;
    row["L10"] = r.L10;
    row["L20"] = r.L20;
    row["L1"] = r.L1;
    row["L2"] = r.L2;
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::vector<double> clean_responses(std::size_t n, std::uint64_t seed) {
  const SimSample s = generate_sample(n, seed, Contamination::C0, Missingness::M1);
  return {s.truth.y_clean.data(), s.truth.y_clean.data() + s.truth.y_clean.size()};
}

TargetEstimate target_values(std::size_t reps, std::size_t n, std::uint64_t seed,
                             const ResponseGenerator& generator, unsigned workers) {
  if (reps < 1 || n < 2) throw InputError("targets need reps >= 1 and n >= 2");
  std::vector<Thetas> out(reps);
  parallel_for(reps, workers, [&](std::size_t j) {
    const std::vector<double> y = generator(n, replication_seed(seed, j));
    out[j] = thetas_of(summarize_distribution(WeightedSample::uniform(y), {}));
  });
  auto mean_se = [&](auto get) {
    CompensatedSum s;
    for (const auto& t : out) s.add(get(t));
    const double m = s.value() / static_cast<double>(reps);
    CompensatedSum v;
    for (const auto& t : out) v.add((get(t) - m) * (get(t) - m));
    const double se = reps > 1 ? std::sqrt(v.value() / static_cast<double>(reps - 1) /
                                           static_cast<double>(reps))
                               : 0.0;
    return std::pair{m, se};
  };
  TargetEstimate t;
  std::tie(t.mean, t.se_mean) = mean_se([](const Thetas& x) { return x.mean; });
  std::tie(t.median, t.se_median) = mean_se([](const Thetas& x) { return x.median; });
  std::tie(t.m_est, t.se_m_est) = mean_se([](const Thetas& x) { return x.m_est; });
  return t;
}

}  // namespace robmarg

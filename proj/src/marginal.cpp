#include "robmarg/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "robmarg/error.hpp"
#include "robmarg/scaleloc.hpp"

namespace robmarg {
namespace {

void require_observed(const ObservedDataset& data, std::size_t minimum) {
  if (data.complete_count() < minimum) {
    throw InputError(data.complete_count() == 0 ? "no complete cases"
                                                : "too few complete cases");
  }
}

// Inverse-probability weights 1 / p(z_i) on the complete rows, in row order.
std::vector<double> ipw_weights(const ObservedDataset& data, const PropensityFit& pf,
                                const std::vector<std::size_t>& rows) {
  std::vector<double> w;
  w.reserve(rows.size());
  for (std::size_t i : rows) w.push_back(1.0 / pf.predict(data.z_row(i)));
  return w;
}

double product_biweight(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                        const Eigen::Ref<const Eigen::RowVectorXd>& b, double bandwidth) {
  double k = 1.0;
  for (Eigen::Index c = 0; c < a.size() && k != 0.0; ++c) {
    k *= biweight((a[c] - b[c]) / bandwidth);
  }
  return k;
}

}  // namespace

MarginalEstimate summarize_distribution(WeightedSample ws, const LocationSettings& settings) {
  if (!rho_dominated(settings.location, settings.rho0)) {
    log_warning("location rho exceeds the scale rho0 somewhere; estimates may be unstable");
  }
  const ScaleFit sf = settings.centering == ScaleCentering::median
                          ? median_centered_scale(ws, settings.rho0, settings.b)
                          : s_scale(ws, settings.rho0, settings.b);
  MarginalEstimate est{.distribution = std::move(ws)};
  est.scale = sf.scale;
  est.theta_mean = weighted_mean(est.distribution);
  est.theta_median = weighted_quantile(est.distribution, 0.5);
  est.theta_m = m_location(est.distribution, settings.location, sf.scale,
                           weighted_median(est.distribution));
  return est;
}

MarginalEstimate estimate_ipw(const ObservedDataset& data, const PropensityFit& pf,
                              const LocationSettings& settings) {
  require_observed(data, 2);
  const auto rows = data.complete_rows();
  std::vector<double> atoms;
  atoms.reserve(rows.size());
  for (std::size_t i : rows) atoms.push_back(data.y()[static_cast<Eigen::Index>(i)]);
  MarginalEstimate est = summarize_distribution(
      WeightedSample(std::move(atoms), ipw_weights(data, pf, rows)), settings);
  est.method = MarginalMethod::ipw;
  est.propensity_tag = pf.method();
  return est;
}

MarginalEstimate estimate_conv(const ObservedDataset& data, const PropensityFit& pf,
                               const RegressionModel& model, const RegressionFit& fit,
                               const LocationSettings& settings) {
  require_observed(data, 2);
  if (!fit.converged) throw InputError("regression fit did not converge");
  const auto rows = data.complete_rows();
  std::vector<double> fitted;
  std::vector<double> resid;
  fitted.reserve(rows.size());
  resid.reserve(rows.size());
  for (std::size_t i : rows) {
    const auto r = static_cast<Eigen::Index>(i);
    const double m = predict(model, fit, data.x().row(r));
    fitted.push_back(m);
    resid.push_back(data.y()[r] - m);
  }
  std::vector<double> tau = ipw_weights(data, pf, rows);

  if (fitted.size() > kConvMaxGrid) {
    log_warning("convolution grid subsampled to " + std::to_string(kConvMaxGrid) + " atoms");
    std::mt19937_64 rng(fitted.size());
    std::discrete_distribution<std::size_t> pick(tau.begin(), tau.end());
    std::vector<double> sub(kConvMaxGrid);
    for (double& v : sub) v = fitted[pick(rng)];
    fitted = std::move(sub);
    tau.assign(kConvMaxGrid, 1.0);
  }

  const double tau_total = std::accumulate(tau.begin(), tau.end(), 0.0);
  const double kappa = 1.0 / static_cast<double>(resid.size());
  std::vector<double> atoms;
  std::vector<double> weights;
  atoms.reserve(resid.size() * fitted.size());
  weights.reserve(resid.size() * fitted.size());
  for (double e : resid) {
    for (std::size_t j = 0; j < fitted.size(); ++j) {
      atoms.push_back(fitted[j] + e);
      weights.push_back(kappa * tau[j] / tau_total);
    }
  }
  MarginalEstimate est =
      summarize_distribution(WeightedSample(std::move(atoms), std::move(weights)), settings);
  est.method = MarginalMethod::conv;
  est.propensity_tag = pf.method();
  return est;
}

double biweight(double t) {
  if (std::abs(t) >= 1.0) return 0.0;
  const double u = 1.0 - t * t;
  return 15.0 / 16.0 * u * u;
}

double default_aipw_bandwidth(std::size_t n) {
  return std::cbrt(1.0 / static_cast<double>(n));
}

ConditionalCdf conditional_cdf_kernel(const ObservedDataset& data, double a_n) {
  if (!(a_n > 0.0)) throw InputError("bandwidth must be positive");
  require_observed(data, 1);
  const auto rows = data.complete_rows();
  Eigen::MatrixXd zc(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(data.z_index().size()));
  std::vector<double> yc;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    zc.row(static_cast<Eigen::Index>(k)) = data.z_row(rows[k]);
    yc.push_back(data.y()[static_cast<Eigen::Index>(rows[k])]);
  }
  return [zc, yc, a_n](double y, const Eigen::Ref<const Eigen::RowVectorXd>& z) {
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index k = 0; k < zc.rows(); ++k) {
      const double w = product_biweight(zc.row(k), z, a_n);
      den += w;
      if (yc[static_cast<std::size_t>(k)] <= y) num += w;
    }
    if (den > 0.0) return num / den;
    const auto below = std::count_if(yc.begin(), yc.end(), [y](double v) { return v <= y; });
    return static_cast<double>(below) / static_cast<double>(yc.size());
  };
}

Eigen::VectorXd aipw_raw_weights(const ObservedDataset& data, const PropensityFit& pf,
                                 double a_n) {
  if (!(a_n > 0.0)) throw InputError("bandwidth must be positive");
  require_observed(data, 1);
  const std::size_t n = data.size();
  const auto rows = data.complete_rows();
  const Eigen::MatrixXd z = data.z();
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t j : rows) {
    zeta[static_cast<Eigen::Index>(j)] = 1.0 / pf.predict(z.row(static_cast<Eigen::Index>(j)));
  }
  // Each row i spreads its correction 1 - zeta_i over the complete cases in
  // proportion to the kernel weights around z_i.
  Eigen::VectorXd varpi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<double> kernel(rows.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double correction = 1.0 - zeta[static_cast<Eigen::Index>(i)];
    if (correction == 0.0) continue;
    double den = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      kernel[k] = product_biweight(z.row(static_cast<Eigen::Index>(rows[k])),
                                   z.row(static_cast<Eigen::Index>(i)), a_n);
      den += kernel[k];
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double share = den > 0.0 ? kernel[k] / den : 1.0 / static_cast<double>(rows.size());
      varpi[static_cast<Eigen::Index>(rows[k])] += correction * share;
    }
  }
  return zeta + varpi;
}

MarginalEstimate estimate_aipw(const ObservedDataset& data, const PropensityFit& pf,
                               double a_n, const LocationSettings& settings) {
  require_observed(data, 2);
  const Eigen::VectorXd raw = aipw_raw_weights(data, pf, a_n);
  const double n = static_cast<double>(data.size());
  const auto rows = data.complete_rows();

  std::vector<double> atoms;
  std::vector<double> signed_w;
  for (std::size_t j : rows) {
    atoms.push_back(data.y()[static_cast<Eigen::Index>(j)]);
    signed_w.push_back(raw[static_cast<Eigen::Index>(j)] / n);
  }
  bool floored = false;
  std::vector<double> floored_w(signed_w);
  for (double& w : floored_w) {
    if (w < 0.0) {
      w = 0.0;
      floored = true;
    }
  }
  if (std::all_of(floored_w.begin(), floored_w.end(), [](double w) { return w == 0.0; })) {
    throw NumericalError("all AIPW weights are negative");
  }

  // Signed CDF: accumulate in atom order, clip, running max, then difference.
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
  std::vector<double> cdf_atoms;
  std::vector<double> increments;
  CompensatedSum cum;
  double prev = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cum.add(signed_w[order[k]]);
    if (k + 1 < order.size() && atoms[order[k + 1]] == atoms[order[k]]) continue;
    const double level = std::max(prev, std::clamp(cum.value(), 0.0, 1.0));
    cdf_atoms.push_back(atoms[order[k]]);
    increments.push_back(level - prev);
    prev = level;
  }
  if (prev < 1.0) increments.back() += 1.0 - prev;

  MarginalEstimate est =
      summarize_distribution(WeightedSample(std::move(atoms), std::move(floored_w)), settings);
  est.method = MarginalMethod::aipw;
  est.propensity_tag = pf.method();
  est.negative_weights_floored = floored;
  est.signed_distribution = WeightedSample(std::move(cdf_atoms), std::move(increments));
  return est;
}

}  // namespace robmarg

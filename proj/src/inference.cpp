#include "robmarg/inference.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "robmarg/distweight.hpp"
#include "robmarg/error.hpp"

namespace robmarg {

std::vector<VarianceEstimate> jackknife_se_multi(const MultiPipeline& estimator,
                                                 const ObservedDataset& data,
                                                 unsigned workers) {
  const std::size_t n = data.size();
  if (n < 10) throw InputError("jackknife needs at least 10 rows");
  std::vector<std::vector<double>> values(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        values[i] = estimator(data.without_row(i));
      } catch (const std::exception&) {
        values[i].clear();
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::size_t outputs = 0;
  for (const auto& v : values) outputs = std::max(outputs, v.size());
  if (outputs == 0) throw NumericalError("jackknife: every replicate failed");
  auto entry = [&](std::size_t i, std::size_t k) -> std::optional<double> {
    if (values[i].size() != outputs || !std::isfinite(values[i][k])) return std::nullopt;
    return values[i][k];
  };

  std::vector<VarianceEstimate> out;
  for (std::size_t k = 0; k < outputs; ++k) {
    CompensatedSum sum;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (auto v = entry(i, k)) {
        sum.add(*v);
        ++m;
      }
    }
    if (m < 2) {
      // this entry only; the others may still be fine
      log_warning("jackknife: too few successful replicates for output " + std::to_string(k));
      out.push_back({std::numeric_limits<double>::quiet_NaN(), VarianceMethod::jackknife, m});
      continue;
    }
    if (n - m > n / 20) {
      log_warning("jackknife skipped " + std::to_string(n - m) + " of " + std::to_string(n) +
                  " rows");
    }
    const double mean = sum.value() / static_cast<double>(m);
    CompensatedSum ss;
    for (std::size_t i = 0; i < n; ++i) {
      if (auto v = entry(i, k)) ss.add((*v - mean) * (*v - mean));
    }
    const double dm = static_cast<double>(m);
    out.push_back({std::sqrt((dm - 1.0) / dm * ss.value()), VarianceMethod::jackknife, m});
  }
  return out;
}

VarianceEstimate jackknife_se(const Pipeline& estimator, const ObservedDataset& data,
                              unsigned workers) {
  const VarianceEstimate ve = jackknife_se_multi(
      [&](const ObservedDataset& d) { return std::vector<double>{estimator(d)}; }, data,
      workers)[0];
  if (std::isnan(ve.se)) throw NumericalError("jackknife: too few successful replicates");
  return ve;
}

VarianceEstimate plugin_var_ipw(const ObservedDataset& data, const PropensityFit& pf,
                                double theta, double scale, const ScoreFamily& sf,
                                PluginVariant variant) {
  if (!(scale > 0.0)) throw InputError("scale must be positive");
  if (variant == PluginVariant::kernel && pf.method() != PropensityMethod::kernel) {
    throw InputError("kernel plug-in variance needs a kernel propensity");
  }
  const auto rows = data.complete_rows();
  if (rows.empty()) throw InputError("no complete cases");
  const Eigen::MatrixXd z = data.z();
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = pf.predict(z.row(i));

  CompensatedSum tau_total;
  CompensatedSum a_sum;
  CompensatedSum g_sum;
  std::vector<double> psi(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(rows[k]);
    const ScoreValue v = sf.evaluate((data.y()[i] - theta) / scale);
    const double tau = 1.0 / p[i];
    psi[k] = v.psi;
    tau_total.add(tau);
    a_sum.add(tau * v.psi_prime);
    g_sum.add(tau * v.psi * v.psi / p[i]);
  }
  const double a_hat = a_sum.value() / tau_total.value();
  if (!(a_hat >= 1e-6)) throw NumericalError("flat score");
  double gamma = g_sum.value() / tau_total.value();

  if (variant == PluginVariant::kernel) {
    CompensatedSum correction;
    for (Eigen::Index i = 0; i < n; ++i) {
      double num = 0.0;
      double den = 0.0;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const double w = product_epanechnikov(z.row(static_cast<Eigen::Index>(rows[k])),
                                              z.row(i), pf.bandwidth());
        num += w * psi[k];
        den += w;
      }
      const double r = den > 0.0 ? num / den : 0.0;
      correction.add((1.0 - p[i]) / p[i] * r * r);
    }
    gamma -= correction.value() / static_cast<double>(n);
  }
  gamma = std::max(gamma, 0.0);
  return {scale * std::sqrt(gamma / (static_cast<double>(n) * a_hat * a_hat)),
          variant == PluginVariant::known ? VarianceMethod::plugin_known
                                          : VarianceMethod::plugin_kernel,
          static_cast<std::size_t>(n)};
}

std::pair<double, double> confidence_interval(double theta, const VarianceEstimate& ve,
                                              double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("level must lie in (0, 1)");
  const boost::math::normal standard;
  const double half = boost::math::quantile(standard, 0.5 * (1.0 + level)) * ve.se;
  return {theta - half, theta + half};
}

}  // namespace robmarg

#include "robmarg/propensity.hpp"

#include <algorithm>
#include <cmath>

#include "robmarg/error.hpp"

namespace robmarg {
namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_floor(double floor) {
  if (!(floor > 0.0 && floor < 1.0)) throw InputError("propensity floor must lie in (0, 1)");
}

void check_delta(std::span<const int> delta, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(delta.size()) != rows) {
    throw InputError("z and delta differ in length");
  }
  for (int d : delta) {
    if (d != 0 && d != 1) throw InputError("delta entries must be 0 or 1");
  }
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd x(z.rows(), z.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(z.cols()) = z;
  return x;
}

}  // namespace

double epanechnikov(double t) {
  return std::abs(t) <= 1.0 ? 0.75 * (1.0 - t * t) : 0.0;
}

double product_epanechnikov(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                            const Eigen::Ref<const Eigen::RowVectorXd>& b,
                            double bandwidth) {
  double k = 1.0;
  for (Eigen::Index c = 0; c < a.size() && k > 0.0; ++c) {
    k *= epanechnikov((a[c] - b[c]) / bandwidth);
  }
  return k;
}

PropensityFit::PropensityFit(PropensityMethod method, double floor)
    : method_(method), floor_(floor) {
  check_floor(floor);
}

PropensityFit PropensityFit::known(KnownFunction p, double floor) {
  if (!p) throw InputError("known propensity needs a function");
  PropensityFit fit(PropensityMethod::known, floor);
  fit.known_ = std::move(p);
  return fit;
}

PropensityFit PropensityFit::constant(double p, double floor) {
  if (!(p > 0.0 && p <= 1.0)) throw InputError("constant propensity must lie in (0, 1]");
  PropensityFit fit(PropensityMethod::constant, floor);
  fit.constant_ = p;
  return fit;
}

PropensityFit PropensityFit::logistic(Eigen::VectorXd gamma, double floor) {
  if (gamma.size() < 1 || !gamma.allFinite()) throw InputError("invalid logistic coefficients");
  PropensityFit fit(PropensityMethod::logistic, floor);
  fit.gamma_ = std::move(gamma);
  return fit;
}

PropensityFit PropensityFit::kernel(Eigen::MatrixXd z, std::vector<int> delta,
                                    double bandwidth, double floor) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InputError("kernel bandwidth must be positive");
  }
  check_delta(delta, z.rows());
  if (z.rows() < 1) throw InputError("kernel propensity needs data");
  PropensityFit fit(PropensityMethod::kernel, floor);
  double observed = 0.0;
  for (int d : delta) observed += d;
  fit.fallback_ = observed / static_cast<double>(delta.size());
  fit.z_ = std::move(z);
  fit.delta_ = std::move(delta);
  fit.bandwidth_ = bandwidth;
  return fit;
}

double PropensityFit::clamp(double p) const { return std::clamp(p, floor_, 1.0); }

double PropensityFit::predict(std::span<const double> z) const {
  Eigen::Map<const Eigen::RowVectorXd> row(z.data(), static_cast<Eigen::Index>(z.size()));
  return predict(row);
}

double PropensityFit::predict(const Eigen::Ref<const Eigen::RowVectorXd>& z) const {
  switch (method_) {
    case PropensityMethod::known: {
      std::vector<double> tmp(z.data(), z.data() + z.size());
      return clamp(known_(tmp));
    }
    case PropensityMethod::constant:
      return clamp(constant_);
    case PropensityMethod::logistic: {
      if (z.size() + 1 != gamma_.size()) throw InputError("z dimension mismatch");
      const double eta = gamma_[0] + z.dot(gamma_.tail(z.size()));
      return clamp(sigmoid(eta));
    }
    case PropensityMethod::kernel: {
      if (z.size() != z_.cols()) throw InputError("z dimension mismatch");
      double num = 0.0;
      double den = 0.0;
      for (Eigen::Index i = 0; i < z_.rows(); ++i) {
        const double k = product_epanechnikov(z_.row(i), z, bandwidth_);
        num += k * delta_[static_cast<std::size_t>(i)];
        den += k;
      }
      return clamp(den > 0.0 ? num / den : fallback_);
    }
  }
  return clamp(1.0);
}

Eigen::VectorXd PropensityFit::predict_rows(const Eigen::MatrixXd& z) const {
  Eigen::VectorXd out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) out[i] = predict(z.row(i));
  return out;
}

double logistic_log_likelihood(const Eigen::MatrixXd& z, std::span<const int> delta,
                               const Eigen::VectorXd& gamma) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double eta = gamma[0] + z.row(i).dot(gamma.tail(z.cols()));
    ll += delta[static_cast<std::size_t>(i)] * eta - softplus(eta);
  }
  return ll;
}

PropensityFit fit_logistic(const Eigen::MatrixXd& z, std::span<const int> delta,
                           double floor) {
  check_delta(delta, z.rows());
  const Eigen::Index n = z.rows();
  const Eigen::Index k = z.cols();
  if (n < k + 2) throw InputError("logistic fit needs at least k + 2 rows");
  const auto observed = std::count(delta.begin(), delta.end(), 1);
  if (observed == 0 || observed == n) {
    throw InputError("logistic fit needs both delta values present");
  }

  const Eigen::MatrixXd x = with_intercept(z);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = delta[static_cast<std::size_t>(i)];

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(k + 1);
  double ll = logistic_log_likelihood(z, delta, gamma);
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd eta = x * gamma;
    Eigen::VectorXd p(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = sigmoid(eta[i]);
      w[i] = p[i] * (1.0 - p[i]);
    }
    const Eigen::VectorXd grad = x.transpose() * (y - p);
    if (grad.norm() / static_cast<double>(n) < 1e-10) break;
    Eigen::MatrixXd hess = x.transpose() * w.asDiagonal() * x;
    hess.diagonal().array() += 1e-12;
    Eigen::VectorXd step = hess.ldlt().solve(grad);

    double step_scale = 1.0;
    bool improved = false;
    for (int h = 0; h <= 30; ++h) {
      const Eigen::VectorXd trial = gamma + step_scale * step;
      const double trial_ll = logistic_log_likelihood(z, delta, trial);
      if (trial_ll >= ll) {
        gamma = trial;
        ll = trial_ll;
        improved = true;
        break;
      }
      step_scale *= 0.5;
    }
    if (gamma.norm() > 1e3 || !gamma.allFinite()) throw NumericalError("separation");
    if (!improved || step_scale * step.norm() < 1e-14) break;
  }
  // Perfectly separated data drive the likelihood to 0 while the
  // coefficients grow without bound.
  if (ll > -1e-6 * static_cast<double>(n)) throw NumericalError("separation");
  return PropensityFit::logistic(gamma, floor);
}

PropensityFit kernel_propensity(const Eigen::MatrixXd& z, std::span<const int> delta,
                                double bandwidth, double floor) {
  if (!(bandwidth > 0.0)) throw InputError("kernel bandwidth must be positive");
  if (z.rows() < 2) throw InputError("kernel propensity needs at least two rows");
  return PropensityFit::kernel(z, std::vector<int>(delta.begin(), delta.end()),
                               bandwidth, floor);
}

std::vector<double> loo_kernel_errors(const Eigen::MatrixXd& z, std::span<const int> delta,
                                      std::span<const double> grid) {
  check_delta(delta, z.rows());
  if (grid.empty()) throw InputError("bandwidth grid is empty");
  for (double h : grid) {
    if (!(h > 0.0)) throw InputError("bandwidths must be positive");
  }
  const Eigen::Index n = z.rows();
  if (n < 2) throw InputError("cross-validation needs at least two rows");
  const std::size_t g = grid.size();
  double observed = 0.0;
  for (int d : delta) observed += d;

  std::vector<double> errors(g, 0.0);
  std::vector<double> num(g);
  std::vector<double> den(g);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(den.begin(), den.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dj = delta[static_cast<std::size_t>(j)];
      for (std::size_t b = 0; b < g; ++b) {
        const double k = product_epanechnikov(z.row(i), z.row(j), grid[b]);
        num[b] += k * dj;
        den[b] += k;
      }
    }
    const double di = delta[static_cast<std::size_t>(i)];
    const double fallback = (observed - di) / static_cast<double>(n - 1);
    for (std::size_t b = 0; b < g; ++b) {
      const double p = den[b] > 0.0 ? num[b] / den[b] : fallback;
      errors[b] += (di - p) * (di - p);
    }
  }
  return errors;
}

double cv_bandwidth(const Eigen::MatrixXd& z, std::span<const int> delta,
                    std::span<const double> grid) {
  const std::vector<double> errors = loo_kernel_errors(z, delta, grid);
  std::size_t best = 0;
  for (std::size_t b = 1; b < grid.size(); ++b) {
    if (errors[b] < errors[best] ||
        (errors[b] == errors[best] && grid[b] < grid[best])) {
      best = b;
    }
  }
  return grid[best];
}

PropensityFit constant_propensity(std::span<const int> delta, double floor) {
  if (delta.empty()) throw InputError("constant propensity needs data");
  double observed = 0.0;
  for (int d : delta) {
    if (d != 0 && d != 1) throw InputError("delta entries must be 0 or 1");
    observed += d;
  }
  return PropensityFit::constant(
      std::max(observed / static_cast<double>(delta.size()), floor), floor);
}

}  // namespace robmarg

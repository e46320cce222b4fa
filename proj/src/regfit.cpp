#include "robmarg/regfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "robmarg/distweight.hpp"
#include "robmarg/error.hpp"
#include "robmarg/scaleloc.hpp"

namespace robmarg {
namespace {

constexpr int kRateGrid = 21;
constexpr int kGoldenSteps = 25;
constexpr int kPolishSteps = 5;
constexpr int kHalvings = 30;
constexpr double kRidge = 1e-8;
constexpr double kRateSpan = 8.0;

struct CompleteCases {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::size_t> rows;
};

CompleteCases complete_cases(const ObservedDataset& data) {
  CompleteCases cc;
  cc.rows = data.complete_rows();
  const auto m = static_cast<Eigen::Index>(cc.rows.size());
  cc.x.resize(m, data.x().cols());
  cc.y.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = static_cast<Eigen::Index>(cc.rows[static_cast<std::size_t>(r)]);
    cc.x.row(r) = data.x().row(i);
    cc.y[r] = data.y()[i];
  }
  return cc;
}

// Solves the symmetric system, adding a small ridge when it is singular.
Eigen::VectorXd solve_normal(Eigen::MatrixXd a, const Eigen::VectorXd& rhs) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  Eigen::VectorXd sol;
  if (ldlt.info() == Eigen::Success) {
    sol = ldlt.solve(rhs);
    if (sol.allFinite() && ldlt.isPositive() &&
        ldlt.vectorD().minCoeff() > 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      return sol;
    }
  }
  a.diagonal().array() += kRidge * std::max(1.0, a.diagonal().maxCoeff());
  return a.ldlt().solve(rhs);
}

Eigen::VectorXd residuals(const RegressionModel& model, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  Eigen::VectorXd r(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) r[i] = y[i] - model.mean(x.row(i), beta);
  return r;
}

struct LinearSolve {
  Eigen::VectorXd coefficients;
  double rss = std::numeric_limits<double>::infinity();
};

LinearSolve solve_given_rate(const RegressionModel& model, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& y, double rate) {
  const Eigen::Index n = x.rows();
  const Eigen::Index q = model.linear_design(x.row(0), rate).size();
  Eigen::MatrixXd design(n, q);
  for (Eigen::Index i = 0; i < n; ++i) design.row(i) = model.linear_design(x.row(i), rate);
  LinearSolve out;
  out.coefficients = solve_normal(design.transpose() * design, design.transpose() * y);
  if (!out.coefficients.allFinite()) return out;
  out.rss = (y - design * out.coefficients).squaredNorm();
  return out;
}

// One weighted Gauss-Newton step for sum_i w_i r_i(beta)^2.
Eigen::VectorXd gauss_newton_step(const RegressionModel& model, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& r, const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& beta) {
  const Eigen::Index p = beta.size();
  Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd jtr = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (w[i] <= 0.0) continue;
    const Eigen::VectorXd g = model.gradient(x.row(i), beta);
    jtj.noalias() += w[i] * g * g.transpose();
    jtr.noalias() += w[i] * r[i] * g;
  }
  return solve_normal(jtj, jtr);
}

Eigen::VectorXd polish_least_squares(const RegressionModel& model, const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y, Eigen::VectorXd beta,
                                     int steps) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(y.size());
  Eigen::VectorXd r = residuals(model, x, y, beta);
  double rss = r.squaredNorm();
  for (int it = 0; it < steps && rss > 0.0; ++it) {
    Eigen::VectorXd step = gauss_newton_step(model, x, r, ones, beta);
    bool accepted = false;
    for (int h = 0; h < kHalvings; ++h) {
      const Eigen::VectorXd trial = beta + step;
      const Eigen::VectorXd trial_r = residuals(model, x, y, trial);
      const double trial_rss = trial_r.squaredNorm();
      if (trial.allFinite() && trial_rss < rss) {
        beta = trial;
        r = trial_r;
        rss = trial_rss;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || step.norm() < 1e-14 * (1.0 + beta.norm())) break;
  }
  return beta;
}

Eigen::VectorXd separable_least_squares(const RegressionModel& model, const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y, double rate_limit,
                                        int polish_steps) {
  if (model.nonlinear_index() < 0) {
    return model.assemble(0.0, solve_given_rate(model, x, y, 0.0).coefficients);
  }
  const double step = 2.0 * rate_limit / (kRateGrid - 1);
  int best = 0;
  double best_rss = std::numeric_limits<double>::infinity();
  for (int g = 0; g < kRateGrid; ++g) {
    const double rss = solve_given_rate(model, x, y, -rate_limit + g * step).rss;
    if (rss < best_rss) {
      best_rss = rss;
      best = g;
    }
  }
  // Golden-section search on the bracket around the best grid rate.
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = -rate_limit + std::max(best - 1, 0) * step;
  double hi = -rate_limit + std::min(best + 1, kRateGrid - 1) * step;
  double c = hi - golden * (hi - lo);
  double d = lo + golden * (hi - lo);
  double fc = solve_given_rate(model, x, y, c).rss;
  double fd = solve_given_rate(model, x, y, d).rss;
  for (int it = 0; it < kGoldenSteps; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - golden * (hi - lo);
      fc = solve_given_rate(model, x, y, c).rss;
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + golden * (hi - lo);
      fd = solve_given_rate(model, x, y, d).rss;
    }
  }
  const double rate = 0.5 * (lo + hi);
  Eigen::VectorXd beta = model.assemble(rate, solve_given_rate(model, x, y, rate).coefficients);
  if (!beta.allFinite()) return beta;
  return polish_least_squares(model, x, y, std::move(beta), polish_steps);
}

double rate_limit_for(const RegressionModel& model, const Eigen::MatrixXd& x) {
  if (model.nonlinear_index() < 0) return 0.0;
  const double range = x.col(0).cwiseAbs().maxCoeff();
  return range > 0.0 ? kRateSpan / range : kRateSpan;
}

// Residual S-scale: M-scale of the residuals about zero.
std::optional<double> residual_scale(const Eigen::VectorXd& r, const MMOptions& options) {
  try {
    return m_scale(WeightedSample::uniform(std::vector<double>(r.data(), r.data() + r.size())),
                   options.s_rho, options.b, 0.0);
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

double m_objective(const Eigen::VectorXd& r, const Eigen::VectorXd& w, double sigma,
                   const ScoreFamily& rho) {
  CompensatedSum acc;
  for (Eigen::Index i = 0; i < r.size(); ++i) acc.add(w[i] * rho.rho(r[i] / sigma));
  return acc.value();
}

}  // namespace

RegressionModel RegressionModel::exp_linear(ExpVariant variant) {
  return variant == ExpVariant::simulation
             ? RegressionModel(ModelId::exp_linear, variant, 3, 2, 0)
             : RegressionModel(ModelId::exp_linear, variant, 4, 2, 1);
}

RegressionModel RegressionModel::linear(int num_covariates) {
  if (num_covariates < 1) throw InputError("linear model needs a covariate");
  return RegressionModel(ModelId::linear, ExpVariant::simulation, num_covariates + 1,
                         num_covariates, -1);
}

void RegressionModel::check_dims(Eigen::Index x_size, Eigen::Index beta_size) const {
  if (x_size != num_covariates_ || beta_size != dim_beta_) {
    throw InputError("regression dimension mismatch");
  }
}

double RegressionModel::mean(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                             const Eigen::VectorXd& beta) const {
  check_dims(x.size(), beta.size());
  if (id_ == ModelId::linear) {
    return x.dot(beta.head(num_covariates_)) + beta[num_covariates_];
  }
  if (variant_ == ExpVariant::simulation) {
    return beta[1] * x[1] + beta[2] * std::exp(beta[0] * x[0]);
  }
  return beta[0] * std::exp(beta[1] * x[0]) + beta[2] + beta[3] * x[1];
}

Eigen::VectorXd RegressionModel::gradient(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                          const Eigen::VectorXd& beta) const {
  check_dims(x.size(), beta.size());
  Eigen::VectorXd g(dim_beta_);
  if (id_ == ModelId::linear) {
    g.head(num_covariates_) = x.transpose();
    g[num_covariates_] = 1.0;
  } else if (variant_ == ExpVariant::simulation) {
    const double e = std::exp(beta[0] * x[0]);
    g << beta[2] * x[0] * e, x[1], e;
  } else {
    const double e = std::exp(beta[1] * x[0]);
    g << e, beta[0] * x[0] * e, 1.0, x[1];
  }
  return g;
}

Eigen::RowVectorXd RegressionModel::linear_design(
    const Eigen::Ref<const Eigen::RowVectorXd>& x, double rate) const {
  if (x.size() != num_covariates_) throw InputError("regression dimension mismatch");
  if (id_ == ModelId::linear) {
    Eigen::RowVectorXd row(num_covariates_ + 1);
    row.head(num_covariates_) = x;
    row[num_covariates_] = 1.0;
    return row;
  }
  const double e = std::exp(rate * x[0]);
  if (variant_ == ExpVariant::simulation) {
    Eigen::RowVectorXd row(2);
    row << x[1], e;
    return row;
  }
  Eigen::RowVectorXd row(3);
  row << e, 1.0, x[1];
  return row;
}

Eigen::VectorXd RegressionModel::assemble(double rate,
                                          const Eigen::VectorXd& linear_coefficients) const {
  if (id_ == ModelId::linear) return linear_coefficients;
  Eigen::VectorXd beta(dim_beta_);
  if (variant_ == ExpVariant::simulation) {
    beta << rate, linear_coefficients[0], linear_coefficients[1];
  } else {
    beta << linear_coefficients[0], rate, linear_coefficients[1], linear_coefficients[2];
  }
  return beta;
}

Eigen::VectorXd elemental_fit(const RegressionModel& model, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y, double rate_limit) {
  if (x.rows() != y.size() || x.rows() < 1) throw InputError("elemental fit: bad input");
  if (model.nonlinear_index() >= 0 && !(rate_limit > 0.0)) {
    throw InputError("elemental fit: rate limit must be positive");
  }
  return separable_least_squares(model, x, y, rate_limit, kPolishSteps);
}

Eigen::VectorXd least_squares_fit(const RegressionModel& model, const ObservedDataset& data) {
  const CompleteCases cc = complete_cases(data);
  if (cc.y.size() < model.dim_beta()) throw InputError("too few complete cases");
  return separable_least_squares(model, cc.x, cc.y, rate_limit_for(model, cc.x), 50);
}

RegressionFit fit_mm(const RegressionModel& model, const ObservedDataset& data,
                     const CovariateWeights& covariate_weights, const MMOptions& options) {
  if (data.x().cols() != model.num_covariates()) {
    throw InputError("dataset covariates do not match the regression model");
  }
  const CompleteCases cc = complete_cases(data);
  const Eigen::Index n = cc.y.size();
  const int p = model.dim_beta();
  if (n < 5 * p) throw InputError("insufficient complete cases for the MM fit");
  const double rate_limit = rate_limit_for(model, cc.x);

  // S-step: elemental subsets of size p + 1 scored by the residual S-scale.
  std::mt19937_64 rng(options.seed);
  std::vector<Eigen::Index> index(static_cast<std::size_t>(n));
  std::iota(index.begin(), index.end(), Eigen::Index{0});
  const Eigen::Index subset_size = std::min<Eigen::Index>(p + 1, n);
  Eigen::MatrixXd sx(subset_size, cc.x.cols());
  Eigen::VectorXd sy(subset_size);

  Eigen::VectorXd best_beta;
  double best_scale = std::numeric_limits<double>::infinity();
  for (int s = 0; s < options.subsets; ++s) {
    for (Eigen::Index k = 0; k < subset_size; ++k) {
      std::uniform_int_distribution<Eigen::Index> pick(k, n - 1);
      std::swap(index[static_cast<std::size_t>(k)],
                index[static_cast<std::size_t>(pick(rng))]);
      sx.row(k) = cc.x.row(index[static_cast<std::size_t>(k)]);
      sy[k] = cc.y[index[static_cast<std::size_t>(k)]];
    }
    const Eigen::VectorXd candidate =
        separable_least_squares(model, sx, sy, rate_limit, kPolishSteps);
    if (!candidate.allFinite()) continue;
    const auto scale = residual_scale(residuals(model, cc.x, cc.y, candidate), options);
    if (scale && *scale < best_scale) {
      best_scale = *scale;
      best_beta = candidate;
    }
  }
  if (!std::isfinite(best_scale)) throw NumericalError("degenerate scale");

  // Refine the winner by reweighted Gauss-Newton on the S-scale.
  Eigen::VectorXd beta = best_beta;
  double scale = best_scale;
  for (int it = 0; it < options.s_refine_steps; ++it) {
    const Eigen::VectorXd r = residuals(model, cc.x, cc.y, beta);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = options.s_rho.weight(r[i] / scale);
    Eigen::VectorXd step = gauss_newton_step(model, cc.x, r, w, beta);
    bool accepted = false;
    for (int h = 0; h < kHalvings; ++h) {
      const Eigen::VectorXd trial = beta + step;
      if (trial.allFinite()) {
        const auto trial_scale = residual_scale(residuals(model, cc.x, cc.y, trial), options);
        if (trial_scale && *trial_scale < scale) {
          beta = trial;
          scale = *trial_scale;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  if (!(scale > 1e-12 * (1.0 + cc.y.cwiseAbs().maxCoeff()))) {
    throw NumericalError("degenerate scale");
  }

  RegressionFit fit;
  fit.s_beta = beta;
  fit.residual_scale = scale;
  fit.complete_case_count = static_cast<std::size_t>(n);

  Eigen::VectorXd cw = Eigen::VectorXd::Ones(n);
  if (covariate_weights) {
    for (Eigen::Index i = 0; i < n; ++i) cw[i] = covariate_weights(cc.x.row(i));
    fit.weights_used = cw;
  }

  // M-step with the residual scale fixed.
  const ScoreFamily& rho = options.m_rho;
  Eigen::VectorXd r = residuals(model, cc.x, cc.y, beta);
  double objective = m_objective(r, cw, scale, rho);
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = cw[i] * rho.weight(r[i] / scale);
    Eigen::VectorXd step = gauss_newton_step(model, cc.x, r, w, beta);
    bool accepted = false;
    for (int h = 0; h < kHalvings; ++h) {
      const Eigen::VectorXd trial = beta + step;
      if (trial.allFinite()) {
        const Eigen::VectorXd trial_r = residuals(model, cc.x, cc.y, trial);
        const double trial_obj = m_objective(trial_r, cw, scale, rho);
        if (trial_obj <= objective) {
          beta = trial;
          r = trial_r;
          const double change = objective - trial_obj;
          objective = trial_obj;
          accepted = true;
          if (step.norm() <= options.tolerance * (1.0 + beta.norm()) ||
              change <= 1e-14 * (1.0 + objective)) {
            fit.converged = true;
          }
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      fit.converged = true;
      break;
    }
    if (fit.converged) break;
  }
  fit.beta = beta;
  return fit;
}

double predict(const RegressionModel& model, const RegressionFit& fit,
               const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return model.mean(x, fit.beta);
}

CovariateWeights hard_rejection_weights(const ObservedDataset& data, int column) {
  if (column < 0 || column >= data.x().cols()) throw InputError("weight column out of range");
  std::vector<double> values;
  for (std::size_t i : data.complete_rows()) {
    values.push_back(data.x()(static_cast<Eigen::Index>(i), column));
  }
  const WeightedSample ws = WeightedSample::uniform(values);
  const double center = weighted_median(ws);
  const double spread = mad_scale(ws, 1.0, true);
  return [center, spread, column](const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    const double t = std::abs(x[column] - center) / spread;
    if (t <= 2.0) return 1.0;
    if (t >= 3.0) return 0.0;
    const double u = t - 2.0;
    return (1.0 - u * u) * (1.0 - u * u);
  };
}

}  // namespace robmarg

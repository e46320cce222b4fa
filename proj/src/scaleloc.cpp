#include "robmarg/scaleloc.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "robmarg/error.hpp"

namespace robmarg {
namespace {

constexpr int kScaleRounds = 200;
constexpr int kInnerScaleRounds = 500;
constexpr int kLocationRounds = 500;
constexpr double kScaleTol = 1e-9;
constexpr double kLocationTol = 1e-10;
constexpr std::size_t kMultistartLimit = 500;

struct Residuals {
  std::vector<double> r;
  std::vector<double> w;
  double total = 0.0;
};

Residuals residuals_about(const WeightedSample& ws, double center) {
  Residuals out;
  const auto a = ws.atoms();
  const auto w = ws.weights();
  out.r.reserve(a.size());
  out.w.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (w[i] <= 0.0) continue;
    out.r.push_back(a[i] - center);
    out.w.push_back(w[i]);
  }
  out.total = ws.total_weight();
  return out;
}

double mean_rho(const Residuals& res, const ScoreFamily& rho0, double s) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < res.r.size(); ++i) {
    acc.add(res.w[i] * rho0.rho(res.r[i] / s));
  }
  return acc.value() / res.total;
}

void check_b(const ScoreFamily& rho0, double b) {
  if (!(b > 0.0 && b < 1.0)) throw InputError("scale target b must lie in (0, 1)");
  if (rho0.bounded() && b >= rho0.rho_sup()) {
    throw InputError("scale target b must be below sup rho0");
  }
}

double weighted_abs_median(const Residuals& res) {
  std::vector<double> abs_r(res.r.size());
  for (std::size_t i = 0; i < res.r.size(); ++i) abs_r[i] = std::abs(res.r[i]);
  return weighted_median(WeightedSample(std::move(abs_r), res.w));
}

double solve_m_scale(const Residuals& res, const ScoreFamily& rho0, double b) {
  CompensatedSum zero_mass;
  for (std::size_t i = 0; i < res.r.size(); ++i) {
    if (res.r[i] == 0.0) zero_mass.add(res.w[i]);
  }
  const double outside = 1.0 - zero_mass.value() / res.total;
  // As s -> 0 the mean rho tends to sup(rho0) times the mass off-center.
  if (outside <= 0.0 || (rho0.bounded() && outside * rho0.rho_sup() <= b)) {
    throw NumericalError("degenerate scale");
  }

  switch (rho0.kind()) {
    case ScoreKind::square: {
      CompensatedSum acc;
      for (std::size_t i = 0; i < res.r.size(); ++i) acc.add(res.w[i] * res.r[i] * res.r[i]);
      return std::sqrt(acc.value() / (b * res.total));
    }
    case ScoreKind::absolute: {
      CompensatedSum acc;
      for (std::size_t i = 0; i < res.r.size(); ++i) acc.add(res.w[i] * std::abs(res.r[i]));
      return acc.value() / (b * res.total);
    }
    default:
      break;
  }

  double s = weighted_abs_median(res) / 0.6745;
  if (!(s > 0.0)) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < res.r.size(); ++i) acc.add(res.w[i] * std::abs(res.r[i]));
    s = acc.value() / res.total;
  }

  // s^2 <- s^2 * mean rho0(r / s) / b; monotone for bounded rho0.
  for (int it = 0; it < kInnerScaleRounds; ++it) {
    const double next = s * std::sqrt(mean_rho(res, rho0, s) / b);
    const bool done = std::abs(next / s - 1.0) < 1e-13;
    s = next;
    if (done) return s;
  }

  // Slow fixed point: finish by bisection on the decreasing map
  // s -> mean rho0(r / s) - b.
  double lo = s;
  double hi = s;
  while (mean_rho(res, rho0, lo) < b) lo *= 0.5;
  while (mean_rho(res, rho0, hi) > b) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_rho(res, rho0, mid) > b) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double irwls_location(const WeightedSample& ws, const ScoreFamily& rho,
                      double scale, double start) {
  const auto y = ws.atoms();
  const auto w = ws.weights();
  double theta = start;
  for (int it = 0; it < kLocationRounds; ++it) {
    CompensatedSum num;
    CompensatedSum den;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (w[i] <= 0.0) continue;
      const double wi = w[i] * rho.weight((y[i] - theta) / scale);
      num.add(wi * y[i]);
      den.add(wi);
    }
    if (!(den.value() > 0.0)) {
      throw NumericalError("flat location objective: no atom within the score support");
    }
    const double next = num.value() / den.value();
    const bool done = std::abs(next - theta) / scale < kLocationTol;
    theta = next;
    if (done) break;
  }

  // One guarded Newton step tightens the root certificate.
  CompensatedSum sum_psi;
  CompensatedSum sum_dpsi;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] <= 0.0) continue;
    const ScoreValue v = rho.evaluate((y[i] - theta) / scale);
    sum_psi.add(w[i] * v.psi);
    sum_dpsi.add(w[i] * v.psi_prime);
  }
  if (sum_dpsi.value() > 0.0) {
    const double candidate = theta + scale * sum_psi.value() / sum_dpsi.value();
    if (std::abs(candidate - theta) < 1e-6 * scale &&
        location_objective(ws, rho, scale, candidate) <=
            location_objective(ws, rho, scale, theta)) {
      theta = candidate;
    }
  }
  return theta;
}

}  // namespace

double m_scale(const WeightedSample& ws, const ScoreFamily& rho0, double b,
               double center) {
  check_b(rho0, b);
  return solve_m_scale(residuals_about(ws, center), rho0, b);
}

ScaleFit s_scale(const WeightedSample& ws, const ScoreFamily& rho0, double b) {
  check_b(rho0, b);
  if (ws.support().size() < 2) throw NumericalError("degenerate scale");

  const auto y = ws.atoms();
  const auto w = ws.weights();
  ScaleFit fit;
  fit.b = b;
  double a = weighted_median(ws);
  double s = m_scale(ws, rho0, b, a);
  for (int it = 1; it <= kScaleRounds; ++it) {
    fit.iterations = it;
    CompensatedSum num;
    CompensatedSum den;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (w[i] <= 0.0) continue;
      const double wi = w[i] * rho0.weight((y[i] - a) / s);
      num.add(wi * y[i]);
      den.add(wi);
    }
    if (!(den.value() > 0.0)) break;
    double step = num.value() / den.value() - a;
    double next_a = a + step;
    double next_s = m_scale(ws, rho0, b, next_a);
    // Only accept centers that do not increase the scale.
    for (int h = 0; h < 30 && next_s > s; ++h) {
      step *= 0.5;
      next_a = a + step;
      next_s = m_scale(ws, rho0, b, next_a);
    }
    if (next_s > s) {
      fit.converged = true;
      break;
    }
    const bool done =
        std::abs(next_a - a) / s < kScaleTol && std::abs(next_s - s) / s < kScaleTol;
    a = next_a;
    s = next_s;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  fit.scale = s;
  fit.s_location = a;
  return fit;
}

ScaleFit median_centered_scale(const WeightedSample& ws,
                               const ScoreFamily& rho0, double b) {
  ScaleFit fit;
  fit.b = b;
  fit.s_location = weighted_median(ws);
  fit.scale = m_scale(ws, rho0, b, fit.s_location);
  fit.iterations = 1;
  fit.converged = true;
  return fit;
}

double mad_scale(const WeightedSample& ws, double c0, bool normal_consistency) {
  if (!(c0 > 0.0)) throw InputError("MAD constant must be positive");
  const double med = weighted_median(ws);
  const double mad = weighted_abs_median(residuals_about(ws, med));
  if (!(mad > 0.0)) throw NumericalError("degenerate scale");
  return mad / (normal_consistency ? 0.6745 : c0);
}

ScaleFit least_median_scale(const WeightedSample& ws, double c0, double b) {
  if (!(c0 > 0.0)) throw InputError("scale constant must be positive");
  if (!(b > 0.0 && b < 1.0)) throw InputError("scale target b must lie in (0, 1)");
  const auto x = ws.support();
  const auto cum = ws.cumulative();
  const double need = 1.0 - b;
  double best_len = -1.0;
  double best_mid = x.front();
  // Shortest [x_i, x_j] whose mass exceeds 1 - b; two-pointer over support.
  std::size_t j = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double below = i == 0 ? 0.0 : cum[i - 1];
    if (j < i) j = i;
    while (j < x.size() && cum[j] - below <= need + 1e-12) ++j;
    if (j == x.size()) break;
    const double len = x[j] - x[i];
    if (best_len < 0.0 || len < best_len) {
      best_len = len;
      best_mid = 0.5 * (x[i] + x[j]);
    }
  }
  if (!(best_len > 0.0)) throw NumericalError("degenerate scale");
  ScaleFit fit;
  fit.scale = 0.5 * best_len / c0;
  fit.s_location = best_mid;
  fit.b = b;
  fit.iterations = 1;
  fit.converged = true;
  return fit;
}

double location_objective(const WeightedSample& ws, const ScoreFamily& rho,
                          double scale, double a) {
  const auto y = ws.atoms();
  const auto w = ws.weights();
  CompensatedSum acc;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] > 0.0) acc.add(w[i] * rho.rho((y[i] - a) / scale));
  }
  return acc.value() / ws.total_weight();
}

double location_score(const WeightedSample& ws, const ScoreFamily& rho,
                      double scale, double a) {
  const auto y = ws.atoms();
  const auto w = ws.weights();
  CompensatedSum acc;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] > 0.0) acc.add(w[i] * rho.psi((y[i] - a) / scale));
  }
  return acc.value() / ws.total_weight();
}

double m_location(const WeightedSample& ws, const ScoreFamily& rho,
                  double scale, double start) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InputError("location scale must be positive");
  }
  switch (rho.kind()) {
    case ScoreKind::absolute:
      return weighted_median(ws);
    case ScoreKind::square:
      return weighted_mean(ws);
    default:
      break;
  }

  double theta = irwls_location(ws, rho, scale, start);
  if (!rho.redescending() || ws.support().size() > kMultistartLimit) return theta;

  // A redescending score can have several roots; the estimate is the
  // minimizer of D. On small supports, restart from any atom that beats the
  // current solution.
  double best = location_objective(ws, rho, scale, theta);
  double best_atom = theta;
  double best_atom_value = best;
  for (double a : ws.support()) {
    const double v = location_objective(ws, rho, scale, a);
    if (v < best_atom_value) {
      best_atom_value = v;
      best_atom = a;
    }
  }
  if (best_atom_value < best) {
    const double alt = irwls_location(ws, rho, scale, best_atom);
    if (location_objective(ws, rho, scale, alt) < best) theta = alt;
  }
  return theta;
}

bool rho_dominated(const ScoreFamily& rho, const ScoreFamily& rho0) {
  const double span = 4.0 * std::max(rho.c(), rho0.c());
  for (int k = 0; k <= 4000; ++k) {
    const double u = span * k / 4000.0;
    if (rho.rho(u) > rho0.rho(u) + 1e-12) return false;
  }
  return true;
}

}  // namespace robmarg

#include "robmarg/score.hpp"

#include <cmath>
#include <limits>

#include "robmarg/error.hpp"

namespace robmarg {

ScoreFamily::ScoreFamily(ScoreKind kind, double c) : kind_(kind), c_(c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw InputError("score tuning constant must be positive");
  }
}

ScoreValue ScoreFamily::evaluate(double u) const {
  switch (kind_) {
    case ScoreKind::bisquare: {
      const double t = u / c_;
      if (std::abs(t) >= 1.0) return {1.0, 0.0, 0.0};
      const double t2 = t * t;
      const double one_minus = 1.0 - t2;
      // 1 - (1 - t^2)^3 rather than the expanded polynomial: stays monotone
      // and <= 1 under rounding
      return {1.0 - one_minus * one_minus * one_minus,
              6.0 * t * one_minus * one_minus / c_,
              6.0 * one_minus * (1.0 - 5.0 * t2) / (c_ * c_)};
    }
    case ScoreKind::huber: {
      const double a = std::abs(u);
      if (a <= c_) return {0.5 * u * u, u, 1.0};
      return {c_ * a - 0.5 * c_ * c_, std::copysign(c_, u), 0.0};
    }
    case ScoreKind::square:
      return {u * u, 2.0 * u, 2.0};
    case ScoreKind::absolute:
      return {std::abs(u), u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0), 0.0};
  }
  return {0.0, 0.0, 0.0};
}

double ScoreFamily::rho(double u) const { return evaluate(u).rho; }
double ScoreFamily::psi(double u) const { return evaluate(u).psi; }
double ScoreFamily::psi_prime(double u) const { return evaluate(u).psi_prime; }

double ScoreFamily::weight(double u) const {
  switch (kind_) {
    case ScoreKind::bisquare: {
      const double t = u / c_;
      if (std::abs(t) >= 1.0) return 0.0;
      const double one_minus = 1.0 - t * t;
      return 6.0 * one_minus * one_minus / (c_ * c_);
    }
    case ScoreKind::huber: {
      const double a = std::abs(u);
      return a <= c_ ? 1.0 : c_ / a;
    }
    case ScoreKind::square:
      return 2.0;
    case ScoreKind::absolute:
      throw InputError("IRWLS weights are undefined for the absolute score");
  }
  return 0.0;
}

double ScoreFamily::rho_sup() const {
  return bounded() ? 1.0 : std::numeric_limits<double>::infinity();
}

ScoreValue score_eval(const ScoreFamily& family, double u) {
  return family.evaluate(u);
}

}  // namespace robmarg

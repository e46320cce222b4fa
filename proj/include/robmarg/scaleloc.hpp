#pragma once

#include "robmarg/distweight.hpp"
#include "robmarg/score.hpp"

namespace robmarg {

struct ScaleFit {
  double scale = 0.0;
  double s_location = 0.0;
  double b = 0.5;
  int iterations = 0;
  bool converged = false;
};

// M-scale about a fixed center: the s > 0 solving
//   sum_i w_i rho0((y_i - center) / s) / sum_i w_i = b.
// Throws NumericalError("degenerate scale") when no positive solution exists
// (too much mass sitting exactly on the center).
double m_scale(const WeightedSample& ws, const ScoreFamily& rho0, double b,
               double center);

// S-dispersion: minimizes the M-scale over the center. Alternates an M-scale
// solve at the current center with one IRWLS center update using rho0
// weights, until both move less than 1e-9 (standardized) or 200 rounds.
ScaleFit s_scale(const WeightedSample& ws, const ScoreFamily& rho0, double b);

// M-scale centered at the weighted median, i.e. S(Q, a) evaluated at
// a = median instead of minimized over a. This is the preliminary scale the
// marginal estimators use by default.
ScaleFit median_centered_scale(const WeightedSample& ws,
                               const ScoreFamily& rho0, double b);

// MAD preset: weighted median of |y - median| divided by c0, or by the
// normal-consistency constant 0.6745 when requested.
double mad_scale(const WeightedSample& ws, double c0,
                 bool normal_consistency = false);

// Indicator rho*(t) = 1{|t| > 1}: S(Q, a) = median|y - a| / c0 minimized over
// a, i.e. the half-length of the shortest interval holding more than 1 - b of
// the mass, divided by c0. s_location is the interval midpoint (the least
// median location).
ScaleFit least_median_scale(const WeightedSample& ws, double c0,
                            double b = 0.5);

// True when rho(u) <= rho0(u) on a dense grid of u >= 0 (both even). The
// location and scale scores are meant to satisfy this; callers only warn.
bool rho_dominated(const ScoreFamily& rho, const ScoreFamily& rho0);

// D(a) = sum_i w_i rho((y_i - a) / scale) / sum_i w_i.
double location_objective(const WeightedSample& ws, const ScoreFamily& rho,
                          double scale, double a);

// sum_i w_i psi((y_i - a) / scale) / sum_i w_i.
double location_score(const WeightedSample& ws, const ScoreFamily& rho,
                      double scale, double a);

// Weighted M-location. Bisquare and Huber use IRWLS started at `start`
// (converged to 1e-10 on the standardized step, 500 rounds max). Absolute
// returns the weighted median and square the weighted mean.
double m_location(const WeightedSample& ws, const ScoreFamily& rho,
                  double scale, double start);

}  // namespace robmarg

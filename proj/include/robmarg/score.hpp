#pragma once

namespace robmarg {

enum class ScoreKind { bisquare, huber, square, absolute };

struct ScoreValue {
  double rho;
  double psi;
  double psi_prime;
};

// Tuning constants used throughout: bisquare location constant with 95%
// normal efficiency, and the bisquare S-scale constant that is Fisher
// consistent at the normal with 50% breakdown (b = 0.5).
inline constexpr double kBisquareLocationC = 4.685;
inline constexpr double kBisquareScaleC = 1.54764;
inline constexpr double kScaleB = 0.5;

// A rho-function rho_c(u) = rho*(u / c) together with its derivatives in u.
//
//   bisquare  rho*(t) = min(3t^2 - 3t^4 + t^6, 1)      bounded, sup = 1
//   huber     rho(u) = u^2/2 on |u| <= c, c|u| - c^2/2 outside
//   square    rho(u) = u^2   (c unused)
//   absolute  rho(u) = |u|   (c unused); psi = sign(u), psi(0) = 0, psi' = 0
class ScoreFamily {
 public:
  ScoreFamily(ScoreKind kind, double c);

  static ScoreFamily bisquare(double c) { return {ScoreKind::bisquare, c}; }
  static ScoreFamily huber(double c) { return {ScoreKind::huber, c}; }
  static ScoreFamily square() { return {ScoreKind::square, 1.0}; }
  static ScoreFamily absolute() { return {ScoreKind::absolute, 1.0}; }
  static ScoreFamily bisquare_location() { return bisquare(kBisquareLocationC); }
  static ScoreFamily bisquare_scale() { return bisquare(kBisquareScaleC); }

  ScoreKind kind() const { return kind_; }
  double c() const { return c_; }

  ScoreValue evaluate(double u) const;
  double rho(double u) const;
  double psi(double u) const;
  double psi_prime(double u) const;

  // psi(u) / u, with the limit psi'(0) at the origin. This is the IRWLS
  // weight. Not defined for the absolute family.
  double weight(double u) const;

  bool bounded() const { return kind_ == ScoreKind::bisquare; }
  bool redescending() const { return kind_ == ScoreKind::bisquare; }
  // sup |rho|; infinity for unbounded families.
  double rho_sup() const;

 private:
  ScoreKind kind_;
  double c_;
};

ScoreValue score_eval(const ScoreFamily& family, double u);

}  // namespace robmarg

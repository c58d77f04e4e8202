#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace choquard {

// Exact rational used for boundary classification of user-supplied exponents.
class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  // Accepts "a/b", integers and finite decimals ("2.25", "1e-3").
  static std::optional<Rational> parse(const std::string& text);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  friend int compare(const Rational& a, const Rational& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

struct ProblemParams {
  int N = 3;
  double alpha = 2.0;
  double p = 2.0;
  double q = 4.0;
  double eps = 1.0;
  // Coefficients of -Δu and |u|^{q-2}u. Rescaled equations move ε-powers here;
  // local_weight = 0 is the pure Choquard equation.
  double kinetic_weight = 1.0;
  double local_weight = 1.0;

  std::optional<Rational> alpha_exact;
  std::optional<Rational> p_exact;
  std::optional<Rational> q_exact;

  // Throws std::invalid_argument unless N>=3, 0<alpha<N, p>1, q>2, eps>=0.
  void validate() const;

  double sobolev_exponent() const { return 2.0 * N / (N - 2.0); }
  double lower_choquard() const { return (N + alpha) / N; }
  double upper_choquard() const { return (N + alpha) / (N - 2.0); }
  double hls_critical_q() const { return 2.0 * N * p / (N + alpha); }
  double self_similar_q() const { return 2.0 * (2.0 * p + alpha) / (2.0 + alpha); }

  bool has_local_term() const { return local_weight != 0.0; }
};

}  // namespace choquard

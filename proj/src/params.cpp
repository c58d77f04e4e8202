#include "choquard/params.hpp"

#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace choquard {

namespace {

using i128 = __int128;

Rational make_reduced(i128 num, i128 den) {
  if (den == 0) throw std::domain_error("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  i128 a = num < 0 ? -num : num;
  i128 b = den;
  while (b != 0) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
  constexpr i128 lim = static_cast<i128>(INT64_MAX);
  if (num > lim || num < -lim || den > lim) throw std::overflow_error("rational overflow");
  return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

std::optional<Rational> parse_decimal(const std::string& s) {
  std::size_t i = 0;
  bool neg = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) neg = s[i++] == '-';
  i128 mant = 0;
  int scale = 0;
  bool any = false, dot = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      if (mant > static_cast<i128>(1) << 100) return std::nullopt;
      mant = mant * 10 + (c - '0');
      if (dot) ++scale;
      any = true;
    } else if (c == '.' && !dot) {
      dot = true;
    } else {
      break;
    }
  }
  if (!any) return std::nullopt;
  int expo = 0;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    std::size_t used = 0;
    try {
      expo = std::stoi(s.substr(i), &used);
    } catch (const std::exception&) {
      return std::nullopt;
    }
    i += used;
  }
  if (i != s.size()) return std::nullopt;
  int net = expo - scale;
  if (std::abs(net) > 18) return std::nullopt;
  i128 pow10 = 1;
  for (int k = 0; k < std::abs(net); ++k) pow10 *= 10;
  if (neg) mant = -mant;
  try {
    return net >= 0 ? make_reduced(mant * pow10, 1) : make_reduced(mant, pow10);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
  if (den == 0) throw std::domain_error("rational with zero denominator");
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
  std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
}

std::optional<Rational> Rational::parse(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) return std::nullopt;
  auto slash = s.find('/');
  if (slash == std::string::npos) return parse_decimal(s);
  auto a = parse_decimal(s.substr(0, slash));
  auto b = parse_decimal(s.substr(slash + 1));
  if (!a || !b || b->num() == 0) return std::nullopt;
  try {
    return *a / *b;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

Rational operator+(const Rational& a, const Rational& b) {
  return make_reduced(static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_,
                      static_cast<i128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  return make_reduced(static_cast<i128>(a.num_) * b.den_ - static_cast<i128>(b.num_) * a.den_,
                      static_cast<i128>(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return make_reduced(static_cast<i128>(a.num_) * b.num_, static_cast<i128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  return make_reduced(static_cast<i128>(a.num_) * b.den_, static_cast<i128>(a.den_) * b.num_);
}

int compare(const Rational& a, const Rational& b) {
  i128 lhs = static_cast<i128>(a.num_) * b.den_;
  i128 rhs = static_cast<i128>(b.num_) * a.den_;
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

void ProblemParams::validate() const {
  if (N < 3) throw std::invalid_argument("dimension N must be at least 3");
  if (!(alpha > 0.0 && alpha < N)) throw std::invalid_argument("alpha must lie in (0, N)");
  if (!(p > 1.0)) throw std::invalid_argument("p must exceed 1");
  if (!(q > 2.0)) throw std::invalid_argument("q must exceed 2");
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be finite and >= 0");
  if (!(kinetic_weight >= 0.0) || !(local_weight >= 0.0))
    throw std::invalid_argument("equation weights must be nonnegative");
}

}  // namespace choquard

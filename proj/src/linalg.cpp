#include "fractal/linalg.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace fractal {

Rational parse_rational(const std::string& text) {
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  if (s.empty()) throw std::invalid_argument("empty number");
  if (s.find('/') != std::string::npos) {
    Rational q(s, 10);
    q.canonicalize();
    return q;
  }
  auto dot = s.find('.');
  if (dot == std::string::npos && s.find_first_of("eE") == std::string::npos) return Rational(mpz_class(s, 10));
  if (s.find_first_of("eE") != std::string::npos) return Rational(std::stod(s));
  // Decimal literal: read digits exactly.
  std::string digits = s.substr(0, dot) + s.substr(dot + 1);
  if (digits == "-" || digits == "+" || digits.empty()) digits += "0";
  mpz_class num(digits, 10);
  mpz_class den;
  mpz_ui_pow_ui(den.get_mpz_t(), 10, s.size() - dot - 1);
  Rational q(num, den);
  q.canonicalize();
  return q;
}

Rational rationalize(double x, long max_den) {
  if (!std::isfinite(x)) throw std::invalid_argument("rationalize: non-finite value");
  // Continued-fraction convergents h/k.
  long double v = x;
  long long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  for (int iter = 0; iter < 64; ++iter) {
    long double a = std::floor(v);
    long long ai = static_cast<long long>(a);
    long long h2 = ai * h1 + h0, k2 = ai * k1 + k0;
    if (k2 > max_den) break;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    long double frac = v - a;
    if (frac < 1e-18L) break;
    v = 1.0L / frac;
  }
  Rational q(mpz_class(std::to_string(h1)), mpz_class(std::to_string(k1)));
  q.canonicalize();
  return q;
}

std::string to_string(const Rational& q) { return q.get_str(); }

}  // namespace fractal

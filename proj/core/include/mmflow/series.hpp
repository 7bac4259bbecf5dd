#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmflow {

using BigInt = boost::multiprecision::cpp_int;

struct TruncationMismatch : std::runtime_error {
  explicit TruncationMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct NonUnitLeadingTerm : std::runtime_error {
  explicit NonUnitLeadingTerm(const std::string& what) : std::runtime_error(what) {}
};

// Power series in t with exact integer coefficients, truncated at t^order.
// All binary operations require matching truncation orders (no silent
// re-truncation; the strata bookkeeping depends on knowing the valid range).
class TruncatedSeries {
 public:
  explicit TruncatedSeries(int order) : coeffs_(static_cast<size_t>(order) + 1) {
    if (order < 0) throw std::invalid_argument("TruncatedSeries: negative order");
  }

  static TruncatedSeries one(int order) { return monomial(order, 0); }

  static TruncatedSeries monomial(int order, int degree, BigInt c = 1) {
    TruncatedSeries s(order);
    if (degree <= order) s.coeffs_[static_cast<size_t>(degree)] = std::move(c);
    return s;
  }

  // 1 / (1 - t^step) = 1 + t^step + t^(2 step) + ...
  static TruncatedSeries geometric(int order, int step);

  int order() const { return static_cast<int>(coeffs_.size()) - 1; }

  const BigInt& coeff(int d) const { return coeffs_.at(static_cast<size_t>(d)); }
  BigInt& coeff(int d) { return coeffs_.at(static_cast<size_t>(d)); }
  const std::vector<BigInt>& coeffs() const { return coeffs_; }

  // Degree of the highest nonzero coefficient, or -1 for the zero series.
  int degree() const;
  bool is_zero() const { return degree() < 0; }

  TruncatedSeries& operator+=(const TruncatedSeries& o);
  TruncatedSeries& operator-=(const TruncatedSeries& o);
  friend TruncatedSeries operator+(TruncatedSeries a, const TruncatedSeries& b) { return a += b; }
  friend TruncatedSeries operator-(TruncatedSeries a, const TruncatedSeries& b) { return a -= b; }
  friend TruncatedSeries operator*(const TruncatedSeries& a, const TruncatedSeries& b);

  bool operator==(const TruncatedSeries& o) const { return coeffs_ == o.coeffs_; }

  // Multiply by t^by, dropping anything pushed past the truncation order.
  TruncatedSeries shifted(int by) const;

  TruncatedSeries pow(unsigned e) const;

 private:
  void check_order(const TruncatedSeries& o, const char* op) const;
  std::vector<BigInt> coeffs_;  // coeffs_[d] multiplies t^d
};

// Power-series quotient num/den mod t^(order+1); den must have constant
// term ±1 (throws NonUnitLeadingTerm otherwise).
TruncatedSeries series_div(const TruncatedSeries& num, const TruncatedSeries& den);

struct ExactDivision {
  TruncatedSeries quotient;
  bool exact = false;                 // certified num == quotient * den as polynomials
  std::vector<BigInt> remainder;      // num - quotient*den coefficients (when not certified)
};

// Division with certification.  With max_degree_bound supplied, certifies that
// the quotient is a polynomial of degree <= bound and that quotient*den
// reproduces num exactly as polynomials (requires the full product to fit
// under the truncation order, else TruncationMismatch).  Without a bound,
// reports the truncated remainder instead of certifying.
ExactDivision series_div_exact(const TruncatedSeries& num, const TruncatedSeries& den,
                               std::optional<int> max_degree_bound = std::nullopt);

}  // namespace mmflow

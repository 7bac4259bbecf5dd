#include "mmflow/series.hpp"

namespace mmflow {

TruncatedSeries TruncatedSeries::geometric(int order, int step) {
  if (step <= 0) throw std::invalid_argument("geometric: step must be positive");
  TruncatedSeries s(order);
  for (int d = 0; d <= order; d += step) s.coeffs_[static_cast<size_t>(d)] = 1;
  return s;
}

int TruncatedSeries::degree() const {
  for (int d = order(); d >= 0; --d)
    if (coeffs_[static_cast<size_t>(d)] != 0) return d;
  return -1;
}

void TruncatedSeries::check_order(const TruncatedSeries& o, const char* op) const {
  if (order() != o.order())
    throw TruncationMismatch(std::string(op) + ": truncation orders differ (" +
                             std::to_string(order()) + " vs " + std::to_string(o.order()) + ")");
}

TruncatedSeries& TruncatedSeries::operator+=(const TruncatedSeries& o) {
  check_order(o, "operator+");
  for (size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
  return *this;
}

TruncatedSeries& TruncatedSeries::operator-=(const TruncatedSeries& o) {
  check_order(o, "operator-");
  for (size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
  return *this;
}

TruncatedSeries operator*(const TruncatedSeries& a, const TruncatedSeries& b) {
  a.check_order(b, "operator*");
  int T = a.order();
  TruncatedSeries out(T);
  for (int i = 0; i <= T; ++i) {
    if (a.coeffs_[static_cast<size_t>(i)] == 0) continue;
    for (int j = 0; i + j <= T; ++j) {
      if (b.coeffs_[static_cast<size_t>(j)] == 0) continue;
      out.coeffs_[static_cast<size_t>(i + j)] +=
          a.coeffs_[static_cast<size_t>(i)] * b.coeffs_[static_cast<size_t>(j)];
    }
  }
  return out;
}

TruncatedSeries TruncatedSeries::shifted(int by) const {
  if (by < 0) throw std::invalid_argument("shifted: negative shift");
  TruncatedSeries out(order());
  for (int d = 0; d + by <= order(); ++d)
    out.coeffs_[static_cast<size_t>(d + by)] = coeffs_[static_cast<size_t>(d)];
  return out;
}

TruncatedSeries TruncatedSeries::pow(unsigned e) const {
  TruncatedSeries out = one(order());
  TruncatedSeries base = *this;
  while (e > 0) {
    if (e & 1u) out = out * base;
    base = base * base;
    e >>= 1u;
  }
  return out;
}

TruncatedSeries series_div(const TruncatedSeries& num, const TruncatedSeries& den) {
  if (num.order() != den.order())
    throw TruncationMismatch("series_div: truncation orders differ");
  const BigInt& lead = den.coeff(0);
  if (lead != 1 && lead != -1)
    throw NonUnitLeadingTerm("series_div: denominator constant term must be ±1, got " +
                             lead.str());
  int T = num.order();
  TruncatedSeries q(T);
  // Standard forward substitution: q_d = lead * (num_d - sum_{j<d} q_j den_{d-j});
  // lead is its own inverse.
  for (int d = 0; d <= T; ++d) {
    BigInt acc = num.coeff(d);
    for (int j = 0; j < d; ++j) {
      if (q.coeff(j) == 0) continue;
      acc -= q.coeff(j) * den.coeff(d - j);
    }
    q.coeff(d) = lead * acc;
  }
  return q;
}

ExactDivision series_div_exact(const TruncatedSeries& num, const TruncatedSeries& den,
                               std::optional<int> max_degree_bound) {
  ExactDivision out{series_div(num, den), false, {}};
  int T = num.order();

  if (max_degree_bound) {
    int bound = *max_degree_bound;
    if (bound < 0 || bound > T)
      throw TruncationMismatch("series_div_exact: degree bound outside truncation range");
    for (int d = bound + 1; d <= T; ++d)
      if (out.quotient.coeff(d) != 0) return out;  // not a polynomial under the bound
    int qd = out.quotient.degree();
    int dd = den.degree();
    if (qd >= 0 && dd >= 0 && qd + dd > T)
      throw TruncationMismatch(
          "series_div_exact: quotient*den overflows the truncation order, cannot certify");
    // Full polynomial multiply fits under T, so comparing against num up to T
    // is an exact polynomial identity check.
    TruncatedSeries prod = out.quotient * den;
    out.exact = (prod == num);
    if (!out.exact) {
      TruncatedSeries rem = num - prod;
      out.remainder = rem.coeffs();
    }
    return out;
  }

  TruncatedSeries prod = out.quotient * den;
  TruncatedSeries rem = num - prod;    // zero mod t^(T+1) by construction of q
  out.remainder = rem.coeffs();
  return out;
}

}  // namespace mmflow

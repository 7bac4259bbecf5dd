#pragma once

#include "mmflow/series.hpp"

#include <string>
#include <vector>

// Equivariant Morse-theoretic bookkeeping for the stratified space attached to
// a genus-g surface with one marked boundary holonomy mu = 1/2: the total
// equivariant series, one series per unstable stratum C_lambda (lambda a
// positive integer), and the reduced Poincare polynomial obtained by
// subtracting the strata from the total.  Coefficients are exact integers.
namespace mmflow {

struct CertificateFailure : std::runtime_error {
  explicit CertificateFailure(const std::string& what) : std::runtime_error(what) {}
};

// (1 + t^3)^(2g) / ((1 - t^2)(1 - t^4)) truncated at t^T.
TruncatedSeries equivariant_total(int g, int T);

// t^(2(2 lambda + g - 2)) (1 + t)^(2g) / (1 - t^2) truncated at t^T.
TruncatedSeries stratum_contribution(int g, int lam, int T);

// Real codimension exponent = g + (number of affine walls separating lambda
// from mu); routed through lie-core so the count and the closed form g+2l-2
// are genuinely independent routes.
int index_of_stratum(int g, int lam, double mu = 0.5);

// Positive integers lambda <= lambda_max (each a coweight, checked).
std::vector<int> critical_components(double mu, int lambda_max);

struct StrataCertificate {
  bool polynomial = false;          // vanishes above 6g-6 and attains degree 6g-6 >= 0
  bool nonnegative = false;
  bool palindromic = false;         // c[d] == c[6g-6-d]
  bool matches_closed_form = false; // equals ((1+t^3)^2g - (1+t)^2g t^2g)/((1-t^2)(1-t^4))
  std::string first_failure;        // empty when all checks pass
  bool all() const { return polynomial && nonnegative && palindromic && matches_closed_form; }
};

struct StratumDescriptor {
  int lam = 0;
  int index = 0;
  TruncatedSeries contribution{0};
};

struct StrataReport {
  int g = 0;
  int lambda_max = 0;
  int truncation = 0;
  std::vector<StratumDescriptor> strata;
  TruncatedSeries reduced{0};
  std::vector<BigInt> betti;     // reduced coefficients through the top degree
  StrataCertificate certificate;
};

int default_truncation(int g);                 // 6g + 6
int default_lambda_max(int g, int T);          // smallest valid for the truncation

// total minus strata, with the four-part certificate.  Requires
// T <= 2(2*lambda_max + g - 2) - 1 so omitted strata cannot reach degree T.
StrataReport poincare_reduced(int g, int lambda_max, int T);

// Throwing variant of the certificate check.
void require_certificate(const StrataReport& report);

std::string strata_report_json(const StrataReport& report);

}  // namespace mmflow

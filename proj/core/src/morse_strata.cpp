#include "mmflow/morse_strata.hpp"

#include "mmflow/lie_core.hpp"

#include <json.hpp>

#include <limits>

namespace mmflow {

namespace {

TruncatedSeries one_plus_tcubed_pow(int g, int T) {
  return (TruncatedSeries::one(T) + TruncatedSeries::monomial(T, 3)).pow(2 * static_cast<unsigned>(g));
}

}  // namespace

TruncatedSeries equivariant_total(int g, int T) {
  if (g < 0) throw std::invalid_argument("equivariant_total: negative genus");
  TruncatedSeries num = one_plus_tcubed_pow(g, T);
  return num * TruncatedSeries::geometric(T, 2) * TruncatedSeries::geometric(T, 4);
}

TruncatedSeries stratum_contribution(int g, int lam, int T) {
  if (lam < 1) throw std::invalid_argument("stratum_contribution: lambda must be >= 1");
  int shift = 2 * (2 * lam + g - 2);
  TruncatedSeries torus = (TruncatedSeries::one(T) + TruncatedSeries::monomial(T, 1))
                              .pow(2 * static_cast<unsigned>(g));
  TruncatedSeries s = torus * TruncatedSeries::geometric(T, 2);
  return s.shifted(shift);
}

namespace {

// Critical levels sit exactly on affine walls, where the raw separating count
// is ill-posed.  The index counts walls between the adjacent chambers, so any
// on-wall argument is nudged a quarter alcove toward its partner (never far
// enough to cross another wall) before counting.
double regularize_toward(double x, double other) {
  if (!is_coweight(x)) return x;
  return other >= x ? x + 0.25 : x - 0.25;
}

}  // namespace

int index_of_stratum(int g, int lam, double mu) {
  const double a = regularize_toward(static_cast<double>(lam), mu);
  const double b = regularize_toward(mu, static_cast<double>(lam));
  return g + separating_hyperplane_count(a, b);
}

std::vector<int> critical_components(double mu, int lambda_max) {
  (void)mu;  // one component per positive coweight regardless of the marking
  std::vector<int> out;
  for (int lam = 1; lam <= lambda_max; ++lam) {
    if (!is_coweight(static_cast<double>(lam)))
      throw std::logic_error("critical_components: integer failed the coweight test");
    out.push_back(lam);
  }
  return out;
}

int default_truncation(int g) { return 6 * g + 6; }

int default_lambda_max(int g, int T) {
  // Smallest lambda_max with T <= 2(2*lambda_max + g - 2) - 1.
  int lm = (T + 5 - 2 * g + 3) / 4;  // ceil((T + 5 - 2g)/4)
  return lm < 1 ? 1 : lm;
}

StrataReport poincare_reduced(int g, int lambda_max, int T) {
  if (g < 0) throw std::invalid_argument("poincare_reduced: negative genus");
  if (lambda_max < 1) throw std::invalid_argument("poincare_reduced: lambda_max must be >= 1");
  if (T > 2 * (2 * lambda_max + g - 2) - 1)
    throw std::invalid_argument(
        "poincare_reduced: truncation order reaches the first omitted stratum; "
        "increase lambda_max or lower the truncation");

  StrataReport report{g, lambda_max, T, {}, TruncatedSeries(T), {}, {}};

  TruncatedSeries reduced = equivariant_total(g, T);
  for (int lam = 1; lam <= lambda_max; ++lam) {
    StratumDescriptor d{lam, index_of_stratum(g, lam), stratum_contribution(g, lam, T)};
    reduced -= d.contribution;
    report.strata.push_back(std::move(d));
  }
  report.reduced = reduced;

  const int top = 6 * g - 6;
  StrataCertificate& cert = report.certificate;

  auto fail = [&cert](const std::string& msg) {
    if (cert.first_failure.empty()) cert.first_failure = msg;
  };

  // (i) polynomial of the expected top degree.  Genus 0 and 1 land here when
  // the expected degree collapses (top < 0 for g=0): the series is still
  // returned, only the certificate reports the failure.
  cert.polynomial = top >= 0 && reduced.degree() == top;
  if (top < 0) {
    fail("polynomial: expected top degree " + std::to_string(top) + " is negative");
  } else if (reduced.degree() != top) {
    fail("polynomial: degree " + std::to_string(reduced.degree()) + " != expected " +
         std::to_string(top));
  }

  // (ii) nonnegative coefficients.
  cert.nonnegative = true;
  for (int d = 0; d <= T; ++d) {
    if (reduced.coeff(d) < 0) {
      cert.nonnegative = false;
      fail("nonnegative: coefficient of t^" + std::to_string(d) + " is " +
           reduced.coeff(d).str());
      break;
    }
  }

  // (iii) palindromic about top/2 (coefficients outside [0, top] read as 0).
  cert.palindromic = true;
  for (int d = 0; d <= T; ++d) {
    int mirror = top - d;
    BigInt other = (mirror >= 0 && mirror <= T) ? reduced.coeff(mirror) : BigInt(0);
    if (reduced.coeff(d) != other) {
      cert.palindromic = false;
      fail("palindromic: coefficient of t^" + std::to_string(d) + " != coefficient of t^" +
           std::to_string(mirror));
      break;
    }
  }

  // (iv) closed form ((1+t^3)^2g - (1+t)^2g t^2g) / ((1-t^2)(1-t^4)).
  TruncatedSeries closed_num = one_plus_tcubed_pow(g, T);
  closed_num -= (TruncatedSeries::one(T) + TruncatedSeries::monomial(T, 1))
                    .pow(2 * static_cast<unsigned>(g))
                    .shifted(2 * g);
  TruncatedSeries den = (TruncatedSeries::one(T) - TruncatedSeries::monomial(T, 2)) *
                        (TruncatedSeries::one(T) - TruncatedSeries::monomial(T, 4));
  // Multiply-back route: reduced * den must reproduce the closed-form numerator.
  TruncatedSeries back = reduced * den;
  cert.matches_closed_form = (back == closed_num);
  if (!cert.matches_closed_form) {
    for (int d = 0; d <= T; ++d)
      if (back.coeff(d) != closed_num.coeff(d)) {
        fail("matches_closed_form: first mismatch at degree " + std::to_string(d));
        break;
      }
  }

  int report_top = top >= 0 ? top : reduced.degree();
  for (int d = 0; d <= report_top && d <= T; ++d) report.betti.push_back(reduced.coeff(d));

  return report;
}

void require_certificate(const StrataReport& report) {
  if (!report.certificate.all())
    throw CertificateFailure("certificate failed: " + report.certificate.first_failure);
}

std::string strata_report_json(const StrataReport& report) {
  using json = nlohmann::ordered_json;
  json j;
  j["g"] = report.g;
  j["lambda_max"] = report.lambda_max;
  j["truncation"] = report.truncation;
  j["strata"] = json::array();
  for (const auto& s : report.strata)
    j["strata"].push_back(json{{"lambda", s.lam}, {"index", s.index}});
  j["betti"] = json::array();
  for (const auto& b : report.betti) {
    if (b >= std::numeric_limits<long long>::min() && b <= std::numeric_limits<long long>::max())
      j["betti"].push_back(b.convert_to<long long>());
    else
      j["betti"].push_back(b.str());
  }
  j["certificate"] = json{{"polynomial", report.certificate.polynomial},
                          {"nonnegative", report.certificate.nonnegative},
                          {"palindromic", report.certificate.palindromic},
                          {"matches_closed_form", report.certificate.matches_closed_form}};
  if (!report.certificate.first_failure.empty())
    j["certificate"]["first_failure"] = report.certificate.first_failure;
  return j.dump(2) + "\n";
}

}  // namespace mmflow

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

// Birkhoff factorization of matrix Laurent polynomial loops: g(z) on |z| = 1
// splits as g = g_minus z^mu g_plus with g_minus supported in nonpositive
// degrees and normalized to the identity at infinity, g_plus polynomial and
// invertible on the closed unit disk, and mu the integer row exponents whose
// sorted sequence labels the double coset of the loop.  Exponents are found
// row by row: mu_i is the largest lambda for which some row vector m with
// nonpositive support and m(infinity) = e_i satisfies m g = z^lambda p with p
// polynomial, a least-squares feasibility problem over Fourier samples of
// g^{-1}.
namespace mmflow {

class SingularOnCircle : public std::runtime_error {
 public:
  explicit SingularOnCircle(const std::string& what) : std::runtime_error(what) {}
};

class NumericalBreakdown : public std::runtime_error {
 public:
  NumericalBreakdown(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class LaurentMatrix {
 public:
  LaurentMatrix(int rows, int cols);

  static LaurentMatrix identity(int n);
  static LaurentMatrix monomial(int n, int degree);  // z^degree * I

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool is_zero() const;
  int min_degree() const;  // of the trimmed support; 0 for the zero loop
  int max_degree() const;

  Eigen::MatrixXcd coeff(int degree) const;  // zero outside the support
  void set_coeff(int degree, const Eigen::MatrixXcd& c);
  void add_coeff(int degree, const Eigen::MatrixXcd& c);

  Eigen::MatrixXcd eval(const std::complex<double>& z) const;

  LaurentMatrix operator*(const LaurentMatrix& rhs) const;
  LaurentMatrix operator+(const LaurentMatrix& rhs) const;
  LaurentMatrix operator-(const LaurentMatrix& rhs) const;
  LaurentMatrix shifted(int by) const;                          // times z^by
  LaurentMatrix row_shifted(const std::vector<int>& by) const;  // row i times z^by[i]
  LaurentMatrix trimmed(double tol) const;  // drop coefficients below tol in max norm
  double max_abs() const;

 private:
  int rows_, cols_;
  int lo_ = 0;
  std::vector<Eigen::MatrixXcd> coeffs_;  // degree lo_ + index

  void ensure_degree(int degree);
};

double min_singular_on_circle(const LaurentMatrix& g, int n_samples = 256);

// Winding of det g around the circle by phase unwrapping; the sample count
// doubles until each step turns by less than a quarter circle.
int winding_number(const LaurentMatrix& g, int n_samples = 1024);

struct FactorizeOptions {
  int fft_size = 1024;       // Fourier samples for the feasibility systems
  int max_fft_size = 8192;   // retry ceiling when the residual gate fails
  double feas_tol = 1e-8;    // least-squares residual accepted as feasible
  double residual_tol = 1e-8;
  int residual_samples = 256;
  double singular_tol = 1e-8;
};

struct BirkhoffFactorization {
  LaurentMatrix minus{0, 0};
  LaurentMatrix plus{0, 0};
  std::vector<int> row_exponents;  // mu in row order, reconstruct uses these
  std::vector<int> indices;        // sorted nonincreasing, the coset invariant
  bool normalized = false;         // row exponents already nonincreasing

  LaurentMatrix reconstruct() const;  // minus * z^mu * plus
  bool trivial() const;               // all exponents zero
};

BirkhoffFactorization birkhoff_factorize(const LaurentMatrix& g,
                                         const FactorizeOptions& options = {});

// max_s |g(z_s) - f(z_s)|_F / max(1, max_s |g(z_s)|_F) over circle samples
double reconstruction_residual(const LaurentMatrix& g, const BirkhoffFactorization& f,
                               int n_samples = 256);

struct CosetLabel {
  int total = 0;             // sum of the indices, equals the winding
  double center = 0.0;       // total / n, the central part of the label
  std::vector<int> indices;  // sorted nonincreasing
};

CosetLabel coset_label(const BirkhoffFactorization& f);

std::string laurent_to_json(const LaurentMatrix& g);
LaurentMatrix laurent_from_json(const std::string& text);
std::string factorization_to_json(const LaurentMatrix& g, const BirkhoffFactorization& f);

}  // namespace mmflow

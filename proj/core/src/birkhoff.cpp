#include "mmflow/birkhoff.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mmflow {

namespace {

using Cplx = std::complex<double>;
constexpr double kPi = 3.14159265358979323846;

// iterative radix-2 FFT, in place; inverse = conjugate trick with 1/N
void fft_inplace(std::vector<Cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft_inplace: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const Cplx wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      Cplx w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const Cplx u = a[i + j];
        const Cplx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (Cplx& x : a) x /= static_cast<double>(n);
}

std::vector<Cplx> circle_points(int n) {
  std::vector<Cplx> z(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    const double th = 2.0 * kPi * s / n;
    z[static_cast<std::size_t>(s)] = Cplx(std::cos(th), std::sin(th));
  }
  return z;
}

int wrap_degree(int k, int F) {
  int r = k % F;
  if (r < 0) r += F;
  return r;
}

}  // namespace

LaurentMatrix::LaurentMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("LaurentMatrix: negative dimensions");
}

LaurentMatrix LaurentMatrix::identity(int n) {
  LaurentMatrix g(n, n);
  g.set_coeff(0, Eigen::MatrixXcd::Identity(n, n));
  return g;
}

LaurentMatrix LaurentMatrix::monomial(int n, int degree) {
  LaurentMatrix g(n, n);
  g.set_coeff(degree, Eigen::MatrixXcd::Identity(n, n));
  return g;
}

void LaurentMatrix::ensure_degree(int degree) {
  if (coeffs_.empty()) {
    lo_ = degree;
    coeffs_.emplace_back(Eigen::MatrixXcd::Zero(rows_, cols_));
    return;
  }
  while (degree < lo_) {
    coeffs_.insert(coeffs_.begin(), Eigen::MatrixXcd::Zero(rows_, cols_));
    --lo_;
  }
  while (degree >= lo_ + static_cast<int>(coeffs_.size()))
    coeffs_.emplace_back(Eigen::MatrixXcd::Zero(rows_, cols_));
}

Eigen::MatrixXcd LaurentMatrix::coeff(int degree) const {
  const int idx = degree - lo_;
  if (idx < 0 || idx >= static_cast<int>(coeffs_.size()))
    return Eigen::MatrixXcd::Zero(rows_, cols_);
  return coeffs_[static_cast<std::size_t>(idx)];
}

void LaurentMatrix::set_coeff(int degree, const Eigen::MatrixXcd& c) {
  if (c.rows() != rows_ || c.cols() != cols_)
    throw std::invalid_argument("LaurentMatrix::set_coeff: coefficient shape mismatch");
  ensure_degree(degree);
  coeffs_[static_cast<std::size_t>(degree - lo_)] = c;
}

void LaurentMatrix::add_coeff(int degree, const Eigen::MatrixXcd& c) {
  if (c.rows() != rows_ || c.cols() != cols_)
    throw std::invalid_argument("LaurentMatrix::add_coeff: coefficient shape mismatch");
  ensure_degree(degree);
  coeffs_[static_cast<std::size_t>(degree - lo_)] += c;
}

bool LaurentMatrix::is_zero() const {
  for (const auto& c : coeffs_)
    if (c.cwiseAbs().maxCoeff() != 0.0) return false;
  return true;
}

int LaurentMatrix::min_degree() const {
  for (std::size_t i = 0; i < coeffs_.size(); ++i)
    if (coeffs_[i].cwiseAbs().maxCoeff() != 0.0) return lo_ + static_cast<int>(i);
  return 0;
}

int LaurentMatrix::max_degree() const {
  for (std::size_t i = coeffs_.size(); i > 0; --i)
    if (coeffs_[i - 1].cwiseAbs().maxCoeff() != 0.0) return lo_ + static_cast<int>(i) - 1;
  return 0;
}

Eigen::MatrixXcd LaurentMatrix::eval(const std::complex<double>& z) const {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rows_, cols_);
  if (coeffs_.empty()) return out;
  // z^lo by repeated multiplication; supports all loops evaluated on |z| = 1
  Cplx zp(1.0, 0.0);
  if (lo_ >= 0) {
    for (int i = 0; i < lo_; ++i) zp *= z;
  } else {
    const Cplx zi = 1.0 / z;
    for (int i = 0; i < -lo_; ++i) zp *= zi;
  }
  for (const auto& c : coeffs_) {
    if (c.cwiseAbs().maxCoeff() != 0.0) out += c * zp;
    zp *= z;
  }
  return out;
}

LaurentMatrix LaurentMatrix::operator*(const LaurentMatrix& rhs) const {
  if (cols_ != rhs.rows_) throw std::invalid_argument("LaurentMatrix: product shape mismatch");
  LaurentMatrix out(rows_, rhs.cols_);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) {
    if (coeffs_[i].cwiseAbs().maxCoeff() == 0.0) continue;
    for (std::size_t j = 0; j < rhs.coeffs_.size(); ++j) {
      if (rhs.coeffs_[j].cwiseAbs().maxCoeff() == 0.0) continue;
      out.add_coeff(lo_ + static_cast<int>(i) + rhs.lo_ + static_cast<int>(j),
                    coeffs_[i] * rhs.coeffs_[j]);
    }
  }
  return out;
}

LaurentMatrix LaurentMatrix::operator+(const LaurentMatrix& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
    throw std::invalid_argument("LaurentMatrix: sum shape mismatch");
  LaurentMatrix out = *this;
  for (std::size_t j = 0; j < rhs.coeffs_.size(); ++j)
    out.add_coeff(rhs.lo_ + static_cast<int>(j), rhs.coeffs_[j]);
  return out;
}

LaurentMatrix LaurentMatrix::operator-(const LaurentMatrix& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
    throw std::invalid_argument("LaurentMatrix: difference shape mismatch");
  LaurentMatrix out = *this;
  for (std::size_t j = 0; j < rhs.coeffs_.size(); ++j)
    out.add_coeff(rhs.lo_ + static_cast<int>(j), -rhs.coeffs_[j]);
  return out;
}

LaurentMatrix LaurentMatrix::shifted(int by) const {
  LaurentMatrix out = *this;
  out.lo_ += by;
  return out;
}

LaurentMatrix LaurentMatrix::row_shifted(const std::vector<int>& by) const {
  if (static_cast<int>(by.size()) != rows_)
    throw std::invalid_argument("LaurentMatrix::row_shifted: one shift per row required");
  LaurentMatrix out(rows_, cols_);
  for (std::size_t j = 0; j < coeffs_.size(); ++j) {
    const int d = lo_ + static_cast<int>(j);
    for (int i = 0; i < rows_; ++i) {
      if (coeffs_[j].row(i).cwiseAbs().maxCoeff() == 0.0) continue;
      Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(rows_, cols_);
      block.row(i) = coeffs_[j].row(i);
      out.add_coeff(d + by[static_cast<std::size_t>(i)], block);
    }
  }
  return out;
}

LaurentMatrix LaurentMatrix::trimmed(double tol) const {
  LaurentMatrix out(rows_, cols_);
  for (std::size_t j = 0; j < coeffs_.size(); ++j) {
    Eigen::MatrixXcd c = coeffs_[j];
    bool any = false;
    for (int a = 0; a < rows_; ++a)
      for (int b = 0; b < cols_; ++b) {
        if (std::abs(c(a, b)) <= tol)
          c(a, b) = Cplx(0.0, 0.0);
        else
          any = true;
      }
    if (any) out.add_coeff(lo_ + static_cast<int>(j), c);
  }
  return out;
}

double LaurentMatrix::max_abs() const {
  double m = 0.0;
  for (const auto& c : coeffs_)
    if (c.size() > 0) m = std::max(m, c.cwiseAbs().maxCoeff());
  return m;
}

double min_singular_on_circle(const LaurentMatrix& g, int n_samples) {
  if (g.rows() != g.cols() || g.rows() == 0)
    throw std::invalid_argument("min_singular_on_circle: square nonempty loop required");
  double worst = std::numeric_limits<double>::infinity();
  for (const Cplx& z : circle_points(n_samples)) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(g.eval(z));
    worst = std::min(worst, svd.singularValues().minCoeff());
  }
  return worst;
}

int winding_number(const LaurentMatrix& g, int n_samples) {
  if (g.rows() != g.cols() || g.rows() == 0)
    throw std::invalid_argument("winding_number: square nonempty loop required");
  for (int m = n_samples; m <= 1 << 16; m *= 2) {
    const std::vector<Cplx> zs = circle_points(m);
    double total = 0.0;
    bool ok = true;
    Cplx prev = g.eval(zs[0]).determinant();
    if (std::abs(prev) == 0.0) throw SingularOnCircle("winding_number: determinant vanishes");
    for (int s = 1; s <= m; ++s) {
      const Cplx cur = g.eval(zs[static_cast<std::size_t>(s % m)]).determinant();
      if (std::abs(cur) == 0.0) throw SingularOnCircle("winding_number: determinant vanishes");
      const double step = std::arg(cur / prev);
      if (std::abs(step) > 0.5 * kPi) {
        ok = false;  // quarter-turn guard tripped, refine
        break;
      }
      total += step;
      prev = cur;
    }
    if (!ok) continue;
    const double turns = total / (2.0 * kPi);
    const long long rounded = std::llround(turns);
    if (std::abs(turns - static_cast<double>(rounded)) > 1e-6) continue;
    return static_cast<int>(rounded);
  }
  throw NumericalBreakdown("winding", "phase unwrapping failed to stabilize");
}

LaurentMatrix BirkhoffFactorization::reconstruct() const {
  return minus * plus.row_shifted(row_exponents);
}

bool BirkhoffFactorization::trivial() const {
  return std::all_of(indices.begin(), indices.end(), [](int k) { return k == 0; });
}

namespace {

struct FourierData {
  int F = 0;
  std::vector<Eigen::MatrixXcd> c;  // aliased Fourier coefficients of g^{-1}, index wrap_degree
};

FourierData inverse_fourier_data(const LaurentMatrix& g, int F) {
  const int n = g.rows();
  const std::vector<Cplx> zs = circle_points(F);
  std::vector<Eigen::MatrixXcd> ginv(static_cast<std::size_t>(F));
  for (int s = 0; s < F; ++s) {
    const Eigen::MatrixXcd gs = g.eval(zs[static_cast<std::size_t>(s)]);
    ginv[static_cast<std::size_t>(s)] =
        gs.partialPivLu().solve(Eigen::MatrixXcd::Identity(n, n));
  }
  FourierData data;
  data.F = F;
  data.c.assign(static_cast<std::size_t>(F), Eigen::MatrixXcd::Zero(n, n));
  std::vector<Cplx> buf(static_cast<std::size_t>(F));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      for (int s = 0; s < F; ++s) buf[static_cast<std::size_t>(s)] = ginv[static_cast<std::size_t>(s)](a, b);
      fft_inplace(buf, false);
      for (int k = 0; k < F; ++k)
        data.c[static_cast<std::size_t>(k)](a, b) = buf[static_cast<std::size_t>(k)] / static_cast<double>(F);
    }
  return data;
}

struct RowSolution {
  int exponent = 0;
  std::vector<Eigen::RowVectorXcd> p;  // polynomial coefficients p_0 .. p_D
};

// Feasibility of m g = z^lambda p for unit row i: unknowns are the
// coefficients of p, the equations kill the Fourier coefficients of
// m = z^lambda p g^{-1} in degrees 1 .. F/2 - 1 and pin degree 0 to e_i.
bool try_row_exponent(const FourierData& data, int n, int i, int lambda, int dmax,
                      double feas_tol, RowSolution& out) {
  const int D = dmax - lambda;
  if (D < 0) return false;
  const int F = data.F;
  const int n_freq = F / 2;  // degrees 0 .. F/2 - 1
  const int rows = n * n_freq;
  const int cols = n * (D + 1);

  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(rows, cols);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(rows);
  rhs(i) = Cplx(1.0, 0.0);
  for (int k = 0; k < n_freq; ++k) {
    for (int d = 0; d <= D; ++d) {
      // coefficient of z^k in z^(lambda + d) p_d g^{-1}(z)
      const Eigen::MatrixXcd& C = data.c[static_cast<std::size_t>(wrap_degree(k - lambda - d, F))];
      for (int c = 0; c < n; ++c)
        for (int b = 0; b < n; ++b) A(k * n + c, d * n + b) = C(b, c);
    }
  }

  // Exact null directions of this system surface with singular values at FFT
  // roundoff scale, which outgrows Eigen's eps-based default cut once the
  // sample count is large; rank them out explicitly or the least-norm solve
  // drifts O(1e-4) along the null space.  Anything below 1e-10 relative
  // contributes less than feas_tol to the residual and cannot be a real
  // constraint direction.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod;
  cod.setThreshold(1e-10);
  cod.compute(A);
  const Eigen::VectorXcd x = cod.solve(rhs);
  const double residual = (A * x - rhs).norm();
  if (residual > feas_tol) return false;

  out.exponent = lambda;
  out.p.assign(static_cast<std::size_t>(D + 1), Eigen::RowVectorXcd::Zero(n));
  for (int d = 0; d <= D; ++d)
    for (int b = 0; b < n; ++b) out.p[static_cast<std::size_t>(d)](b) = x(d * n + b);
  return true;
}

BirkhoffFactorization attempt_factorize(const LaurentMatrix& g, int winding, int F,
                                        const FactorizeOptions& opts) {
  const int n = g.rows();
  const int dmax = g.max_degree();
  const int dmin = g.min_degree();
  const int lam_hi = dmax;
  const int lam_lo = std::min(dmin, winding - (n - 1) * dmax);

  const FourierData data = inverse_fourier_data(g, F);

  BirkhoffFactorization fact;
  fact.row_exponents.resize(static_cast<std::size_t>(n));
  std::vector<RowSolution> rows(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    bool found = false;
    for (int lambda = lam_hi; lambda >= lam_lo; --lambda) {
      if (try_row_exponent(data, n, i, lambda, dmax, opts.feas_tol, rows[static_cast<std::size_t>(i)])) {
        fact.row_exponents[static_cast<std::size_t>(i)] = lambda;
        found = true;
        break;
      }
    }
    if (!found)
      throw NumericalBreakdown("exponent-search",
                               "no feasible exponent for row " + std::to_string(i));
  }

  const int total = std::accumulate(fact.row_exponents.begin(), fact.row_exponents.end(), 0);
  if (total != winding)
    throw NumericalBreakdown("winding-check",
                             "row exponents sum to " + std::to_string(total) +
                                 " but the determinant winds " + std::to_string(winding) + " times");

  const double scale = std::max(1.0, g.max_abs());

  LaurentMatrix plus(n, n);
  for (int i = 0; i < n; ++i) {
    const RowSolution& row = rows[static_cast<std::size_t>(i)];
    for (std::size_t d = 0; d < row.p.size(); ++d) {
      if (row.p[d].cwiseAbs().maxCoeff() <= 1e-12 * scale) continue;
      Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(n, n);
      block.row(i) = row.p[d];
      plus.add_coeff(static_cast<int>(d), block);
    }
  }

  // g_minus = g g_plus^{-1} z^{-mu}, recovered from circle samples
  const std::vector<Cplx> zs = circle_points(F);
  std::vector<Eigen::MatrixXcd> samples(static_cast<std::size_t>(F));
  for (int s = 0; s < F; ++s) {
    const Cplx z = zs[static_cast<std::size_t>(s)];
    const Eigen::MatrixXcd ps = plus.eval(z);
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(ps);
    Eigen::MatrixXcd x = g.eval(z) * lu.solve(Eigen::MatrixXcd::Identity(n, n)).eval();
    for (int j = 0; j < n; ++j) {
      Cplx zp(1.0, 0.0);
      const int mu = fact.row_exponents[static_cast<std::size_t>(j)];
      const Cplx base = mu >= 0 ? 1.0 / z : z;
      for (int q = 0; q < std::abs(mu); ++q) zp *= base;
      x.col(j) *= zp;
    }
    samples[static_cast<std::size_t>(s)] = x;
  }

  std::vector<Eigen::MatrixXcd> coeffs(static_cast<std::size_t>(F), Eigen::MatrixXcd::Zero(n, n));
  std::vector<Cplx> buf(static_cast<std::size_t>(F));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      for (int s = 0; s < F; ++s) buf[static_cast<std::size_t>(s)] = samples[static_cast<std::size_t>(s)](a, b);
      fft_inplace(buf, false);
      for (int k = 0; k < F; ++k)
        coeffs[static_cast<std::size_t>(k)](a, b) = buf[static_cast<std::size_t>(k)] / static_cast<double>(F);
    }

  double positive_mass = 0.0;
  for (int d = 1; d < F / 2; ++d)
    positive_mass = std::max(positive_mass, coeffs[static_cast<std::size_t>(d)].cwiseAbs().maxCoeff());
  if (positive_mass > 1e-6 * scale)
    throw NumericalBreakdown("minus-support", "minus factor leaks into positive degrees");

  LaurentMatrix minus(n, n);
  for (int d = -F / 2; d <= 0; ++d) {
    const Eigen::MatrixXcd& c = coeffs[static_cast<std::size_t>(wrap_degree(d, F))];
    if (c.cwiseAbs().maxCoeff() > 1e-12 * scale) minus.set_coeff(d, c);
  }
  if ((minus.coeff(0) - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-6)
    throw NumericalBreakdown("minus-normalization", "minus factor is not the identity at infinity");

  fact.minus = minus;
  fact.plus = plus;
  fact.indices = fact.row_exponents;
  std::sort(fact.indices.begin(), fact.indices.end(), std::greater<int>());
  fact.normalized = fact.indices == fact.row_exponents;
  return fact;
}

}  // namespace

BirkhoffFactorization birkhoff_factorize(const LaurentMatrix& g, const FactorizeOptions& options) {
  if (g.rows() != g.cols() || g.rows() == 0)
    throw std::invalid_argument("birkhoff_factorize: square nonempty loop required");
  if (g.is_zero()) throw SingularOnCircle("birkhoff_factorize: zero loop");
  const double sigma = min_singular_on_circle(g, options.residual_samples);
  if (sigma <= options.singular_tol)
    throw SingularOnCircle("birkhoff_factorize: loop is numerically singular on the circle");

  const int w = winding_number(g);
  std::string last = "unknown";
  for (int F = options.fft_size; F <= options.max_fft_size; F *= 2) {
    try {
      BirkhoffFactorization fact = attempt_factorize(g, w, F, options);
      const double res = reconstruction_residual(g, fact, options.residual_samples);
      if (res <= options.residual_tol) return fact;
      last = "reconstruction residual " + std::to_string(res);
    } catch (const NumericalBreakdown& e) {
      last = e.what();
    }
  }
  throw NumericalBreakdown("factorize", "all sample sizes exhausted; last failure: " + last);
}

double reconstruction_residual(const LaurentMatrix& g, const BirkhoffFactorization& f,
                               int n_samples) {
  const LaurentMatrix recon = f.reconstruct();
  double err = 0.0, scale = 1.0;
  for (const Cplx& z : circle_points(n_samples)) {
    const Eigen::MatrixXcd gz = g.eval(z);
    err = std::max(err, (gz - recon.eval(z)).norm());
    scale = std::max(scale, gz.norm());
  }
  return err / scale;
}

CosetLabel coset_label(const BirkhoffFactorization& f) {
  CosetLabel label;
  label.indices = f.indices;
  label.total = std::accumulate(label.indices.begin(), label.indices.end(), 0);
  label.center = label.indices.empty()
                     ? 0.0
                     : static_cast<double>(label.total) / static_cast<double>(label.indices.size());
  return label;
}

namespace {

nlohmann::ordered_json laurent_json_obj(const LaurentMatrix& g) {
  nlohmann::ordered_json j;
  j["rows"] = g.rows();
  j["cols"] = g.cols();
  nlohmann::ordered_json terms = nlohmann::ordered_json::array();
  if (!g.is_zero()) {
    for (int d = g.min_degree(); d <= g.max_degree(); ++d) {
      const Eigen::MatrixXcd c = g.coeff(d);
      if (c.cwiseAbs().maxCoeff() == 0.0) continue;
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (int a = 0; a < g.rows(); ++a) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int b = 0; b < g.cols(); ++b) row.push_back({c(a, b).real(), c(a, b).imag()});
        rows.push_back(std::move(row));
      }
      terms.push_back({{"degree", d}, {"matrix", std::move(rows)}});
    }
  }
  j["terms"] = std::move(terms);
  return j;
}

}  // namespace

std::string laurent_to_json(const LaurentMatrix& g) { return laurent_json_obj(g).dump(2) + "\n"; }

LaurentMatrix laurent_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  const int rows = j.at("rows").get<int>();
  const int cols = j.at("cols").get<int>();
  LaurentMatrix g(rows, cols);
  for (const auto& term : j.at("terms")) {
    const int d = term.at("degree").get<int>();
    const auto& mat = term.at("matrix");
    if (static_cast<int>(mat.size()) != rows)
      throw std::invalid_argument("laurent_from_json: row count mismatch");
    Eigen::MatrixXcd c(rows, cols);
    for (int a = 0; a < rows; ++a) {
      const auto& row = mat.at(static_cast<std::size_t>(a));
      if (static_cast<int>(row.size()) != cols)
        throw std::invalid_argument("laurent_from_json: column count mismatch");
      for (int b = 0; b < cols; ++b) {
        const auto& entry = row.at(static_cast<std::size_t>(b));
        if (entry.is_number()) {
          c(a, b) = Cplx(entry.get<double>(), 0.0);
        } else {
          c(a, b) = Cplx(entry.at(0).get<double>(), entry.at(1).get<double>());
        }
      }
    }
    g.add_coeff(d, c);
  }
  return g;
}

std::string factorization_to_json(const LaurentMatrix& g, const BirkhoffFactorization& f) {
  const CosetLabel label = coset_label(f);
  nlohmann::ordered_json j;
  j["indices"] = label.indices;
  j["row_exponents"] = f.row_exponents;
  j["total"] = label.total;
  j["center"] = label.center;
  j["normalized"] = f.normalized;
  j["trivial"] = f.trivial();
  j["residual"] = reconstruction_residual(g, f);
  j["minus"] = laurent_json_obj(f.minus);
  j["plus"] = laurent_json_obj(f.plus);
  return j.dump(2) + "\n";
}

}  // namespace mmflow

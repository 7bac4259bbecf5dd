#include "mmflow/boundary_flow.hpp"

#include "mmflow/lie_core.hpp"
#include "mmflow/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace mmflow {

namespace {

constexpr double kKernelTol = 1e-12;

// sinh(kappa x) / sinh(kappa L) and cosh(kappa x) / sinh(kappa L) for
// 0 <= x <= L, written so every exponential has a nonpositive argument.
double sinh_ratio(double kappa, double x, double L) {
  const double num = std::exp(kappa * (x - L)) * (1.0 - std::exp(-2.0 * kappa * x));
  return num / (1.0 - std::exp(-2.0 * kappa * L));
}

double cosh_ratio(double kappa, double x, double L) {
  const double num = std::exp(kappa * (x - L)) * (1.0 + std::exp(-2.0 * kappa * x));
  return num / (1.0 - std::exp(-2.0 * kappa * L));
}

}  // namespace

const char* component_name(LieComponent c) {
  switch (c) {
    case LieComponent::h: return "h";
    case LieComponent::e_plus: return "e+";
    default: return "e-";
  }
}

LieComponent component_from_name(const std::string& name) {
  if (name == "h") return LieComponent::h;
  if (name == "e+") return LieComponent::e_plus;
  if (name == "e-") return LieComponent::e_minus;
  throw std::invalid_argument("unknown Lie component name: " + name);
}

double CylinderModel::twist() const {
  const double a = RootDatum::alpha(xi);
  const double nearest = std::round(a);
  if (std::abs(a - nearest) <= RootDatum::wall_tol) return nearest;
  return a;
}

double CylinderModel::kappa(int k, LieComponent c) const {
  const double a = twist();
  switch (c) {
    case LieComponent::h: return std::abs(static_cast<double>(k));
    case LieComponent::e_plus: return std::abs(k + a);
    default: return std::abs(k - a);
  }
}

ExtensionCoeffs harmonic_extension(double kappa, double L, std::complex<double> u0,
                                   std::complex<double> uL) {
  if (L <= 0.0) throw std::invalid_argument("harmonic_extension: length must be positive");
  if (kappa < 0.0) throw std::invalid_argument("harmonic_extension: kappa must be nonnegative");
  ExtensionCoeffs ext;
  ext.kappa = kappa;
  ext.length = L;
  ext.u0 = u0;
  ext.uL = uL;
  if (kappa == 0.0) {
    ext.affine = true;
    ext.A = u0;
    ext.B = (uL - u0) / L;
  } else {
    const double ep = std::exp(kappa * L);
    const double em = std::exp(-kappa * L);
    ext.A = (uL - u0 * em) / (ep - em);
    ext.B = (u0 * ep - uL) / (ep - em);
  }
  return ext;
}

std::complex<double> ExtensionCoeffs::value(double t) const {
  if (affine) return A + B * t;
  return u0 * sinh_ratio(kappa, length - t, length) + uL * sinh_ratio(kappa, t, length);
}

std::complex<double> ExtensionCoeffs::derivative(double t) const {
  if (affine) return B;
  return kappa * (uL * cosh_ratio(kappa, t, length) - u0 * cosh_ratio(kappa, length - t, length));
}

Eigen::Matrix2d dtn_matrix(double kappa, double L) {
  if (L <= 0.0) throw std::invalid_argument("dtn_matrix: length must be positive");
  Eigen::Matrix2d D;
  if (kappa <= kKernelTol) {
    D << 1.0 / L, -1.0 / L, -1.0 / L, 1.0 / L;
    return D;
  }
  // coth and csch in overflow-free form
  const double em = std::exp(-2.0 * kappa * L);
  const double coth = (1.0 + em) / (1.0 - em);
  const double csch = 2.0 * std::exp(-kappa * L) / (1.0 - em);
  D << kappa * coth, -kappa * csch, -kappa * csch, kappa * coth;
  return D;
}

std::vector<DtnBlock> dtn_assemble(const CylinderModel& model) {
  std::vector<DtnBlock> blocks;
  const int n = model.mode_cutoff;
  blocks.reserve(static_cast<std::size_t>(2 * n + 1) * 3);
  for (int k = -n; k <= n; ++k) {
    for (LieComponent c : {LieComponent::h, LieComponent::e_plus, LieComponent::e_minus}) {
      DtnBlock b;
      b.k = k;
      b.c = c;
      b.kappa = model.kappa(k, c);
      b.D = dtn_matrix(b.kappa, model.length);
      blocks.push_back(b);
    }
  }
  return blocks;
}

Eigen::Matrix2d fd_dtn_matrix(double kappa, double L, int grid_n) {
  if (grid_n < 2) throw std::invalid_argument("fd_dtn_matrix: need at least 2 subintervals");
  const double h = L / grid_n;
  const double diag = -(2.0 + kappa * kappa * h * h);
  const int m = grid_n - 1;  // interior unknowns

  Eigen::Matrix2d D;
  for (int bc = 0; bc < 2; ++bc) {
    const double u_left = (bc == 0) ? 1.0 : 0.0;
    const double u_right = (bc == 0) ? 0.0 : 1.0;

    // Thomas solve of u_{i-1} + diag*u_i + u_{i+1} = rhs_i
    std::vector<double> c(m, 0.0), d(m, 0.0);
    std::vector<double> rhs(m, 0.0);
    rhs[0] -= u_left;
    rhs[m - 1] -= u_right;
    c[0] = 1.0 / diag;
    d[0] = rhs[0] / diag;
    for (int i = 1; i < m; ++i) {
      const double denom = diag - c[i - 1];
      c[i] = 1.0 / denom;
      d[i] = (rhs[i] - d[i - 1]) / denom;
    }
    std::vector<double> u(grid_n + 1, 0.0);
    u[0] = u_left;
    u[grid_n] = u_right;
    u[m] = d[m - 1];
    for (int i = m - 1; i >= 1; --i) u[i] = d[i - 1] - c[i - 1] * u[i + 1];

    // one-sided second-order derivative extraction, outward normals
    const double du0 = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    const double duL = (3.0 * u[grid_n] - 4.0 * u[grid_n - 1] + u[grid_n - 2]) / (2.0 * h);
    D(0, bc) = -du0;
    D(1, bc) = duL;
  }
  return D;
}

std::vector<DtnBlock> fd_oracle(const CylinderModel& model, int grid_n) {
  std::vector<DtnBlock> blocks = dtn_assemble(model);
  for (DtnBlock& b : blocks) b.D = fd_dtn_matrix(b.kappa, model.length, grid_n);
  return blocks;
}

ModeOperator::ModeOperator(const CylinderModel& model)
    : model_(model), blocks_(dtn_assemble(model)) {}

int ModeOperator::dimension() const { return (2 * model_.mode_cutoff + 1) * 3; }

int ModeOperator::basis_index(int k, LieComponent c) const {
  if (k < -model_.mode_cutoff || k > model_.mode_cutoff)
    throw std::out_of_range("basis_index: mode outside cutoff");
  return (k + model_.mode_cutoff) * 3 + static_cast<int>(c);
}

double ModeOperator::p_scalar(int k, LieComponent c) const {
  const DtnBlock& b = blocks_[static_cast<std::size_t>(basis_index(k, c))];
  // Neumann data of the extension of diagonally embedded boundary data; the
  // two row sums agree on a symmetric cylinder, their mean covers the general
  // case.
  const double row0 = b.D(0, 0) + b.D(0, 1);
  const double row1 = b.D(1, 0) + b.D(1, 1);
  return 0.5 * (row0 + row1);
}

Eigen::MatrixXd ModeOperator::sum_matrix() const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dimension(), dimension());
  for (const DtnBlock& b : blocks_) {
    const int i = basis_index(b.k, b.c);
    M(i, i) = (b.D(0, 0) + b.D(0, 1)) + (b.D(1, 0) + b.D(1, 1));
  }
  return M;
}

Eigen::MatrixXd ModeOperator::diff_matrix() const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dimension(), dimension());
  for (const DtnBlock& b : blocks_) {
    const int i = basis_index(b.k, b.c);
    M(i, i) = (b.D(1, 0) + b.D(1, 1)) - (b.D(0, 0) + b.D(0, 1));
  }
  return M;
}

int ModeOperator::kernel_dimension(double tol) const {
  int dim = 0;
  for (const DtnBlock& b : blocks_)
    if (eigenvalue(b.k, b.c) <= tol) ++dim;
  return dim;
}

ModeOperator p_operators(const CylinderModel& model) { return ModeOperator(model); }

BoundaryField::BoundaryField(int mode_cutoff) : n_(mode_cutoff) {
  if (mode_cutoff < 0) throw std::invalid_argument("BoundaryField: negative mode cutoff");
  data_.assign(static_cast<std::size_t>(2 * n_ + 1) * 3, {0.0, 0.0});
}

std::complex<double>& BoundaryField::at(int k, LieComponent c) {
  if (k < -n_ || k > n_) throw std::out_of_range("BoundaryField::at: mode outside cutoff");
  return data_[static_cast<std::size_t>((k + n_) * 3 + static_cast<int>(c))];
}

const std::complex<double>& BoundaryField::at(int k, LieComponent c) const {
  return const_cast<BoundaryField*>(this)->at(k, c);
}

double BoundaryField::norm2() const {
  double s = 0.0;
  for (const auto& z : data_) s += std::norm(z);
  return s;
}

double BoundaryField::max_reality_defect() const {
  double worst = 0.0;
  for (int k = -n_; k <= n_; ++k) {
    worst = std::max(worst, std::abs(std::conj(at(k, LieComponent::h)) - at(-k, LieComponent::h)));
    worst = std::max(worst,
                     std::abs(std::conj(at(k, LieComponent::e_plus)) - at(-k, LieComponent::e_minus)));
  }
  return worst;
}

BoundaryField BoundaryField::random(int mode_cutoff, std::uint64_t seed) {
  BoundaryField f(mode_cutoff);
  Rng rng(seed);
  f.at(0, LieComponent::h) = {rng.gaussian(), 0.0};
  for (int k = 1; k <= mode_cutoff; ++k) {
    const std::complex<double> z{rng.gaussian(), rng.gaussian()};
    f.at(k, LieComponent::h) = z;
    f.at(-k, LieComponent::h) = std::conj(z);
  }
  for (int k = -mode_cutoff; k <= mode_cutoff; ++k)
    f.at(k, LieComponent::e_plus) = {rng.gaussian(), rng.gaussian()};
  for (int k = -mode_cutoff; k <= mode_cutoff; ++k)
    f.at(k, LieComponent::e_minus) = std::conj(f.at(-k, LieComponent::e_plus));
  return f;
}

BoundaryTrajectory flow_linear(const CylinderModel& model, const BoundaryField& b_minus0,
                               const BoundaryField& b_plus0, double T, int n_samples) {
  if (b_minus0.mode_cutoff() != model.mode_cutoff || b_plus0.mode_cutoff() != model.mode_cutoff)
    throw std::invalid_argument("flow_linear: field cutoff does not match model");
  if (T < 0.0 || n_samples < 1) throw std::invalid_argument("flow_linear: bad time grid");

  const ModeOperator op(model);
  BoundaryTrajectory traj;
  traj.model = model;
  traj.samples.reserve(static_cast<std::size_t>(n_samples) + 1);
  for (int i = 0; i <= n_samples; ++i) {
    const double t = T * static_cast<double>(i) / n_samples;
    BoundarySample s;
    s.t = t;
    s.b_minus = BoundaryField(model.mode_cutoff);
    for (int k = -model.mode_cutoff; k <= model.mode_cutoff; ++k) {
      for (LieComponent c : {LieComponent::h, LieComponent::e_plus, LieComponent::e_minus}) {
        const double lam = op.eigenvalue(k, c);
        s.b_minus.at(k, c) = std::exp(-lam * t) * b_minus0.at(k, c);
      }
    }
    s.energy = 0.5 * s.b_minus.norm2();
    traj.samples.push_back(std::move(s));
  }

  // dB+/dt = (P- - P+) B-(t); with B-(t) = e^(-lam t) B-(0) the integral is
  // explicit.  The difference operator vanishes identically here, the update
  // is kept for asymmetric generalizations.
  traj.b_plus_final = b_plus0;
  const Eigen::MatrixXd diff = op.diff_matrix();
  for (int k = -model.mode_cutoff; k <= model.mode_cutoff; ++k) {
    for (LieComponent c : {LieComponent::h, LieComponent::e_plus, LieComponent::e_minus}) {
      const double lam = op.eigenvalue(k, c);
      const double q = diff(op.basis_index(k, c), op.basis_index(k, c));
      const double integral = (lam > kKernelTol) ? (1.0 - std::exp(-lam * T)) / lam : T;
      traj.b_plus_final.at(k, c) += q * integral * b_minus0.at(k, c);
    }
  }
  return traj;
}

BoundaryField critical_limit(const CylinderModel& model, const BoundaryField& b_minus0) {
  if (b_minus0.mode_cutoff() != model.mode_cutoff)
    throw std::invalid_argument("critical_limit: field cutoff does not match model");
  BoundaryField limit(model.mode_cutoff);
  for (int k = -model.mode_cutoff; k <= model.mode_cutoff; ++k)
    for (LieComponent c : {LieComponent::h, LieComponent::e_plus, LieComponent::e_minus})
      if (model.kappa(k, c) <= kKernelTol) limit.at(k, c) = b_minus0.at(k, c);
  return limit;
}

double simpson_integral(const std::vector<double>& values, double dt) {
  const int n = static_cast<int>(values.size()) - 1;
  if (n < 1) return 0.0;
  if (n == 1) return 0.5 * dt * (values[0] + values[1]);
  const int m = (n % 2 == 0) ? n : n - 1;
  double s = values[0] + values[static_cast<std::size_t>(m)];
  for (int i = 1; i < m; ++i) s += values[static_cast<std::size_t>(i)] * (i % 2 == 1 ? 4.0 : 2.0);
  s *= dt / 3.0;
  if (n % 2 == 1) s += 0.5 * dt * (values[static_cast<std::size_t>(n - 1)] + values[static_cast<std::size_t>(n)]);
  return s;
}

std::string boundary_trajectory_jsonl(const BoundaryTrajectory& traj) {
  std::string out;
  const int n = traj.model.mode_cutoff;
  for (const BoundarySample& s : traj.samples) {
    nlohmann::ordered_json line;
    line["t"] = s.t;
    line["energy"] = s.energy;
    nlohmann::ordered_json modes = nlohmann::ordered_json::array();
    for (int k = -n; k <= n; ++k) {
      for (LieComponent c : {LieComponent::h, LieComponent::e_plus, LieComponent::e_minus}) {
        const std::complex<double>& z = s.b_minus.at(k, c);
        modes.push_back({k, component_name(c), z.real(), z.imag()});
      }
    }
    line["b_minus"] = std::move(modes);
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::string dtn_blocks_json(const std::vector<DtnBlock>& blocks) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const DtnBlock& b : blocks) {
    nlohmann::ordered_json jb;
    jb["k"] = b.k;
    jb["c"] = component_name(b.c);
    jb["kappa"] = b.kappa;
    jb["D"] = {{b.D(0, 0), b.D(0, 1)}, {b.D(1, 0), b.D(1, 1)}};
    arr.push_back(std::move(jb));
  }
  return arr.dump(2) + "\n";
}

}  // namespace mmflow

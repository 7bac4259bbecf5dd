#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

// Linearized boundary heat flow on a flat cylinder S^1 x [0, L], decomposed
// into Fourier modes k and the complexified rank-1 basis {h, e+, e-}.  A
// constant background xi twists the root components, shifting their effective
// frequency to |k ± alpha(xi)|.  Per mode everything reduces to 2x2
// Dirichlet-to-Neumann blocks for u'' = kappa^2 u on [0, L], so the flow, its
// limits and the spectral theory are all available in closed form; a finite
// difference oracle provides the independent cross-check.
namespace mmflow {

enum class LieComponent { h = 0, e_plus = 1, e_minus = 2 };

const char* component_name(LieComponent c);           // "h", "e+", "e-"
LieComponent component_from_name(const std::string&);

struct CylinderModel {
  double length = 1.0;   // L
  int mode_cutoff = 8;   // modes k in [-N, N]
  double xi = 0.0;       // background in the Cartan line; twist = alpha(xi) = 2 xi

  // Twist snapped to the nearest integer when within the wall tolerance, so
  // kernel modes are detected exactly.
  double twist() const;
  double kappa(int k, LieComponent c) const;  // |k + a_c|, a = (0, +twist, -twist)
};

// u(t) = A e^(kappa t) + B e^(-kappa t), or A + B t when kappa == 0.
// Evaluation goes through exponent-scaled forms, so it stays finite even when
// e^(kappa L) would be enormous; A and B themselves are reported raw.
struct ExtensionCoeffs {
  double kappa = 0.0;
  double length = 0.0;
  bool affine = false;
  std::complex<double> A{0.0, 0.0};
  std::complex<double> B{0.0, 0.0};
  std::complex<double> u0{0.0, 0.0};
  std::complex<double> uL{0.0, 0.0};

  std::complex<double> value(double t) const;
  std::complex<double> derivative(double t) const;
};

ExtensionCoeffs harmonic_extension(double kappa, double L, std::complex<double> u0,
                                   std::complex<double> uL);

// Outward-normal Dirichlet-to-Neumann block: maps boundary values (u(0), u(L))
// to (-u'(0), u'(L)) of the harmonic extension.
struct DtnBlock {
  int k = 0;
  LieComponent c = LieComponent::h;
  double kappa = 0.0;
  Eigen::Matrix2d D = Eigen::Matrix2d::Zero();
};

Eigen::Matrix2d dtn_matrix(double kappa, double L);
std::vector<DtnBlock> dtn_assemble(const CylinderModel& model);

// Same blocks from a second-order finite-difference solve on grid_n
// subintervals (one-sided second-order Neumann extraction at the ends).
Eigen::Matrix2d fd_dtn_matrix(double kappa, double L, int grid_n);
std::vector<DtnBlock> fd_oracle(const CylinderModel& model, int grid_n);

// The two boundary restriction operators P+ and P- act mode-by-mode as the
// scalar p = kappa tanh(kappa L / 2) (row sum of the DtN block: Neumann data
// of the extension of diagonally embedded data).  On this symmetric cylinder
// P+ == P-, so their difference vanishes and their sum has per-mode
// eigenvalue 2 kappa tanh(kappa L / 2).
class ModeOperator {
 public:
  explicit ModeOperator(const CylinderModel& model);

  const CylinderModel& model() const { return model_; }
  int dimension() const;                         // (2N+1) * 3
  int basis_index(int k, LieComponent c) const;

  double p_scalar(int k, LieComponent c) const;  // each of P+, P-
  double eigenvalue(int k, LieComponent c) const { return 2.0 * p_scalar(k, c); }

  Eigen::MatrixXd sum_matrix() const;            // P+ + P-
  Eigen::MatrixXd diff_matrix() const;           // P- - P+
  int kernel_dimension(double tol = 1e-10) const;

 private:
  CylinderModel model_;
  std::vector<DtnBlock> blocks_;
};

ModeOperator p_operators(const CylinderModel& model);

// Fourier coefficients of a Lie-algebra-valued boundary loop.  Reality of the
// underlying field means conj(b[k][h]) == b[-k][h] and
// conj(b[k][e+]) == b[-k][e-].
class BoundaryField {
 public:
  explicit BoundaryField(int mode_cutoff);

  int mode_cutoff() const { return n_; }
  std::complex<double>& at(int k, LieComponent c);
  const std::complex<double>& at(int k, LieComponent c) const;

  double norm2() const;                          // sum |b|^2
  double max_reality_defect() const;
  bool satisfies_reality(double tol = 1e-12) const { return max_reality_defect() <= tol; }

  static BoundaryField zero(int mode_cutoff) { return BoundaryField(mode_cutoff); }
  static BoundaryField random(int mode_cutoff, std::uint64_t seed);  // reality-symmetric

 private:
  int n_;
  std::vector<std::complex<double>> data_;
};

struct BoundarySample {
  double t = 0.0;
  double energy = 0.0;       // 0.5 * |B-|^2
  BoundaryField b_minus{0};
};

struct BoundaryTrajectory {
  CylinderModel model;
  std::vector<BoundarySample> samples;
  BoundaryField b_plus_final{0};
};

// Exact per-mode solution of (d/dt + P+ + P-) B- = 0, dB+/dt = (P- - P+) B-,
// sampled at n_samples+1 uniform times on [0, T].
BoundaryTrajectory flow_linear(const CylinderModel& model, const BoundaryField& b_minus0,
                               const BoundaryField& b_plus0, double T, int n_samples);

// t -> infinity limit: projection of B-(0) onto the kernel modes (kappa == 0).
BoundaryField critical_limit(const CylinderModel& model, const BoundaryField& b_minus0);

// Composite Simpson on a uniform grid (n intervals, n even <=> exact use;
// odd counts fall back to a trapezoid on the last interval).
double simpson_integral(const std::vector<double>& values, double dt);

std::string boundary_trajectory_jsonl(const BoundaryTrajectory& traj);
std::string dtn_blocks_json(const std::vector<DtnBlock>& blocks);

}  // namespace mmflow

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Moment-map gradient flow on a product of round spheres S_{r_1} x ... x
// S_{r_n} in R^3, the finite-dimensional model of the framed boundary
// problem.  The moment map is Phi(m) = sum_i m_i, the energy is
// f = 0.5 |Phi|^2, and the flow of each factor is the negative gradient with
// respect to the metric that weights factor i by 1/r_i.  In that metric the
// gradient is r_i times the tangential projection of Phi, the energy decays
// exactly by the dissipation integral of |grad|^2, and the linearization at a
// critical configuration is a generalized symmetric eigenproblem.
namespace mmflow {

using Vec3 = Eigen::Vector3d;
using Configuration = std::vector<Vec3>;

Vec3 moment(const Configuration& m);
double energy(const Configuration& m);

// Gradient in the weighted metric: grad_i = r_i * (Phi - (m_i . Phi) m_i / r_i^2).
Configuration flow_gradient(const std::vector<double>& radii, const Configuration& m);
// Squared norm in the same metric: sum_i |v_i|^2 / r_i.
double metric_norm2(const std::vector<double>& radii, const Configuration& v);
double gradient_norm(const std::vector<double>& radii, const Configuration& m);

// Euclidean distance in the ambient product, sqrt(sum |a_i - b_i|^2).
double configuration_distance(const Configuration& a, const Configuration& b);

void project_to_spheres(const std::vector<double>& radii, Configuration& m);
Configuration random_configuration(const std::vector<double>& radii, std::uint64_t seed);

struct FlowOptions {
  double t_max = 1.0e4;
  double grad_tol = 1.0e-8;     // stop once the metric gradient norm falls below
  double abs_tol = 1.0e-10;     // integrator error control
  double rel_tol = 1.0e-10;
  double max_step = 0.1;        // <= 0 leaves the step uncapped
  double initial_step = 1.0e-3;
};

struct FlowSample {
  double t = 0.0;
  double energy = 0.0;
  double grad_norm = 0.0;
  Configuration m;
};

struct FlowResult {
  std::vector<double> radii;
  FlowOptions options;
  std::vector<FlowSample> samples;  // t = 0 plus every accepted step
  double dissipation = 0.0;         // integral of |grad|^2 along the run
  double final_time = 0.0;
  bool converged = false;           // grad_tol reached before t_max

  const FlowSample& final_sample() const { return samples.back(); }
};

// Adaptive embedded Runge-Kutta integration of dm/dt = -grad f, with the
// dissipation carried as an extra integrated component and each accepted
// state snapped back onto the spheres.
FlowResult flow_spheres(const std::vector<double>& radii, const Configuration& initial,
                        const FlowOptions& options = {});

// Linearization of the flow at (or near) a configuration: chart Hessian H of
// f on the product of tangent planes and the metric Gram matrix G, both
// 2n x 2n in per-factor orthonormal tangent bases.  Decay rates of the
// linearized flow are the eigenvalues of the pencil (H, G).
struct Linearization {
  Eigen::MatrixXd hessian;  // H
  Eigen::MatrixXd metric;   // G, diagonal 1/r_i
};

Linearization linearize_at(const std::vector<double>& radii, const Configuration& m);
std::vector<double> decay_rates(const std::vector<double>& radii, const Configuration& m);
double smallest_positive(const std::vector<double>& values, double tol = 1.0e-8);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_stderr = 0.0;
  int n = 0;
};

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

enum class RateClass { stationary, exponential, polynomial, indeterminate };

const char* rate_class_name(RateClass c);

// Tail analysis of the distance to the limit configuration.  When no limit is
// supplied the final sample stands in for it and the fit window is trimmed
// away from the end, where self-distance is pure noise.
struct RateClassification {
  RateClass cls = RateClass::indeterminate;
  double exp_rate = 0.0;   // d ~ C exp(-exp_rate * t)
  double power = 0.0;      // d ~ C t^(-power)
  LinearFit fit_exp;       // log d against t
  LinearFit fit_pow;       // log d against log t
  int n_points = 0;
};

RateClassification classify_rate(const FlowResult& result,
                                 const std::optional<Configuration>& limit = std::nullopt,
                                 double window_fraction = 0.5);

// Slope of log |grad| against log (f - f_inf) over the tail window: the
// gradient-inequality exponent, 1/2 at nondegenerate critical points.
struct LojasiewiczEstimate {
  double exponent = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
  int n_points = 0;
};

LojasiewiczEstimate estimate_lojasiewicz(const FlowResult& result,
                                         std::optional<double> f_inf = std::nullopt,
                                         double window_fraction = 0.5);

// Kempf-Ness potential of the one-parameter group generated by a Cartan
// direction, acting factor-wise on the spheres.  With h = m . axis and
// u = (r + h)/(r - h) everything is in closed form:
//   psi_i(tau)  = r [tau + log(exp(-2 tau) + u) - log(1 + u)]
//   psi_i'(tau) = h_i(tau) = r (u e^tau - e^-tau) / (u e^tau + e^-tau)
// so psi' is the moment pairing along the orbit and psi'' = |transverse|^2 / r.
class KempfNessPath {
 public:
  KempfNessPath(const std::vector<double>& radii, const Configuration& initial, const Vec3& axis);

  double psi(double tau) const;
  double psi_prime(double tau) const;
  double psi_second(double tau) const;
  double asymptotic_slope(int direction) const;  // psi'(+inf) or psi'(-inf)
  Configuration state(double tau) const;
  const Vec3& axis() const { return axis_; }

 private:
  struct Factor {
    double r = 0.0;
    double h0 = 0.0;       // initial height
    int pole = 0;          // +1 / -1 when pinned to a pole, else 0
    double u = 1.0;
    Vec3 transverse_unit = Vec3::Zero();
  };
  std::vector<Factor> factors_;
  Vec3 axis_;
};

std::string flow_trajectory_jsonl(const FlowResult& result);

}  // namespace mmflow

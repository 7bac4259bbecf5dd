#include "mmflow/finite_flow.hpp"

#include "mmflow/rng.hpp"

#include <boost/numeric/odeint.hpp>
#include <json.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmflow {

namespace {

void check_sizes(const std::vector<double>& radii, const Configuration& m, const char* where) {
  if (radii.empty() || radii.size() != m.size())
    throw std::invalid_argument(std::string(where) + ": radii and configuration sizes disagree");
  for (double r : radii)
    if (!(r > 0.0)) throw std::invalid_argument(std::string(where) + ": radii must be positive");
}

}  // namespace

Vec3 moment(const Configuration& m) {
  Vec3 phi = Vec3::Zero();
  for (const Vec3& mi : m) phi += mi;
  return phi;
}

double energy(const Configuration& m) { return 0.5 * moment(m).squaredNorm(); }

Configuration flow_gradient(const std::vector<double>& radii, const Configuration& m) {
  check_sizes(radii, m, "flow_gradient");
  const Vec3 phi = moment(m);
  Configuration g(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double r = radii[i];
    g[i] = (r * r * phi - m[i].dot(phi) * m[i]) / r;
  }
  return g;
}

double metric_norm2(const std::vector<double>& radii, const Configuration& v) {
  check_sizes(radii, v, "metric_norm2");
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i].squaredNorm() / radii[i];
  return s;
}

double gradient_norm(const std::vector<double>& radii, const Configuration& m) {
  return std::sqrt(metric_norm2(radii, flow_gradient(radii, m)));
}

double configuration_distance(const Configuration& a, const Configuration& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("configuration_distance: sizes disagree");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s);
}

void project_to_spheres(const std::vector<double>& radii, Configuration& m) {
  check_sizes(radii, m, "project_to_spheres");
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double n = m[i].norm();
    if (n < 1e-300) throw std::invalid_argument("project_to_spheres: zero vector");
    m[i] *= radii[i] / n;
  }
}

Configuration random_configuration(const std::vector<double>& radii, std::uint64_t seed) {
  Rng rng(seed);
  Configuration m(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    Vec3 v;
    do {
      v = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
    } while (v.norm() < 1e-12);
    m[i] = radii[i] * v.normalized();
  }
  return m;
}

FlowResult flow_spheres(const std::vector<double>& radii, const Configuration& initial,
                        const FlowOptions& options) {
  check_sizes(radii, initial, "flow_spheres");
  const std::size_t n = radii.size();

  using state_type = std::vector<double>;
  auto system = [&radii, n](const state_type& y, state_type& dydt, double) {
    Vec3 phi = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) phi += Vec3(y[3 * i], y[3 * i + 1], y[3 * i + 2]);
    double diss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 mi(y[3 * i], y[3 * i + 1], y[3 * i + 2]);
      const double r = radii[i];
      const Vec3 g = (r * r * phi - mi.dot(phi) * mi) / r;
      dydt[3 * i] = -g.x();
      dydt[3 * i + 1] = -g.y();
      dydt[3 * i + 2] = -g.z();
      diss += g.squaredNorm() / r;
    }
    dydt[3 * n] = diss;
  };

  Configuration m = initial;
  project_to_spheres(radii, m);

  state_type y(3 * n + 1, 0.0);
  auto pack = [&](const Configuration& c) {
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a) y[3 * i + static_cast<std::size_t>(a)] = c[i][a];
  };
  auto unpack = [&]() {
    Configuration c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = Vec3(y[3 * i], y[3 * i + 1], y[3 * i + 2]);
    return c;
  };
  pack(m);

  FlowResult result;
  result.radii = radii;
  result.options = options;

  auto record = [&](double t, const Configuration& c) {
    FlowSample s;
    s.t = t;
    s.energy = energy(c);
    s.grad_norm = gradient_norm(radii, c);
    s.m = c;
    result.samples.push_back(std::move(s));
    return result.samples.back().grad_norm;
  };

  double grad_now = record(0.0, m);
  if (grad_now <= options.grad_tol) {
    result.converged = true;
    result.final_time = 0.0;
    return result;
  }

  namespace ode = boost::numeric::odeint;
  auto stepper =
      ode::make_controlled<ode::runge_kutta_cash_karp54<state_type>>(options.abs_tol, options.rel_tol);

  double t = 0.0;
  double dt = options.initial_step;
  const long long max_steps = 20'000'000;
  long long steps = 0;
  while (t < options.t_max) {
    if (options.max_step > 0.0 && dt > options.max_step) dt = options.max_step;
    if (dt > options.t_max - t) dt = options.t_max - t;
    if (dt < 1e-15 * std::max(1.0, t))
      throw std::runtime_error("flow_spheres: step size underflow");
    if (++steps > max_steps) throw std::runtime_error("flow_spheres: step budget exhausted");

    if (stepper.try_step(system, y, t, dt) != ode::success) continue;

    // snap back onto the spheres; the drift per accepted step is tiny because
    // the field is tangent, but it would still compound over long runs
    Configuration c = unpack();
    project_to_spheres(radii, c);
    pack(c);

    grad_now = record(t, c);
    if (grad_now <= options.grad_tol) {
      result.converged = true;
      break;
    }
  }

  result.final_time = result.samples.back().t;
  result.dissipation = y[3 * n];
  return result;
}

Linearization linearize_at(const std::vector<double>& radii, const Configuration& m) {
  check_sizes(radii, m, "linearize_at");
  const int n = static_cast<int>(radii.size());
  const Vec3 phi = moment(m);

  std::vector<Vec3> t1(m.size()), t2(m.size());
  for (int i = 0; i < n; ++i) {
    const Vec3 unit = m[static_cast<std::size_t>(i)].normalized();
    Vec3 seed = std::abs(unit.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    t1[static_cast<std::size_t>(i)] = unit.cross(seed).normalized();
    t2[static_cast<std::size_t>(i)] = unit.cross(t1[static_cast<std::size_t>(i)]);
  }

  // chart Hessian of f on the tangent product: Hess(v, w) = sum_ij v_i . w_j
  // minus the sphere curvature term (v_i . w_i)(m_i . Phi) / r_i^2
  Linearization lin;
  lin.hessian = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  lin.metric = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  auto basis = [&](int i, int a) -> const Vec3& {
    return a == 0 ? t1[static_cast<std::size_t>(i)] : t2[static_cast<std::size_t>(i)];
  };
  for (int i = 0; i < n; ++i) {
    const double r = radii[static_cast<std::size_t>(i)];
    const double curv = m[static_cast<std::size_t>(i)].dot(phi) / (r * r);
    for (int a = 0; a < 2; ++a) {
      lin.metric(2 * i + a, 2 * i + a) = 1.0 / r;
      for (int j = 0; j < n; ++j)
        for (int b = 0; b < 2; ++b) {
          double h = basis(i, a).dot(basis(j, b));
          if (i == j && a == b) h -= curv;
          lin.hessian(2 * i + a, 2 * j + b) = h;
        }
    }
  }
  lin.hessian = 0.5 * (lin.hessian + lin.hessian.transpose().eval());
  return lin;
}

std::vector<double> decay_rates(const std::vector<double>& radii, const Configuration& m) {
  const Linearization lin = linearize_at(radii, m);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(lin.hessian, lin.metric,
                                                                   Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("decay_rates: generalized eigensolver failed");
  const Eigen::VectorXd ev = solver.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

double smallest_positive(const std::vector<double>& values, double tol) {
  double best = std::numeric_limits<double>::infinity();
  for (double v : values)
    if (v > tol && v < best) best = v;
  if (!std::isfinite(best)) throw std::runtime_error("smallest_positive: no positive entry");
  return best;
}

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("linear_fit: need at least two matched points");
  const int n = static_cast<int>(xs.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += xs[static_cast<std::size_t>(i)];
    my += ys[static_cast<std::size_t>(i)];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dx = xs[static_cast<std::size_t>(i)] - mx;
    const double dy = ys[static_cast<std::size_t>(i)] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx < 1e-300) throw std::invalid_argument("linear_fit: degenerate abscissa");

  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = std::max(0.0, syy - fit.slope * sxy);
  fit.r2 = syy < 1e-300 ? 1.0 : 1.0 - ss_res / syy;
  fit.slope_stderr = n > 2 ? std::sqrt(ss_res / (n - 2) / sxx) : 0.0;
  return fit;
}

const char* rate_class_name(RateClass c) {
  switch (c) {
    case RateClass::stationary: return "stationary";
    case RateClass::exponential: return "exponential";
    case RateClass::polynomial: return "polynomial";
    default: return "indeterminate";
  }
}

RateClassification classify_rate(const FlowResult& result, const std::optional<Configuration>& limit,
                                 double window_fraction) {
  if (result.samples.empty()) throw std::invalid_argument("classify_rate: empty trajectory");
  const bool self_limit = !limit.has_value();
  const Configuration& target = self_limit ? result.final_sample().m : *limit;
  const double t_f = result.final_time;
  const double floor_d = std::max(1e-12, self_limit ? 10.0 * result.options.grad_tol : 1e-12);

  RateClassification out;

  double max_d = 0.0;
  for (const FlowSample& s : result.samples)
    max_d = std::max(max_d, configuration_distance(s.m, target));
  if (max_d <= std::max(1e-12, 10.0 * result.options.grad_tol)) {
    // never left the limit: started at a critical configuration
    out.cls = RateClass::stationary;
    out.exp_rate = std::numeric_limits<double>::infinity();
    return out;
  }

  const double t_lo = window_fraction * t_f;
  const double t_hi = self_limit ? 0.9 * t_f : t_f;
  std::vector<double> ts, log_ts, log_ds;
  for (const FlowSample& s : result.samples) {
    if (s.t < t_lo || s.t > t_hi || s.t <= 0.0) continue;
    const double d = configuration_distance(s.m, target);
    if (d <= floor_d) continue;
    ts.push_back(s.t);
    log_ts.push_back(std::log(s.t));
    log_ds.push_back(std::log(d));
  }
  out.n_points = static_cast<int>(ts.size());
  if (out.n_points < 5) return out;  // indeterminate

  out.fit_exp = linear_fit(ts, log_ds);
  out.fit_pow = linear_fit(log_ts, log_ds);
  out.exp_rate = -out.fit_exp.slope;
  out.power = -out.fit_pow.slope;

  if (out.fit_exp.r2 >= 0.99 && out.fit_exp.r2 >= out.fit_pow.r2)
    out.cls = RateClass::exponential;
  else if (out.fit_pow.r2 >= 0.99)
    out.cls = RateClass::polynomial;
  return out;
}

LojasiewiczEstimate estimate_lojasiewicz(const FlowResult& result, std::optional<double> f_inf,
                                         double window_fraction) {
  if (result.samples.empty()) throw std::invalid_argument("estimate_lojasiewicz: empty trajectory");
  const bool self_limit = !f_inf.has_value();
  const double f_star = self_limit ? result.final_sample().energy : *f_inf;
  const double t_f = result.final_time;
  const double t_lo = window_fraction * t_f;
  const double t_hi = self_limit ? 0.9 * t_f : t_f;

  std::vector<double> xs, ys;
  for (const FlowSample& s : result.samples) {
    if (s.t < t_lo || s.t > t_hi) continue;
    const double gap = s.energy - f_star;
    if (gap <= 1e-12 || s.grad_norm <= 0.0) continue;
    xs.push_back(std::log(gap));
    ys.push_back(std::log(s.grad_norm));
  }

  LojasiewiczEstimate est;
  est.n_points = static_cast<int>(xs.size());
  if (est.n_points < 3) return est;
  const LinearFit fit = linear_fit(xs, ys);
  est.exponent = fit.slope;
  est.slope_stderr = fit.slope_stderr;
  est.r2 = fit.r2;
  return est;
}

KempfNessPath::KempfNessPath(const std::vector<double>& radii, const Configuration& initial,
                             const Vec3& axis) {
  check_sizes(radii, initial, "KempfNessPath");
  const double an = axis.norm();
  if (an < 1e-12) throw std::invalid_argument("KempfNessPath: axis must be nonzero");
  axis_ = axis / an;

  factors_.resize(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    Factor& f = factors_[i];
    f.r = radii[i];
    f.h0 = std::clamp(initial[i].dot(axis_), -f.r, f.r);
    if (f.r - std::abs(f.h0) <= 1e-14 * f.r) {
      f.pole = f.h0 > 0.0 ? 1 : -1;
      f.h0 = f.pole * f.r;
    } else {
      f.u = (f.r + f.h0) / (f.r - f.h0);
      const Vec3 trans = initial[i] - f.h0 * axis_;
      f.transverse_unit = trans.normalized();
    }
  }
}

double KempfNessPath::psi(double tau) const {
  double s = 0.0;
  for (const Factor& f : factors_) {
    if (f.pole != 0) {
      s += f.pole * f.r * tau;
    } else if (tau >= 0.0) {
      s += f.r * (tau + std::log(std::exp(-2.0 * tau) + f.u) - std::log1p(f.u));
    } else {
      s += f.r * (-tau + std::log1p(f.u * std::exp(2.0 * tau)) - std::log1p(f.u));
    }
  }
  return s;
}

double KempfNessPath::psi_prime(double tau) const {
  double s = 0.0;
  for (const Factor& f : factors_) {
    if (f.pole != 0) {
      s += f.pole * f.r;
    } else if (tau >= 0.0) {
      const double z = std::exp(-2.0 * tau);
      s += f.r * (f.u - z) / (f.u + z);
    } else {
      const double w = f.u * std::exp(2.0 * tau);
      s += f.r * (w - 1.0) / (w + 1.0);
    }
  }
  return s;
}

double KempfNessPath::psi_second(double tau) const {
  double s = 0.0;
  for (const Factor& f : factors_) {
    if (f.pole != 0) continue;
    const double den = std::exp(-tau) + f.u * std::exp(tau);
    const double d2 = den * den;
    if (std::isfinite(d2)) s += 4.0 * f.r * f.u / d2;
  }
  return s;
}

double KempfNessPath::asymptotic_slope(int direction) const {
  double s = 0.0;
  for (const Factor& f : factors_) {
    if (f.pole != 0)
      s += f.pole * f.r;
    else
      s += direction > 0 ? f.r : -f.r;
  }
  return s;
}

Configuration KempfNessPath::state(double tau) const {
  Configuration m(factors_.size());
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const Factor& f = factors_[i];
    if (f.pole != 0) {
      m[i] = f.pole * f.r * axis_;
      continue;
    }
    double h, trans;
    if (tau >= 0.0) {
      const double z = std::exp(-2.0 * tau);
      h = f.r * (f.u - z) / (f.u + z);
    } else {
      const double w = f.u * std::exp(2.0 * tau);
      h = f.r * (w - 1.0) / (w + 1.0);
    }
    const double den = std::exp(-tau) + f.u * std::exp(tau);
    trans = std::isfinite(den) ? 2.0 * f.r * std::sqrt(f.u) / den : 0.0;
    m[i] = h * axis_ + trans * f.transverse_unit;
  }
  return m;
}

std::string flow_trajectory_jsonl(const FlowResult& result) {
  std::string out;
  for (const FlowSample& s : result.samples) {
    nlohmann::ordered_json line;
    line["t"] = s.t;
    line["energy"] = s.energy;
    line["grad_norm"] = s.grad_norm;
    nlohmann::ordered_json ms = nlohmann::ordered_json::array();
    for (const Vec3& mi : s.m) ms.push_back({mi.x(), mi.y(), mi.z()});
    line["m"] = std::move(ms);
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace mmflow

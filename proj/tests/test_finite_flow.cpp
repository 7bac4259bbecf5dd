#include <doctest.h>

#include "mmflow/finite_flow.hpp"
#include "mmflow/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

using namespace mmflow;

namespace {

// Chart used by the finite-difference oracles: displace in an orthonormal
// tangent frame, then renormalize each factor back to its sphere.
struct Chart {
  std::vector<double> radii;
  Configuration base;
  std::vector<Vec3> frame;  // 2 per factor

  explicit Chart(const std::vector<double>& r, const Configuration& m)
      : radii(r), base(m) {
    for (const Vec3& mi : m) {
      const Vec3 unit = mi.normalized();
      const Vec3 seed =
          std::fabs(unit.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
      const Vec3 t1 = unit.cross(seed).normalized();
      frame.push_back(t1);
      frame.push_back(unit.cross(t1));
    }
  }

  double energy_at(const Eigen::VectorXd& s) const {
    Configuration m = base;
    for (size_t i = 0; i < m.size(); ++i)
      m[i] += s(2 * static_cast<int>(i)) * frame[2 * i] +
              s(2 * static_cast<int>(i) + 1) * frame[2 * i + 1];
    project_to_spheres(radii, m);
    return ::mmflow::energy(m);
  }
};

}  // namespace

TEST_SUITE("finite-flow") {

TEST_CASE("gradient matches directional derivatives of the energy") {
  const std::vector<double> radii{2.0, 1.0, 0.7};
  const Configuration m = random_configuration(radii, 3);
  const Configuration grad = flow_gradient(radii, m);

  Rng rng(99);
  for (int trial = 0; trial < 6; ++trial) {
    Configuration v(m.size());
    for (size_t i = 0; i < m.size(); ++i) {
      const Vec3 raw{rng.gaussian(), rng.gaussian(), rng.gaussian()};
      const Vec3 unit = m[i] / radii[i];
      v[i] = raw - raw.dot(unit) * unit;  // tangent at m_i
      CHECK(std::fabs(grad[i].dot(m[i])) <= 1e-10 * radii[i] * radii[i]);
    }

    const double h = 1e-5;
    Configuration plus = m, minus = m;
    for (size_t i = 0; i < m.size(); ++i) {
      plus[i] += h * v[i];
      minus[i] -= h * v[i];
    }
    project_to_spheres(radii, plus);
    project_to_spheres(radii, minus);
    const double fd = (energy(plus) - energy(minus)) / (2.0 * h);

    // the defining property of the metric gradient
    double pairing = 0.0;
    for (size_t i = 0; i < m.size(); ++i) pairing += grad[i].dot(v[i]) / radii[i];
    CHECK(fd == doctest::Approx(pairing).epsilon(1e-6));
  }

  double n2 = 0.0;
  for (size_t i = 0; i < m.size(); ++i) n2 += grad[i].squaredNorm() / radii[i];
  CHECK(metric_norm2(radii, grad) == doctest::Approx(n2).epsilon(1e-14));
  CHECK(gradient_norm(radii, m) == doctest::Approx(std::sqrt(n2)).epsilon(1e-13));

  CHECK_THROWS_AS(flow_gradient({1.0, 1.0}, m), std::invalid_argument);
}

TEST_CASE("random configurations are deterministic and on the spheres") {
  const std::vector<double> radii{1.5, 0.5, 2.0, 1.0};
  const Configuration a = random_configuration(radii, 17);
  const Configuration b = random_configuration(radii, 17);
  const Configuration c = random_configuration(radii, 18);
  REQUIRE(a.size() == 4);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].norm() == doctest::Approx(radii[i]).epsilon(1e-13));
  }
  CHECK(a[0] != c[0]);
}

TEST_CASE("two-sphere flow converges to the anti-aligned minimum") {
  const std::vector<double> radii{2.0, 1.0};
  const Configuration init = random_configuration(radii, 1);
  const FlowResult result = flow_spheres(radii, init);

  CHECK(result.converged);
  const FlowSample& last = result.final_sample();
  CHECK(last.grad_norm <= result.options.grad_tol);
  CHECK(last.energy == doctest::Approx(0.5).epsilon(1e-8));
  for (size_t i = 0; i < 2; ++i)
    CHECK(last.m[i].norm() == doctest::Approx(radii[i]).epsilon(1e-12));

  // limit shape: the small sphere anti-aligned with the large one
  const Vec3 u = last.m[0].normalized();
  const Configuration limit{2.0 * u, -u};
  CHECK(configuration_distance(last.m, limit) <= 1e-6);

  // energy drop balances the dissipation integral
  const double drop = result.samples.front().energy - last.energy;
  CHECK(std::fabs(drop - result.dissipation) <= 1e-7);

  const RateClassification rc = classify_rate(result, limit);
  CHECK(rc.cls == RateClass::exponential);
  CHECK(rc.exp_rate == doctest::Approx(3.0).epsilon(0.1));
  CHECK(rc.fit_exp.r2 >= 0.99);

  const LojasiewiczEstimate lj = estimate_lojasiewicz(result, 0.5);
  CHECK(lj.exponent == doctest::Approx(0.5).epsilon(0.1));
  CHECK(lj.r2 >= 0.99);
}

TEST_CASE("linearization eigenvalues match a finite-difference hessian") {
  const std::vector<double> radii{2.0, 1.0};

  auto fd_rates = [&](const Configuration& m) {
    const Chart chart(radii, m);
    const int n = 4;
    const double h = 2e-4;
    Eigen::MatrixXd H(n, n);
    const double f0 = chart.energy_at(Eigen::VectorXd::Zero(n));
    for (int a = 0; a < n; ++a) {
      Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
      s(a) = h;
      const double fp = chart.energy_at(s);
      s(a) = -h;
      const double fm = chart.energy_at(s);
      H(a, a) = (fp - 2.0 * f0 + fm) / (h * h);
      for (int b = a + 1; b < n; ++b) {
        auto at = [&](double sa, double sb) {
          Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
          x(a) = sa;
          x(b) = sb;
          return chart.energy_at(x);
        };
        H(a, b) = H(b, a) =
            (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
      }
    }
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < 2; ++i)
      G.block(2 * i, 2 * i, 2, 2) = Eigen::Matrix2d::Identity() / radii[i];
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(H, G,
                                                                 Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  };

  // at the minimum, where the rates are known in closed form
  const Configuration crit{Vec3(0, 0, 2), Vec3(0, 0, -1)};
  const std::vector<double> rates = decay_rates(radii, crit);
  const Eigen::VectorXd fd = fd_rates(crit);
  REQUIRE(rates.size() == 4);
  const double want[] = {0.0, 0.0, 3.0, 3.0};
  for (int i = 0; i < 4; ++i) {
    CHECK(rates[static_cast<size_t>(i)] == doctest::Approx(want[i]).epsilon(1e-9));
    CHECK(fd(i) == doctest::Approx(want[i]).epsilon(1e-5));
  }

  // away from critical points the chart hessian is still the second
  // derivative of the renormalized energy, so the pencils agree too
  const Configuration generic = random_configuration(radii, 5);
  const std::vector<double> grates = decay_rates(radii, generic);
  const Eigen::VectorXd gfd = fd_rates(generic);
  for (int i = 0; i < 4; ++i)
    CHECK(grates[static_cast<size_t>(i)] == doctest::Approx(gfd(i)).epsilon(1e-5));

  const Linearization lin = linearize_at(radii, crit);
  CHECK((lin.hessian - lin.hessian.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("smallest positive value respects the tolerance") {
  CHECK(smallest_positive({-1.0, 0.0, 1e-12, 3.0, 5.0}) == doctest::Approx(3.0));
  CHECK(smallest_positive({2.0, 0.5}) == doctest::Approx(0.5));
  CHECK_THROWS_AS((void)smallest_positive({-1.0, 0.0}), std::runtime_error);
}

TEST_CASE("linear fits recover exact lines") {
  std::vector<double> xs, ys;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(i);
    ys.push_back(3.0 - 2.0 * i);
  }
  const LinearFit fit = linear_fit(xs, ys);
  CHECK(fit.slope == doctest::Approx(-2.0).epsilon(1e-13));
  CHECK(fit.intercept == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.slope_stderr <= 1e-6);
  CHECK(fit.n == 10);

  ys[3] += 5.0;
  CHECK(linear_fit(xs, ys).r2 < 0.99);
}

TEST_CASE("rate classification separates the three regimes") {
  FlowResult synth;
  synth.radii = {1.0};
  const Configuration limit{Vec3(0, 0, 1)};

  auto push = [&synth](double t, double theta) {
    FlowSample s;
    s.t = t;
    s.m = {Vec3(std::sin(theta), 0.0, std::cos(theta))};
    s.energy = 0.5;
    s.grad_norm = theta;
    synth.samples.push_back(s);
  };

  SUBCASE("polynomial tail") {
    for (int i = 0; i <= 400; ++i) {
      const double t = 1.0 + i * (999.0 / 400.0);
      push(t, 1.0 / std::sqrt(t));
    }
    synth.final_time = synth.samples.back().t;
    const RateClassification rc = classify_rate(synth, limit);
    CHECK(rc.cls == RateClass::polynomial);
    CHECK(rc.power == doctest::Approx(0.5).epsilon(0.02));
    CHECK(rc.fit_pow.r2 >= 0.99);
  }

  SUBCASE("exponential tail") {
    for (int i = 0; i <= 200; ++i) {
      const double t = i * 0.05;
      push(t, 0.5 * std::exp(-2.0 * t));
    }
    synth.final_time = synth.samples.back().t;
    const RateClassification rc = classify_rate(synth, limit);
    CHECK(rc.cls == RateClass::exponential);
    CHECK(rc.exp_rate == doctest::Approx(2.0).epsilon(0.02));
  }

  SUBCASE("stationary run") {
    for (int i = 0; i <= 20; ++i) push(i * 0.1, 0.0);
    synth.final_time = 2.0;
    const RateClassification rc = classify_rate(synth, limit);
    CHECK(rc.cls == RateClass::stationary);
    CHECK(std::isinf(rc.exp_rate));
  }

  CHECK(std::string(rate_class_name(RateClass::polynomial)) == "polynomial");
  CHECK(std::string(rate_class_name(RateClass::stationary)) == "stationary");
}

TEST_CASE("gradient-inequality exponent from a manufactured flow") {
  // f - f_inf = exp(-2t) along an exact gradient flow forces
  // |grad| = sqrt(2) exp(-t), so the log-log slope is exactly 1/2.
  FlowResult synth;
  synth.radii = {1.0};
  for (int i = 0; i <= 100; ++i) {
    FlowSample s;
    s.t = 0.1 * i;
    s.energy = 1.0 + std::exp(-2.0 * s.t);
    s.grad_norm = std::sqrt(2.0) * std::exp(-s.t);
    s.m = {Vec3(0, 0, 1)};
    synth.samples.push_back(s);
  }
  synth.final_time = 10.0;
  const LojasiewiczEstimate lj = estimate_lojasiewicz(synth, 1.0);
  CHECK(lj.exponent == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(lj.r2 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("kempf-ness potential derivatives and slopes") {
  const std::vector<double> radii{2.0, 1.0, 0.5};
  const Configuration m = random_configuration(radii, 7);
  const Vec3 axes[] = {Vec3(0, 0, 1), Vec3(0.6, 0, 0.8)};

  for (const Vec3& axis : axes) {
    const KempfNessPath path(radii, m, axis);
    CHECK(path.psi(0.0) == doctest::Approx(0.0).epsilon(1e-14));

    const double h = 1e-5;
    for (double tau : {-1.2, -0.3, 0.0, 0.4, 2.0}) {
      const double dpsi = (path.psi(tau + h) - path.psi(tau - h)) / (2.0 * h);
      CHECK(path.psi_prime(tau) == doctest::Approx(dpsi).epsilon(1e-7));
      const double ddpsi =
          (path.psi_prime(tau + h) - path.psi_prime(tau - h)) / (2.0 * h);
      CHECK(path.psi_second(tau) == doctest::Approx(ddpsi).epsilon(1e-6));
      CHECK(path.psi_second(tau) >= -1e-12);  // the potential is convex

      // psi' is the moment pairing along the orbit
      const Configuration state = path.state(tau);
      CHECK(path.psi_prime(tau) ==
            doctest::Approx(moment(state).dot(axis)).epsilon(1e-10));

      // psi'' is the squared transverse part in the flow metric
      double transverse = 0.0;
      for (size_t i = 0; i < state.size(); ++i) {
        const Vec3 perp = state[i] - state[i].dot(axis) * axis;
        transverse += perp.squaredNorm() / radii[i];
        CHECK(state[i].norm() == doctest::Approx(radii[i]).epsilon(1e-12));
      }
      CHECK(path.psi_second(tau) == doctest::Approx(transverse).epsilon(1e-10));
    }

    // generic orbits sweep each factor pole to pole
    CHECK(path.asymptotic_slope(+1) == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(path.asymptotic_slope(-1) == doctest::Approx(-3.5).epsilon(1e-12));
  }

  // factors pinned at a pole contribute their fixed height to both slopes
  const KempfNessPath pinned({2.0, 1.0}, {Vec3(0, 0, 2), Vec3(0, 0, -1)},
                             Vec3(0, 0, 1));
  CHECK(pinned.asymptotic_slope(+1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pinned.asymptotic_slope(-1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pinned.psi_prime(0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pinned.psi_second(5.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("trajectories serialize as parseable jsonl") {
  const std::vector<double> radii{2.0, 1.0};
  FlowOptions opt;
  opt.t_max = 0.5;
  opt.grad_tol = 1e-14;
  const FlowResult result =
      flow_spheres(radii, random_configuration(radii, 2), opt);
  REQUIRE(result.samples.size() >= 2);

  std::istringstream lines(flow_trajectory_jsonl(result));
  std::string line;
  size_t count = 0;
  while (std::getline(lines, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.contains("t"));
    CHECK(j.contains("energy"));
    CHECK(j.contains("grad_norm"));
    REQUIRE(j["m"].is_array());
    CHECK(j["m"].size() == 2);
    if (count == 0) CHECK(j["t"] == 0.0);
    ++count;
  }
  CHECK(count == result.samples.size());
}

}  // TEST_SUITE

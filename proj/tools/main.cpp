#include "mmflow/birkhoff.hpp"
#include "mmflow/boundary_flow.hpp"
#include "mmflow/finite_flow.hpp"
#include "mmflow/lie_core.hpp"
#include "mmflow/morse_strata.hpp"
#include "mmflow/rng.hpp"
#include "mmflow/series.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::set<std::string> keys_of(const json& obj) {
  std::set<std::string> keys;
  for (auto it = obj.begin(); it != obj.end(); ++it) keys.insert(it.key());
  return keys;
}

// Overlay config file and --set pairs onto the defaults; any key that is not
// in the defaults is rejected so typos cannot silently fall back.
json resolve_config(const json& defaults, const std::string& config_path,
                    const std::vector<std::string>& sets) {
  json cfg = defaults;
  const std::set<std::string> allowed = keys_of(defaults);
  auto merge = [&](const json& overlay, const std::string& origin) {
    if (!overlay.is_object()) throw UsageError(origin + ": expected a JSON object");
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
      if (allowed.count(it.key()) == 0)
        throw UsageError(origin + ": unknown config key \"" + it.key() + "\"");
      cfg[it.key()] = it.value();
    }
  };
  if (!config_path.empty()) merge(load_json_file(config_path), config_path);
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got \"" + s + "\"");
    const std::string key = s.substr(0, eq);
    const std::string raw = s.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;  // unquoted strings are taken verbatim
    }
    json overlay;
    overlay[key] = value;
    merge(overlay, "--set");
  }
  return cfg;
}

void write_manifest(const fs::path& outdir, const std::string& command, const json& cfg) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config"] = cfg;
  write_file(outdir / "manifest.json", m.dump(2) + "\n");
}

double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

json number_or_null(double v) {
  if (std::isfinite(v)) return json(v);
  return json(nullptr);
}

// ---------------------------------------------------------------- flow-finite

json flow_finite_defaults() {
  return json{{"radii", json::array({2.0, 1.0})},
              {"seed", 1},
              {"init", nullptr},
              {"t_max", 1.0e4},
              {"grad_tol", 1.0e-8},
              {"abs_tol", 1.0e-10},
              {"rel_tol", 1.0e-10},
              {"max_step", 0.1},
              {"initial_step", 1.0e-3},
              {"window_fraction", 0.5},
              {"limit", nullptr},
              {"f_inf", nullptr}};
}

mmflow::Configuration parse_configuration(const json& arr, std::size_t n, const char* what) {
  if (!arr.is_array() || arr.size() != n)
    throw UsageError(std::string(what) + ": expected " + std::to_string(n) + " vectors");
  mmflow::Configuration m(n);
  for (std::size_t i = 0; i < n; ++i) {
    const json& v = arr.at(i);
    if (!v.is_array() || v.size() != 3)
      throw UsageError(std::string(what) + ": entry " + std::to_string(i) + " is not a 3-vector");
    m[i] = mmflow::Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
  }
  return m;
}

int run_flow_finite(const json& cfg, const fs::path& outdir) {
  write_manifest(outdir, "flow-finite", cfg);

  const std::vector<double> radii = cfg.at("radii").get<std::vector<double>>();
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

  mmflow::Configuration init;
  if (cfg.at("init").is_null())
    init = mmflow::random_configuration(radii, seed);
  else
    init = parse_configuration(cfg.at("init"), radii.size(), "init");

  mmflow::FlowOptions opts;
  opts.t_max = cfg.at("t_max").get<double>();
  opts.grad_tol = cfg.at("grad_tol").get<double>();
  opts.abs_tol = cfg.at("abs_tol").get<double>();
  opts.rel_tol = cfg.at("rel_tol").get<double>();
  opts.max_step = cfg.at("max_step").get<double>();
  opts.initial_step = cfg.at("initial_step").get<double>();

  const mmflow::FlowResult result = mmflow::flow_spheres(radii, init, opts);

  const double wf = cfg.at("window_fraction").get<double>();
  std::optional<mmflow::Configuration> limit;
  if (!cfg.at("limit").is_null())
    limit = parse_configuration(cfg.at("limit"), radii.size(), "limit");
  std::optional<double> f_inf;
  if (!cfg.at("f_inf").is_null()) f_inf = cfg.at("f_inf").get<double>();

  const mmflow::RateClassification cls = mmflow::classify_rate(result, limit, wf);
  const mmflow::LojasiewiczEstimate loja = mmflow::estimate_lojasiewicz(result, f_inf, wf);

  const mmflow::FlowSample& last = result.final_sample();
  std::vector<double> rates;
  double rate_min = std::numeric_limits<double>::quiet_NaN();
  try {
    rates = mmflow::decay_rates(radii, last.m);
    rate_min = mmflow::smallest_positive(rates);
  } catch (const std::runtime_error&) {
    // spectrum may be entirely nonpositive away from stable critical points
  }

  json summary;
  summary["radii"] = radii;
  summary["seed"] = seed;
  summary["converged"] = result.converged;
  summary["final_time"] = result.final_time;
  summary["f0"] = result.samples.front().energy;
  summary["f_final"] = last.energy;
  summary["grad_final"] = last.grad_norm;
  summary["dissipation"] = result.dissipation;
  summary["energy_identity_gap"] =
      std::abs((result.samples.front().energy - last.energy) - result.dissipation);
  json final_m = json::array();
  for (const mmflow::Vec3& v : last.m) final_m.push_back({v.x(), v.y(), v.z()});
  summary["final_m"] = std::move(final_m);
  summary["classification"] = json{{"class", mmflow::rate_class_name(cls.cls)},
                                   {"exp_rate", number_or_null(cls.exp_rate)},
                                   {"power", number_or_null(cls.power)},
                                   {"r2_exp", cls.fit_exp.r2},
                                   {"r2_pow", cls.fit_pow.r2},
                                   {"loglog_slope", cls.fit_pow.slope},
                                   {"n_points", cls.n_points}};
  summary["lojasiewicz"] = json{{"exponent", loja.exponent},
                                {"stderr", loja.slope_stderr},
                                {"r2", loja.r2},
                                {"n_points", loja.n_points}};
  json jr = json::array();
  for (double r : rates) jr.push_back(r);
  summary["decay_rates"] = std::move(jr);
  summary["smallest_positive_rate"] = number_or_null(rate_min);

  write_file(outdir / "trajectory.jsonl", mmflow::flow_trajectory_jsonl(result));
  write_file(outdir / "summary.json", summary.dump(2) + "\n");
  return 0;
}

// -------------------------------------------------------------- flow-boundary

json flow_boundary_defaults() {
  return json{{"length", 1.0}, {"mode_cutoff", 8}, {"xi", 0.0},
              {"seed", 1},     {"t_max", 5.0},     {"n_samples", 50}};
}

int run_flow_boundary(const json& cfg, const fs::path& outdir) {
  write_manifest(outdir, "flow-boundary", cfg);

  mmflow::CylinderModel model;
  model.length = cfg.at("length").get<double>();
  model.mode_cutoff = cfg.at("mode_cutoff").get<int>();
  model.xi = cfg.at("xi").get<double>();
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const double t_max = cfg.at("t_max").get<double>();
  const int n_samples = cfg.at("n_samples").get<int>();

  const mmflow::BoundaryField b0 = mmflow::BoundaryField::random(model.mode_cutoff, seed);
  const mmflow::BoundaryField bp0 = mmflow::BoundaryField::zero(model.mode_cutoff);
  const mmflow::BoundaryTrajectory traj = mmflow::flow_linear(model, b0, bp0, t_max, n_samples);
  const mmflow::BoundaryField limit = mmflow::critical_limit(model, b0);
  const mmflow::ModeOperator op(model);

  double lam_min_pos = std::numeric_limits<double>::infinity();
  for (int k = -model.mode_cutoff; k <= model.mode_cutoff; ++k)
    for (mmflow::LieComponent c : {mmflow::LieComponent::h, mmflow::LieComponent::e_plus,
                                   mmflow::LieComponent::e_minus}) {
      const double lam = op.eigenvalue(k, c);
      if (lam > 1e-10 && lam < lam_min_pos) lam_min_pos = lam;
    }

  json summary;
  summary["length"] = model.length;
  summary["mode_cutoff"] = model.mode_cutoff;
  summary["xi"] = model.xi;
  summary["twist"] = model.twist();
  summary["seed"] = seed;
  summary["kernel_dimension"] = op.kernel_dimension();
  summary["smallest_positive_eigenvalue"] = finite_or(lam_min_pos, 0.0);
  summary["energy_initial"] = traj.samples.front().energy;
  summary["energy_final"] = traj.samples.back().energy;
  summary["limit_norm2"] = limit.norm2();
  summary["reality_defect_initial"] = traj.samples.front().b_minus.max_reality_defect();
  summary["reality_defect_final"] = traj.samples.back().b_minus.max_reality_defect();

  write_file(outdir / "operator.json", mmflow::dtn_blocks_json(mmflow::dtn_assemble(model)));
  write_file(outdir / "trajectory.jsonl", mmflow::boundary_trajectory_jsonl(traj));
  write_file(outdir / "summary.json", summary.dump(2) + "\n");
  return 0;
}

// --------------------------------------------------------------------- strata

json strata_defaults() { return json{{"g", 2}, {"lambda_max", 0}, {"truncation", 0}}; }

int run_strata(const json& cfg, const fs::path& outdir) {
  write_manifest(outdir, "strata", cfg);

  const int g = cfg.at("g").get<int>();
  int T = cfg.at("truncation").get<int>();
  if (T <= 0) T = mmflow::default_truncation(g);
  int lambda_max = cfg.at("lambda_max").get<int>();
  if (lambda_max <= 0) lambda_max = mmflow::default_lambda_max(g, T);

  const mmflow::StrataReport report = mmflow::poincare_reduced(g, lambda_max, T);
  write_file(outdir / "strata.json", mmflow::strata_report_json(report));
  mmflow::require_certificate(report);  // throws CertificateFailure -> exit 2
  return 0;
}

// ------------------------------------------------------------------- birkhoff

json birkhoff_defaults() {
  return json{{"input", nullptr},      {"loop", nullptr},        {"fft_size", 1024},
              {"max_fft_size", 8192},  {"feas_tol", 1e-8},       {"residual_tol", 1e-8},
              {"residual_samples", 256}, {"singular_tol", 1e-8}};
}

int run_birkhoff(const json& cfg, const fs::path& outdir) {
  write_manifest(outdir, "birkhoff", cfg);

  const bool has_input = !cfg.at("input").is_null();
  const bool has_loop = !cfg.at("loop").is_null();
  if (has_input == has_loop)
    throw UsageError("birkhoff: provide exactly one of \"input\" (path) or \"loop\" (inline)");

  mmflow::LaurentMatrix g(0, 0);
  if (has_input) {
    std::ifstream in(cfg.at("input").get<std::string>());
    if (!in) throw UsageError("cannot open " + cfg.at("input").get<std::string>());
    std::stringstream ss;
    ss << in.rdbuf();
    g = mmflow::laurent_from_json(ss.str());
  } else {
    g = mmflow::laurent_from_json(cfg.at("loop").dump());
  }

  mmflow::FactorizeOptions opts;
  opts.fft_size = cfg.at("fft_size").get<int>();
  opts.max_fft_size = cfg.at("max_fft_size").get<int>();
  opts.feas_tol = cfg.at("feas_tol").get<double>();
  opts.residual_tol = cfg.at("residual_tol").get<double>();
  opts.residual_samples = cfg.at("residual_samples").get<int>();
  opts.singular_tol = cfg.at("singular_tol").get<double>();

  const mmflow::BirkhoffFactorization fact = mmflow::birkhoff_factorize(g, opts);
  write_file(outdir / "factorization.json", mmflow::factorization_to_json(g, fact));
  return 0;
}

// --------------------------------------------------------------------- verify

int run_verify() {
  int failures = 0;
  auto check = [&failures](const std::string& name, bool ok, const std::string& detail = "") {
    if (ok) {
      std::cout << "PASS " << name << "\n";
    } else {
      ++failures;
      std::cout << "FAIL " << name << (detail.empty() ? "" : ": " + detail) << "\n";
    }
  };

  {
    mmflow::Rng rng(7);
    bool ok = true;
    std::string detail;
    for (int i = 0; i < 200 && ok; ++i) {
      const double xi = rng.uniform(-40.0, 40.0);
      const mmflow::AlcoveProjection p = mmflow::alcove_project(xi);
      if (p.point < 0.0 || p.point > 0.5 + 1e-12) {
        ok = false;
        detail = "image outside the alcove";
      } else if (std::abs(p.word.apply(xi) - p.point) > 1e-9) {
        ok = false;
        detail = "word does not map the input to its image";
      } else if (std::abs(p.word.inverse().apply(p.point) - xi) > 1e-9 * std::max(1.0, std::abs(xi))) {
        ok = false;
        detail = "inverse word does not return";
      }
    }
    for (int i = 0; i < 200 && ok; ++i) {
      mmflow::AffineWeylElement a{rng.next_u64() % 2 == 0, static_cast<long long>(rng.next_u64() % 11) - 5};
      mmflow::AffineWeylElement b{rng.next_u64() % 2 == 0, static_cast<long long>(rng.next_u64() % 11) - 5};
      const double x = rng.uniform(-3.0, 3.0);
      if (std::abs(a.compose(b).apply(x) - a.apply(b.apply(x))) > 1e-12) {
        ok = false;
        detail = "composition law violated";
      }
    }
    check("alcove-projection-and-weyl-laws", ok, detail);
  }

  {
    bool ok = true;
    std::string detail;
    for (int lam = 1; lam <= 8 && ok; ++lam) {
      const int count = mmflow::index_of_stratum(0, lam) - 0;
      if (count != 2 * lam - 2) {
        ok = false;
        detail = "index count at lambda=" + std::to_string(lam) + " gave " + std::to_string(count);
      }
    }
    if (ok) {
      try {
        mmflow::separating_hyperplane_count(1.0, 0.3);
        ok = false;
        detail = "wall point did not raise";
      } catch (const mmflow::WallPointError&) {
      }
    }
    if (ok && mmflow::separating_hyperplane_count(0.3, 1.2) !=
                  mmflow::separating_hyperplane_count(1.2, 0.3)) {
      ok = false;
      detail = "count is not symmetric";
    }
    check("separating-hyperplane-count", ok, detail);
  }

  {
    bool ok = true;
    std::string detail;
    try {
      const mmflow::StrataReport r1 = mmflow::poincare_reduced(1, mmflow::default_lambda_max(1, 6), 6);
      mmflow::require_certificate(r1);
      if (!(r1.betti == std::vector<mmflow::BigInt>{1})) {
        ok = false;
        detail = "genus 1 reduced series is not 1";
      }
      const mmflow::StrataReport r2 =
          mmflow::poincare_reduced(2, mmflow::default_lambda_max(2, 18), 18);
      mmflow::require_certificate(r2);
      const std::vector<mmflow::BigInt> expect{1, 0, 1, 4, 1, 0, 1};
      if (r2.betti != expect) {
        ok = false;
        detail = "genus 2 betti numbers are off";
      }
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    check("strata-certificates", ok, detail);
  }

  {
    const Eigen::Matrix2d exact = mmflow::dtn_matrix(1.0, 1.0);
    const Eigen::Matrix2d fd = mmflow::fd_dtn_matrix(1.0, 1.0, 256);
    const double rel = (exact - fd).cwiseAbs().maxCoeff() / exact.cwiseAbs().maxCoeff();
    mmflow::CylinderModel model;
    const mmflow::ModeOperator op(model);
    const double lam = op.eigenvalue(1, mmflow::LieComponent::h);
    const bool ok = rel < 1e-4 && std::abs(lam - 0.9242343145200195) < 1e-12;
    check("dtn-against-finite-differences", ok,
          "rel=" + std::to_string(rel) + " lam=" + std::to_string(lam));
  }

  {
    std::vector<double> radii{2.0, 1.0};
    mmflow::Configuration init{mmflow::Vec3(0.0, 1.2, 1.6), mmflow::Vec3(0.3, -0.9, 0.3)};
    mmflow::FlowOptions opts;
    opts.t_max = 50.0;
    const mmflow::FlowResult res = mmflow::flow_spheres(radii, init, opts);
    const bool ok = res.converged && std::abs(res.final_sample().energy - 0.5) < 1e-6 &&
                    std::abs((res.samples.front().energy - res.final_sample().energy) -
                             res.dissipation) < 1e-7;
    check("finite-flow-two-sphere", ok,
          "f_final=" + std::to_string(res.final_sample().energy));
  }

  {
    bool ok = true;
    std::string detail;
    try {
      mmflow::LaurentMatrix g(2, 2);
      Eigen::MatrixXcd c0 = Eigen::MatrixXcd::Zero(2, 2);
      c0(1, 0) = 1.0;
      Eigen::MatrixXcd c1 = Eigen::MatrixXcd::Zero(2, 2);
      c1(0, 0) = 1.0;
      Eigen::MatrixXcd cm1 = Eigen::MatrixXcd::Zero(2, 2);
      cm1(1, 1) = 1.0;
      g.set_coeff(0, c0);
      g.set_coeff(1, c1);
      g.set_coeff(-1, cm1);
      const mmflow::BirkhoffFactorization f = mmflow::birkhoff_factorize(g);
      if (f.indices != std::vector<int>{1, -1}) {
        ok = false;
        detail = "unexpected exponents";
      } else if (mmflow::reconstruction_residual(g, f) > 1e-8) {
        ok = false;
        detail = "reconstruction residual too large";
      }
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    check("birkhoff-fixture", ok, detail);
  }

  return failures == 0 ? 0 : 2;
}

// ---------------------------------------------------------------------- sweep

json sweep_defaults() {
  return json{{"command", "flow-finite"},
              {"base", json::object()},
              {"grid", json::object()},
              {"workers", 0},
              {"seed", 1}};
}

struct SweepPoint {
  int index = 0;
  fs::path dir;
  json config;
  json overrides;
  std::optional<std::uint64_t> seed;
  int exit_code = -1;
  std::string error;
};

int dispatch(const std::string& command, const json& cfg, const fs::path& outdir);

json command_defaults(const std::string& command) {
  if (command == "flow-finite") return flow_finite_defaults();
  if (command == "flow-boundary") return flow_boundary_defaults();
  if (command == "strata") return strata_defaults();
  if (command == "birkhoff") return birkhoff_defaults();
  throw UsageError("sweep: unknown command \"" + command + "\"");
}

int run_sweep(const json& cfg, const fs::path& outdir) {
  const std::string command = cfg.at("command").get<std::string>();
  const json defaults = command_defaults(command);
  const std::set<std::string> allowed = keys_of(defaults);
  const json& base = cfg.at("base");
  const json& grid = cfg.at("grid");
  if (!base.is_object() || !grid.is_object())
    throw UsageError("sweep: \"base\" and \"grid\" must be objects");
  for (auto it = base.begin(); it != base.end(); ++it)
    if (allowed.count(it.key()) == 0)
      throw UsageError("sweep base: unknown config key \"" + it.key() + "\"");
  std::vector<std::string> grid_keys;
  std::vector<json> grid_values;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    if (allowed.count(it.key()) == 0)
      throw UsageError("sweep grid: unknown config key \"" + it.key() + "\"");
    if (!it.value().is_array() || it.value().empty())
      throw UsageError("sweep grid: \"" + it.key() + "\" must be a nonempty array");
    grid_keys.push_back(it.key());
    grid_values.push_back(it.value());
  }
  const std::uint64_t master_seed = cfg.at("seed").get<std::uint64_t>();
  const bool explicit_seed =
      base.contains("seed") || grid.contains("seed") || allowed.count("seed") == 0;

  std::size_t n_points = 1;
  for (const json& vals : grid_values) n_points *= vals.size();

  std::vector<SweepPoint> points(n_points);
  for (std::size_t idx = 0; idx < n_points; ++idx) {
    SweepPoint& pt = points[idx];
    pt.index = static_cast<int>(idx);
    char name[32];
    std::snprintf(name, sizeof(name), "point_%04zu", idx);
    pt.dir = outdir / name;

    json config = defaults;
    for (auto it = base.begin(); it != base.end(); ++it) config[it.key()] = it.value();
    pt.overrides = json::object();
    std::size_t rem = idx;
    for (std::size_t k = grid_keys.size(); k > 0; --k) {
      const std::vector<json>::size_type kk = k - 1;
      const std::size_t len = grid_values[kk].size();
      const json& choice = grid_values[kk].at(rem % len);
      rem /= len;
      config[grid_keys[kk]] = choice;
      pt.overrides[grid_keys[kk]] = choice;
    }
    if (!explicit_seed) {
      pt.seed = mmflow::mix_seed(master_seed, idx);
      config["seed"] = *pt.seed;
    }
    pt.config = std::move(config);
  }

  int workers = cfg.at("workers").get<int>();
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min<int>(workers, static_cast<int>(n_points) > 0 ? static_cast<int>(n_points) : 1);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= n_points) return;
      SweepPoint& pt = points[idx];
      try {
        pt.exit_code = dispatch(command, pt.config, pt.dir);
      } catch (const mmflow::CertificateFailure& e) {
        pt.exit_code = 2;
        pt.error = e.what();
      } catch (const mmflow::SingularOnCircle& e) {
        pt.exit_code = 2;
        pt.error = e.what();
      } catch (const mmflow::NumericalBreakdown& e) {
        pt.exit_code = 2;
        pt.error = e.what();
      } catch (const std::exception& e) {
        pt.exit_code = 1;
        pt.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  write_manifest(outdir, "sweep", cfg);
  json index;
  index["command"] = command;
  index["seed"] = master_seed;
  index["points"] = json::array();
  int worst = 0;
  for (const SweepPoint& pt : points) {
    json jp;
    jp["index"] = pt.index;
    jp["dir"] = pt.dir.filename().string();
    jp["overrides"] = pt.overrides;
    if (pt.seed) jp["seed"] = *pt.seed;
    jp["exit_code"] = pt.exit_code;
    if (!pt.error.empty()) jp["error"] = pt.error;
    index["points"].push_back(std::move(jp));
    worst = std::max(worst, pt.exit_code);
  }
  write_file(outdir / "sweep_index.json", index.dump(2) + "\n");
  return worst;
}

int dispatch(const std::string& command, const json& cfg, const fs::path& outdir) {
  if (command == "flow-finite") return run_flow_finite(cfg, outdir);
  if (command == "flow-boundary") return run_flow_boundary(cfg, outdir);
  if (command == "strata") return run_strata(cfg, outdir);
  if (command == "birkhoff") return run_birkhoff(cfg, outdir);
  throw UsageError("unknown command \"" + command + "\"");
}

struct SubArgs {
  CLI::App* app = nullptr;
  std::string config_path;
  std::string out = "out";
  std::vector<std::string> sets;
};

SubArgs* add_subcommand(CLI::App& app, const std::string& name, const std::string& desc,
                        std::vector<std::unique_ptr<SubArgs>>& store, bool with_out = true) {
  store.push_back(std::make_unique<SubArgs>());
  SubArgs* args = store.back().get();
  args->app = app.add_subcommand(name, desc);
  args->app->add_option("--config", args->config_path, "JSON config file");
  args->app->add_option("--set", args->sets, "Override a config key, key=value (repeatable)");
  if (with_out) args->app->add_option("-o,--out", args->out, "Output directory");
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moment-map flow toolkit"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<SubArgs>> store;
  SubArgs* ff = add_subcommand(app, "flow-finite", "gradient flow on a product of spheres", store);
  SubArgs* fb = add_subcommand(app, "flow-boundary", "linearized boundary flow on a cylinder", store);
  SubArgs* st = add_subcommand(app, "strata", "stratum series and Betti certificate", store);
  SubArgs* bk = add_subcommand(app, "birkhoff", "Birkhoff factorization of a matrix loop", store);
  SubArgs* sw = add_subcommand(app, "sweep", "run a parameter grid of any subcommand", store);
  CLI::App* vf = app.add_subcommand("verify", "run the built-in self checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (vf->parsed()) return run_verify();
    SubArgs* active = nullptr;
    std::string command;
    if (ff->app->parsed()) {
      active = ff;
      command = "flow-finite";
    } else if (fb->app->parsed()) {
      active = fb;
      command = "flow-boundary";
    } else if (st->app->parsed()) {
      active = st;
      command = "strata";
    } else if (bk->app->parsed()) {
      active = bk;
      command = "birkhoff";
    } else if (sw->app->parsed()) {
      active = sw;
      command = "sweep";
    }
    if (active == nullptr) throw UsageError("no subcommand given");
    const json defaults = command == "sweep" ? sweep_defaults() : command_defaults(command);
    const json cfg = resolve_config(defaults, active->config_path, active->sets);
    if (command == "sweep") return run_sweep(cfg, fs::path(active->out));
    return dispatch(command, cfg, fs::path(active->out));
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const mmflow::CertificateFailure& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const mmflow::SingularOnCircle& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const mmflow::NumericalBreakdown& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

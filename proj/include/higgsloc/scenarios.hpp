#pragma once

// Named experiments: each runs the library on a ScenarioConfig, scores its
// acceptance checks and writes a report, CSV time series, field snapshots and
// a gnuplot script into the output directory.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "higgsloc/analytic.hpp"
#include "higgsloc/choquard.hpp"
#include "higgsloc/config.hpp"
#include "higgsloc/core.hpp"
#include "higgsloc/diagnostics.hpp"
#include "higgsloc/evolution.hpp"
#include "higgsloc/residual.hpp"
#include "higgsloc/spectral.hpp"

namespace higgsloc {

using Json = nlohmann::ordered_json;

/// One scored check. `id` is the acceptance criterion it belongs to.
struct CriterionResult {
  int id{0};
  std::string name;
  bool passed{false};
  double value{0.0};
  double threshold{0.0};
  std::string relation;  ///< how value is compared with threshold
  std::string detail;
};

enum class RunStatus { ok, failed, aborted, config_error };

inline std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::failed: return "FAILED";
    case RunStatus::aborted: return "ABORTED";
    case RunStatus::config_error: return "CONFIG_ERROR";
  }
  return "?";
}

struct RunReport {
  ScenarioConfig config;
  RunStatus status{RunStatus::ok};
  std::string error;
  std::optional<double> abort_time;
  std::vector<CriterionResult> criteria;
  std::vector<std::string> findings;
  Json data = Json::object();
  std::vector<std::string> artifacts;
  double wall_seconds{0.0};
  std::size_t steps{0};

  bool criteria_passed() const {
    return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.passed; });
  }
  /// 0 all criteria pass, 1 criteria failures, 2 configuration error, 3 numerical abort.
  int exit_code() const {
    switch (status) {
      case RunStatus::config_error: return 2;
      case RunStatus::aborted: return 3;
      case RunStatus::failed: return 1;
      case RunStatus::ok: return criteria_passed() ? 0 : 1;
    }
    return 1;
  }
};

// ---------------------------------------------------------------------------
// Output helpers

namespace detail {

class OutputSink {
public:
  explicit OutputSink(std::filesystem::path dir, RunReport& report)
      : dir_(std::move(dir)), report_(report) {
    std::filesystem::create_directories(dir_);
  }
  const std::filesystem::path& dir() const { return dir_; }

  std::ofstream open(const std::string& name, bool binary = false) {
    report_.artifacts.push_back(name);
    std::ofstream f(dir_ / name, binary ? std::ios::binary : std::ios::out);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    return f;
  }
  void text(const std::string& name, const std::string& content) { open(name) << content; }

private:
  std::filesystem::path dir_;
  RunReport& report_;
};

inline std::string csv_series(const std::vector<ObservableRecord>& rs) {
  std::string out = "t,norm,centroid,width,peak_pos,phi_min,validity_flag\n";
  for (const auto& r : rs) {
    out += format_double(r.t) + "," + format_double(r.norm) + "," + format_double(r.centroid) +
           "," + format_double(r.width) + "," + format_double(r.peak_pos) + "," +
           format_double(r.phi_min) + "," + (r.validity_flag ? "1" : "0") + "\n";
  }
  return out;
}

inline std::string snapshot_header(const Grid& g, double t, const PhysicalParams& p) {
  std::ostringstream h;
  h << "# dim=" << g.dim << " n=" << g.n << " length=" << format_double(g.length)
    << " spacing=" << format_double(g.spacing) << " t=" << format_double(t)
    << " transform=\"" << kTransformConvention << "\" M=" << format_double(p.M)
    << " m=" << format_double(p.m) << " v=" << format_double(p.v);
  return h.str();
}

/// 1D: header line then CSV x, re_psi, im_psi, phi.
inline void write_snapshot_1d(OutputSink& sink, const std::string& name, const FieldState& s,
                              const Grid& g) {
  auto f = sink.open(name);
  f << snapshot_header(g, s.t, s.params) << "\n";
  f << "x,re_psi,im_psi,phi\n";
  for (std::size_t i = 0; i < g.n; ++i)
    f << format_double(g.coords[i]) << "," << format_double(s.psi[i].real()) << ","
      << format_double(s.psi[i].imag()) << "," << format_double(s.phi[i]) << "\n";
}

/// 3D: header line, then each named real field as n^3 little-endian doubles.
inline void write_snapshot_3d(OutputSink& sink, const std::string& name, const Grid& g, double t,
                              const PhysicalParams& p,
                              const std::vector<std::pair<std::string, const RealField*>>& fields) {
  auto f = sink.open(name, true);
  f << snapshot_header(g, t, p) << " order=\"index=(ix*n+iy)*n+iz, x slowest\""
    << " encoding=float64-le fields=";
  for (std::size_t k = 0; k < fields.size(); ++k) f << (k ? "," : "") << fields[k].first;
  f << "\n";
  for (const auto& [label, data] : fields)
    for (double x : *data) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      unsigned char b[8];
      for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
      f.write(reinterpret_cast<const char*>(b), 8);
    }
}

inline std::string plot_script(const std::vector<std::string>& csvs) {
  std::ostringstream s;
  s << "# gnuplot script; run from this directory: gnuplot -p plot.gp\n"
    << "set datafile separator ','\n"
    << "set key autotitle columnhead\n"
    << "set xlabel 't'\n";
  const char* cols[] = {"norm", "width", "peak_pos", "phi_min"};
  const int idx[] = {2, 4, 5, 6};
  s << "set multiplot layout 2,2\n";
  for (int k = 0; k < 4; ++k) {
    s << "set title '" << cols[k] << "'\nplot ";
    for (std::size_t i = 0; i < csvs.size(); ++i)
      s << (i ? ", " : "") << "'" << csvs[i] << "' using 1:" << idx[k] << " with lines";
    s << "\n";
  }
  s << "unset multiplot\n";
  return s.str();
}

inline void check(RunReport& r, int id, std::string name, double value, double threshold,
                  std::string relation, std::string detail = {}) {
  bool ok = false;
  if (relation == "<") ok = value < threshold;
  else if (relation == "<=") ok = value <= threshold;
  else if (relation == ">") ok = value > threshold;
  else if (relation == ">=") ok = value >= threshold;
  else throw std::logic_error("unknown relation " + relation);
  if (!std::isfinite(value)) ok = false;
  r.criteria.push_back({id, std::move(name), ok, value, threshold, std::move(relation),
                        std::move(detail)});
}

inline Json norms_json(const EquationNorms& n) {
  Json j;
  j["abs"] = n.abs;
  j["rel"] = n.rel;
  Json terms = Json::object();
  for (const auto& t : n.terms) terms[t.term] = t.max_abs;
  j["terms"] = terms;
  return j;
}

inline Json residual_json(const ResidualReport& r) {
  Json j;
  j["label"] = r.label;
  j["family"] = std::string(to_string(r.spec.family));
  j["eq_schrodinger"] = norms_json(r.schrodinger);
  j["eq_klein_gordon"] = norms_json(r.klein_gordon);
  if (r.schrodinger_convergence) j["convergence_schrodinger"] = *r.schrodinger_convergence;
  if (r.klein_gordon_convergence) j["convergence_klein_gordon"] = *r.klein_gordon_convergence;
  j["n"] = r.discretization.n;
  j["length"] = r.discretization.length;
  j["time_step"] = r.discretization.time_step;
  return j;
}

inline double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline double max_abs_rel(std::span<const double> a, std::span<const double> ref) {
  double d = 0.0, s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - ref[i]));
    s = std::max(s, std::abs(ref[i]));
  }
  return s > 0.0 ? d / s : d;
}

inline std::size_t next_pow2(double x) {
  std::size_t n = 16;
  while (static_cast<double>(n) < x) n <<= 1;
  return n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Config -> model objects

/// m giving V_s = 0 for OneD_B: (3/2) m^3 v^2 = M^3.
inline double rest_mass_1dB(double M, double v) { return std::cbrt(2.0 * M * M * M / (3.0 * v * v)); }

inline PhysicalParams effective_params(const ScenarioConfig& c) {
  PhysicalParams p = c.params;
  if (c.at_rest) p.m = rest_mass_1dB(p.M, p.v);
  return p;
}

inline SolitonSpec make_spec(const ScenarioConfig& c, const PhysicalParams& p) {
  switch (c.family) {
    case Family::ThreeD_A:
      return c.alpha > 0.0 ? SolitonSpec::three_d_a_from_alpha(p, c.alpha, c.gamma, c.epsilon)
                           : SolitonSpec::three_d_a(p, c.omega, c.gamma, c.epsilon);
    case Family::ThreeD_B: return SolitonSpec::three_d_b(c.mu, c.gamma, c.epsilon);
    case Family::OneD_A: return SolitonSpec::one_d_a(c.variant_13);
    case Family::OneD_B: {
      auto s = SolitonSpec::one_d_b(p);
      // At the rest point rounding can leave V_s^2 a few ulps below 0.
      if (c.at_rest && !s.soliton_velocity) s.soliton_velocity = 0.0;
      return s;
    }
  }
  throw std::logic_error("unknown family");
}

inline Grid soliton_grid(const ScenarioConfig& c, const SolitonSpec& s, const PhysicalParams& p) {
  if (c.length > 0.0) {
    std::optional<TransverseMode> tm;
    if (is_three_d(s.family) && (s.gamma != 0.0 || s.epsilon != 0.0))
      tm = TransverseMode{s.gamma, s.epsilon};
    return make_grid(1, c.n, c.length, tm);
  }
  return family_grid(s, p, c.n, c.widths);
}

inline IntegratorOptions integrator_options(const ScenarioConfig& c) {
  IntegratorOptions o;
  o.mode = c.mode;
  o.convention = c.convention;
  o.source_coupling = c.source_coupling;
  o.guard.enabled = c.stability_guard;
  return o;
}

/// Thrown when the physics constraints of a parsed config fail.
class ValidationError : public ConfigError {
public:
  explicit ValidationError(const std::string& what) : ConfigError(what) {}
};

inline void require_valid(const PhysicalParams& p, const SolitonSpec& s) {
  const auto v = validate_params(p, s);
  if (v.ok()) return;
  std::string msg = "parameter validation failed:";
  for (const auto& c : v.checks)
    if (!c.passed) msg += " [" + c.name + ": margin " + format_double(c.margin) + "]";
  throw ValidationError(msg);
}

// ---------------------------------------------------------------------------
// Scenarios

namespace scenario {

struct Context {
  const ScenarioConfig& config;
  RunReport& report;
  detail::OutputSink& sink;
};

/// Record stride capped so short runs still yield at least ten records.
inline std::size_t record_stride(const ScenarioConfig& c, double dt) {
  const auto steps = static_cast<std::size_t>(std::llround(c.T / dt));
  return std::max<std::size_t>(1, std::min(c.stride, steps / 10));
}

/// Samples the family (no evolution) at 11 instants and fits the peak speed.
inline VelocityFit sampled_velocity(const SolitonSpec& s, const PhysicalParams& p, const Grid& g,
                                    double T) {
  std::vector<ObservableRecord> rs;
  for (int k = 0; k <= 10; ++k) {
    const double t = T * k / 10.0;
    auto smp = sample_solution(s, p, g, t);
    FieldState st{t, std::move(smp.psi), std::move(smp.phi), {}, p};
    rs.push_back(measure(st, g, rs.empty() ? nullptr : &rs.back()));
  }
  return fit_velocity(rs, g.spacing);
}

inline void verify_residuals(Context& ctx) {
  const auto& c = ctx.config;
  auto& rep = ctx.report;
  const PhysicalParams p = c.params;
  AuditPlan plan;
  plan.n_coarse = c.audit_n;
  plan.widths = c.audit_widths;
  const SolitonSpec a3 = c.alpha > 0.0 ? SolitonSpec::three_d_a_from_alpha(p, c.alpha)
                                       : SolitonSpec::three_d_a(p, c.omega);
  const SolitonSpec b3 = SolitonSpec::three_d_b(c.mu);
  plan.cases = {
      {"ThreeD_A", p, a3},
      {"ThreeD_B", p, b3},
      {"OneD_A as_printed_sech", p, SolitonSpec::one_d_a(Variant13::as_printed_sech)},
      {"OneD_A corrected_sech_squared", p, SolitonSpec::one_d_a(Variant13::corrected_sech_squared)},
      {"OneD_B", p, SolitonSpec::one_d_b(p)},
  };
  for (const auto& cs : plan.cases) require_valid(cs.params, cs.spec);
  const auto reports = full_family_audit(plan);
  Json arr = Json::array();
  for (const auto& r : reports) arr.push_back(detail::residual_json(r));
  rep.data["residuals"] = arr;

  auto by = [&](std::string_view label) -> const ResidualReport& {
    for (const auto& r : reports)
      if (r.label == label) return r;
    throw std::logic_error("missing audit case");
  };
  const double tol = 1e-6;
  auto residual_checks = [&](int id, const ResidualReport& r) {
    detail::check(rep, id, r.label + " Schrodinger relative residual", r.schrodinger.rel, tol, "<");
    detail::check(rep, id, r.label + " Klein-Gordon relative residual", r.klein_gordon.rel, tol, "<");
    detail::check(rep, id, r.label + " Schrodinger refinement ratio", *r.schrodinger_convergence, 16.0,
                  ">=");
    detail::check(rep, id, r.label + " Klein-Gordon refinement ratio", *r.klein_gordon_convergence, 16.0,
                  ">=");
  };
  residual_checks(1, by("ThreeD_A"));
  residual_checks(2, by("ThreeD_B"));

  // ThreeD_B translation speed: sampled family and quasi-1D coupled evolution.
  {
    const double target = b3.mu / p.M;
    const Grid g = family_grid(b3, p, 2 * plan.n_coarse, plan.widths);
    const auto fit = sampled_velocity(b3, p, g, c.T);
    detail::check(rep, 2, "ThreeD_B sampled peak speed |V - mu/M|", std::abs(fit.velocity - target),
                  1e-6, "<", "V = " + format_double(fit.velocity));
    Integrator in(g, p, integrator_options(c));
    const double dt = fit_time_step(c.T, c.dt > 0.0 ? c.dt : in.max_stable_dt());
    const auto traj = in.evolve(family_state(b3, p, g, dt), c.T, dt, {record_stride(c, dt), 0});
    rep.steps += static_cast<std::size_t>(std::llround(c.T / dt));
    ctx.sink.text("threeD_B_series.csv", detail::csv_series(traj.observables));
    const auto efit = fit_velocity(traj);
    detail::check(rep, 2, "ThreeD_B evolved peak speed |V/(mu/M) - 1|",
                  std::abs(efit.velocity / target - 1.0), 0.01, "<",
                  "V = " + format_double(efit.velocity));
    rep.data["threeD_B_velocity"] = {{"target", target},
                                     {"sampled", fit.velocity},
                                     {"evolved", efit.velocity},
                                     {"evolved_std_error", efit.std_error}};
  }

  // OneD families.
  {
    const auto& ob = by("OneD_B");
    detail::check(rep, 3, "OneD_B Schrodinger relative residual", ob.schrodinger.rel, tol, "<");
    detail::check(rep, 3, "OneD_B Klein-Gordon relative residual", ob.klein_gordon.rel, tol, "<");
    const auto& printed = by("OneD_A as_printed_sech");
    const auto& fixed = by("OneD_A corrected_sech_squared");
    detail::check(rep, 3, "OneD_A as printed: Schrodinger relative residual", printed.schrodinger.rel, tol,
                  "<");
    detail::check(rep, 3, "OneD_A as printed: Klein-Gordon relative residual", printed.klein_gordon.rel, 0.1,
                  ">");
    const Grid coarse = family_grid(printed.spec, p, plan.n_coarse, plan.widths);
    const auto printed_coarse = verify_family(printed.spec, p, coarse);
    const double drift = std::abs(printed_coarse.klein_gordon.rel / printed.klein_gordon.rel - 1.0);
    detail::check(rep, 3, "OneD_A as printed: Klein-Gordon residual resolution independence", drift,
                  0.05, "<",
                  "rel(n) = " + format_double(printed_coarse.klein_gordon.rel) +
                      ", rel(2n) = " + format_double(printed.klein_gordon.rel));
    detail::check(rep, 3, "OneD_A sech^2 variant: Schrodinger relative residual", fixed.schrodinger.rel,
                  tol, "<");
    detail::check(rep, 3, "OneD_A sech^2 variant: Klein-Gordon relative residual", fixed.klein_gordon.rel,
                  tol, "<");
    std::ostringstream f;
    f << "OneD_A variant contrast: as printed (sech phi) gives Schrodinger rel "
      << format_double(printed.schrodinger.rel) << " and Klein-Gordon rel " << format_double(printed.klein_gordon.rel)
      << " (refinement ratios " << format_double(*printed.schrodinger_convergence) << ", "
      << format_double(*printed.klein_gordon_convergence) << "); sech^2 phi gives "
      << format_double(fixed.schrodinger.rel) << " and " << format_double(fixed.klein_gordon.rel);
    rep.findings.push_back(f.str());
  }

  // Normalization.
  {
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> uM(0.5, 2.0), um(0.2, 1.0), uv(0.5, 2.0);
    Json triples = Json::array();
    int found = 0;
    while (found < 3) {
      PhysicalParams q{uM(rng), um(rng), uv(rng)};
      if (soliton_velocity_squared_1dB(q) <= 0.0) continue;
      ++found;
      Json row = {{"M", q.M}, {"m", q.m}, {"v", q.v}};
      for (const auto& s : {SolitonSpec::one_d_a(Variant13::as_printed_sech), SolitonSpec::one_d_b(q)}) {
        const Grid g = family_grid(s, q, 2 * plan.n_coarse, plan.widths);
        auto smp = sample_solution(s, q, g, 0.0);
        const double norm = measure(FieldState{0.0, smp.psi, smp.phi, {}, q}, g).norm;
        const std::string name = std::string(to_string(s.family));
        row[name] = norm;
        detail::check(rep, 4, name + " lattice norm |N - 1| at (M, m, v) = (" + format_double(q.M) +
                                  ", " + format_double(q.m) + ", " + format_double(q.v) + ")",
                      std::abs(norm - 1.0), 1e-8, "<");
      }
      triples.push_back(row);
    }
    rep.data["normalization_triples"] = triples;

    const double alpha_star = std::pow(p.M, 3) / std::pow(p.m * p.v, 2);
    Json a_rows = Json::array();
    for (double factor : {1.0, 0.9, 1.1}) {
      const auto s = SolitonSpec::three_d_a_from_alpha(p, factor * alpha_star);
      const Grid g = family_grid(s, p, 2 * plan.n_coarse, plan.widths);
      auto smp = sample_solution(s, p, g, 0.0);
      const double norm = measure(FieldState{0.0, smp.psi, smp.phi, {}, p}, g).norm;
      a_rows.push_back({{"alpha", s.alpha}, {"norm", norm}});
      if (factor == 1.0)
        detail::check(rep, 4, "ThreeD_A x-norm |N - 1| at alpha = M^3/(m v)^2",
                      std::abs(norm - 1.0), 1e-8, "<");
      else
        detail::check(rep, 4,
                      "ThreeD_A x-norm |N - 1| at alpha = " + format_double(factor) +
                          " M^3/(m v)^2 (must differ from 1)",
                      std::abs(norm - 1.0), 1e-8, ">");
    }
    rep.data["threeD_A_norms"] = a_rows;
  }
}

/// Random band-limited complex field, normalized to unit lattice norm.
inline ComplexField random_smooth_field(const Grid& g, std::uint64_t seed, int modes = 12) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Spectrum sp{ComplexField(g.size()), g};
  for (int j = -modes; j <= modes; ++j) {
    const std::size_t idx = j >= 0 ? static_cast<std::size_t>(j) : g.n - static_cast<std::size_t>(-j);
    const double a = std::exp(-0.5 * (j * j) / (0.25 * modes * modes));
    sp.coefficients[idx] = Complex(gauss(rng), gauss(rng)) * a * static_cast<double>(g.n);
  }
  ComplexField f = inverse(sp);
  double norm = 0.0;
  for (const auto& z : f) norm += std::norm(z);
  const double scale = 1.0 / std::sqrt(norm * g.spacing);
  for (auto& z : f) z *= scale;
  return f;
}

inline void scheme_checks(Context& ctx, const SolitonSpec& s, const PhysicalParams& p,
                          const Grid& production) {
  const auto& c = ctx.config;
  auto& rep = ctx.report;
  const Grid g = make_grid(1, std::min<std::size_t>(production.n, 1024), production.length,
                           production.transverse_mode);
  Json out;

  // Norm conservation on arbitrary data, both modes.
  for (auto mode : {EvolutionMode::coupled, EvolutionMode::choquard}) {
    auto opts = integrator_options(c);
    opts.mode = mode;
    Integrator in(g, p, opts);
    const double T = 1.0;
    const double dt = fit_time_step(T, in.max_stable_dt());
    auto st = static_state(random_smooth_field(g, c.seed), p, g, dt, c.convention, c.source_coupling);
    const auto traj = in.evolve(st, T, dt, {1, 0});
    double drift = 0.0;
    for (const auto& r : traj.observables)
      drift = std::max(drift, std::abs(r.norm - traj.observables.front().norm));
    const std::string m(to_string(mode));
    out["norm_drift_per_time_" + m] = drift / T;
    detail::check(rep, 9, "norm drift per unit time, random data, " + m + " mode", drift / T, 1e-10,
                  "<");
  }

  Integrator in(g, p, integrator_options(c));
  // Time reversal over T = 10.
  {
    const double T = 10.0;
    const double dt = fit_time_step(T, in.max_stable_dt());
    const auto st = family_state(s, p, g, dt);
    const auto fwd = in.evolve(st, T, dt, {1000000, 0});
    const auto back = in.reverse_start(fwd.snapshots.back(), dt);
    const auto bwd = in.evolve(back, T, -dt, {1000000, 0});
    const double err = detail::max_abs_diff(bwd.snapshots.back().psi, st.psi);
    out["reversal_max_abs"] = err;
    detail::check(rep, 9, "time reversal over T = 10, max|psi - psi0|", err, 1e-6, "<");
  }
  // dt halving.
  {
    const double T = 1.0;
    auto final_psi = [&](double dt) {
      return in.evolve(family_state(s, p, g, dt), T, dt, {1000000, 0}).snapshots.back().psi;
    };
    const double dt0 = fit_time_step(T, in.max_stable_dt());
    const auto a = final_psi(dt0), b = final_psi(dt0 / 2), d = final_psi(dt0 / 4);
    const double ratio = detail::max_abs_diff(a, b) / detail::max_abs_diff(b, d);
    out["dt_halving_ratio"] = ratio;
    detail::check(rep, 9, "dt-halving error ratio |ratio - 4|", std::abs(ratio - 4.0), 0.5, "<=",
                  "ratio = " + format_double(ratio));
  }
  rep.data["scheme"] = out;
}

inline void soliton_propagation(Context& ctx) {
  const auto& c = ctx.config;
  auto& rep = ctx.report;
  const PhysicalParams p = effective_params(c);
  const SolitonSpec s = make_spec(c, p);
  require_valid(p, s);
  const Grid g = soliton_grid(c, s, p);
  Integrator in(g, p, integrator_options(c));
  const double dt = fit_time_step(c.T, c.dt > 0.0 ? c.dt : in.max_stable_dt());
  const auto st = family_state(s, p, g, dt, c.x0);
  const std::size_t snap = c.snapshot_stride;
  const auto traj = in.evolve(st, c.T, dt, {record_stride(c, dt), snap});
  rep.steps += static_cast<std::size_t>(std::llround(c.T / dt));
  ctx.sink.text("series.csv", detail::csv_series(traj.observables));
  detail::write_snapshot_1d(ctx.sink, "snapshot_initial.csv", st, g);
  for (std::size_t k = 1; k < traj.snapshots.size(); ++k)
    detail::write_snapshot_1d(ctx.sink, "snapshot_" + std::to_string(k) + ".csv", traj.snapshots[k], g);
  ctx.sink.text("plot.gp", detail::plot_script({"series.csv"}));

  const auto& first = traj.observables.front();
  const auto& last = traj.observables.back();
  double width_dev = 0.0;
  for (const auto& r : traj.observables)
    width_dev = std::max(width_dev, std::abs(r.width / first.width - 1.0));
  const double target = family_velocity(s, p);
  const auto fit = fit_velocity(traj);
  detail::check(rep, 5, "norm drift |N(T) - N(0)|", std::abs(last.norm - first.norm), 1e-8, "<");
  detail::check(rep, 5, "max relative width change", width_dev, 0.01, "<");
  if (target != 0.0)
    detail::check(rep, 5, "fitted velocity |V/V_family - 1|", std::abs(fit.velocity / target - 1.0),
                  0.01, "<", "V = " + format_double(fit.velocity));
  else
    detail::check(rep, 5, "fitted velocity |V| for a family at rest", std::abs(fit.velocity), 0.01,
                  "<");
  rep.data["grid"] = {{"n", g.n}, {"length", g.length}, {"spacing", g.spacing}, {"dt", dt}};
  rep.data["velocity"] = {{"family", target},
                          {"fitted", fit.velocity},
                          {"std_error", fit.std_error},
                          {"degenerate", fit.degenerate}};
  rep.data["norm"] = {{"initial", first.norm}, {"final", last.norm}};
  rep.data["width"] = {{"initial", first.width}, {"final", last.width}, {"max_rel_change", width_dev}};
  if (c.scheme_checks) scheme_checks(ctx, s, p, g);
}

inline void free_spreading(Context& ctx) {
  const auto& c = ctx.config;
  auto& rep = ctx.report;
  const PhysicalParams p = effective_params(c);
  const SolitonSpec s = make_spec(c, p);
  require_valid(p, s);

  const Grid gs = soliton_grid(c, s, p);
  Integrator sol(gs, p, integrator_options(c));
  const double dts = fit_time_step(c.T, c.dt > 0.0 ? c.dt : sol.max_stable_dt());
  const auto straj = sol.evolve(family_state(s, p, gs, dts, c.x0), c.T, dts,
                                 {record_stride(c, dts), 0});

  const double sigma0 = c.sigma0 > 0.0 ? c.sigma0 : straj.observables.front().width;
  const Grid gf = make_grid(1, gs.n, gs.length * c.free_length_factor);
  auto fopts = integrator_options(c);
  fopts.source_coupling = false;
  Integrator fr(gf, p, fopts);
  const double dtf = fit_time_step(c.T, c.dt > 0.0 ? c.dt : fr.max_stable_dt());
  FieldState fs{0.0, gaussian_packet(gf, sigma0, c.x0), RealField(gf.n, 0.0),
                RealField(gf.n, 0.0), p};
  const auto ftraj = fr.evolve(fs, c.T, dtf, {1, 0});
  rep.steps += static_cast<std::size_t>(std::llround(c.T / dts + c.T / dtf));

  ctx.sink.text("soliton_series.csv", detail::csv_series(straj.observables));
  ctx.sink.text("free_series.csv", detail::csv_series(ftraj.observables));
  ctx.sink.text("plot.gp", detail::plot_script({"soliton_series.csv", "free_series.csv"}));

  double worst = 0.0;
  double last_t = 0.0;
  for (const auto& r : ftraj.observables) {
    const double law = free_spreading_width(sigma0, p.M, r.t);
    if (law > 2.0 * sigma0) break;
    worst = std::max(worst, std::abs(r.width / law - 1.0));
    last_t = r.t;
  }
  detail::check(rep, 6, "free Gaussian width vs sigma(t) law up to doubling", worst, 0.005, "<",
                "checked to t = " + format_double(last_t));
  const double ratio = spreading_ratio(straj, ftraj, c.T);
  detail::check(rep, 6, "spreading_ratio(soliton, free, T)", ratio, 0.5, "<");
  const double free_factor = ftraj.observables.back().width / ftraj.observables.front().width;
  rep.data["sigma0"] = sigma0;
  rep.data["free_width_factor"] = free_factor;
  rep.data["free_width_factor_law"] = free_spreading_width(sigma0, p.M, c.T) / sigma0;
  rep.data["soliton_width_factor"] =
      straj.observables.back().width / straj.observables.front().width;
  rep.data["spreading_ratio"] = ratio;
  rep.findings.push_back("free packet widened by " + format_double(free_factor) +
                         " while the soliton width factor stayed " +
                         format_double(straj.observables.back().width /
                                       straj.observables.front().width));
}

inline void choquard_stationary(Context& ctx) {
  const auto& c = ctx.config;
  auto& rep = ctx.report;
  const PhysicalParams p = effective_params(c);
  const SolitonSpec s = make_spec(c, p);
  require_valid(p, s);
  const Grid g = soliton_grid(c, s, p);
  auto opts = integrator_options(c);
  opts.mode = EvolutionMode::choquard;
  Integrator in(g, p, opts);
  const double dt = fit_time_step(c.T, c.dt > 0.0 ? c.dt : in.max_stable_dt());
  const auto st = family_state(s, p, g, dt, c.x0);
  const std::size_t final_stride = static_cast<std::size_t>(std::llround(c.T / dt));
  const auto traj = in.evolve(st, c.T, dt, {record_stride(c, dt), c.snapshot_stride});
  rep.steps += final_stride;
  ctx.sink.text("series.csv", detail::csv_series(traj.observables));
  detail::write_snapshot_1d(ctx.sink, "snapshot_initial.csv", st, g);
  detail::write_snapshot_1d(ctx.sink, "snapshot_final.csv", traj.snapshots.back(), g);
  ctx.sink.text("plot.gp", detail::plot_script({"series.csv"}));

  double width_dev = 0.0;
  const double w0 = traj.observables.front().width;
  for (const auto& r : traj.observables) width_dev = std::max(width_dev, std::abs(r.width / w0 - 1.0));
  double profile = 0.0;
  const auto& fin = traj.snapshots.back().psi;
  for (std::size_t i = 0; i < g.n; ++i)
    profile = std::max(profile, std::abs(std::abs(fin[i]) - std::abs(st.psi[i])));
  detail::check(rep, 8, "max relative width change", width_dev, 1e-4, "<");
  detail::check(rep, 8, "max | |psi(T)| - |psi(0)| |", profile, 1e-4, "<");

  const auto phi_eq = slaved_field(st.psi, p, g, CouplingConvention::motion_equation);
  const auto phi_pr = slaved_field(st.psi, p, g, CouplingConvention::printed_static);
  const double min_eq = *std::min_element(phi_eq.begin(), phi_eq.end());
  const double min_pr = *std::min_element(phi_pr.begin(), phi_pr.end());
  const double ratio = min_eq / min_pr;
  detail::check(rep, 8, "slaved-field depth ratio |ratio - 2| between conventions",
                std::abs(ratio - 2.0), 1e-9, "<", "ratio = " + format_double(ratio));
  rep.data["m"] = p.m;
  rep.data["soliton_velocity"] = s.soliton_velocity.value_or(std::nan(""));
  rep.data["phi_min"] = {{"motion_equation", min_eq}, {"printed_static", min_pr}, {"ratio", ratio}};
  rep.findings.push_back("slaved-field depth: motion-equation coefficient " + format_double(min_eq) +
                         ", printed static coefficient " + format_double(min_pr) + ", ratio " +
                         format_double(ratio));
}

/// Random smooth periodic 1D source: offset plus decaying random Fourier modes.
inline RealField random_smooth_source(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  RealField s(g.n, 1.0);
  for (int j = 1; j <= 6; ++j) {
    const double a = U(rng) * std::exp(-j * j / 16.0);
    const double th = 2.0 * pi * U(rng);
    for (std::size_t i = 0; i < g.n; ++i)
      s[i] += a * std::cos(2.0 * pi * j * g.coords[i] / g.length + th);
  }
  return s;
}

inline std::vector<GaussianBlob> random_blobs(const Grid& g, std::size_t count,
                                              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<GaussianBlob> out;
  const double reach = g.length / 8.0;
  for (std::size_t k = 0; k < count; ++k)
    out.push_back({0.5 + U(rng), 2.0 * g.spacing * (1.0 + 0.3 * U(rng)), reach * (2.0 * U(rng) - 1.0),
                   reach * (2.0 * U(rng) - 1.0), reach * (2.0 * U(rng) - 1.0)});
  return out;
}

inline void yukawa_oracle(Context& ctx) {
  const auto& c = ctx.config;
  auto& rep = ctx.report;
  const PhysicalParams p = c.params;
  if (!(p.m > 0.0)) throw ValidationError("yukawa-oracle requires m > 0");
  const double L = c.yukawa_length > 0.0 ? c.yukawa_length : 48.0 / p.m;
  std::mt19937_64 rng(c.seed);

  const Grid g1 = make_grid(1, c.yukawa_n1, L);
  const auto src1 = random_smooth_source(g1, rng);
  const auto spec1 = yukawa_invert(src1, p.m, g1);
  const auto dir1 = yukawa_convolve_direct(src1, p.m, g1);
  const double e1 = detail::max_abs_rel(spec1, dir1);
  detail::check(rep, 7, "1D spectral vs direct quadrature, max-abs relative (n = " +
                            std::to_string(g1.n) + ")",
                e1, 1e-6, "<");

  const Grid g3 = make_grid(3, c.yukawa_n3, L);
  const auto blobs = random_blobs(g3, c.yukawa_sources, rng);
  const auto src3 = sample_blobs(blobs, g3);
  const auto spec3 = yukawa_invert(src3, p.m, g3);
  const auto dir3 = yukawa_convolve_blobs(blobs, p.m, g3);
  const double e3 = detail::max_abs_rel(spec3, dir3);
  detail::check(rep, 7, "3D spectral vs direct quadrature, max-abs relative (n = " +
                            std::to_string(g3.n) + "^3)",
                e3, 1e-6, "<");

  const double s0 = 0.7;
  double worst = 0.0;
  for (const Grid* g : {&g1, &g3}) {
    const auto phi = yukawa_invert(RealField(g->size(), s0), p.m, *g);
    const double exact = -s0 / (p.m * p.m);
    for (double x : phi) worst = std::max(worst, std::abs(x / exact - 1.0));
  }
  detail::check(rep, 7, "constant source phi = -s0/m^2, max relative error", worst, 1e-12, "<");

  {
    auto f = ctx.sink.open("yukawa_1d.csv");
    f << detail::snapshot_header(g1, 0.0, p) << "\n" << "x,source,phi_spectral,phi_direct\n";
    for (std::size_t i = 0; i < g1.n; ++i)
      f << format_double(g1.coords[i]) << "," << format_double(src1[i]) << ","
        << format_double(spec1[i]) << "," << format_double(dir1[i]) << "\n";
  }
  detail::write_snapshot_3d(ctx.sink, "yukawa_3d.bin", g3, 0.0, p,
                            {{"source", &src3}, {"phi_spectral", &spec3}, {"phi_direct", &dir3}});
  Json b = Json::array();
  for (const auto& bl : blobs)
    b.push_back({{"amplitude", bl.amplitude}, {"sigma", bl.sigma}, {"centre", {bl.cx, bl.cy, bl.cz}}});
  rep.data["length"] = L;
  rep.data["blobs"] = b;
  rep.data["max_abs_rel_1d"] = e1;
  rep.data["max_abs_rel_3d"] = e3;
  rep.data["constant_source_rel"] = worst;
}

inline void perturbation_stability(Context& ctx) {
  const auto& c = ctx.config;
  auto& rep = ctx.report;
  const PhysicalParams p = effective_params(c);
  const SolitonSpec s = make_spec(c, p);
  require_valid(p, s);
  const Grid g = soliton_grid(c, s, p);
  Integrator in(g, p, integrator_options(c));
  const double dt = fit_time_step(c.T, c.dt > 0.0 ? c.dt : in.max_stable_dt());
  const auto base = family_state(s, p, g, dt, c.x0);

  auto run = [&] {
    const auto st = perturb(base, g, c.perturbation, c.strength, c.seed);
    return in.evolve(st, c.T, dt, {record_stride(c, dt), 0});
  };
  const auto a = run();
  const auto b = run();
  rep.steps += 2 * static_cast<std::size_t>(std::llround(c.T / dt));
  const std::string csv_a = detail::csv_series(a.observables);
  const std::string csv_b = detail::csv_series(b.observables);
  ctx.sink.text("series.csv", csv_a);
  ctx.sink.text("plot.gp", detail::plot_script({"series.csv"}));

  detail::check(rep, 10, "repeat run with the same seed differs (0 = identical CSV)",
                csv_a == csv_b ? 0.0 : 1.0, 0.0, "<=");

  const double w0 = a.observables.front().width;
  double wmax = 0.0;
  for (const auto& r : a.observables) wmax = std::max(wmax, r.width);
  const double wT = a.observables.back().width;
  // Norm within 10 initial widths of the final peak, over the total norm.
  const auto& fin = a.snapshots.back();
  const double peak = a.observables.back().peak_pos;
  double inside = 0.0, total = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    const double rho = std::norm(fin.psi[i]);
    total += rho;
    if (std::abs(wrap_displacement(g.coords[i] - peak, g.length)) <= 10.0 * w0) inside += rho;
  }
  const double fraction = total > 0.0 ? inside / total : 0.0;
  const bool survived = fraction >= 0.5;
  rep.data["classification"] = survived ? "survived" : "dispersed";
  rep.data["localized_fraction"] = fraction;
  rep.data["width"] = {{"initial", w0}, {"max", wmax}, {"final", wT}};
  rep.data["norm"] = {{"initial", a.observables.front().norm}, {"final", a.observables.back().norm}};
  rep.findings.push_back(std::string(to_string(c.perturbation)) + " strength " +
                         format_double(c.strength) + ": " + (survived ? "survived" : "dispersed") +
                         " (norm fraction within 10 initial widths of the peak at T = " +
                         format_double(fraction) + ", max width / initial width = " +
                         format_double(wmax / w0) + ")");
}

}  // namespace scenario

inline RunReport run_scenario(const ScenarioConfig& config);

namespace scenario {

inline std::vector<std::string> split_values(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ','))
    if (auto t = higgsloc::detail::trim(cur); !t.empty()) out.emplace_back(t);
  return out;
}

inline void param_sweep(Context& ctx) {
  const auto& c = ctx.config;
  auto& rep = ctx.report;
  const auto values = split_values(c.sweep_values);
  if (values.empty()) throw ConfigError("sweep.values is empty");
  std::vector<ScenarioConfig> configs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ScenarioConfig sub = c;
    sub.scenario = c.sweep_base;
    set_config_value(sub, c.sweep_key, values[i]);
    sub.output_dir = (ctx.sink.dir() / ("run_" + std::to_string(i))).string();
    configs.push_back(std::move(sub));
  }
  std::vector<RunReport> results(configs.size());
  std::size_t workers = c.sweep_workers ? c.sweep_workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, configs.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < configs.size(); i = next++) results[i] = run_scenario(configs[i]);
    });
  for (auto& t : pool) t.join();

  Json runs = Json::array();
  bool aborted = false, failed = false;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    runs.push_back({{"value", values[i]},
                    {"status", std::string(to_string(r.status))},
                    {"exit_code", r.exit_code()},
                    {"output_dir", configs[i].output_dir}});
    for (auto cr : r.criteria) {
      cr.detail = c.sweep_key + " = " + values[i] + (cr.detail.empty() ? "" : "; " + cr.detail);
      rep.criteria.push_back(std::move(cr));
    }
    for (const auto& f : r.findings) rep.findings.push_back(c.sweep_key + " = " + values[i] + ": " + f);
    rep.steps += r.steps;
    aborted = aborted || r.status == RunStatus::aborted;
    failed = failed || r.status == RunStatus::failed || r.status == RunStatus::config_error;
  }
  rep.data["runs"] = runs;
  if (aborted) rep.status = RunStatus::aborted;
  else if (failed) rep.status = RunStatus::failed;
}

}  // namespace scenario

inline Json report_json(const RunReport& r) {
  Json j;
  j["scenario"] = r.config.scenario;
  j["status"] = std::string(to_string(r.status));
  if (!r.error.empty()) j["error"] = r.error;
  if (r.abort_time) j["abort_time"] = *r.abort_time;
  j["exit_code"] = r.exit_code();
  j["config"] = serialize_config(r.config);
  Json cs = Json::array();
  for (const auto& c : r.criteria)
    cs.push_back({{"criterion", c.id},
                  {"name", c.name},
                  {"passed", c.passed},
                  {"value", c.value},
                  {"relation", c.relation},
                  {"threshold", c.threshold},
                  {"detail", c.detail}});
  j["criteria"] = cs;
  j["findings"] = r.findings;
  j["data"] = r.data;
  j["artifacts"] = r.artifacts;
  j["wall_seconds"] = r.wall_seconds;
  j["steps"] = r.steps;
  return j;
}

/// Runs one scenario and writes its artifacts to config.output_dir. Errors are
/// captured in the report (status, message, FAILED marker file), not thrown.
inline RunReport run_scenario(const ScenarioConfig& config) {
  RunReport rep;
  rep.config = config;
  const auto start = std::chrono::steady_clock::now();
  std::unique_ptr<detail::OutputSink> sink;
  try {
    check_config(config);
    sink = std::make_unique<detail::OutputSink>(config.output_dir, rep);
    sink->text("config.cfg", serialize_config(config));
    scenario::Context ctx{config, rep, *sink};
    const auto& s = config.scenario;
    if (s == "verify-residuals") scenario::verify_residuals(ctx);
    else if (s == "soliton-propagation") scenario::soliton_propagation(ctx);
    else if (s == "free-spreading") scenario::free_spreading(ctx);
    else if (s == "choquard-stationary") scenario::choquard_stationary(ctx);
    else if (s == "yukawa-oracle") scenario::yukawa_oracle(ctx);
    else if (s == "perturbation-stability") scenario::perturbation_stability(ctx);
    else if (s == "param-sweep") scenario::param_sweep(ctx);
  } catch (const NumericalAbort& e) {
    rep.status = RunStatus::aborted;
    rep.error = config.scenario + ": numerical abort at t = " + format_double(e.time()) + ": " + e.what();
    rep.abort_time = e.time();
  } catch (const ConfigError& e) {
    rep.status = RunStatus::config_error;
    rep.error = config.scenario + ": " + e.what();
  } catch (const std::exception& e) {
    rep.status = RunStatus::failed;
    rep.error = config.scenario + ": " + e.what();
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (sink) {
    if (rep.status != RunStatus::ok) sink->text("FAILED", rep.error + "\n");
    sink->text("report.json", report_json(rep).dump(2) + "\n");
  }
  return rep;
}

}  // namespace higgsloc

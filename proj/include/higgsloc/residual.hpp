#pragma once

// Discretized residuals of the motion equations
//   i psi_t + (1/2M) Laplacian psi - M phi psi = 0
//   (Laplacian - d_t^2) phi - m^2 phi - (2M/v^2) |psi|^2 = 0
// and of the Choquard reduction, evaluated on sampled fields. Time
// derivatives are centred finite differences of the sampler; spatial ones are
// spectral.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "higgsloc/analytic.hpp"
#include "higgsloc/choquard.hpp"
#include "higgsloc/core.hpp"
#include "higgsloc/spectral.hpp"

namespace higgsloc {

struct SampledFields {
  ComplexField psi;
  RealField phi;
};

using FieldSampler = std::function<SampledFields(double t)>;

struct TermMagnitude {
  std::string term;
  double max_abs{0.0};
};

struct EquationNorms {
  double abs{0.0};
  /// abs divided by the largest single-term max-abs (0 when all terms vanish).
  double rel{0.0};
  std::vector<TermMagnitude> terms;
};

template <class T>
struct Residual {
  std::vector<T> field;
  EquationNorms norms;
};

struct TimeDifferencing {
  double step{1e-3};
  int order{6};  ///< even accuracy order of the centred stencil
};

namespace detail {

template <class T>
double max_abs(const std::vector<T>& f) {
  double r = 0.0;
  for (const auto& x : f) r = std::max(r, static_cast<double>(std::abs(x)));
  return r;
}

inline void finish_norms(EquationNorms& n, double residual_max) {
  n.abs = residual_max;
  double scale = 0.0;
  for (const auto& t : n.terms) scale = std::max(scale, t.max_abs);
  n.rel = scale > 0.0 ? residual_max / scale : 0.0;
}

inline void check_step(const TimeDifferencing& td, double t) {
  const double floor = 1e3 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
  if (!(td.step > floor))
    throw std::domain_error("time-difference step " + std::to_string(td.step) +
                            " underflows (floor " + std::to_string(floor) + ")");
  if (td.order < 2 || td.order % 2 != 0)
    throw std::invalid_argument("time-difference order must be even and >= 2");
}

}  // namespace detail

/// Residual of the Schroedinger equation for the sampled fields at time t.
inline Residual<Complex> schrodinger_residual(const FieldSampler& sample,
                                              const PhysicalParams& p, const Grid& grid,
                                              double t, const TimeDifferencing& td) {
  detail::check_step(td, t);
  const int half = td.order / 2;
  const auto w = detail::centered_weights(1, half);
  const SampledFields centre = sample(t);
  detail::check_shape(centre.psi.size(), grid);
  detail::check_shape(centre.phi.size(), grid);
  const std::size_t N = grid.size();

  ComplexField dpsi(N, Complex{});
  for (int j = -half; j <= half; ++j) {
    if (j == 0 || w[j + half] == 0.0) continue;
    const SampledFields s = sample(t + j * td.step);
    for (std::size_t i = 0; i < N; ++i) dpsi[i] += w[j + half] * s.psi[i];
  }
  const Complex I{0.0, 1.0};
  ComplexField time_term(N), kinetic(N), potential(N), res(N);
  const ComplexField lap = matter_laplacian(centre.psi, grid);
  for (std::size_t i = 0; i < N; ++i) {
    time_term[i] = I * dpsi[i] / td.step;
    kinetic[i] = lap[i] / (2.0 * p.M);
    potential[i] = -p.M * centre.phi[i] * centre.psi[i];
    res[i] = time_term[i] + kinetic[i] + potential[i];
  }
  Residual<Complex> out;
  out.norms.terms = {{"i dpsi/dt", detail::max_abs(time_term)},
                     {"(1/2M) Laplacian psi", detail::max_abs(kinetic)},
                     {"-M phi psi", detail::max_abs(potential)}};
  detail::finish_norms(out.norms, detail::max_abs(res));
  out.field = std::move(res);
  return out;
}

/// Residual of the Klein-Gordon equation for the sampled fields at time t.
inline Residual<double> klein_gordon_residual(const FieldSampler& sample,
                                              const PhysicalParams& p, const Grid& grid,
                                              double t, const TimeDifferencing& td) {
  detail::check_step(td, t);
  const int half = td.order / 2;
  const auto w = detail::centered_weights(2, half);
  const SampledFields centre = sample(t);
  detail::check_shape(centre.phi.size(), grid);
  const std::size_t N = grid.size();

  RealField dphi(N, 0.0);
  for (int j = -half; j <= half; ++j) {
    const SampledFields s = j == 0 ? centre : sample(t + j * td.step);
    for (std::size_t i = 0; i < N; ++i) dphi[i] += w[j + half] * s.phi[i];
  }
  const RealField lap = spectral_laplacian(centre.phi, grid);
  const double h2 = td.step * td.step;
  const double coupling = 2.0 * p.M / (p.v * p.v);
  RealField wave(N), tt(N), mass(N), source(N), res(N);
  for (std::size_t i = 0; i < N; ++i) {
    wave[i] = lap[i];
    tt[i] = -dphi[i] / h2;
    mass[i] = -p.m * p.m * centre.phi[i];
    source[i] = -coupling * std::norm(centre.psi[i]);
    res[i] = wave[i] + tt[i] + mass[i] + source[i];
  }
  Residual<double> out;
  out.norms.terms = {{"Laplacian phi", detail::max_abs(wave)},
                     {"-d2phi/dt2", detail::max_abs(tt)},
                     {"-m^2 phi", detail::max_abs(mass)},
                     {"-(2M/v^2)|psi|^2", detail::max_abs(source)}};
  detail::finish_norms(out.norms, detail::max_abs(res));
  out.field = std::move(res);
  return out;
}

/// Time-difference step giving ~1e-10 relative truncation for the family:
/// a fixed fraction of the inverse of its fastest time scale.
inline double default_time_step(const SolitonSpec& s, const PhysicalParams& p,
                                double fraction = 0.02) {
  const auto f = family_profile(s, p);
  const double rate = std::abs(f.frequency) + f.k * std::abs(f.velocity);
  return fraction / std::max(rate, 1e-3);
}

inline FieldSampler family_sampler(const SolitonSpec& s, const PhysicalParams& p,
                                   const Grid& grid, double x0 = 0.0) {
  return [s, p, grid, x0](double t) {
    auto smp = sample_solution(s, p, grid, t, x0);
    return SampledFields{std::move(smp.psi), std::move(smp.phi)};
  };
}

/// Smallest length >= min_length holding a whole number of carrier periods
/// 2 pi / |q|, so exp(i q x) is lattice-periodic.
inline double carrier_periodic_length(double min_length, double q) {
  if (q == 0.0) return min_length;
  const double period = 2.0 * pi / std::abs(q);
  return period * std::ceil(min_length / period * (1.0 - 1e-12));
}

/// Quasi-1D (or 1D) grid spanning at least `widths` envelope widths of the
/// family, rounded up to a carrier-periodic length.
inline Grid family_grid(const SolitonSpec& s, const PhysicalParams& p, std::size_t n,
                        double widths = 40.0) {
  const auto f = family_profile(s, p);
  std::optional<TransverseMode> tm;
  if (is_three_d(s.family) && (s.gamma != 0.0 || s.epsilon != 0.0))
    tm = TransverseMode{s.gamma, s.epsilon};
  return make_grid(1, n, carrier_periodic_length(widths / f.k, f.momentum), tm);
}

// ---------------------------------------------------------------------------
// Reports

struct Discretization {
  std::size_t n{0};
  double length{0.0};
  double spacing{0.0};
  double time_step{0.0};
  int time_order{6};
};

struct ResidualReport {
  std::string label;
  SolitonSpec spec;
  PhysicalParams params;
  EquationNorms schrodinger;
  EquationNorms klein_gordon;
  std::optional<EquationNorms> choquard;          ///< motion-equation coefficient
  std::optional<EquationNorms> choquard_printed;  ///< printed static coefficient
  Discretization discretization;
  /// eq_abs(n, h) / eq_abs(2n, h/2) at a step where time differencing dominates.
  std::optional<double> schrodinger_convergence;
  std::optional<double> klein_gordon_convergence;
};

inline ResidualReport verify_family(const SolitonSpec& s, const PhysicalParams& p,
                                    const Grid& grid, double t, double x0,
                                    const TimeDifferencing& td) {
  const auto sampler = family_sampler(s, p, grid, x0);
  ResidualReport r;
  r.spec = s;
  r.params = p;
  r.schrodinger = schrodinger_residual(sampler, p, grid, t, td).norms;
  r.klein_gordon = klein_gordon_residual(sampler, p, grid, t, td).norms;
  r.discretization = {grid.n, grid.length, grid.spacing, td.step, td.order};
  return r;
}

inline ResidualReport verify_family(const SolitonSpec& s, const PhysicalParams& p,
                                    const Grid& grid, double t = 0.0, double x0 = 0.0) {
  return verify_family(s, p, grid, t, x0, {default_time_step(s, p), 6});
}

// ---------------------------------------------------------------------------
// Choquard form

/// Residual of the stationary-intent Choquard equation for a lattice psi that
/// rotates as exp(i frequency t):
///   -frequency psi + (1/2M) Laplacian psi - M phi[psi] psi,
/// with phi slaved to |psi|^2 under the chosen convention.
inline Residual<Complex> choquard_residual(const ComplexField& psi, double frequency,
                                           const PhysicalParams& p, const Grid& grid,
                                           CouplingConvention c =
                                               CouplingConvention::motion_equation) {
  detail::check_shape(psi.size(), grid);
  double norm = 0.0;
  for (const auto& z : psi) norm += std::norm(z);
  norm *= grid.cell_volume();
  if (!std::isfinite(norm))
    throw std::domain_error("choquard_residual: non-normalizable input");
  const std::size_t N = grid.size();
  const RealField phi = slaved_field(psi, p, grid, c);
  const ComplexField lap = matter_laplacian(psi, grid);
  ComplexField time_term(N), kinetic(N), potential(N), res(N);
  for (std::size_t i = 0; i < N; ++i) {
    time_term[i] = -frequency * psi[i];
    kinetic[i] = lap[i] / (2.0 * p.M);
    potential[i] = -p.M * phi[i] * psi[i];
    res[i] = time_term[i] + kinetic[i] + potential[i];
  }
  Residual<Complex> out;
  out.norms.terms = {{"i dpsi/dt", detail::max_abs(time_term)},
                     {"(1/2M) Laplacian psi", detail::max_abs(kinetic)},
                     {"-M phi[psi] psi", detail::max_abs(potential)}};
  detail::finish_norms(out.norms, detail::max_abs(res));
  out.field = std::move(res);
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

struct AuditCase {
  std::string label;
  PhysicalParams params;
  SolitonSpec spec;
};

struct AuditPlan {
  std::vector<AuditCase> cases;
  std::size_t n_coarse{1024};        ///< convergence pair is (n, 2n)
  double widths{40.0};               ///< domain length in envelope widths
  double coarse_step_fraction{0.25}; ///< time-difference step of the coarse pair
};

/// Every family at M = 1, m = 0.5, v = 1: ThreeD_A with omega = 0,
/// ThreeD_B with mu = M/2, both OneD_A variants, OneD_B.
inline std::vector<AuditCase> default_audit_cases(const PhysicalParams& p = {}) {
  return {
      {"ThreeD_A", p, SolitonSpec::three_d_a(p, 0.0)},
      {"ThreeD_B", p, SolitonSpec::three_d_b(0.5 * p.M)},
      {"OneD_A as_printed_sech", p, SolitonSpec::one_d_a(Variant13::as_printed_sech)},
      {"OneD_A corrected_sech_squared", p,
       SolitonSpec::one_d_a(Variant13::corrected_sech_squared)},
      {"OneD_B", p, SolitonSpec::one_d_b(p)},
  };
}

/// Residual reports for each case at 2n with the production time step, plus
/// the (n, h) -> (2n, h/2) convergence ratios. Failures are data.
inline std::vector<ResidualReport> full_family_audit(const AuditPlan& plan) {
  std::vector<ResidualReport> out;
  out.reserve(plan.cases.size());
  for (const auto& c : plan.cases) {
    const Grid coarse = family_grid(c.spec, c.params, plan.n_coarse, plan.widths);
    const Grid fine = family_grid(c.spec, c.params, 2 * plan.n_coarse, plan.widths);
    ResidualReport r = verify_family(c.spec, c.params, fine);
    r.label = c.label;

    const double hc = default_time_step(c.spec, c.params, plan.coarse_step_fraction);
    const ResidualReport a = verify_family(c.spec, c.params, coarse, 0.0, 0.0, {hc, 6});
    const ResidualReport b = verify_family(c.spec, c.params, fine, 0.0, 0.0, {0.5 * hc, 6});
    auto ratio = [](double x, double y) {
      return y > 0.0 ? x / y : std::numeric_limits<double>::infinity();
    };
    r.schrodinger_convergence = ratio(a.schrodinger.abs, b.schrodinger.abs);
    r.klein_gordon_convergence = ratio(a.klein_gordon.abs, b.klein_gordon.abs);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace higgsloc

#pragma once

// Time integration of the coupled system and of its Choquard reduction.
//
// psi: Strang splitting, potential half-step / exact kinetic step in the
// spectrum / potential half-step. phi (coupled mode): explicit leapfrog
//   phi^{n+1} = 2 phi^n - phi^{n-1} + dt^2 (Laplacian phi^n - m^2 phi^n - S(psi^n)),
// with the psi half-steps using phi^n and phi^{n+1}. The step is symmetric
// under dt -> -dt with phi_prev and phi^{n+1} exchanged (see reverse_start).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include "higgsloc/analytic.hpp"
#include "higgsloc/choquard.hpp"
#include "higgsloc/core.hpp"
#include "higgsloc/diagnostics.hpp"
#include "higgsloc/spectral.hpp"

namespace higgsloc {

enum class EvolutionMode { coupled, choquard };

inline std::string_view to_string(EvolutionMode m) {
  return m == EvolutionMode::coupled ? "coupled" : "choquard";
}

inline std::optional<EvolutionMode> parse_mode(std::string_view s) {
  if (s == "coupled") return EvolutionMode::coupled;
  if (s == "choquard") return EvolutionMode::choquard;
  return std::nullopt;
}

/// dt <= min(spacing_factor * h, mass_factor / m, dispersion_factor * M h^2).
struct StabilityGuard {
  bool enabled{true};
  double spacing_factor{0.5};
  double mass_factor{0.5};
  double dispersion_factor{1.0};
};

struct IntegratorOptions {
  EvolutionMode mode{EvolutionMode::coupled};
  /// Slaved-field strength in Choquard mode.
  CouplingConvention convention{CouplingConvention::motion_equation};
  /// false: drop the |psi|^2 source (the v -> infinity limit).
  bool source_coupling{true};
  StabilityGuard guard;
  /// Abort when max|psi| exceeds this multiple of its value at the start of evolve().
  double blowup_factor{1e3};
};

/// Largest step of magnitude <= |dt| that divides T into whole steps; sign of dt kept.
inline double fit_time_step(double T, double dt) {
  if (!(T > 0.0)) return dt;
  if (dt == 0.0 || !std::isfinite(dt)) throw std::invalid_argument("time step must be finite and non-zero");
  const double steps = std::ceil(T / std::abs(dt) - 1e-9);
  return std::copysign(T / steps, dt);
}

/// Observables are recorded every `stride` steps and full states every
/// `snapshot_stride` steps (0: none). The initial and final instants are
/// always recorded and kept.
struct ObserverConfig {
  std::size_t stride{1};
  std::size_t snapshot_stride{0};
};

class Integrator {
public:
  Integrator(Grid grid, PhysicalParams params, IntegratorOptions options = {})
      : grid_(std::move(grid)), params_(params), options_(options) {
    kinetic_k2_.resize(grid_.size());
    const double kt2 = grid_.transverse_k2();
    detail::for_each_mode(grid_, [&](std::size_t i, double kx, double ky, double kz) {
      kinetic_k2_[i] = kx * kx + ky * ky + kz * kz + kt2;
    });
  }

  const Grid& grid() const { return grid_; }
  const PhysicalParams& params() const { return params_; }
  const IntegratorOptions& options() const { return options_; }

  double max_stable_dt() const {
    const auto& g = options_.guard;
    const double h = grid_.spacing;
    return std::min({g.spacing_factor * h, g.mass_factor / params_.m,
                     g.dispersion_factor * params_.M * h * h});
  }

  void check_guard(double dt, double t) const {
    if (!std::isfinite(dt) || dt == 0.0)
      throw NumericalAbort("time step must be finite and non-zero", t);
    if (options_.guard.enabled && std::abs(dt) > max_stable_dt() * (1.0 + 1e-12))
      throw NumericalAbort("stability guard violated: |dt| = " + std::to_string(std::abs(dt)) +
                               " > " + std::to_string(max_stable_dt()),
                           t);
  }

  /// Source coefficient of the Klein-Gordon equation in this configuration.
  double source_strength() const {
    if (!options_.source_coupling) return 0.0;
    if (options_.mode == EvolutionMode::choquard)
      return source_coefficient(params_, options_.convention);
    return source_coefficient(params_, CouplingConvention::motion_equation);
  }

  void step_in_place(FieldState& s, double dt) const {
    check_guard(dt, s.t);
    if (s.psi.size() != grid_.size() || s.phi.size() != grid_.size())
      throw std::invalid_argument("state does not match the integrator grid");
    if (options_.mode == EvolutionMode::coupled)
      step_coupled_impl(s, dt);
    else
      step_choquard_impl(s, dt);
    s.t += dt;
    for (std::size_t i = 0; i < s.psi.size(); ++i)
      if (!std::isfinite(s.psi[i].real()) || !std::isfinite(s.psi[i].imag()) ||
          !std::isfinite(s.phi[i]))
        throw NumericalAbort("non-finite field value", s.t);
  }

  FieldState step(FieldState s, double dt) const {
    step_in_place(s, dt);
    return s;
  }

  /// Prepares a state for stepping with -dt after a forward run with +dt:
  /// phi_prev becomes phi^{n+1}, the value the forward leapfrog would produce.
  FieldState reverse_start(FieldState s, double dt) const {
    if (options_.mode == EvolutionMode::coupled) s.phi_prev = leapfrog(s, dt);
    return s;
  }

  /// Steps to T with dt replaced by fit_time_step(T, dt), recording observables every `stride` steps.
  Trajectory evolve(const FieldState& initial, double T, double dt,
                    ObserverConfig observer = {}) const {
    if (T < 0.0) throw std::invalid_argument("evolve: T must be >= 0");
    if (observer.stride < 1) throw std::invalid_argument("evolve: stride must be >= 1");
    Trajectory traj;
    traj.grid = grid_;
    std::size_t steps = 0;
    if (T > 0.0) {
      dt = fit_time_step(T, dt);
      steps = static_cast<std::size_t>(std::llround(T / std::abs(dt)));
    }
    traj.dt = dt;

    FieldState s = initial;
    const double t0 = s.t;
    double psi_max0 = 0.0;
    for (const auto& z : s.psi) psi_max0 = std::max(psi_max0, std::abs(z));

    auto record = [&] {
      const ObservableRecord* prev = traj.observables.empty() ? nullptr : &traj.observables.back();
      traj.observables.push_back(measure(s, grid_, prev));
      traj.times.push_back(s.t);
    };
    auto keep = [&] {
      traj.snapshots.push_back(s);
      traj.snapshot_times.push_back(s.t);
    };
    record();
    keep();
    for (std::size_t k = 1; k <= steps; ++k) {
      step_in_place(s, dt);
      if (k == steps) s.t = t0 + std::copysign(T, dt);
      if (options_.blowup_factor > 0.0 && psi_max0 > 0.0) {
        double mx = 0.0;
        for (const auto& z : s.psi) mx = std::max(mx, std::abs(z));
        if (mx > options_.blowup_factor * psi_max0)
          throw NumericalAbort("blow-up: max|psi| grew beyond " +
                                   std::to_string(options_.blowup_factor) + "x its initial value",
                               s.t);
      }
      if (k % observer.stride == 0 || k == steps) record();
      if ((observer.snapshot_stride > 0 && k % observer.snapshot_stride == 0) || k == steps) keep();
    }
    return traj;
  }

private:
  RealField leapfrog(const FieldState& s, double dt) const {
    const RealField lap = spectral_laplacian(s.phi, grid_);
    const double c = source_strength();
    const double m2 = params_.m * params_.m;
    const double dt2 = dt * dt;
    RealField next(s.phi.size());
    for (std::size_t i = 0; i < next.size(); ++i)
      next[i] = 2.0 * s.phi[i] - s.phi_prev[i] +
                dt2 * (lap[i] - m2 * s.phi[i] - c * std::norm(s.psi[i]));
    return next;
  }

  // The trailing half-step of one step and the leading half-step of the next
  // use the same phi, so the last phase table is reused when phi and dt match.
  void potential_half_step(ComplexField& psi, const RealField& phi, double dt) const {
    auto& c = potential_cache_;
    if (c.dt != dt || c.phi != phi) {
      const double a = -0.5 * params_.M * dt;
      c.factors.resize(phi.size());
      for (std::size_t i = 0; i < phi.size(); ++i) c.factors[i] = std::polar(1.0, a * phi[i]);
      c.phi = phi;
      c.dt = dt;
    }
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] *= c.factors[i];
  }

  void kinetic_step(ComplexField& psi, double dt) const {
    if (kinetic_dt_ != dt) {
      const double a = -dt / (2.0 * params_.M);
      const double scale = 1.0 / static_cast<double>(grid_.size());
      kinetic_factors_.resize(kinetic_k2_.size());
      for (std::size_t i = 0; i < kinetic_k2_.size(); ++i)
        kinetic_factors_[i] = scale * std::polar(1.0, a * kinetic_k2_[i]);
      kinetic_dt_ = dt;
    }
    detail::execute(psi, grid_, FFTW_FORWARD);
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] *= kinetic_factors_[i];
    detail::execute(psi, grid_, FFTW_BACKWARD);
  }

  void step_coupled_impl(FieldState& s, double dt) const {
    if (s.phi_prev.size() != s.phi.size())
      throw std::invalid_argument("coupled mode needs phi_prev");
    RealField next = leapfrog(s, dt);
    potential_half_step(s.psi, s.phi, dt);
    kinetic_step(s.psi, dt);
    potential_half_step(s.psi, next, dt);
    s.phi_prev = std::move(s.phi);
    s.phi = std::move(next);
  }

  RealField slaved(const ComplexField& psi) const {
    if (!options_.source_coupling) return RealField(psi.size(), 0.0);
    return slaved_field(psi, params_, grid_, options_.convention);
  }

  void step_choquard_impl(FieldState& s, double dt) const {
    // The potential step leaves |psi| unchanged, so phi[psi] after the kinetic
    // step is also phi at the end of the step.
    RealField phi_start = slaved(s.psi);
    potential_half_step(s.psi, phi_start, dt);
    kinetic_step(s.psi, dt);
    RealField phi_end = slaved(s.psi);
    potential_half_step(s.psi, phi_end, dt);
    s.phi_prev = std::move(phi_start);
    s.phi = std::move(phi_end);
  }

  Grid grid_;
  PhysicalParams params_;
  IntegratorOptions options_;
  std::vector<double> kinetic_k2_;

  // Phase-factor caches: an Integrator is used by one thread at a time.
  struct PhaseCache {
    double dt{0.0};
    RealField phi;
    ComplexField factors;
  };
  mutable PhaseCache potential_cache_;
  mutable double kinetic_dt_{0.0};
  mutable ComplexField kinetic_factors_;
};

inline FieldState step_coupled(const FieldState& state, double dt, const Grid& grid,
                               IntegratorOptions options = {}) {
  options.mode = EvolutionMode::coupled;
  return Integrator(grid, state.params, options).step(state, dt);
}

inline FieldState step_choquard(const FieldState& state, double dt, const Grid& grid,
                                IntegratorOptions options = {}) {
  options.mode = EvolutionMode::choquard;
  return Integrator(grid, state.params, options).step(state, dt);
}

// ---------------------------------------------------------------------------
// Initial data

/// Family sample at t = 0, with phi_prev taken from the sample at t = -dt.
inline FieldState family_state(const SolitonSpec& s, const PhysicalParams& p, const Grid& grid,
                               double dt, double x0 = 0.0) {
  auto now = sample_solution(s, p, grid, 0.0, x0);
  auto before = sample_solution(s, p, grid, -dt, x0);
  FieldState st;
  st.t = 0.0;
  st.psi = std::move(now.psi);
  st.phi = std::move(now.phi);
  st.phi_prev = std::move(before.phi);
  st.params = p;
  return st;
}

/// phi from the static reduction of psi; phi_prev from a second-order Taylor
/// step backwards with phi_t(0) = 0.
inline FieldState static_state(ComplexField psi, const PhysicalParams& p, const Grid& grid,
                               double dt,
                               CouplingConvention c = CouplingConvention::motion_equation,
                               bool source_coupling = true) {
  FieldState st;
  st.params = p;
  st.phi = source_coupling ? slaved_field(psi, p, grid, c) : RealField(psi.size(), 0.0);
  const RealField lap = spectral_laplacian(st.phi, grid);
  const double coeff = source_coupling ? source_coefficient(p, c) : 0.0;
  st.phi_prev.resize(st.phi.size());
  for (std::size_t i = 0; i < st.phi.size(); ++i) {
    const double accel = lap[i] - p.m * p.m * st.phi[i] - coeff * std::norm(psi[i]);
    st.phi_prev[i] = st.phi[i] + 0.5 * dt * dt * accel;
  }
  st.psi = std::move(psi);
  return st;
}

// ---------------------------------------------------------------------------
// Perturbations

enum class PerturbationKind { amplitude_noise, phase_noise, width_rescale };

inline std::string_view to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::amplitude_noise: return "amplitude_noise";
    case PerturbationKind::phase_noise: return "phase_noise";
    case PerturbationKind::width_rescale: return "width_rescale";
  }
  return "?";
}

inline std::optional<PerturbationKind> parse_perturbation(std::string_view s) {
  if (s == "amplitude_noise") return PerturbationKind::amplitude_noise;
  if (s == "phase_noise") return PerturbationKind::phase_noise;
  if (s == "width_rescale") return PerturbationKind::width_rescale;
  return std::nullopt;
}

/// Perturbed copy of `state`, renormalized to the original norm.
///  - amplitude_noise: psi *= 1 + strength * xi, xi ~ N(0, 1) per node
///  - phase_noise:     psi *= exp(i strength * xi)
///  - width_rescale:   psi(x) -> psi(c + (x - c) / (1 + strength)) about the
///                     centroid c, by trigonometric interpolation (1D only)
inline FieldState perturb(const FieldState& state, const Grid& grid, PerturbationKind kind,
                          double strength, std::uint64_t seed) {
  if (strength < 0.0) throw std::invalid_argument("perturb: strength must be >= 0");
  FieldState out = state;
  if (strength == 0.0) return out;
  auto norm_of = [&](const ComplexField& f) {
    double acc = 0.0;
    for (const auto& z : f) acc += std::norm(z);
    return acc * grid.cell_volume();
  };
  const double n0 = norm_of(state.psi);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  switch (kind) {
    case PerturbationKind::amplitude_noise:
      for (auto& z : out.psi) z *= 1.0 + strength * gauss(rng);
      break;
    case PerturbationKind::phase_noise:
      for (auto& z : out.psi) z *= std::polar(1.0, strength * gauss(rng));
      break;
    case PerturbationKind::width_rescale: {
      if (grid.dim != 1) throw std::invalid_argument("width_rescale supports 1D grids only");
      const double factor = 1.0 + strength;
      const double c = measure(state, grid).centroid;
      const Spectrum spec = forward(state.psi, grid);
      const double N = static_cast<double>(grid.n);
      const double x_first = grid.coords[0];
      const double nyq = grid.nyquist();
      for (std::size_t i = 0; i < grid.n; ++i) {
        const double xs = c + wrap_displacement(grid.coords[i] - c, grid.length) / factor;
        Complex acc{};
        for (std::size_t j = 0; j < grid.n; ++j) {
          double k = grid.wavenumbers[j];
          Complex coeff = spec.coefficients[j];
          if (std::abs(std::abs(k) - nyq) < 1e-9 * nyq) {
            // Split the Nyquist mode symmetrically so the interpolant stays real-consistent.
            acc += 0.5 * coeff *
                   (std::polar(1.0, k * (xs - x_first)) + std::polar(1.0, -k * (xs - x_first)));
            continue;
          }
          acc += coeff * std::polar(1.0, k * (xs - x_first));
        }
        out.psi[i] = acc / N;
      }
      break;
    }
  }
  const double n1 = norm_of(out.psi);
  if (n1 > 0.0) {
    const double scale = std::sqrt(n0 / n1);
    for (auto& z : out.psi) z *= scale;
  }
  return out;
}

}  // namespace higgsloc

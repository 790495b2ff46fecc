#pragma once

// Closed-form soliton families of the coupled Schroedinger / Klein-Gordon
// system, their dispersion relations, velocities, norms and widths.
//
// Every family has the form
//   psi = A sech^p(k (x - x0 - V t)) exp(i (Omega t + q (x - x0) + gamma y + epsilon z))
//   phi = B sech^r(k (x - x0 - V t))
// and FamilyProfile carries the constants exactly as printed.

#include <cmath>
#include <optional>
#include <stdexcept>

#include "higgsloc/core.hpp"
#include "higgsloc/spectral.hpp"

namespace higgsloc {

/// alpha = sqrt(2 M omega + M^2 + gamma^2 + epsilon^2).
inline double dispersion_alpha_3dA(double M, double omega, double gamma, double epsilon) {
  const double a2 = 2.0 * M * omega + M * M + gamma * gamma + epsilon * epsilon;
  if (!(a2 > 0.0))
    throw std::domain_error("dispersion_alpha_3dA: non-positive radicand " +
                            std::to_string(a2));
  return std::sqrt(a2);
}

/// V_s = sqrt(1 - (9/4)(m^3 v^2 / M^3)^2); requires (3/2) m^3 v^2 <= M^3.
inline double soliton_velocity_1dB(double M, double m, double v) {
  const double vs2 = soliton_velocity_squared_1dB({M, m, v});
  if (vs2 < 0.0)
    throw std::domain_error("soliton_velocity_1dB: (3/2) m^3 v^2 > M^3, velocity imaginary");
  return std::sqrt(vs2);
}

struct FamilyProfile {
  double amplitude{0.0};      ///< A
  int psi_power{1};           ///< p
  double k{0.0};              ///< envelope argument coefficient
  double velocity{0.0};       ///< V
  double momentum{0.0};       ///< q, carrier wavenumber along x
  double frequency{0.0};      ///< Omega, coefficient of t in the phase
  double phi_amplitude{0.0};  ///< B
  int phi_power{2};           ///< r
};

inline FamilyProfile family_profile(const SolitonSpec& s, const PhysicalParams& p) {
  const double M = p.M;
  const double m = p.m;
  const double v = p.v;
  const double mv = m * v;
  FamilyProfile f;
  switch (s.family) {
    case Family::ThreeD_A:
      f.amplitude = mv * s.alpha / (std::sqrt(2.0) * std::pow(M, 1.5));
      f.psi_power = 1;
      f.k = s.alpha;
      f.velocity = 1.0;
      f.momentum = M;
      f.frequency = s.omega;
      f.phi_amplitude = -s.alpha * s.alpha / (M * M);
      f.phi_power = 2;
      break;
    case Family::ThreeD_B: {
      if (!(s.mu < M))
        throw std::domain_error("ThreeD_B requires mu < M for a finite profile");
      const double root = std::sqrt(1.0 - s.mu * s.mu / (M * M));
      f.amplitude = 3.0 * m * m * v / (4.0 * std::pow(M, 1.5)) / root;
      f.psi_power = 2;
      f.k = m / (2.0 * root);
      f.velocity = s.mu / M;
      f.momentum = s.mu;
      f.frequency = (2.0 / M) * (m * m / (4.0 * (1.0 - s.mu * s.mu / (M * M))) -
                                 s.alpha * s.alpha / 4.0);
      if (M == m) throw std::domain_error("ThreeD_B phi amplitude singular at M = m");
      // Printed denominator M^2 - m^2.
      f.phi_amplitude = -0.75 * m * m / (M * M - m * m);
      f.phi_power = 2;
      break;
    }
    case Family::OneD_A: {
      const double mv4 = std::pow(mv, 4);
      f.amplitude = std::pow(M, 1.5) / (std::sqrt(2.0) * mv);
      f.psi_power = 1;
      f.k = M * M * M / (mv * mv);
      f.velocity = 1.0;
      f.momentum = M;
      f.frequency = M * (std::pow(M, 4) - mv4) / (2.0 * mv4);
      f.phi_amplitude = -std::pow(M, 4) / mv4;
      f.phi_power = s.variant_13 == Variant13::as_printed_sech ? 1 : 2;
      break;
    }
    case Family::OneD_B: {
      if (!s.soliton_velocity)
        throw std::domain_error("OneD_B: V_s is imaginary for these parameters");
      const double vs = *s.soliton_velocity;
      const double mv4 = std::pow(mv, 4);
      f.amplitude = std::pow(M, 1.5) / (2.0 * mv);
      f.psi_power = 2;
      f.k = M * M * M / (3.0 * mv * mv);
      f.velocity = vs;
      f.momentum = M * vs;
      f.frequency = 2.0 * std::pow(M, 5) / (9.0 * mv4) - 0.5 * M * vs * vs;
      f.phi_amplitude = -std::pow(M / mv, 4) / 3.0;
      f.phi_power = 2;
      break;
    }
  }
  return f;
}

/// Envelope speed of the family.
inline double family_velocity(const SolitonSpec& s, const PhysicalParams& p) {
  return family_profile(s, p).velocity;
}

struct PhaseVelocity {
  double value{0.0};
  /// V_s >= V_p, reported for OneD_B only.
  std::optional<bool> ordering_holds;
};

inline PhaseVelocity phase_velocity(const SolitonSpec& s, const PhysicalParams& p) {
  const double M = p.M;
  const double mv = p.m * p.v;
  const double mv4 = std::pow(mv, 4);
  if (s.family == Family::OneD_A)
    return {(-std::pow(M, 4) + mv4) / (2.0 * mv4), std::nullopt};
  if (s.family == Family::OneD_B) {
    if (!s.soliton_velocity) throw std::domain_error("phase_velocity: V_s imaginary");
    const double vs = *s.soliton_velocity;
    if (vs == 0.0) throw std::domain_error("phase_velocity: undefined at V_s = 0");
    const double vp = -(2.0 / 9.0) * std::pow(M / mv, 4) / vs + 0.5 * vs;
    return {vp, vs >= vp};
  }
  throw std::invalid_argument("phase_velocity is defined for the 1D families only");
}

/// Inverse of the sech-argument coefficient: 1/alpha (ThreeD_A),
/// 2 sqrt(1 - mu^2/M^2)/m (ThreeD_B), (mv)^2/M^3 (OneD_A), 3 (mv)^2/M^3 (OneD_B).
inline double localization_length(const SolitonSpec& s, const PhysicalParams& p) {
  const double M = p.M;
  const double mv = p.m * p.v;
  switch (s.family) {
    case Family::ThreeD_A:
      if (!(s.alpha > 0.0)) throw std::domain_error("ThreeD_A: alpha must be > 0");
      return 1.0 / s.alpha;
    case Family::ThreeD_B:
      if (s.mu > M) throw std::domain_error("ThreeD_B: mu > M");
      return 2.0 * std::sqrt(1.0 - s.mu * s.mu / (M * M)) / p.m;
    case Family::OneD_A:
      return mv * mv / (M * M * M);
    case Family::OneD_B:
      if (!s.soliton_velocity) throw std::domain_error("OneD_B: V_s imaginary");
      return 3.0 * mv * mv / (M * M * M);
  }
  return 0.0;
}

/// Exact x-axis integral of |psi|^2 from int sech^2 = 2/k, int sech^4 = 4/(3k).
inline double closed_form_norm(const SolitonSpec& s, const PhysicalParams& p) {
  if (is_three_d(s.family) && (s.gamma != 0.0 || s.epsilon != 0.0))
    throw std::domain_error(
        "closed_form_norm: 3D family with transverse wavenumbers is not x-normalizable");
  const auto f = family_profile(s, p);
  const double integral = f.psi_power == 1 ? 2.0 / f.k : 4.0 / (3.0 * f.k);
  return f.amplitude * f.amplitude * integral;
}

struct SolutionSample {
  ComplexField psi;
  RealField phi;
  SolitonSpec spec;
  double t{0.0};
};

/// Minimum domain length, in envelope widths 1/k, accepted by the sampler.
inline constexpr double kMinWidthsPerDomain = 30.0;

/// Evaluates the family on the lattice at time t, centred at x0 (envelope
/// displacement wrapped onto the periodic domain). On a 1D grid the 3D
/// families run quasi-1D: the grid must carry their (gamma, epsilon).
inline SolutionSample sample_solution(const SolitonSpec& s, const PhysicalParams& p,
                                      const Grid& grid, double t, double x0 = 0.0) {
  const auto f = family_profile(s, p);
  if (grid.length * f.k < kMinWidthsPerDomain * (1.0 - 1e-12))
    throw std::domain_error("sample_solution: domain shorter than " +
                            std::to_string(kMinWidthsPerDomain) + " envelope widths");
  if (is_three_d(s.family)) {
    if (grid.dim == 1) {
      const TransverseMode want{s.gamma, s.epsilon};
      const TransverseMode have = grid.transverse_mode.value_or(TransverseMode{});
      if (!(want == have))
        throw std::invalid_argument(
            "sample_solution: quasi-1D grid transverse mode does not match (gamma, epsilon)");
    }
  } else if (grid.dim != 1) {
    throw std::invalid_argument("sample_solution: 1D family on a 3D grid");
  }

  SolutionSample out;
  out.spec = s;
  out.t = t;
  out.psi.resize(grid.size());
  out.phi.resize(grid.size());
  const double L = grid.length;
  const double centre = x0 + f.velocity * t;
  detail::for_each_node(grid, [&](std::size_t i, double x, double y, double z) {
    const double xi = wrap_displacement(x - centre, L);
    const double sech = 1.0 / std::cosh(f.k * xi);
    const double env = f.psi_power == 1 ? sech : sech * sech;
    double phase = f.frequency * t + f.momentum * (x - x0);
    if (grid.dim == 3) phase += s.gamma * y + s.epsilon * z;
    out.psi[i] = f.amplitude * env * std::polar(1.0, phase);
    out.phi[i] = f.phi_amplitude * (f.phi_power == 1 ? sech : sech * sech);
  });
  return out;
}

}  // namespace higgsloc

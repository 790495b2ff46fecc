#pragma once

// Shared model types: physical constants, solution-family identifiers,
// periodic lattice geometry and field containers. Natural units (hbar = c = 1).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace higgsloc {

using Complex = std::complex<double>;
using ComplexField = std::vector<Complex>;
using RealField = std::vector<double>;

inline constexpr double pi = std::numbers::pi;

/// Raised when a numerical run has to stop (blow-up, non-finite values,
/// violated stability guard). Carries the simulation time of the failure.
class NumericalAbort : public std::runtime_error {
public:
  NumericalAbort(const std::string& what, double t)
      : std::runtime_error(what), time_(t) {}
  double time() const noexcept { return time_; }

private:
  double time_;
};

struct PhysicalParams {
  double M{1.0};  ///< electron mass
  double m{0.5};  ///< Higgs mass
  double v{1.0};  ///< vacuum expectation value (dimensionless in 1D)

  bool operator==(const PhysicalParams&) const = default;
};

enum class Family { ThreeD_A, ThreeD_B, OneD_A, OneD_B };

/// Profile choice for the 1D family A scalar field.
enum class Variant13 { as_printed_sech, corrected_sech_squared };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::ThreeD_A: return "ThreeD_A";
    case Family::ThreeD_B: return "ThreeD_B";
    case Family::OneD_A: return "OneD_A";
    case Family::OneD_B: return "OneD_B";
  }
  return "?";
}

inline std::string_view to_string(Variant13 v) {
  return v == Variant13::as_printed_sech ? "as_printed_sech"
                                         : "corrected_sech_squared";
}

inline std::optional<Family> parse_family(std::string_view s) {
  if (s == "ThreeD_A") return Family::ThreeD_A;
  if (s == "ThreeD_B") return Family::ThreeD_B;
  if (s == "OneD_A") return Family::OneD_A;
  if (s == "OneD_B") return Family::OneD_B;
  return std::nullopt;
}

inline std::optional<Variant13> parse_variant13(std::string_view s) {
  if (s == "as_printed_sech") return Variant13::as_printed_sech;
  if (s == "corrected_sech_squared") return Variant13::corrected_sech_squared;
  return std::nullopt;
}

inline bool is_three_d(Family f) {
  return f == Family::ThreeD_A || f == Family::ThreeD_B;
}

/// One of the four closed-form soliton families plus its free parameters.
/// Dependent parameters are filled in by the named constructors so the
/// dispersion relations hold among the stored fields.
struct SolitonSpec {
  Family family{Family::OneD_B};
  double alpha{0.0};
  double omega{0.0};
  double gamma{0.0};
  double epsilon{0.0};
  double mu{0.0};
  /// Only set for OneD_B when the velocity is real.
  std::optional<double> soliton_velocity;
  Variant13 variant_13{Variant13::as_printed_sech};

  bool operator==(const SolitonSpec&) const = default;

  /// alpha^2 = 2 M omega + M^2 + gamma^2 + epsilon^2; alpha from omega.
  static SolitonSpec three_d_a(const PhysicalParams& p, double omega,
                               double gamma = 0.0, double epsilon = 0.0);
  /// Same family, omega solved from a chosen alpha.
  static SolitonSpec three_d_a_from_alpha(const PhysicalParams& p,
                                          double alpha, double gamma = 0.0,
                                          double epsilon = 0.0);
  /// alpha^2 = mu^2 + gamma^2 + epsilon^2.
  static SolitonSpec three_d_b(double mu, double gamma = 0.0,
                               double epsilon = 0.0);
  static SolitonSpec one_d_a(Variant13 variant = Variant13::as_printed_sech);
  /// V_s is stored only when (3/2) m^3 v^2 <= M^3.
  static SolitonSpec one_d_b(const PhysicalParams& p);
};

/// Squared 1D family B velocity, 1 - (9/4)(m^3 v^2 / M^3)^2; negative when the
/// velocity would be imaginary.
inline double soliton_velocity_squared_1dB(const PhysicalParams& p) {
  const double r = p.m * p.m * p.m * p.v * p.v / (p.M * p.M * p.M);
  return 1.0 - 2.25 * r * r;
}

inline SolitonSpec SolitonSpec::three_d_a(const PhysicalParams& p,
                                          double omega, double gamma,
                                          double epsilon) {
  const double a2 = 2.0 * p.M * omega + p.M * p.M + gamma * gamma +
                    epsilon * epsilon;
  if (!(a2 > 0.0))
    throw std::domain_error("ThreeD_A: non-positive alpha^2 = " +
                            std::to_string(a2));
  SolitonSpec s;
  s.family = Family::ThreeD_A;
  s.omega = omega;
  s.gamma = gamma;
  s.epsilon = epsilon;
  s.alpha = std::sqrt(a2);
  return s;
}

inline SolitonSpec SolitonSpec::three_d_a_from_alpha(const PhysicalParams& p,
                                                     double alpha,
                                                     double gamma,
                                                     double epsilon) {
  if (!(alpha > 0.0)) throw std::domain_error("ThreeD_A: alpha must be > 0");
  SolitonSpec s;
  s.family = Family::ThreeD_A;
  s.alpha = alpha;
  s.gamma = gamma;
  s.epsilon = epsilon;
  s.omega = (alpha * alpha - p.M * p.M - gamma * gamma - epsilon * epsilon) /
            (2.0 * p.M);
  return s;
}

inline SolitonSpec SolitonSpec::three_d_b(double mu, double gamma,
                                          double epsilon) {
  SolitonSpec s;
  s.family = Family::ThreeD_B;
  s.mu = mu;
  s.gamma = gamma;
  s.epsilon = epsilon;
  s.alpha = std::sqrt(mu * mu + gamma * gamma + epsilon * epsilon);
  return s;
}

inline SolitonSpec SolitonSpec::one_d_a(Variant13 variant) {
  SolitonSpec s;
  s.family = Family::OneD_A;
  s.variant_13 = variant;
  return s;
}

inline SolitonSpec SolitonSpec::one_d_b(const PhysicalParams& p) {
  SolitonSpec s;
  s.family = Family::OneD_B;
  const double vs2 = soliton_velocity_squared_1dB(p);
  if (vs2 >= 0.0) s.soliton_velocity = std::sqrt(vs2);
  return s;
}

// ---------------------------------------------------------------------------
// Grid

struct TransverseMode {
  double gamma{0.0};
  double epsilon{0.0};
  bool operator==(const TransverseMode&) const = default;
};

/// Uniform periodic lattice, n points per axis over [-L/2, L/2).
/// 3D fields are flattened in C order: index = (ix * n + iy) * n + iz.
struct Grid {
  int dim{1};
  std::size_t n{0};
  double length{0.0};
  double spacing{0.0};
  std::vector<double> coords;       ///< per-axis node coordinates
  std::vector<double> wavenumbers;  ///< per-axis FFT-ordered wavenumbers
  std::optional<TransverseMode> transverse_mode;

  std::size_t size() const {
    return dim == 1 ? n : n * n * n;
  }
  /// Lattice volume element h^dim.
  double cell_volume() const {
    return dim == 1 ? spacing : spacing * spacing * spacing;
  }
  /// gamma^2 + epsilon^2 for quasi-1D runs of the 3D families.
  double transverse_k2() const {
    if (!transverse_mode) return 0.0;
    return transverse_mode->gamma * transverse_mode->gamma +
           transverse_mode->epsilon * transverse_mode->epsilon;
  }
  /// Largest |k| represented per axis.
  double nyquist() const { return pi / spacing; }
};

inline bool is_power_of_two(std::size_t n) {
  return n != 0 && (n & (n - 1)) == 0;
}

/// Periodic lattice with centered coordinates and the standard FFT
/// wavenumber ordering {0, 1, ..., n/2 - 1, -n/2, ..., -1} * 2 pi / L.
inline Grid make_grid(int dim, std::size_t n, double length,
                      std::optional<TransverseMode> transverse_mode = {}) {
  if (dim != 1 && dim != 3)
    throw std::invalid_argument("grid dim must be 1 or 3, got " +
                                std::to_string(dim));
  if (!is_power_of_two(n) || n < 16)
    throw std::invalid_argument("grid n must be a power of two >= 16, got " +
                                std::to_string(n));
  if (!(length > 0.0)) throw std::invalid_argument("grid length must be > 0");
  if (transverse_mode && dim != 1)
    throw std::invalid_argument("transverse mode only applies to 1D grids");

  Grid g;
  g.dim = dim;
  g.n = n;
  g.length = length;
  g.spacing = length / static_cast<double>(n);
  g.transverse_mode = transverse_mode;
  g.coords.resize(n);
  g.wavenumbers.resize(n);
  const double dk = 2.0 * pi / length;
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  for (std::size_t j = 0; j < n; ++j) {
    g.coords[j] = -0.5 * length + static_cast<double>(j) * g.spacing;
    auto sj = static_cast<std::ptrdiff_t>(j);
    g.wavenumbers[j] = dk * static_cast<double>(sj < half ? sj : sj - 2 * half);
  }
  return g;
}

/// Wraps a displacement into [-L/2, L/2).
inline double wrap_displacement(double d, double length) {
  d = std::fmod(d + 0.5 * length, length);
  if (d < 0.0) d += length;
  return d - 0.5 * length;
}

// ---------------------------------------------------------------------------
// Fields

struct FieldState {
  double t{0.0};
  ComplexField psi;
  RealField phi;
  RealField phi_prev;  ///< phi at t - dt for the leapfrog Klein-Gordon update
  PhysicalParams params;
};

// ---------------------------------------------------------------------------
// Parameter validation

struct ConstraintCheck {
  std::string name;
  bool passed{true};
  /// Signed slack: >= 0 when satisfied, negative by the violating amount.
  double margin{0.0};
  std::string detail;
};

struct ValidationReport {
  std::vector<ConstraintCheck> checks;
  std::vector<std::string> warnings;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
  const ConstraintCheck* find(std::string_view name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {
inline void add_check(ValidationReport& r, std::string name, double margin,
                      std::string detail, bool strict = false) {
  const bool passed = strict ? margin > 0.0 : margin >= 0.0;
  r.checks.push_back({std::move(name), passed, margin, std::move(detail)});
}
}  // namespace detail

/// Lists every constraint the family imposes on (params, spec) with its
/// margin. Never throws; callers decide whether to abort.
inline ValidationReport validate_params(const PhysicalParams& p,
                                        const SolitonSpec& s) {
  ValidationReport r;
  detail::add_check(r, "M > 0", p.M, "electron mass", true);
  detail::add_check(r, "m > 0", p.m, "Higgs mass", true);
  detail::add_check(r, "v > 0", p.v, "vacuum expectation value", true);
  const double M = p.M;
  const double tiny = 1e-12;

  switch (s.family) {
    case Family::ThreeD_A: {
      const double rhs = 2.0 * M * s.omega + M * M + s.gamma * s.gamma +
                         s.epsilon * s.epsilon;
      const double lhs = s.alpha * s.alpha;
      const double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
      detail::add_check(r, "dispersion alpha^2 = 2 M omega + M^2 + gamma^2 + epsilon^2",
                        tiny * scale - std::abs(lhs - rhs),
                        "lhs=" + std::to_string(lhs) + " rhs=" + std::to_string(rhs));
      detail::add_check(r, "alpha > 0", s.alpha, "inverse width");
      r.warnings.emplace_back(
          "ThreeD_A travels at the speed of light; outside the non-relativistic regime");
      if (s.alpha * s.alpha / (M * M) >= M)
        r.warnings.emplace_back("ThreeD_A: max|phi| = alpha^2/M^2 >= M, |phi| < M violated");
      break;
    }
    case Family::ThreeD_B: {
      const double rhs = s.mu * s.mu + s.gamma * s.gamma + s.epsilon * s.epsilon;
      const double lhs = s.alpha * s.alpha;
      const double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
      detail::add_check(r, "dispersion alpha^2 = mu^2 + gamma^2 + epsilon^2",
                        tiny * scale - std::abs(lhs - rhs), "");
      detail::add_check(r, "mu <= M", M - s.mu, "soliton speed mu/M must not exceed 1");
      if (s.mu == M)
        r.warnings.emplace_back("ThreeD_B: mu = M gives a degenerate zero-width profile");
      if (std::abs(M * M - p.m * p.m) > 0.0) {
        const double phi_max = 0.75 * p.m * p.m / std::abs(M * M - p.m * p.m);
        if (phi_max >= M)
          r.warnings.emplace_back("ThreeD_B: max|phi| >= M, |phi| < M violated");
      }
      break;
    }
    case Family::OneD_A: {
      if (p.M == p.m * p.v)
        r.warnings.emplace_back("OneD_A: M = m v gives zero phase velocity");
      r.warnings.emplace_back(
          "OneD_A travels at the speed of light; outside the non-relativistic regime");
      const double mv = p.m * p.v;
      if (std::pow(M / mv, 4) >= M)
        r.warnings.emplace_back("OneD_A: max|phi| = (M/mv)^4 >= M, |phi| < M violated");
      break;
    }
    case Family::OneD_B: {
      const double lhs = 1.5 * p.m * p.m * p.m * p.v * p.v;
      detail::add_check(r, "V_s real: (3/2) m^3 v^2 <= M^3", M * M * M * (1.0 + tiny) - lhs,
                        "(3/2)m^3v^2=" + std::to_string(lhs) +
                            " M^3=" + std::to_string(M * M * M));
      const double vs2 = soliton_velocity_squared_1dB(p);
      if (vs2 >= 0.0 && s.soliton_velocity) {
        const double d = std::abs(*s.soliton_velocity - std::sqrt(vs2));
        detail::add_check(r, "stored V_s consistent", tiny - d, "");
      }
      const double mv = p.m * p.v;
      if (std::pow(M / mv, 4) / 3.0 >= M)
        r.warnings.emplace_back("OneD_B: max|phi| = (M/mv)^4/3 >= M, |phi| < M violated");
      break;
    }
  }
  return r;
}

}  // namespace higgsloc

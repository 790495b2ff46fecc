#pragma once

// Scalar observables of fields and trajectories: norm, centroid, width, peak
// position, scalar-field depth, velocity fits and the free-packet baseline.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "higgsloc/core.hpp"

namespace higgsloc {

struct ObservableRecord {
  double t{0.0};
  double norm{0.0};
  double centroid{0.0};  ///< unwrapped across the periodic boundary
  double width{0.0};     ///< sqrt of the second central moment of |psi|^2
  double peak_pos{0.0};  ///< unwrapped, parabolic sub-grid refinement
  double phi_min{0.0};
  bool validity_flag{true};  ///< max|phi| < M
};

struct Trajectory {
  Grid grid;
  double dt{0.0};
  std::vector<double> times;
  std::vector<FieldState> snapshots;
  std::vector<double> snapshot_times;
  std::vector<ObservableRecord> observables;
};

namespace detail {

/// |psi|^2 along x (integrated over y, z in 3D).
inline std::vector<double> x_marginal(std::span<const Complex> psi, const Grid& grid) {
  const std::size_t n = grid.n;
  std::vector<double> rho(n, 0.0);
  if (grid.dim == 1) {
    for (std::size_t i = 0; i < n; ++i) rho[i] = std::norm(psi[i]);
    return rho;
  }
  const double area = grid.spacing * grid.spacing;
  for (std::size_t ix = 0; ix < n; ++ix) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n * n; ++j) acc += std::norm(psi[ix * n * n + j]);
    rho[ix] = acc * area;
  }
  return rho;
}

}  // namespace detail

/// Observables of a state. `previous`, when given, anchors the unwrapping of
/// centroid and peak position.
inline ObservableRecord measure(const FieldState& s, const Grid& grid,
                                const ObservableRecord* previous = nullptr) {
  if (s.psi.size() != grid.size())
    throw std::invalid_argument("measure: field does not match grid");
  ObservableRecord r;
  r.t = s.t;
  const double L = grid.length;
  const double h = grid.spacing;
  const auto& x = grid.coords;
  const auto rho = detail::x_marginal(s.psi, grid);
  const std::size_t n = grid.n;

  double total = 0.0;
  for (double v : rho) total += v;
  r.norm = total * h;

  if (total > 0.0) {
    // Circular mean as a start, then refine to the first moment of wrapped
    // displacements.
    double cs = 0.0, sn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = 2.0 * pi * x[i] / L;
      cs += rho[i] * std::cos(a);
      sn += rho[i] * std::sin(a);
    }
    double c = std::atan2(sn, cs) * L / (2.0 * pi);
    for (int it = 0; it < 3; ++it) {
      double m1 = 0.0;
      for (std::size_t i = 0; i < n; ++i) m1 += rho[i] * wrap_displacement(x[i] - c, L);
      c = wrap_displacement(c + m1 / total, L);
    }
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = wrap_displacement(x[i] - c, L);
      m2 += rho[i] * d * d;
    }
    r.width = std::sqrt(m2 / total);
    r.centroid = c;

    const auto imax = static_cast<std::size_t>(
        std::distance(rho.begin(), std::max_element(rho.begin(), rho.end())));
    const double a = std::sqrt(rho[(imax + n - 1) % n]);
    const double b = std::sqrt(rho[imax]);
    const double d = std::sqrt(rho[(imax + 1) % n]);
    const double denom = a - 2.0 * b + d;
    const double delta = denom != 0.0 ? 0.5 * (a - d) / denom : 0.0;
    r.peak_pos = wrap_displacement(x[imax] + delta * h, L);
  }

  if (previous) {
    r.centroid = previous->centroid + wrap_displacement(r.centroid - previous->centroid, L);
    r.peak_pos = previous->peak_pos + wrap_displacement(r.peak_pos - previous->peak_pos, L);
  }

  if (!s.phi.empty()) {
    double phi_min = s.phi[0];
    double phi_abs = 0.0;
    for (double v : s.phi) {
      phi_min = std::min(phi_min, v);
      phi_abs = std::max(phi_abs, std::abs(v));
    }
    r.phi_min = phi_min;
    r.validity_flag = phi_abs < s.params.M;
  }
  return r;
}

struct VelocityFit {
  double velocity{0.0};
  double std_error{0.0};
  /// Peak moved less than three lattice spacings; the slope is noise-limited.
  bool degenerate{false};
};

/// Least-squares slope of the unwrapped peak position against time.
inline VelocityFit fit_velocity(std::span<const ObservableRecord> records, double spacing) {
  if (records.size() < 5)
    throw std::invalid_argument("fit_velocity needs at least 5 records");
  const double n = static_cast<double>(records.size());
  double st = 0.0, sx = 0.0;
  for (const auto& r : records) {
    st += r.t;
    sx += r.peak_pos;
  }
  const double tm = st / n;
  const double xm = sx / n;
  double stt = 0.0, stx = 0.0;
  for (const auto& r : records) {
    stt += (r.t - tm) * (r.t - tm);
    stx += (r.t - tm) * (r.peak_pos - xm);
  }
  if (stt == 0.0) throw std::invalid_argument("fit_velocity: records share one time");
  VelocityFit fit;
  fit.velocity = stx / stt;
  double sse = 0.0;
  for (const auto& r : records) {
    const double e = r.peak_pos - (xm + fit.velocity * (r.t - tm));
    sse += e * e;
  }
  fit.std_error = n > 2 ? std::sqrt(sse / (n - 2.0) / stt) : 0.0;
  const double span = std::abs(records.back().peak_pos - records.front().peak_pos);
  fit.degenerate = span < 3.0 * spacing;
  return fit;
}

inline VelocityFit fit_velocity(const Trajectory& traj) {
  return fit_velocity(traj.observables, traj.grid.spacing);
}

/// sigma0 sqrt(1 + (t / (2 M sigma0^2))^2): width of a free Gaussian packet
/// whose density has standard deviation sigma0 at t = 0.
inline double free_spreading_width(double sigma0, double M, double t) {
  if (!(sigma0 > 0.0)) throw std::invalid_argument("free_spreading_width: sigma0 must be > 0");
  const double tau = t / (2.0 * M * sigma0 * sigma0);
  return sigma0 * std::sqrt(1.0 + tau * tau);
}

namespace detail {
inline const ObservableRecord& record_at(const Trajectory& traj, double T) {
  if (traj.observables.empty()) throw std::invalid_argument("empty trajectory");
  const double tol = 1e-9 * std::max(1.0, std::abs(T));
  if (std::abs(traj.observables.front().t) > tol)
    throw std::invalid_argument("trajectory does not start at t = 0");
  for (const auto& r : traj.observables)
    if (std::abs(r.t - T) <= tol) return r;
  throw std::invalid_argument("trajectory has no record at t = " + std::to_string(T));
}
}  // namespace detail

/// (width_soliton(T)/width_soliton(0)) / (width_free(T)/width_free(0)).
inline double spreading_ratio(const Trajectory& soliton, const Trajectory& free, double T) {
  const auto& s0 = detail::record_at(soliton, 0.0);
  const auto& sT = detail::record_at(soliton, T);
  const auto& f0 = detail::record_at(free, 0.0);
  const auto& fT = detail::record_at(free, T);
  return (sT.width / s0.width) / (fT.width / f0.width);
}

/// Normalized Gaussian packet with density standard deviation sigma0.
inline ComplexField gaussian_packet(const Grid& grid, double sigma0, double x0 = 0.0,
                                    double k0 = 0.0) {
  if (grid.dim != 1) throw std::invalid_argument("gaussian_packet: 1D grids only");
  ComplexField psi(grid.n);
  double norm = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double d = wrap_displacement(grid.coords[i] - x0, grid.length);
    psi[i] = std::exp(-d * d / (4.0 * sigma0 * sigma0)) * std::polar(1.0, k0 * grid.coords[i]);
    norm += std::norm(psi[i]);
  }
  const double scale = 1.0 / std::sqrt(norm * grid.spacing);
  for (auto& z : psi) z *= scale;
  return psi;
}

}  // namespace higgsloc

#pragma once

// Periodic spectral transforms, derivatives and the screened-Poisson
// (Yukawa) operator, plus real-space convolution oracles for it.
//
// Transform convention: forward is unnormalized, inverse carries 1/N.
// Parseval then reads sum |f|^2 = (1/N) sum |F|^2.

#include <fftw3.h>

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "higgsloc/core.hpp"

namespace higgsloc {

inline constexpr const char* kTransformConvention =
    "forward unnormalized, inverse scaled by 1/N";

namespace detail {

/// FFTW plans are shared per (dim, n, sign). Planning is not thread-safe in
/// FFTW, so creation is serialized; execution through fftw_execute_dft with
/// caller arrays is.
class PlanCache {
public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int dim, std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(dim, n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const std::size_t total = dim == 1 ? n : n * n * n;
    std::vector<Complex> scratch(total);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    const int ni = static_cast<int>(n);
    fftw_plan plan = dim == 1 ? fftw_plan_dft_1d(ni, buf, buf, sign, flags)
                              : fftw_plan_dft_3d(ni, ni, ni, buf, buf, sign, flags);
    if (!plan) throw std::runtime_error("FFTW planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<int, std::size_t, int>, fftw_plan> plans_;
};

inline void check_shape(std::size_t size, const Grid& grid) {
  if (size != grid.size())
    throw std::invalid_argument("field size " + std::to_string(size) +
                                " does not match grid size " +
                                std::to_string(grid.size()));
}

inline void execute(ComplexField& data, const Grid& grid, int sign) {
  check_shape(data.size(), grid);
  fftw_plan plan = PlanCache::instance().get(grid.dim, grid.n, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);
}

inline ComplexField to_complex(std::span<const double> f) {
  return ComplexField(f.begin(), f.end());
}

inline RealField real_part(const ComplexField& f) {
  RealField out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i].real();
  return out;
}

/// Visits every lattice mode as (flat index, kx, ky, kz); ky = kz = 0 in 1D.
template <class Fn>
void for_each_mode(const Grid& grid, Fn&& fn) {
  const auto& k = grid.wavenumbers;
  if (grid.dim == 1) {
    for (std::size_t i = 0; i < grid.n; ++i) fn(i, k[i], 0.0, 0.0);
    return;
  }
  const std::size_t n = grid.n;
  for (std::size_t ix = 0; ix < n; ++ix)
    for (std::size_t iy = 0; iy < n; ++iy)
      for (std::size_t iz = 0; iz < n; ++iz)
        fn((ix * n + iy) * n + iz, k[ix], k[iy], k[iz]);
}

/// Visits every lattice node as (flat index, x, y, z); y = z = 0 in 1D.
template <class Fn>
void for_each_node(const Grid& grid, Fn&& fn) {
  const auto& c = grid.coords;
  if (grid.dim == 1) {
    for (std::size_t i = 0; i < grid.n; ++i) fn(i, c[i], 0.0, 0.0);
    return;
  }
  const std::size_t n = grid.n;
  for (std::size_t ix = 0; ix < n; ++ix)
    for (std::size_t iy = 0; iy < n; ++iy)
      for (std::size_t iz = 0; iz < n; ++iz)
        fn((ix * n + iy) * n + iz, c[ix], c[iy], c[iz]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Transforms

struct Spectrum {
  ComplexField coefficients;
  Grid grid;
};

inline Spectrum forward(ComplexField field, const Grid& grid) {
  detail::execute(field, grid, FFTW_FORWARD);
  return {std::move(field), grid};
}

inline Spectrum forward(std::span<const double> field, const Grid& grid) {
  return forward(detail::to_complex(field), grid);
}

inline ComplexField inverse(Spectrum spectrum) {
  detail::execute(spectrum.coefficients, spectrum.grid, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(spectrum.grid.size());
  for (auto& c : spectrum.coefficients) c *= scale;
  return std::move(spectrum.coefficients);
}

/// Multiplies the spectrum of `field` by symbol(kx, ky, kz) and transforms back.
template <class Symbol>
ComplexField apply_symbol(ComplexField field, const Grid& grid, Symbol&& symbol) {
  Spectrum s = forward(std::move(field), grid);
  detail::for_each_mode(grid, [&](std::size_t i, double kx, double ky, double kz) {
    s.coefficients[i] *= symbol(kx, ky, kz);
  });
  return inverse(std::move(s));
}

// ---------------------------------------------------------------------------
// Derivatives

namespace detail {
inline ComplexField derivative_impl(ComplexField field, const Grid& grid,
                                    int axis, int order) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("derivative order must be 1 or 2");
  if (axis < 0 || axis >= grid.dim)
    throw std::invalid_argument("derivative axis out of range");
  const double nyq = grid.nyquist();
  return apply_symbol(std::move(field), grid, [&](double kx, double ky, double kz) {
    const double k = axis == 0 ? kx : (axis == 1 ? ky : kz);
    if (order == 2) return Complex(-k * k, 0.0);
    // The Nyquist mode has no odd-derivative partner on the lattice.
    if (std::abs(std::abs(k) - nyq) < 1e-9 * nyq) return Complex(0.0, 0.0);
    return Complex(0.0, k);
  });
}
}  // namespace detail

/// Exact derivative of the trigonometric interpolant along `axis`.
inline ComplexField spectral_derivative(const ComplexField& field, const Grid& grid,
                                        int axis, int order) {
  detail::check_shape(field.size(), grid);
  return detail::derivative_impl(field, grid, axis, order);
}

inline RealField spectral_derivative(std::span<const double> field, const Grid& grid,
                                     int axis, int order) {
  detail::check_shape(field.size(), grid);
  return detail::real_part(
      detail::derivative_impl(detail::to_complex(field), grid, axis, order));
}

/// Lattice Laplacian of a field with no transverse dependence.
inline RealField spectral_laplacian(std::span<const double> field, const Grid& grid) {
  detail::check_shape(field.size(), grid);
  return detail::real_part(apply_symbol(
      detail::to_complex(field), grid,
      [](double kx, double ky, double kz) { return Complex(-(kx * kx + ky * ky + kz * kz)); }));
}

/// Laplacian of the matter field. In quasi-1D mode the exact transverse plane
/// wave contributes -(gamma^2 + epsilon^2).
inline ComplexField matter_laplacian(const ComplexField& psi, const Grid& grid) {
  detail::check_shape(psi.size(), grid);
  const double kt2 = grid.transverse_k2();
  return apply_symbol(psi, grid, [kt2](double kx, double ky, double kz) {
    return Complex(-(kx * kx + ky * ky + kz * kz + kt2));
  });
}

// ---------------------------------------------------------------------------
// Yukawa operator

/// Green function of (m^2 - Laplacian): e^{-m|x|}/(2m) in 1D,
/// e^{-m r}/(4 pi r) in 3D.
inline double yukawa_kernel(double r, double m, int dim) {
  if (dim == 1) return std::exp(-m * std::abs(r)) / (2.0 * m);
  return std::exp(-m * r) / (4.0 * pi * r);
}

/// Solves (Laplacian - m^2) phi = source on the periodic lattice, i.e.
/// multiplies the spectrum by -1/(k^2 + m^2).
inline RealField yukawa_invert(std::span<const double> source, double m,
                               const Grid& grid) {
  if (!(m > 0.0))
    throw std::invalid_argument("yukawa_invert requires m > 0 (k = 0 mode singular)");
  detail::check_shape(source.size(), grid);
  const double m2 = m * m;
  return detail::real_part(apply_symbol(
      detail::to_complex(source), grid, [m2](double kx, double ky, double kz) {
        return Complex(-1.0 / (kx * kx + ky * ky + kz * kz + m2));
      }));
}

inline constexpr std::size_t kDirectOracleMaxPoints = std::size_t{1} << 14;

namespace detail {

/// Fornberg's recursion: weights of the `order`-th derivative at x0 for the
/// given stencil points.
inline std::vector<double> fd_weights(int order, double x0, std::span<const double> xs) {
  const int n = static_cast<int>(xs.size()) - 1;
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n + 1),
                                     std::vector<double>(static_cast<std::size_t>(order + 1), 0.0));
  double c1 = 1.0;
  double c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) w[i] = c[i][order];
  return w;
}

/// Centered finite-difference weights on offsets -half..half (unit spacing).
inline std::vector<double> centered_weights(int order, int half) {
  std::vector<double> xs;
  for (int j = -half; j <= half; ++j) xs.push_back(static_cast<double>(j));
  return fd_weights(order, 0.0, xs);
}

/// Periodic centered finite difference of a 1D lattice field.
inline RealField periodic_fd(std::span<const double> f, double h, int order, int half) {
  const auto w = centered_weights(order, half);
  const auto n = static_cast<std::ptrdiff_t>(f.size());
  RealField out(f.size(), 0.0);
  const double scale = std::pow(h, -order);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = -half; j <= half; ++j) acc += w[j + half] * f[((i + j) % n + n) % n];
    out[i] = acc * scale;
  }
  return out;
}

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace detail

/// Real-space lattice quadrature of phi = -G * source with minimum-image
/// distances, O(N^2). Independent of the spectral route.
///
/// 1D: trapezoid over the kernel kink at r = 0 with Euler-Maclaurin end
/// corrections through h^8, using finite-difference source derivatives, so
/// smooth sources converge to high order (kink_correction = false gives the
/// plain trapezoid, i.e. an exact kernel table for a lattice delta). 3D: plain
/// lattice sum with the self-cell replaced by the cell average of the kernel
/// (second order).
inline RealField yukawa_convolve_direct(std::span<const double> source, double m,
                                        const Grid& grid, bool kink_correction = true) {
  if (!(m > 0.0)) throw std::invalid_argument("yukawa_convolve_direct requires m > 0");
  detail::check_shape(source.size(), grid);
  if (grid.size() > kDirectOracleMaxPoints)
    throw std::invalid_argument("grid too large for the direct oracle (" +
                                std::to_string(grid.size()) + " > " +
                                std::to_string(kDirectOracleMaxPoints) + " points)");
  const double h = grid.spacing;
  const double L = grid.length;
  RealField phi(grid.size(), 0.0);

  if (grid.dim == 1) {
    const auto n = static_cast<std::ptrdiff_t>(grid.n);
    const std::ptrdiff_t half = n / 2;
    const auto d2 = detail::periodic_fd(source, h, 2, 5);
    const auto d4 = detail::periodic_fd(source, h, 4, 5);
    const auto d6 = detail::periodic_fd(source, h, 6, 5);
    // Bernoulli numbers B2, B4, B6, B8 over (2k)!.
    const double bern[] = {1.0 / 6.0 / 2.0, -1.0 / 30.0 / 24.0, 1.0 / 42.0 / 720.0,
                           -1.0 / 30.0 / 40320.0};
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      auto s = [&](std::ptrdiff_t j) { return source[((j % n) + n) % n]; };
      double acc = 0.5 * yukawa_kernel(0.0, m, 1) * 2.0 * source[i];
      for (std::ptrdiff_t j = 1; j < half; ++j)
        acc += yukawa_kernel(j * h, m, 1) * (s(i + j) + s(i - j));
      acc += 0.5 * yukawa_kernel(half * h, m, 1) * 2.0 * s(i + half);
      acc *= h;
      // Odd derivatives at 0+ of F(r) = G(r) (s(x+r) + s(x-r)):
      // F^(2k-1)(0) = -sum_j C(2k-1, 2j) m^(2k-2-2j) s^(2j).
      const double derivs[] = {source[i], d2[i], d4[i], d6[i]};
      double corr = 0.0;
      double hp = h * h;
      for (int k = 1; kink_correction && k <= 4; ++k) {
        double f_odd = 0.0;
        for (int j = 0; j <= k - 1; ++j)
          f_odd -= detail::binomial(2 * k - 1, 2 * j) * std::pow(m, 2 * (k - 1 - j)) *
                   derivs[j];
        corr += bern[k - 1] * hp * f_odd;
        hp *= h * h;
      }
      phi[i] = -(acc + corr);
    }
    return phi;
  }

  // Integral of 1/r over the unit cube centred on the origin.
  constexpr double kCubeInverseDistance = 2.380077363979557;
  const double self = kCubeInverseDistance / (4.0 * pi * h) - m / (4.0 * pi);
  const std::size_t n = grid.n;
  const double dv = grid.cell_volume();
  auto wrap = [L](double d) { return wrap_displacement(d, L); };
  const auto& c = grid.coords;
  for (std::size_t ix = 0; ix < n; ++ix)
    for (std::size_t iy = 0; iy < n; ++iy)
      for (std::size_t iz = 0; iz < n; ++iz) {
        double acc = 0.0;
        for (std::size_t jx = 0; jx < n; ++jx) {
          const double dx = wrap(c[ix] - c[jx]);
          for (std::size_t jy = 0; jy < n; ++jy) {
            const double dy = wrap(c[iy] - c[jy]);
            for (std::size_t jz = 0; jz < n; ++jz) {
              const double dz = wrap(c[iz] - c[jz]);
              const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
              const double g = r == 0.0 ? self : yukawa_kernel(r, m, 3);
              acc += g * source[(jx * n + jy) * n + jz];
            }
          }
        }
        phi[(ix * n + iy) * n + iz] = -acc * dv;
      }
  return phi;
}

/// Isotropic Gaussian source component a * exp(-|x - c|^2 / (2 sigma^2)).
struct GaussianBlob {
  double amplitude{1.0};
  double sigma{1.0};
  double cx{0.0};
  double cy{0.0};
  double cz{0.0};
};

/// Samples a sum of blobs on the lattice (nearest periodic image of each).
inline RealField sample_blobs(std::span<const GaussianBlob> blobs, const Grid& grid) {
  RealField out(grid.size(), 0.0);
  const double L = grid.length;
  detail::for_each_node(grid, [&](std::size_t i, double x, double y, double z) {
    double acc = 0.0;
    for (const auto& b : blobs) {
      const double dx = wrap_displacement(x - b.cx, L);
      double r2 = dx * dx;
      if (grid.dim == 3) {
        const double dy = wrap_displacement(y - b.cy, L);
        const double dz = wrap_displacement(z - b.cz, L);
        r2 += dy * dy + dz * dz;
      }
      acc += b.amplitude * std::exp(-r2 / (2.0 * b.sigma * b.sigma));
    }
    out[i] = acc;
  });
  return out;
}

/// phi = -G * source for an analytic Gaussian-blob source, by radial
/// Gauss-Legendre quadrature of the Green-function convolution over the
/// minimum-image ball |r| <= L/2. In 3D the angular average of each blob is
/// taken in closed form, so the 1/r singularity is integrated exactly. This is
/// the high-accuracy oracle for lattices too coarse for lattice quadrature.
inline RealField yukawa_convolve_blobs(std::span<const GaussianBlob> blobs, double m,
                                       const Grid& grid) {
  if (!(m > 0.0)) throw std::invalid_argument("yukawa_convolve_blobs requires m > 0");
  using Rule = boost::math::quadrature::gauss<double, 20>;
  const double L = grid.length;
  const double R = 0.5 * L;
  double min_sigma = R;
  for (const auto& b : blobs) min_sigma = std::min(min_sigma, b.sigma);
  const double panel = std::min(0.5 * min_sigma, 0.5 / m);
  const auto panels = static_cast<int>(std::ceil(R / panel));
  const double w = R / panels;

  RealField phi(grid.size(), 0.0);
  detail::for_each_node(grid, [&](std::size_t i, double x, double y, double z) {
    double acc = 0.0;
    for (const auto& b : blobs) {
      const double s2 = b.sigma * b.sigma;
      if (grid.dim == 1) {
        const double d = wrap_displacement(x - b.cx, L);
        auto integrand = [&](double r) {
          const double sp = std::exp(-(d + r) * (d + r) / (2.0 * s2));
          const double sm = std::exp(-(d - r) * (d - r) / (2.0 * s2));
          return yukawa_kernel(r, m, 1) * (sp + sm);
        };
        for (int p = 0; p < panels; ++p)
          acc += b.amplitude * Rule::integrate(integrand, p * w, (p + 1) * w);
      } else {
        const double dx = wrap_displacement(x - b.cx, L);
        const double dy = wrap_displacement(y - b.cy, L);
        const double dz = wrap_displacement(z - b.cz, L);
        const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
        // r^2 G(r) times the sphere-averaged Gaussian, times 4 pi.
        auto integrand = [&](double r) {
          const double zarg = r * d / s2;
          const double core = std::exp(-(r - d) * (r - d) / (2.0 * s2));
          const double avg = zarg < 1e-8 ? std::exp(-(r * r + d * d) / (2.0 * s2))
                                         : core * (-std::expm1(-2.0 * zarg)) / (2.0 * zarg);
          return r * std::exp(-m * r) * avg;
        };
        for (int p = 0; p < panels; ++p)
          acc += b.amplitude * Rule::integrate(integrand, p * w, (p + 1) * w);
      }
    }
    phi[i] = -acc;
  });
  return phi;
}

}  // namespace higgsloc

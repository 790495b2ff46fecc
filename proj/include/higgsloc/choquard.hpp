#pragma once

// Static-field reduction: phi slaved to |psi|^2 through the Yukawa operator.

#include <optional>
#include <span>
#include <string_view>

#include "higgsloc/core.hpp"
#include "higgsloc/spectral.hpp"

namespace higgsloc {

/// Which source strength the slaved field uses.
///  - motion_equation: the static limit of the Klein-Gordon equation,
///    phi = -(2M/v^2) (m^2 - Laplacian)^{-1} |psi|^2.
///  - printed_static: the printed closed-form integral, whose 3D kernel
///    prefactor M/(4 pi v^2) is half of the above.
enum class CouplingConvention { motion_equation, printed_static };

inline std::string_view to_string(CouplingConvention c) {
  return c == CouplingConvention::motion_equation ? "motion_equation" : "printed_static";
}

inline std::optional<CouplingConvention> parse_coupling(std::string_view s) {
  if (s == "motion_equation") return CouplingConvention::motion_equation;
  if (s == "printed_static") return CouplingConvention::printed_static;
  return std::nullopt;
}

/// Source coefficient c in phi = -c (m^2 - Laplacian)^{-1} |psi|^2.
inline double source_coefficient(const PhysicalParams& p, CouplingConvention c) {
  const double base = p.M / (p.v * p.v);
  return c == CouplingConvention::motion_equation ? 2.0 * base : base;
}

inline RealField density(std::span<const Complex> psi) {
  RealField rho(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) rho[i] = std::norm(psi[i]);
  return rho;
}

inline RealField slaved_field(std::span<const Complex> psi, const PhysicalParams& p,
                              const Grid& grid,
                              CouplingConvention c = CouplingConvention::motion_equation) {
  RealField src = density(psi);
  const double coeff = source_coefficient(p, c);
  for (auto& s : src) s *= coeff;
  return yukawa_invert(src, p.m, grid);
}

}  // namespace higgsloc

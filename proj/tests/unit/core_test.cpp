#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "higgsloc/analytic.hpp"
#include "higgsloc/core.hpp"

using namespace higgsloc;

TEST(ValidateParams, OneDBImaginaryVelocityFails) {
  const PhysicalParams p{1.0, 1.0, 1.0};
  const auto r = validate_params(p, SolitonSpec::one_d_b(p));
  EXPECT_FALSE(r.ok());
  const auto* c = r.find("V_s real: (3/2) m^3 v^2 <= M^3");
  ASSERT_NE(c, nullptr);
  EXPECT_FALSE(c->passed);
  EXPECT_NEAR(c->margin, -0.5, 1e-9);
}

TEST(ValidateParams, OneDBSaturatedBoundPassesWithZeroVelocity) {
  const PhysicalParams p{1.0, 1.0, std::sqrt(2.0 / 3.0)};
  const auto s = SolitonSpec::one_d_b(p);
  EXPECT_TRUE(validate_params(p, s).ok());
  ASSERT_TRUE(s.soliton_velocity.has_value());
  EXPECT_NEAR(*s.soliton_velocity, 0.0, 1e-7);
}

TEST(ValidateParams, ThreeDBMomentumAboveMassFails) {
  const PhysicalParams p{1.0, 0.5, 1.0};
  const auto r = validate_params(p, SolitonSpec::three_d_b(1.5));
  EXPECT_FALSE(r.ok());
  const auto* c = r.find("mu <= M");
  ASSERT_NE(c, nullptr);
  EXPECT_NEAR(c->margin, -0.5, 1e-12);
}

TEST(ValidateParams, NonPositiveParametersReported) {
  const PhysicalParams p{-1.0, 0.5, 0.0};
  const auto r = validate_params(p, SolitonSpec::one_d_a());
  EXPECT_FALSE(r.find("M > 0")->passed);
  EXPECT_TRUE(r.find("m > 0")->passed);
  EXPECT_FALSE(r.find("v > 0")->passed);
}

TEST(ValidateParams, ThreeDAInconsistentDispersionFails) {
  const PhysicalParams p{};
  auto s = SolitonSpec::three_d_a(p, 0.3);
  EXPECT_TRUE(validate_params(p, s).ok());
  s.alpha *= 1.01;
  EXPECT_FALSE(validate_params(p, s).ok());
}

TEST(ValidateParams, ThreeDAWarnsOutsideNonRelativisticRegime) {
  const PhysicalParams p{};
  const auto r = validate_params(p, SolitonSpec::three_d_a(p, 0.0));
  EXPECT_FALSE(r.warnings.empty());
}

TEST(ValidateParams, PassingOneDBImpliesVelocityInUnitInterval) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  int passing = 0;
  for (int i = 0; i < 500; ++i) {
    const PhysicalParams p{u(rng), u(rng), u(rng)};
    const auto s = SolitonSpec::one_d_b(p);
    if (!validate_params(p, s).ok()) continue;
    ++passing;
    ASSERT_TRUE(s.soliton_velocity);
    EXPECT_GE(*s.soliton_velocity, 0.0);
    EXPECT_LT(*s.soliton_velocity, 1.0);
  }
  EXPECT_GT(passing, 10);
}

TEST(SolitonSpec, DispersionRelationsClose) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.4, 0.4), pos(0.3, 2.0), om(0.0, 0.4);
  for (int i = 0; i < 200; ++i) {
    const PhysicalParams p{pos(rng), pos(rng), pos(rng)};
    const double g = u(rng), e = u(rng);
    const auto a = SolitonSpec::three_d_a(p, om(rng), g, e);
    const auto back = SolitonSpec::three_d_a_from_alpha(p, a.alpha, g, e);
    EXPECT_NEAR(back.omega, a.omega, 1e-12 * std::max(1.0, std::abs(a.omega)));
    const double rederived = dispersion_alpha_3dA(p.M, back.omega, g, e);
    EXPECT_NEAR(rederived / a.alpha, 1.0, 1e-12);

    const auto b = SolitonSpec::three_d_b(std::abs(u(rng)), g, e);
    EXPECT_NEAR(b.alpha * b.alpha, b.mu * b.mu + g * g + e * e,
                1e-12 * std::max(1.0, b.alpha * b.alpha));

    const auto d = SolitonSpec::one_d_b(p);
    if (d.soliton_velocity) {
      const double vs = *d.soliton_velocity;
      EXPECT_NEAR(vs * vs, soliton_velocity_squared_1dB(p), 1e-12);
    }
  }
}

TEST(MakeGrid, OneDimensionalSixteen) {
  const auto g = make_grid(1, 16, 16.0);
  EXPECT_DOUBLE_EQ(g.spacing, 1.0);
  EXPECT_EQ(g.size(), 16u);
  EXPECT_DOUBLE_EQ(g.coords.front(), -8.0);
  EXPECT_DOUBLE_EQ(g.coords.back(), 7.0);
  const double dk = 2.0 * pi / 16.0;
  EXPECT_DOUBLE_EQ(g.wavenumbers[0], 0.0);
  for (int j = 1; j < 8; ++j) {
    EXPECT_NEAR(g.wavenumbers[static_cast<std::size_t>(j)], j * dk, 1e-15);
    EXPECT_NEAR(g.wavenumbers[static_cast<std::size_t>(16 - j)], -j * dk, 1e-15);
  }
  EXPECT_NEAR(std::abs(g.wavenumbers[8]), g.nyquist(), 1e-15);
  EXPECT_NEAR(g.spacing * static_cast<double>(g.n), g.length, 1e-15);
}

TEST(MakeGrid, ThreeDimensional) {
  const auto g = make_grid(3, 32, 20.0);
  EXPECT_EQ(g.size(), 32u * 32u * 32u);
  EXPECT_DOUBLE_EQ(g.spacing, 0.625);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.625 * 0.625 * 0.625);
}

TEST(MakeGrid, RejectsBadShapes) {
  EXPECT_THROW(make_grid(1, 24, 10.0), std::invalid_argument);
  EXPECT_THROW(make_grid(2, 16, 10.0), std::invalid_argument);
  EXPECT_THROW(make_grid(1, 8, 10.0), std::invalid_argument);
  EXPECT_THROW(make_grid(1, 16, 0.0), std::invalid_argument);
  EXPECT_THROW(make_grid(3, 16, 10.0, TransverseMode{0.1, 0.0}), std::invalid_argument);
}

TEST(MakeGrid, TransverseModeOffset) {
  const auto g = make_grid(1, 16, 10.0, TransverseMode{0.3, 0.4});
  EXPECT_NEAR(g.transverse_k2(), 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(make_grid(1, 16, 10.0).transverse_k2(), 0.0);
}

TEST(WrapDisplacement, MapsIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_displacement(0.0, 10.0), 0.0);
  EXPECT_NEAR(wrap_displacement(6.0, 10.0), -4.0, 1e-15);
  EXPECT_NEAR(wrap_displacement(-6.0, 10.0), 4.0, 1e-15);
  EXPECT_NEAR(wrap_displacement(25.0, 10.0), -5.0, 1e-15);
  EXPECT_NEAR(wrap_displacement(5.0, 10.0), -5.0, 1e-15);
}

TEST(FamilyNames, RoundTrip) {
  for (auto f : {Family::ThreeD_A, Family::ThreeD_B, Family::OneD_A, Family::OneD_B})
    EXPECT_EQ(parse_family(to_string(f)), f);
  for (auto v : {Variant13::as_printed_sech, Variant13::corrected_sech_squared})
    EXPECT_EQ(parse_variant13(to_string(v)), v);
  EXPECT_FALSE(parse_family("OneD_C"));
  EXPECT_EQ(SolitonSpec::one_d_a().variant_13, Variant13::as_printed_sech);
}

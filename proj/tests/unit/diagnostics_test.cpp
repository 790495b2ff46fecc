#include <cmath>

#include <gtest/gtest.h>

#include "higgsloc/analytic.hpp"
#include "higgsloc/diagnostics.hpp"

using namespace higgsloc;

namespace {

const PhysicalParams kDefault{1.0, 0.5, 1.0};

FieldState state_of(const SolutionSample& s, const PhysicalParams& p) {
  FieldState st;
  st.t = s.t;
  st.psi = s.psi;
  st.phi = s.phi;
  st.params = p;
  return st;
}

std::vector<ObservableRecord> linear_records(double v, std::size_t count, double dt) {
  std::vector<ObservableRecord> r(count);
  for (std::size_t i = 0; i < count; ++i) {
    r[i].t = static_cast<double>(i) * dt;
    r[i].peak_pos = 1.5 + v * r[i].t;
  }
  return r;
}

Trajectory constant_width(std::vector<double> times, std::vector<double> widths) {
  Trajectory t;
  for (std::size_t i = 0; i < times.size(); ++i) {
    ObservableRecord r;
    r.t = times[i];
    r.width = widths[i];
    t.times.push_back(times[i]);
    t.observables.push_back(r);
  }
  return t;
}

}  // namespace

TEST(Measure, OneDBSampleNormAndWidth) {
  const auto s = SolitonSpec::one_d_b(kDefault);
  const double k = family_profile(s, kDefault).k;
  const auto g = make_grid(1, 4096, 60.0 / k);
  const auto r = measure(state_of(sample_solution(s, kDefault, g, 0.0), kDefault), g);
  EXPECT_NEAR(r.norm, 1.0, 1e-8);
  EXPECT_NEAR(r.width * r.width, (pi * pi / 12.0 - 0.5) / (k * k), 1e-6);
  EXPECT_NEAR(r.centroid, 0.0, 1e-10);
  EXPECT_NEAR(r.peak_pos, 0.0, 1e-10);
  EXPECT_NEAR(r.phi_min, -16.0 / 3.0, 1e-12);
  EXPECT_FALSE(r.validity_flag);
}

TEST(Measure, SechEnvelopeWidth) {
  const auto s = SolitonSpec::one_d_a();
  const double k = family_profile(s, kDefault).k;
  const auto g = make_grid(1, 4096, 60.0 / k);
  const auto r = measure(state_of(sample_solution(s, kDefault, g, 0.0), kDefault), g);
  EXPECT_NEAR(r.width * r.width * k * k, pi * pi / 12.0, 1e-6);
}

TEST(Measure, UniformPlaneWaveWidth) {
  const auto g = make_grid(1, 1024, 30.0);
  FieldState st;
  st.params = kDefault;
  for (std::size_t i = 0; i < g.n; ++i)
    st.psi.push_back(std::polar(1.0 / std::sqrt(g.length), 2.0 * pi * 5.0 * g.coords[i] / g.length));
  const auto r = measure(st, g);
  EXPECT_NEAR(r.norm, 1.0, 1e-12);
  EXPECT_NEAR(r.width / (g.length / std::sqrt(12.0)), 1.0, 1e-3);
}

TEST(Measure, ValidityFlagTracksPhiBelowM) {
  const auto g = make_grid(1, 64, 10.0);
  FieldState st;
  st.params = kDefault;
  st.psi.assign(g.n, Complex{1.0, 0.0});
  st.phi.assign(g.n, -0.5);
  EXPECT_TRUE(measure(st, g).validity_flag);
  st.phi[3] = -1.0;
  EXPECT_FALSE(measure(st, g).validity_flag);
  st.phi[3] = 1.2;
  EXPECT_FALSE(measure(st, g).validity_flag);
  EXPECT_THROW(measure(st, make_grid(1, 32, 10.0)), std::invalid_argument);
}

TEST(Measure, TranslationCovariant) {
  const auto s = SolitonSpec::one_d_b(kDefault);
  const double k = family_profile(s, kDefault).k;
  const auto g = make_grid(1, 2048, 60.0 / k);
  const auto a = measure(state_of(sample_solution(s, kDefault, g, 0.0, 0.0), kDefault), g);
  for (double shift : {1.234, -7.5, 19.0}) {
    const auto b = measure(state_of(sample_solution(s, kDefault, g, 0.0, shift), kDefault), g);
    EXPECT_NEAR(wrap_displacement(b.centroid - a.centroid - shift, g.length), 0.0, 1e-10);
    EXPECT_NEAR(wrap_displacement(b.peak_pos - a.peak_pos - shift, g.length), 0.0, 1e-3);
    EXPECT_NEAR(b.norm, a.norm, 1e-10);
    EXPECT_NEAR(b.width, a.width, 1e-10);
    EXPECT_NEAR(b.phi_min, a.phi_min, 1e-2);
  }
}

TEST(Measure, UnwrapsAcrossBoundary) {
  const auto s = SolitonSpec::one_d_b(kDefault);
  const double k = family_profile(s, kDefault).k;
  const auto g = make_grid(1, 1024, 40.0 / k);
  const double L = g.length;
  const auto before =
      measure(state_of(sample_solution(s, kDefault, g, 0.0, 0.5 * L - 0.3), kDefault), g);
  const auto after = measure(
      state_of(sample_solution(s, kDefault, g, 0.0, 0.5 * L + 0.3), kDefault), g, &before);
  EXPECT_NEAR(after.centroid - before.centroid, 0.6, 1e-9);
  EXPECT_NEAR(after.peak_pos - before.peak_pos, 0.6, 1e-3);
}

TEST(FitVelocity, ExactLinearData) {
  const auto recs = linear_records(0.25, 11, 1.0);
  const auto fit = fit_velocity(recs, 0.1);
  EXPECT_NEAR(fit.velocity, 0.25, 1e-6);
  EXPECT_NEAR(fit.std_error, 0.0, 1e-12);
  EXPECT_FALSE(fit.degenerate);
}

TEST(FitVelocity, StationaryIsFlaggedDegenerate) {
  auto recs = linear_records(0.0, 11, 1.0);
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].peak_pos += (i % 2 ? 1e-4 : -1e-4);
  const auto fit = fit_velocity(recs, 0.1);
  EXPECT_NEAR(fit.velocity, 0.0, 1e-4);
  EXPECT_TRUE(fit.degenerate);
}

TEST(FitVelocity, RequiresFiveRecords) {
  EXPECT_THROW(fit_velocity(linear_records(1.0, 4, 1.0), 0.1), std::invalid_argument);
  EXPECT_THROW(fit_velocity(linear_records(1.0, 6, 0.0), 0.1), std::invalid_argument);
}

TEST(FreeSpreadingWidth, Examples) {
  EXPECT_DOUBLE_EQ(free_spreading_width(1.3, 1.0, 0.0), 1.3);
  EXPECT_NEAR(free_spreading_width(1.3, 2.0, 2.0 * 2.0 * 1.3 * 1.3), 1.3 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(free_spreading_width(1.0, 1.0, 4.0), std::sqrt(5.0), 1e-14);
  EXPECT_NEAR(free_spreading_width(1.0, 1.0, 4.0), 2.23607, 1e-5);
  EXPECT_THROW(free_spreading_width(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST(SpreadingRatio, IdenticalTrajectoriesGiveOne) {
  const auto t = constant_width({0.0, 1.0, 2.0}, {1.0, 1.5, 3.0});
  EXPECT_DOUBLE_EQ(spreading_ratio(t, t, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(spreading_ratio(t, t, 0.0), 1.0);
}

TEST(SpreadingRatio, LocalizedOverSpreading) {
  const auto sol = constant_width({0.0, 20.0}, {0.5, 0.505});
  const auto free = constant_width({0.0, 20.0}, {0.5, 20.0});
  EXPECT_NEAR(spreading_ratio(sol, free, 20.0), 1.01 / 40.0, 1e-14);
}

TEST(SpreadingRatio, MismatchedSpansThrow) {
  const auto a = constant_width({0.0, 1.0, 2.0}, {1.0, 1.0, 1.0});
  const auto b = constant_width({0.0, 1.0}, {1.0, 1.0});
  const auto late = constant_width({0.5, 2.0}, {1.0, 1.0});
  EXPECT_THROW(spreading_ratio(a, b, 2.0), std::invalid_argument);
  EXPECT_THROW(spreading_ratio(a, late, 2.0), std::invalid_argument);
  EXPECT_THROW(spreading_ratio(a, Trajectory{}, 2.0), std::invalid_argument);
}

TEST(GaussianPacket, NormalizedWithRequestedWidth) {
  const auto g = make_grid(1, 1024, 60.0);
  FieldState st;
  st.psi = gaussian_packet(g, 1.7, 4.0, 0.3);
  const auto r = measure(st, g);
  EXPECT_NEAR(r.norm, 1.0, 1e-12);
  EXPECT_NEAR(r.width, 1.7, 1e-10);
  EXPECT_NEAR(r.centroid, 4.0, 1e-10);
}

TEST(Measure, ThreeDimensionalMarginal) {
  const auto g = make_grid(3, 32, 40.0);
  const auto g1 = make_grid(1, 32, 40.0);
  const auto line = gaussian_packet(g1, 2.0, 1.0);
  FieldState st;
  st.psi.resize(g.size());
  const auto yz = gaussian_packet(g1, 3.0);
  for (std::size_t ix = 0; ix < g.n; ++ix)
    for (std::size_t iy = 0; iy < g.n; ++iy)
      for (std::size_t iz = 0; iz < g.n; ++iz)
        st.psi[(ix * g.n + iy) * g.n + iz] = line[ix] * yz[iy] * yz[iz];
  const auto r = measure(st, g);
  EXPECT_NEAR(r.norm, 1.0, 1e-10);
  EXPECT_NEAR(r.centroid, 1.0, 1e-6);
  EXPECT_NEAR(r.width, 2.0, 1e-4);
}

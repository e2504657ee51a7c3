#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ifhom/field.hpp"
#include "ifhom/strip.hpp"
#include "ifhom/torus_cell.hpp"

using namespace ifhom;

namespace {

StripMeasure solve_strip(const InterfaceDrift& field, int res, int ks) {
  const auto spec = GridSpec::uniform(field.dim(), res, ks);
  const auto mu_p = stationary_density(field.tail_plus(), spec);
  const auto mu_m = stationary_density(field.tail_minus(), spec);
  return strip_invariant_measure(field, spec, mu_p, mu_m);
}

}  // namespace

TEST_CASE("zero field: uniform strip measure with equal tail weights") {
  const auto field = builtin_field("zero");
  const auto measure = solve_strip(field, 32, 9);
  CHECK(measure.interior_residual <= kStripResidualTol);
  CHECK(measure.values.minCoeff() > 0.0);
  // all node values coincide for the pure Laplacian
  const double mean = measure.values.mean();
  CHECK((measure.values.array() - mean).abs().maxCoeff() / mean < 1e-10);
  const auto fit = limit_masses(measure);
  CHECK(fit.q_plus == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.q_plus + fit.q_minus == 1.0);
  // the masses are flat, so the fitted geometric correction is negligible
  CHECK(std::abs(fit.amplitude_plus) < 1e-8);
  CHECK(std::abs(fit.amplitude_minus) < 1e-8);
}

TEST_CASE("transverse shear keeps the uniform measure: equal tail weights") {
  const auto field = builtin_field("paper_shear");
  const auto measure = solve_strip(field, 32, 9);
  CHECK(measure.interior_residual <= kStripResidualTol);
  const auto fit = limit_masses(measure);
  CHECK(fit.q_plus == doctest::Approx(0.5).epsilon(1e-10));
  // per-cell masses are flat on both sides
  for (std::size_t j = 0; j < measure.mass_plus.size(); ++j) {
    CHECK(measure.mass_plus[j] == doctest::Approx(measure.mass_minus[j]).epsilon(1e-9));
    CHECK(measure.mass_plus[j] == doctest::Approx(measure.mass_plus[0]).epsilon(1e-9));
  }
}

TEST_CASE("asymmetric gradient tails match the explicit 1D tail weights") {
  // With purely longitudinal drift the invariant measure is C e^{2B(x1)},
  // B' = b1, so q+/q- reduces to one core quadrature and two Bessel factors:
  //   q+/q- = e^{2 int_{-eta}^{eta} b1} e^{2(a+ - a-)} I0(2 a+) / I0(2 a-),
  // evaluated with mpmath (30 digits) for a+ = 0.4, a- = 0.1, eta = 1.
  const auto field = builtin_field(
      "two_sided",
      {{"a_plus", 0.4}, {"a_minus", 0.1}, {"c_plus", 0.0}, {"c_minus", 0.0}, {"swirl", 0.0}});
  const auto measure = solve_strip(field, 48, 9);
  CHECK(measure.interior_residual <= kStripResidualTol);
  const auto fit = limit_masses(measure);
  CHECK(fit.q_plus == doctest::Approx(0.531638085717723405).epsilon(5e-6));
  CHECK(fit.residual < 1e-8);
}

TEST_CASE("tail weights are stable under strip widening") {
  const auto field = builtin_field(
      "two_sided",
      {{"a_plus", 0.4}, {"a_minus", 0.1}, {"c_plus", 0.0}, {"c_minus", 0.0}, {"swirl", 0.0}});
  const double q9 = limit_masses(solve_strip(field, 32, 9)).q_plus;
  const double q11 = limit_masses(solve_strip(field, 32, 11)).q_plus;
  CHECK(std::abs(q9 - q11) < kTruncationTol);
}

TEST_CASE("strip measure positivity and flux balance on the default field") {
  const auto field = builtin_field("two_sided");
  const auto measure = solve_strip(field, 32, 9);
  CHECK(measure.values.minCoeff() > -1e-12);
  CHECK(measure.interior_residual <= kStripResidualTol);
  CHECK(std::abs(measure.flux_plus) < 1e-8);
  CHECK(std::abs(measure.flux_minus) < 1e-8);
  CHECK(measure.scale_factor > 0.0);
}

TEST_CASE("cell-mass fit recovers an exact geometric profile") {
  const double q = 0.37, A = 0.21, rho = 0.55;
  std::vector<double> masses(10);
  for (int j = 0; j < 10; ++j) masses[j] = q + A * std::pow(rho, j);
  const auto fit = fit_cell_masses(masses, 2, 8);
  CHECK(fit.q == doctest::Approx(q).epsilon(1e-9));
  CHECK(fit.rho == doctest::Approx(rho).epsilon(1e-7));
  // the fitted amplitude is referenced to the first cell of the window
  CHECK(fit.amplitude == doctest::Approx(A * rho * rho).epsilon(1e-6));
  CHECK(fit.residual < 1e-10);
  CHECK_FALSE(fit.degenerate);
}

TEST_CASE("cell-mass fit rejects non-geometric decay and flags constants") {
  std::vector<double> harmonic(10);
  for (int j = 0; j < 10; ++j) harmonic[j] = 1.0 / (j + 1.0);
  const auto bad = fit_cell_masses(harmonic, 2, 9);
  CHECK(bad.residual / bad.q > 1e-3);  // visibly not q + A rho^j

  std::vector<double> flat(8, 0.25);
  const auto deg = fit_cell_masses(flat, 2, 7);
  CHECK(deg.degenerate);
  CHECK(deg.q == doctest::Approx(0.25).epsilon(1e-14));

  CHECK_THROWS_AS(fit_cell_masses(flat, 2, 4), std::invalid_argument);  // 3 cells
}

TEST_CASE("a strip too narrow for the tail fit is refused") {
  // the measure itself needs the fit for its normalization, so the narrow
  // strip is rejected already at construction (fit range would be cells 2..3)
  const auto field = builtin_field("zero");
  CHECK_THROWS_AS(solve_strip(field, 16, 5), std::invalid_argument);
}

TEST_CASE("cell-mass CSV lists both sides per distance") {
  const auto field = builtin_field("zero");
  const auto measure = solve_strip(field, 16, 9);
  std::ostringstream os;
  write_cell_masses_csv(measure, os);
  const std::string text = os.str();
  CHECK(text.rfind("side,j,mass\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : text) lines += (ch == '\n');
  CHECK(lines == 1 + 2 * measure.mass_plus.size());
}

TEST_CASE("embedded-chain occupation reproduces the flat mass profile") {
  // paper_shear leaves the uniform measure invariant, so every tracked cell
  // should collect a comparable share of excursion occupation time.  The
  // return legs of the excursions are heavy-tailed (stable-1/2 hitting times),
  // so this is a coarse gate with a fixed seed: it catches side swaps and
  // indexing errors, not fine values.
  const auto field = builtin_field("paper_shear");
  const auto mc = strip_cell_occupation_mc(field, 3, 200, 0.01, 1);
  CHECK(mc.cycles == 200);
  double total = 0;
  for (const auto& e : mc.mass_plus) total += e.value;
  for (const auto& e : mc.mass_minus) total += e.value;
  CHECK(total > 0.0);
  for (std::size_t j = 0; j < mc.mass_plus.size(); ++j) {
    const double share_p = mc.mass_plus[j].value / total;
    const double share_m = mc.mass_minus[j].value / total;
    CHECK(share_p > 0.5 / 6.0);
    CHECK(share_p < 2.0 / 6.0);
    CHECK(share_m > 0.5 / 6.0);
    CHECK(share_m < 2.0 / 6.0);
    CHECK(mc.mass_plus[j].se > 0.0);
  }
  CHECK_THROWS_AS(strip_cell_occupation_mc(field, 2, 10, 0.01, 1), std::invalid_argument);
}

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ifhom/field.hpp"
#include "ifhom/torus_cell.hpp"

using namespace ifhom;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TEST_CASE("zero drift: uniform density, zero corrector, identity tensor") {
  const auto field = builtin_field("zero");
  const auto cell = solve_cell(field.tail_plus(), GridSpec::uniform(2, 32));
  CHECK((cell.mu.values.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(cell.mu.min_value > 0.0);
  for (int i = 0; i < 2; ++i) CHECK(cell.corrector.g[i].cwiseAbs().maxCoeff() < 1e-12);
  CHECK((cell.D - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(cell.centering.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("shear cell: uniform density and the analytic corrector") {
  const double c = 1.0;
  const auto field = builtin_field("torus_shear", {{"c", c}});
  const auto spec = GridSpec::uniform(2, 64);
  const auto cell = solve_cell(field.tail_plus(), spec);

  // divergence-free shear keeps the uniform density invariant
  CHECK((cell.mu.values.array() - 1.0).abs().maxCoeff() < 1e-10);

  // g2 solves (1/2) g2'' = -c sin(2 pi x1): g2 = c/(2 pi^2) sin(2 pi x1), g1 = 0
  const TorusGrid grid(spec);
  double worst = 0;
  for (std::int64_t idx = 0; idx < grid.size(); ++idx) {
    double x[2];
    grid.coords(idx, x);
    const double exact = c / (2.0 * std::numbers::pi * std::numbers::pi) *
                         std::sin(kTwoPi * x[0]);
    worst = std::max(worst, std::abs(cell.corrector.g[1][idx] - exact));
  }
  CHECK(worst < 1e-6);
  CHECK(cell.corrector.g[0].cwiseAbs().maxCoeff() < 1e-10);

  // Taylor dispersion: D22 = 1 + c^2/(2 pi^2), off-diagonals vanish
  const double d22 = 1.0 + c * c / (2.0 * std::numbers::pi * std::numbers::pi);
  CHECK(cell.D(1, 1) == doctest::Approx(d22).epsilon(1e-6));
  CHECK(std::abs(cell.D(0, 0) - 1.0) < 1e-10);
  CHECK(std::abs(cell.D(0, 1)) < 1e-10);
}

TEST_CASE("shear cell converges at fourth order") {
  const auto field = builtin_field("torus_shear", {{"c", 1.0}});
  const double exact = 1.0 + 1.0 / (2.0 * std::numbers::pi * std::numbers::pi);
  const double e32 =
      std::abs(solve_cell(field.tail_plus(), GridSpec::uniform(2, 32)).D(1, 1) - exact);
  const double e64 =
      std::abs(solve_cell(field.tail_plus(), GridSpec::uniform(2, 64)).D(1, 1) - exact);
  CHECK(e64 < e32 / 8.0);  // fourth-order stencils: expect ~1/16 per halving
}

TEST_CASE("gradient drift: Gibbs density and the two-integral diffusivity") {
  const double a = 0.5;
  const auto field = builtin_field("gradient1d", {{"a", a}});
  const auto spec = GridSpec::uniform(2, 64);
  const auto cell = solve_cell(field.tail_plus(), spec);

  // mu = e^{-2V}/Z with V = a cos(2 pi x1); normalize by periodic trapezoid sum
  const TorusGrid grid(spec);
  const int m = 1 << 12;
  double z = 0;
  for (int i = 0; i < m; ++i) z += std::exp(-2.0 * a * std::cos(kTwoPi * i / m));
  z /= m;
  double worst = 0;
  for (std::int64_t idx = 0; idx < grid.size(); ++idx) {
    double x[2];
    grid.coords(idx, x);
    const double exact = std::exp(-2.0 * a * std::cos(kTwoPi * x[0])) / z;
    worst = std::max(worst, std::abs(cell.mu.values[idx] - exact));
  }
  CHECK(worst < 5e-5);  // fourth-order discretization floor at res 64 is ~1.5e-5

  // D11 = (int e^{2V} int e^{-2V})^{-1}
  double zp = 0;
  for (int i = 0; i < m; ++i) zp += std::exp(2.0 * a * std::cos(kTwoPi * i / m));
  zp /= m;
  CHECK(cell.D(0, 0) == doctest::Approx(1.0 / (z * zp)).epsilon(1e-5));
  // the transverse direction is unaffected
  CHECK(cell.D(1, 1) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("cell solve invariants on an asymmetric tail") {
  const auto field = builtin_field(
      "two_sided", {{"a_plus", 0.4}, {"c_plus", 0.8}, {"a_minus", 0.1}, {"c_minus", 0.3}});
  const auto cell = solve_cell(field.tail_plus(), GridSpec::uniform(2, 48));
  const TorusGrid grid(GridSpec::uniform(2, 48));
  const double w = grid.node_weight();

  // density: normalized, positive, stationary
  CHECK(cell.mu.values.sum() * w == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cell.mu.min_value > 0.0);
  CHECK(cell.mu.residual_l2 <= kDensityResidualTol);

  // corrector: centered against mu
  for (int i = 0; i < 2; ++i) {
    const double center = (cell.corrector.g[i].array() * cell.mu.values.array()).sum() * w;
    CHECK(std::abs(center) < kCorrectorCenterTol);
  }

  // tensor: symmetric positive definite with unit-order diagonal
  CHECK(std::abs(cell.D(0, 1) - cell.D(1, 0)) < kTensorSymmetryTol);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cell.D);
  CHECK(eig.eigenvalues().minCoeff() > 1e-3);
  CHECK(cell.centering.cwiseAbs().maxCoeff() < kCenteringTol);
}

TEST_CASE("corrector solve refuses non-centered drifts") {
  // constant drift: mu is uniform, so int b dmu = 0.3 != 0 and no periodic
  // corrector exists
  const PeriodicDrift constant(2, [](const double*, double* b) {
    b[0] = 0.3;
    b[1] = 0.0;
  });
  const auto spec = GridSpec::uniform(2, 24);
  const auto mu = stationary_density(constant, spec);
  CHECK(centering_integral(constant, mu)[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK_THROWS_AS(solve_corrector(constant, mu), std::runtime_error);
}

TEST_CASE("grid spec validation") {
  CHECK_THROWS_AS(GridSpec::uniform(1, 32).validate(), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec::uniform(2, 3).validate(), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec::uniform(2, 32, 0).validate(true), std::invalid_argument);
  CHECK_NOTHROW(GridSpec::uniform(2, 32, 9).validate(true));
}

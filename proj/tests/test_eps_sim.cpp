#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ifhom/eps_sim.hpp"
#include "ifhom/field.hpp"
#include "ifhom/model.hpp"
#include "ifhom/stats.hpp"
#include "ifhom/torus_cell.hpp"
#include "ifhom/verify.hpp"

using namespace ifhom;

TEST_CASE("step-size rule and the unstable-dt guard") {
  CHECK(suggested_dt(0.1) == doctest::Approx(0.05 * 0.01).epsilon(1e-15));
  const auto field = builtin_field("zero");
  const double x0[2] = {0, 0};
  SimParams params;
  params.n = 4;
  params.dt = 0.3 * 0.01;  // above the 0.1 eps^2 refusal threshold
  CHECK_THROWS_AS(simulate_eps(field, 0.1, x0, params), std::invalid_argument);
  CHECK_THROWS_AS(simulate_eps(field, -1.0, x0, SimParams{}), std::invalid_argument);
}

TEST_CASE("ensembles are reproducible and thread-count independent") {
  const auto field = builtin_field("torus_shear");
  const double x0[2] = {0.1, 0.2};
  SimParams params;
  params.T = 0.25;
  params.n = 64;
  params.seed = 99;
  params.threads = 1;
  const auto a = simulate_eps(field, 0.2, x0, params);
  const auto b = simulate_eps(field, 0.2, x0, params);
  params.threads = 4;
  const auto c = simulate_eps(field, 0.2, x0, params);
  CHECK(a.states == b.states);
  CHECK(a.states == c.states);  // per-path streams: layout independent of threads
  params.seed = 100;
  params.threads = 1;
  const auto d = simulate_eps(field, 0.2, x0, params);
  CHECK(a.states != d.states);
  CHECK(a.stored >= 2);
  CHECK(a.times.front() == 0.0);
  CHECK(a.times.back() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("zero drift reduces to standard Brownian motion") {
  const auto field = builtin_field("zero");
  const double x0[2] = {0, 0};
  SimParams params;
  params.T = 1.0;
  params.n = 20000;
  params.seed = 3;
  params.threads = 1;
  const auto ens = simulate_eps(field, 0.3, x0, params);
  for (int a = 0; a < 2; ++a) {
    std::vector<double> xs(ens.n);
    for (std::uint64_t i = 0; i < ens.n; ++i) xs[i] = ens.state(i, ens.stored - 1)[a];
    const auto m = mean_estimate(xs);
    CHECK(std::abs(m.value) < 4.0 * m.se);
    double var = 0;
    for (double x : xs) var += (x - m.value) * (x - m.value);
    var /= (ens.n - 1);
    CHECK(var == doctest::Approx(1.0).epsilon(4.0 * std::sqrt(2.0 / ens.n)));
  }
}

TEST_CASE("compensated paths: zero corrector is a no-op, bounded otherwise") {
  const auto zero = builtin_field("zero");
  const auto spec = GridSpec::uniform(2, 16, 9);
  const auto zc = solve_cell(zero.tail_plus(), spec);
  const auto zcomp =
      build_compensator(zc.corrector, zc.corrector, spec, zero.eta(), BlendProfile::smoothstep5);
  const double x0[2] = {0.05, 0.4};
  SimParams params;
  params.T = 0.25;
  params.n = 32;
  params.seed = 12;
  params.threads = 1;
  const auto base = simulate_eps(zero, 0.2, x0, params);
  const auto same = corrected_paths(base, zcomp);
  CHECK(base.states == same.states);

  // torus_shear has corrector amplitude c/(2 pi^2); the correction obeys
  // |Y - X| <= eps * sup|g| at every stored state
  const auto shear = builtin_field("torus_shear");
  const auto sc = solve_cell(shear.tail_plus(), GridSpec::uniform(2, 32));
  const auto comp = build_compensator(sc.corrector, sc.corrector, GridSpec::uniform(2, 32, 9),
                                      shear.eta(), BlendProfile::smoothstep5);
  double sup_g = 0;
  for (const auto& gi : comp.g) sup_g = std::max(sup_g, gi.cwiseAbs().maxCoeff());
  const double eps = 0.2;
  const auto raw = simulate_eps(shear, eps, x0, params);
  const auto fixed = corrected_paths(raw, comp);
  double worst = 0;
  for (std::uint64_t i = 0; i < raw.n; ++i)
    for (std::int64_t k = 0; k < raw.stored; ++k)
      for (int a = 0; a < 2; ++a)
        worst = std::max(worst,
                         std::abs(fixed.state(i, k)[a] - raw.state(i, k)[a]));
  CHECK(worst <= eps * sup_g * (1.0 + 1e-9));
  CHECK(worst > 0.0);
}

TEST_CASE("exit sides of a driftless slab are symmetric") {
  const auto field = builtin_field("zero");
  const double x0[2] = {0, 0};
  ExitParams params;
  params.delta = 0.4;
  params.n = 4000;
  params.seed = 21;
  params.threads = 1;
  const auto est = exit_side_probability(field, 0.02, x0, params);
  CHECK(est.p_plus.value + est.p_minus.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(est.p_plus.value - 0.5) < 3.5 * est.p_plus.se);
  CHECK(est.cap_fraction < 0.01);
  CHECK_FALSE(est.warning);
  // the slab must dominate the microscale
  ExitParams bad = params;
  bad.delta = 0.1;
  CHECK_THROWS_AS(exit_side_probability(field, 0.02, x0, bad), std::invalid_argument);
}

TEST_CASE("increment moments of the driftless exit are Brownian") {
  const auto field = builtin_field("zero");
  const double x0[2] = {0, 0};
  ExitParams params;
  params.delta = 0.4;
  params.n = 3000;
  params.seed = 8;
  params.threads = 1;
  const auto mom = interface_increment_moments(field, 0.04, x0, params);
  REQUIRE(mom.first.size() == 1);
  // E[delta X2] / delta = alpha_2 = 0 and E[(delta X)^2] / delta^2 = E[tau]/delta^2 = 1
  CHECK(std::abs(mom.first[0].value) < 3.5 * mom.first[0].se);
  CHECK(std::abs(mom.second.value - 1.0) < 4.0 * mom.second.se);
}

TEST_CASE("discounted slab occupation matches the 1D resolvent") {
  const auto field = builtin_field("zero");
  const double x0[2] = {0, 0};
  const auto est = discounted_occupation(field, 0.2, 0.5, 1.0, x0, 2500, 5, 0, 1);
  const double oracle = resolvent_occupation_oracle(0.5, 1.0, 0.0);
  CHECK(std::abs(est.value - oracle) < 3.5 * est.se);
  CHECK_THROWS_AS(discounted_occupation(field, 0.2, -0.1, 1.0, x0, 10, 1),
                  std::invalid_argument);
}

TEST_CASE("three-dimensional simulation round trip") {
  const auto field = builtin_field("two_sided", {{"dim", 3}});
  const double x0[3] = {0, 0.5, 0.5};
  SimParams params;
  params.T = 0.1;
  params.n = 16;
  params.seed = 4;
  params.threads = 1;
  const auto ens = simulate_eps(field, 0.25, x0, params);
  CHECK(ens.dim == 3);
  CHECK(ens.n == 16);
  for (std::uint64_t i = 0; i < ens.n; ++i)
    for (std::int64_t k = 0; k < ens.stored; ++k)
      for (int a = 0; a < 3; ++a) CHECK(std::isfinite(ens.state(i, k)[a]));
}

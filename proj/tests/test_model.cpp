#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "ifhom/field.hpp"
#include "ifhom/model.hpp"

using namespace ifhom;

namespace {

EffectiveModel asymmetric_model(double alpha2 = 0.3) {
  Eigen::MatrixXd Dp = Eigen::MatrixXd::Identity(2, 2);
  Dp(0, 0) = 2.0;
  const Eigen::MatrixXd Dm = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd alpha(1);
  alpha[0] = alpha2;
  return assemble_model(Dp, Dm, 0.5, 0.5, alpha);
}

}  // namespace

TEST_CASE("transmissivity weights tail masses by longitudinal diffusivity") {
  const auto [pp, pm] = transmissivity(0.5, 0.5, 2.0, 1.0);
  CHECK(pp == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(pp + pm == 1.0);
  const auto [sp, sm] = transmissivity(0.5, 0.5, 1.0, 1.0);
  CHECK(sp == 0.5);
  // heavier tail mass wins when diffusivities match
  const auto [wp, wm] = transmissivity(0.75, 0.25, 1.0, 1.0);
  CHECK(wp == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("assemble_model: factors, skew, local-time vector") {
  const auto m = asymmetric_model(0.3);
  CHECK(m.p_plus == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK((m.M_plus * m.M_plus.transpose() - m.D_plus).cwiseAbs().maxCoeff() <
        kFactorResidualTol);
  CHECK((m.M_minus * m.M_minus.transpose() - m.D_minus).cwiseAbs().maxCoeff() <
        kFactorResidualTol);
  // first row of the factor is (sqrt(D11), 0): the normal coordinate is driven
  // by a single Brownian component
  CHECK(m.M_plus(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(m.M_plus(0, 1) == 0.0);
  // skew = p+ sqrt(D-_11) / (p- sqrt(D+_11) + p+ sqrt(D-_11)) = 2/(2+sqrt(2))
  CHECK(m.skew == doctest::Approx(2.0 / (2.0 + std::sqrt(2.0))).epsilon(1e-14));
  CHECK(asymptotic_side_probability(m) == m.skew);
  CHECK(m.K[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(m.K[1] == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("glued test function satisfies its gluing identity exactly") {
  const auto m = asymmetric_model(0.3);
  Eigen::VectorXd c(2);
  c << 0.0, 0.4;
  const auto f = make_glued_function(m, 1.0, c, 0.5);
  CHECK(f.a_minus == 1.0);
  const double resid =
      gluing_residual(m, f.a_plus, f.a_minus, f.c.tail(1));
  CHECK(std::abs(resid) < 1e-14);
  // continuity across the interface
  const double xp[2] = {1e-12, 0.7};
  const double xm[2] = {-1e-12, 0.7};
  CHECK(std::abs(f.eval(xp, 2) - f.eval(xm, 2)) < 1e-10);
}

TEST_CASE("glued-function generator matches a finite-difference Hessian") {
  const auto m = asymmetric_model(0.3);
  Eigen::VectorXd c(2);
  c << 0.0, 0.4;
  const auto f = make_glued_function(m, 1.0, c, 0.5);
  const double h = 1e-4;
  for (double x1 : {0.8, -0.6}) {
    const double x[2] = {x1, 0.3};
    double hess[2][2];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double xpp[2] = {x[0], x[1]}, xpm[2] = {x[0], x[1]};
        double xmp[2] = {x[0], x[1]}, xmm[2] = {x[0], x[1]};
        xpp[i] += h; xpp[j] += h;
        xpm[i] += h; xpm[j] -= h;
        xmp[i] -= h; xmp[j] += h;
        xmm[i] -= h; xmm[j] -= h;
        hess[i][j] =
            (f.eval(xpp, 2) - f.eval(xpm, 2) - f.eval(xmp, 2) + f.eval(xmm, 2)) /
            (4.0 * h * h);
      }
    const auto& D = (x1 > 0) ? m.D_plus : m.D_minus;
    double expected = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) expected += 0.5 * D(i, j) * hess[i][j];
    CHECK(f.generator(x, 2, m) == doctest::Approx(expected).epsilon(1e-5));
  }
}

TEST_CASE("model perturbations modify exactly the advertised parameters") {
  const auto m = asymmetric_model(0.3);
  const auto same = perturb_model(m, ModelPerturbation::none);
  CHECK((same.alpha - m.alpha).cwiseAbs().maxCoeff() == 0.0);
  CHECK(same.p_plus == m.p_plus);

  const auto doubled = perturb_model(m, ModelPerturbation::alpha_doubled);
  CHECK(doubled.alpha[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(doubled.K[1] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(doubled.K[0] == m.K[0]);
  CHECK(doubled.p_plus == m.p_plus);

  const auto swapped = perturb_model(m, ModelPerturbation::swapped_p);
  CHECK(swapped.p_plus == m.p_minus);
  CHECK(swapped.K[0] == doctest::Approx(-m.K[0]).epsilon(1e-15));
  CHECK((swapped.alpha - m.alpha).cwiseAbs().maxCoeff() == 0.0);
  // the skew parameter follows the swapped transmissivities
  const double skew = swapped.p_plus * std::sqrt(m.D_minus(0, 0)) /
                      (swapped.p_minus * std::sqrt(m.D_plus(0, 0)) +
                       swapped.p_plus * std::sqrt(m.D_minus(0, 0)));
  CHECK(swapped.skew == doctest::Approx(skew).epsilon(1e-15));
}

TEST_CASE("blend profile parsing") {
  CHECK(parse_blend("smoothstep5") == BlendProfile::smoothstep5);
  CHECK(parse_blend("cosine") == BlendProfile::cosine);
  CHECK_THROWS_AS(parse_blend("linear"), std::invalid_argument);
  CHECK(blend_name(BlendProfile::cosine) == std::string("cosine"));
}

TEST_CASE("transverse bump drift: the classical interface drift value") {
  // For the bump shear of unit amplitude the deterministic pipeline must give
  // p = 1/2 on both sides and alpha_2 = int_{-1}^{1} e^{1 - 1/(1-t^2)} dt,
  // computed once with 30-digit quadrature.
  const auto field = builtin_field("paper_shear");
  const auto build =
      build_model(field, GridSpec::uniform(2, 48, 9), BlendProfile::smoothstep5, "paper_shear");
  const auto& m = build.model;
  CHECK(m.p_plus == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(m.p_plus + m.p_minus == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.alpha[0] == doctest::Approx(1.20690032243787618).epsilon(1e-7));
  CHECK(m.K[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(m.K[1] == m.alpha[0]);
  CHECK((m.D_plus - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
  // corrected drift is supported inside the widened interface region
  CHECK(build.btilde.max_outside <= kSupportTol);
  CHECK(build.compensator.saturation < field.eta() + 1.0);
  CHECK(std::abs(build.alpha1_diagnostic) < 1e-8);
}

TEST_CASE("interface drift vector is independent of the blend profile") {
  const auto field = builtin_field("two_sided");
  const auto spec = GridSpec::uniform(2, 32, 9);
  const auto a = build_model(field, spec, BlendProfile::smoothstep5, "two_sided");
  const auto b = build_model(field, spec, BlendProfile::cosine, "two_sided");
  CHECK((a.model.alpha - b.model.alpha).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(a.model.p_plus == doctest::Approx(b.model.p_plus).epsilon(1e-12));
  // the compensators themselves do differ; only the model may not
  double comp_gap = 0;
  for (int i = 0; i < 2; ++i)
    comp_gap = std::max(comp_gap, (a.compensator.g[i] - b.compensator.g[i])
                                      .cwiseAbs()
                                      .maxCoeff());
  CHECK(comp_gap > 1e-6);
}

TEST_CASE("model JSON embeds the headline parameters") {
  const auto field = builtin_field("zero");
  const auto build =
      build_model(field, GridSpec::uniform(2, 16, 9), BlendProfile::smoothstep5, "zero");
  const std::string doc = render_model_json(build);
  CHECK(doc.find("\"p_plus\"") != std::string::npos);
  CHECK(doc.find("\"D_plus\"") != std::string::npos);
  CHECK(doc.find("\"alpha\"") != std::string::npos);
  CHECK(doc.find("zero") != std::string::npos);
}

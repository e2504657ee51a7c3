#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ifhom/config.hpp"
#include "ifhom/verify.hpp"

using namespace ifhom;

TEST_CASE("config dumps round-trip losslessly") {
  RunConfig cfg;
  cfg.field.builtin = "two_sided";
  cfg.field.params = {{"a_plus", 1.0 / 3.0}, {"c_minus", 0.2}};
  cfg.grid_resolution = 48;
  cfg.strip_halfwidth = 11;
  cfg.sim_T = 2.0;
  cfg.sim_dt = 2.5e-4;
  cfg.sim_n = 4321;
  cfg.eps_list = {0.2, 0.1, 0.037};
  cfg.delta = 0.55;
  cfg.lambda = 0.7;
  cfg.backend = "euler_mollified";
  cfg.blend = "cosine";
  cfg.seed = 99;
  cfg.threads = 3;
  cfg.out_dir = "out/run1";

  const std::string text = dump_config(cfg);
  const RunConfig back = parse_config(text);
  CHECK(back.field.builtin == cfg.field.builtin);
  CHECK(back.field.params == cfg.field.params);
  CHECK(back.grid_resolution == cfg.grid_resolution);
  CHECK(back.strip_halfwidth == cfg.strip_halfwidth);
  CHECK(back.sim_T == cfg.sim_T);
  CHECK(back.sim_dt == cfg.sim_dt);
  CHECK(back.sim_n == cfg.sim_n);
  CHECK(back.eps_list == cfg.eps_list);
  CHECK(back.delta == cfg.delta);
  CHECK(back.lambda == cfg.lambda);
  CHECK(back.backend == cfg.backend);
  CHECK(back.blend == cfg.blend);
  CHECK(back.seed == cfg.seed);
  CHECK(back.threads == cfg.threads);
  CHECK(back.out_dir == cfg.out_dir);
  CHECK(dump_config(back) == text);

  CHECK(config_hash(back) == config_hash(cfg));
  RunConfig other = cfg;
  other.seed = 100;
  CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("config parser rejects malformed input") {
  CHECK_THROWS_AS(parse_config("grid.reso = 32\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("grid.resolution\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("grid.resolution = \n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("grid.resolution = 32x\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("sim.eps = 0.1,,0.05\n"), std::invalid_argument);
  CHECK_THROWS_AS(
      parse_config("field.builtin = zero\nfield.expr.core.b1 = 0\n"),
      std::invalid_argument);
  // comments and blank lines are fine
  const RunConfig cfg = parse_config("# header\n\ngrid.resolution = 96  # inline\n");
  CHECK(cfg.grid_resolution == 96);
}

TEST_CASE("expression fields compile into a working drift") {
  const RunConfig cfg = parse_config(
      "field.dim = 2\n"
      "field.eta = 1.0\n"
      "field.expr.core.b2 = sin(2*pi*x1)\n");
  CHECK(cfg.field.builtin.empty());
  const InterfaceDrift field = make_field(cfg.field);
  CHECK(field.dim() == 2);
  CHECK(field.eta() == 1.0);
  double x[2] = {0.25, 0.6}, b[2];
  field.eval(x, b);
  CHECK(b[0] == 0.0);
  CHECK(b[1] == doctest::Approx(std::sin(0.5 * std::numbers::pi)).epsilon(1e-12));
  double far[2] = {3.0, 0.6};
  field.eval(far, b);  // expression tails default to zero drift
  CHECK(b[1] == 0.0);

  CHECK_THROWS_AS(make_field(parse_config("field.expr.core.b3 = 1\nfield.dim = 2\n").field),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_field(parse_config("field.expr.side.b1 = 1\n").field),
                  std::invalid_argument);
}

TEST_CASE("grid spec follows the config, with an automatic strip width") {
  RunConfig cfg;
  cfg.grid_resolution = 40;
  const InterfaceDrift field = builtin_field("zero", {});
  GridSpec spec = make_grid(cfg, field);
  CHECK(spec.dim == 2);
  CHECK(spec.resolution[0] == 40);
  CHECK(spec.strip_halfwidth == 9);  // ceil(eta) + 8
  cfg.strip_halfwidth = 12;
  spec = make_grid(cfg, field);
  CHECK(spec.strip_halfwidth == 12);
}

TEST_CASE("discounted-occupation oracle matches the closed form") {
  // lambda u - u''/2 = 1_(-delta,delta):  u = (1 - e^{-g d} cosh(g x))/lambda
  // inside, sinh(g d) e^{-g |x|}/lambda outside, with g = sqrt(2 lambda).
  const double delta = 0.4, lambda = 1.0;
  const double g = std::sqrt(2.0 * lambda);
  auto closed = [&](double x) {
    return std::abs(x) <= delta
               ? (1.0 - std::exp(-g * delta) * std::cosh(g * x)) / lambda
               : std::sinh(g * delta) * std::exp(-g * std::abs(x)) / lambda;
  };
  for (double x : {0.0, 0.15, -0.25, 0.4, -0.4, 1.0, -1.7, 2.5}) {
    INFO("x = ", x);
    CHECK(std::abs(resolvent_occupation_oracle(delta, lambda, x) - closed(x)) < 1e-6);
  }
  // second parameter set, different scale
  const double d2 = 0.9, l2 = 2.5, g2 = std::sqrt(2.0 * l2);
  const double u0 = (1.0 - std::exp(-g2 * d2)) / l2;
  CHECK(std::abs(resolvent_occupation_oracle(d2, l2, 0.0) - u0) < 1e-6);
  CHECK_THROWS_AS(resolvent_occupation_oracle(0.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("report verdicts aggregate across rows and merges") {
  ComparisonReport rep;
  CHECK(rep.verdict);
  CheckRow good;
  good.name = "a";
  good.pass = true;
  rep.add(good);
  CHECK(rep.verdict);
  ComparisonReport section;
  CheckRow bad;
  bad.name = "b";
  bad.pass = false;
  bad.params = "eps=0.1, n=10";  // comma forces CSV quoting below
  section.add(bad);
  CHECK_FALSE(section.verdict);
  rep.merge(section);
  CHECK_FALSE(rep.verdict);
  CHECK(rep.rows.size() == 2);

  const auto doc = nlohmann::json::parse(render_report_json(rep, "demo", 0xabcdef));
  CHECK(doc["title"] == "demo");
  CHECK(doc["verdict"] == "fail");
  CHECK(doc["config_hash"] == "0000000000abcdef");
  CHECK(doc["checks"].size() == 2);
  CHECK(doc["checks"][1]["name"] == "b");
  CHECK(doc["checks"][1]["pass"] == false);

  std::ostringstream csv;
  write_checks_csv(rep, csv);
  const std::string s = csv.str();
  CHECK(s.rfind("name,predicted,estimated,se,tolerance,pass,params,seed\n", 0) == 0);
  CHECK(s.find("\"eps=0.1, n=10\"") != std::string::npos);
}

TEST_CASE("deterministic pipeline sections and the negative control") {
  PipelineParams params;
  params.n_marginal = 2000;
  params.run_marginals = false;
  params.run_transmissivity = false;
  params.run_occupation = false;
  params.seed = 3;

  const InterfaceDrift zero = builtin_field("zero", {});
  GridSpec spec = GridSpec::uniform(2, 32);
  spec.strip_halfwidth = 9;
  const PipelineResult res = full_pipeline(zero, spec, params);
  CHECK(res.report.verdict);
  CHECK(res.elapsed_seconds > 0);
  bool saw_martingale = false;
  for (const auto& row : res.report.rows) {
    INFO(row.name, ": est=", row.estimated, " rule=", row.tolerance);
    CHECK(row.pass);
    saw_martingale = saw_martingale || row.name == "limit_martingale[f]";
  }
  CHECK(saw_martingale);
  CHECK((res.checked.alpha - res.build.model.alpha).cwiseAbs().maxCoeff() == 0.0);

  // the control perturbs only the checked model, never the build artifacts
  params.control = NegativeControl::alpha2x;
  const InterfaceDrift shear = builtin_field("paper_shear", {});
  const PipelineResult ctl = full_pipeline(shear, spec, params);
  CHECK(ctl.checked.alpha[0] == doctest::Approx(2.0 * ctl.build.model.alpha[0]).epsilon(1e-15));
  CHECK(ctl.build.model.alpha[0] > 1.0);  // paper_shear carries a real drift vector

  // stage failures carry the offending stage's name
  GridSpec thin = spec;
  thin.strip_halfwidth = 5;
  try {
    full_pipeline(zero, thin, params);
    FAIL("expected the model stage to reject a 5-cell strip");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).rfind("[stage model]", 0) == 0);
  }
}

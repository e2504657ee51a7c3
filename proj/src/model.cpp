#include "ifhom/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "ifhom/operator.hpp"
#include "ifhom/stats.hpp"

namespace ifhom {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_positive(double v, const char* what) {
  if (!(v > 0)) throw std::invalid_argument(std::string(what) + " must be positive");
}

std::vector<std::vector<double>> matrix_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows[static_cast<std::size_t>(i)].assign(m.row(i).begin(), m.row(i).end());
  }
  return rows;
}

}  // namespace

const char* blend_name(BlendProfile blend) {
  return blend == BlendProfile::smoothstep5 ? "smoothstep5" : "cosine";
}

BlendProfile parse_blend(const std::string& name) {
  if (name == "smoothstep5") return BlendProfile::smoothstep5;
  if (name == "cosine") return BlendProfile::cosine;
  throw std::invalid_argument("unknown blend profile '" + name +
                              "' (expected smoothstep5 or cosine)");
}

double Compensator::chi(double x1) const {
  if (x1 <= -saturation) return 0.0;
  if (x1 >= saturation) return 1.0;
  const double t = (x1 + saturation) / (2.0 * saturation);
  if (blend == BlendProfile::smoothstep5) return smoothstep5(t);
  return 0.5 * (1.0 - std::cos(kPi * t));
}

double Compensator::at(const StripGrid& grid, int i, int plane_ext, std::int64_t t) const {
  const std::int64_t row = (static_cast<std::int64_t>(plane_ext) + halo) * grid.transverse_size() + t;
  return g[static_cast<std::size_t>(i)][row];
}

Compensator build_compensator(const Corrector& g_plus, const Corrector& g_minus,
                              const GridSpec& spec, double eta, BlendProfile blend) {
  spec.validate(true);
  if (!(eta > 0)) throw std::invalid_argument("eta must be positive");
  for (const Corrector* c : {&g_plus, &g_minus}) {
    if (c->spec.dim != spec.dim) throw std::invalid_argument("corrector dimension mismatch");
    for (int a = 0; a < spec.dim; ++a) {
      if (c->spec.resolution[a] != spec.resolution[a])
        throw std::invalid_argument("corrector resolution mismatch");
    }
  }

  Compensator comp;
  comp.spec = spec;
  comp.eta = eta;
  comp.halo = kStencilRadius;
  comp.blend = blend;
  const double h0 = 1.0 / spec.resolution[0];
  const double margin = std::max(0.125, 3.0 * h0);
  comp.saturation = eta + 1.0 - margin;
  if (!(comp.saturation > 0)) {
    throw std::invalid_argument("grid too coarse to fit the compensator blend");
  }

  StripGrid grid(spec, comp.halo);
  TorusGrid torus(spec);
  const int d = spec.dim;
  const std::int64_t nt = grid.transverse_size();
  const int planes_ext = grid.planes() + 2 * comp.halo;
  comp.g.assign(static_cast<std::size_t>(d),
                Eigen::VectorXd(static_cast<std::int64_t>(planes_ext) * nt));
  for (int pe = 0; pe < planes_ext; ++pe) {
    const int plane = pe - comp.halo;
    const double x1 = grid.x1(plane);
    const double chi_v = comp.chi(x1);
    for (std::int64_t t = 0; t < nt; ++t) {
      const std::int64_t tor = grid.torus_index(torus, plane, t);
      const std::int64_t row = static_cast<std::int64_t>(pe) * nt + t;
      for (int i = 0; i < d; ++i) {
        comp.g[static_cast<std::size_t>(i)][row] =
            chi_v * g_plus.g[static_cast<std::size_t>(i)][tor] +
            (1.0 - chi_v) * g_minus.g[static_cast<std::size_t>(i)][tor];
      }
    }
  }

  // smoothness diagnostic: largest second difference quotient along x1
  double max_dd = 0;
  const double inv_h2 = 1.0 / (h0 * h0);
  for (int i = 0; i < d; ++i) {
    const Eigen::VectorXd& gi = comp.g[static_cast<std::size_t>(i)];
    for (int pe = 1; pe + 1 < planes_ext; ++pe) {
      for (std::int64_t t = 0; t < nt; ++t) {
        const double dd = gi[(pe + 1) * nt + t] - 2.0 * gi[pe * nt + t] + gi[(pe - 1) * nt + t];
        max_dd = std::max(max_dd, std::abs(dd) * inv_h2);
      }
    }
  }
  comp.max_second_difference = max_dd;
  comp.tail_plus = g_plus.g;
  comp.tail_minus = g_minus.g;
  return comp;
}

CorrectedDrift corrected_drift(const InterfaceDrift& field, const Compensator& comp) {
  const GridSpec& spec = comp.spec;
  const int halo = 2 * kStencilRadius;
  StripGrid grid(spec, halo);
  DriftTable table = sample_on_grid(field, spec, halo);
  StripOperator op(grid, table);

  CorrectedDrift out;
  out.spec = spec;
  out.eta_tilde = comp.eta + 1.0;
  const int d = spec.dim;
  out.values.resize(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd lg = op.apply_generator(
        [&](int plane_ext, std::int64_t t) { return comp.at(grid, i, plane_ext, t); });
    for (int p = 0; p < grid.planes(); ++p) {
      for (std::int64_t t = 0; t < grid.transverse_size(); ++t) {
        lg[grid.index(p, t)] += table.at(grid, p, t)[i];
      }
    }
    out.values[static_cast<std::size_t>(i)] = std::move(lg);
  }

  double worst = 0;
  double worst_x1 = 0;
  for (int p = 0; p < grid.planes(); ++p) {
    const double x1 = grid.x1(p);
    if (std::abs(x1) < out.eta_tilde - 1e-12) continue;
    for (std::int64_t t = 0; t < grid.transverse_size(); ++t) {
      for (int i = 0; i < d; ++i) {
        const double v = std::abs(out.values[static_cast<std::size_t>(i)][grid.index(p, t)]);
        if (v > worst) {
          worst = v;
          worst_x1 = x1;
        }
      }
    }
  }
  out.max_outside = worst;
  if (worst > kSupportTol) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "corrected drift reaches %.3e at x1 = %.4f outside its support; "
                  "refine the grid", worst, worst_x1);
    throw std::runtime_error(buf);
  }
  return out;
}

std::pair<double, double> transmissivity(double q_plus, double q_minus, double d11_plus,
                                         double d11_minus) {
  require_positive(q_plus, "q_plus");
  require_positive(q_minus, "q_minus");
  require_positive(d11_plus, "D+_11");
  require_positive(d11_minus, "D-_11");
  const double p_plus = q_plus * d11_plus / (q_plus * d11_plus + q_minus * d11_minus);
  return {p_plus, 1.0 - p_plus};
}

InterfaceDriftVector interface_drift_vector(const CorrectedDrift& bt, const StripMeasure& mu,
                                            double p_plus, double p_minus, double d11_plus,
                                            double d11_minus) {
  require_positive(d11_plus, "D+_11");
  require_positive(d11_minus, "D-_11");
  if (bt.spec.dim != mu.spec.dim || bt.spec.strip_halfwidth != mu.spec.strip_halfwidth)
    throw std::invalid_argument("corrected drift and measure grids do not match");
  if (mu.spec.strip_halfwidth < bt.eta_tilde + 1 - 1e-12)
    throw std::invalid_argument("corrected-drift support touches the strip boundary");

  StripGrid grid(bt.spec, 0);
  const double w = grid.node_weight();
  const double pref = 2.0 * (p_plus / d11_plus + p_minus / d11_minus);
  const int d = bt.spec.dim;
  InterfaceDriftVector out;
  out.alpha = Eigen::VectorXd::Zero(d - 1);
  for (int i = 0; i < d; ++i) {
    CompensatedSum acc;
    const Eigen::VectorXd& bi = bt.values[static_cast<std::size_t>(i)];
    for (std::int64_t k = 0; k < grid.size(); ++k) acc.add(bi[k] * mu.values[k] * w);
    const double val = pref * acc.total();
    if (i == 0)
      out.diagnostic_x1 = val;
    else
      out.alpha[i - 1] = val;
  }
  return out;
}

EffectiveModel assemble_model(const Eigen::MatrixXd& D_plus, const Eigen::MatrixXd& D_minus,
                              double q_plus, double q_minus, const Eigen::VectorXd& alpha) {
  const int d = static_cast<int>(D_plus.rows());
  if (D_plus.cols() != d || D_minus.rows() != d || D_minus.cols() != d)
    throw std::invalid_argument("diffusion tensors must be square and of equal size");
  if (alpha.size() != d - 1)
    throw std::invalid_argument("alpha must have one entry per transverse direction");
  require_positive(q_plus, "q_plus");
  require_positive(q_minus, "q_minus");

  EffectiveModel m;
  m.dim = d;
  m.D_plus = D_plus;
  m.D_minus = D_minus;
  m.q_plus = q_plus;
  m.q_minus = q_minus;
  m.alpha = alpha;

  auto factor = [&](const Eigen::MatrixXd& D, const char* side) {
    if ((D - D.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument(std::string("D") + side + " is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(D);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument(std::string("D") + side + " is not positive definite");
    Eigen::MatrixXd M = llt.matrixL();
    if (std::abs(M(0, 0) - std::sqrt(D(0, 0))) > kFactorResidualTol)
      throw std::runtime_error("noise factor first entry inconsistent with D11");
    if ((M * M.transpose() - D).cwiseAbs().maxCoeff() > kFactorResidualTol)
      throw std::runtime_error("noise factorization residual above tolerance");
    return M;
  };
  m.M_plus = factor(D_plus, "+");
  m.M_minus = factor(D_minus, "-");

  std::tie(m.p_plus, m.p_minus) = transmissivity(q_plus, q_minus, D_plus(0, 0), D_minus(0, 0));
  m.skew = m.p_plus * std::sqrt(m.D_minus(0, 0)) /
           (m.p_minus * std::sqrt(m.D_plus(0, 0)) + m.p_plus * std::sqrt(m.D_minus(0, 0)));
  m.K = Eigen::VectorXd(d);
  m.K[0] = m.p_plus - m.p_minus;
  for (int j = 1; j < d; ++j) m.K[j] = alpha[j - 1];
  return m;
}

double asymptotic_side_probability(const EffectiveModel& model) {
  return model.p_plus * std::sqrt(model.D_minus(0, 0)) /
         (model.p_minus * std::sqrt(model.D_plus(0, 0)) +
          model.p_plus * std::sqrt(model.D_minus(0, 0)));
}

double gluing_residual(const EffectiveModel& model, double d1_plus, double d1_minus,
                       const Eigen::VectorXd& transverse_grad) {
  if (transverse_grad.size() != model.dim - 1)
    throw std::invalid_argument("transverse gradient must have dim-1 entries");
  return model.p_plus * d1_plus - model.p_minus * d1_minus +
         model.alpha.dot(transverse_grad);
}

double GluedTestFunction::eval(const double* x, int dim) const {
  const double x1 = x[0];
  double v = x1 >= 0 ? a_plus * (1.0 - std::exp(-x1)) : a_minus * (std::exp(x1) - 1.0);
  for (int j = 1; j < dim; ++j) v += c[j] * x[j];
  v += curvature * (1.0 - std::exp(-x1 * x1));
  return v;
}

double GluedTestFunction::generator(const double* x, int dim, const EffectiveModel& model) const {
  (void)dim;
  const double x1 = x[0];
  const double gauss = curvature * (2.0 - 4.0 * x1 * x1) * std::exp(-x1 * x1);
  const double fpp_plus = -a_plus * std::exp(-x1) + gauss;
  const double fpp_minus = a_minus * std::exp(x1) + gauss;
  if (x1 > 0) return 0.5 * model.D_plus(0, 0) * fpp_plus;
  if (x1 < 0) return 0.5 * model.D_minus(0, 0) * fpp_minus;
  return 0.25 * (model.D_plus(0, 0) * fpp_plus + model.D_minus(0, 0) * fpp_minus);
}

GluedTestFunction make_glued_function(const EffectiveModel& model, double a_minus,
                                      const Eigen::VectorXd& c, double curvature) {
  if (c.size() != model.dim)
    throw std::invalid_argument("transverse coefficient vector must have dim entries");
  GluedTestFunction f;
  f.c = c;
  f.c[0] = 0;
  f.a_minus = a_minus;
  f.curvature = curvature;
  double cross = 0;
  for (int j = 1; j < model.dim; ++j) cross += model.alpha[j - 1] * f.c[j];
  f.a_plus = (model.p_minus * a_minus - cross) / model.p_plus;
  return f;
}

const char* perturbation_name(ModelPerturbation kind) {
  switch (kind) {
    case ModelPerturbation::alpha_doubled: return "alpha_doubled";
    case ModelPerturbation::swapped_p: return "swapped_p";
    default: return "none";
  }
}

EffectiveModel perturb_model(const EffectiveModel& model, ModelPerturbation kind) {
  EffectiveModel m = model;
  switch (kind) {
    case ModelPerturbation::none:
      break;
    case ModelPerturbation::alpha_doubled:
      m.alpha *= 2.0;
      for (int j = 1; j < m.dim; ++j) m.K[j] = m.alpha[j - 1];
      break;
    case ModelPerturbation::swapped_p:
      std::swap(m.p_plus, m.p_minus);
      std::swap(m.q_plus, m.q_minus);
      m.K[0] = m.p_plus - m.p_minus;
      m.skew = m.p_plus * std::sqrt(m.D_minus(0, 0)) /
               (m.p_minus * std::sqrt(m.D_plus(0, 0)) +
                m.p_plus * std::sqrt(m.D_minus(0, 0)));
      break;
  }
  return m;
}

ModelBuild build_model(const InterfaceDrift& field, const GridSpec& spec, BlendProfile blend,
                       const std::string& field_name) {
  spec.validate(true);
  ModelBuild out;
  out.field_name = field_name;
  out.cell_plus = solve_cell(field.tail_plus(), spec);
  out.cell_minus = solve_cell(field.tail_minus(), spec);
  out.measure = strip_invariant_measure(field, spec, out.cell_plus.mu, out.cell_minus.mu);
  out.fit = limit_masses(out.measure);
  out.compensator = build_compensator(out.cell_plus.corrector, out.cell_minus.corrector, spec,
                                      field.eta(), blend);
  out.btilde = corrected_drift(field, out.compensator);

  const double d11p = out.cell_plus.D(0, 0), d11m = out.cell_minus.D(0, 0);
  const auto [p_plus, p_minus] = transmissivity(out.fit.q_plus, out.fit.q_minus, d11p, d11m);
  InterfaceDriftVector idv =
      interface_drift_vector(out.btilde, out.measure, p_plus, p_minus, d11p, d11m);
  out.alpha1_diagnostic = idv.diagnostic_x1;
  out.model = assemble_model(out.cell_plus.D, out.cell_minus.D, out.fit.q_plus,
                             out.fit.q_minus, idv.alpha);
  return out;
}

std::string render_model_json(const ModelBuild& build) {
  const EffectiveModel& m = build.model;
  nlohmann::json j;
  j["field"] = build.field_name;
  j["dim"] = m.dim;
  j["grid"]["resolution"] =
      std::vector<int>(build.measure.spec.resolution.begin(),
                       build.measure.spec.resolution.begin() + m.dim);
  j["grid"]["strip_halfwidth"] = build.measure.spec.strip_halfwidth;
  j["eta"] = build.measure.eta;
  j["blend"] = blend_name(build.compensator.blend);
  j["q_plus"] = m.q_plus;
  j["q_minus"] = m.q_minus;
  j["p_plus"] = m.p_plus;
  j["p_minus"] = m.p_minus;
  j["skew"] = m.skew;
  j["alpha"] = std::vector<double>(m.alpha.begin(), m.alpha.end());
  j["K"] = std::vector<double>(m.K.begin(), m.K.end());
  j["D_plus"] = matrix_rows(m.D_plus);
  j["D_minus"] = matrix_rows(m.D_minus);
  j["M_plus"] = matrix_rows(m.M_plus);
  j["M_minus"] = matrix_rows(m.M_minus);
  j["mass_fit"] = {{"q_plus", build.fit.q_plus},
                   {"q_minus", build.fit.q_minus},
                   {"rho_plus", build.fit.rho_plus},
                   {"rho_minus", build.fit.rho_minus},
                   {"residual", build.fit.residual},
                   {"degenerate_plus", build.fit.degenerate_plus},
                   {"degenerate_minus", build.fit.degenerate_minus},
                   {"first_cell", build.fit.first_cell},
                   {"last_cell", build.fit.last_cell}};
  j["diagnostics"] = {
      {"density_residual_plus", build.cell_plus.mu.residual_l2},
      {"density_residual_minus", build.cell_minus.mu.residual_l2},
      {"centering_plus", build.cell_plus.centering.cwiseAbs().maxCoeff()},
      {"centering_minus", build.cell_minus.centering.cwiseAbs().maxCoeff()},
      {"strip_interior_residual", build.measure.interior_residual},
      {"strip_flux_plus", build.measure.flux_plus},
      {"strip_flux_minus", build.measure.flux_minus},
      {"measure_scale_factor", build.measure.scale_factor},
      {"corrected_drift_outside_sup", build.btilde.max_outside},
      {"compensator_second_difference", build.compensator.max_second_difference},
      {"alpha1_diagnostic", build.alpha1_diagnostic}};
  return j.dump(2);
}

}  // namespace ifhom

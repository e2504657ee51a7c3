#pragma once

/// @file model.hpp
/// @brief Parameters of the limit process: transmissivities p+-, the global
///        compensator g, the corrected drift b~ = b + Lg, the interface drift
///        vector alpha, the local-time vector K, noise factors M+-, and the
///        skew parameter of the first coordinate.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ifhom/field.hpp"
#include "ifhom/geometry.hpp"
#include "ifhom/strip.hpp"
#include "ifhom/torus_cell.hpp"

namespace ifhom {

inline constexpr double kSupportTol = 1e-8;        // |b~| outside the widened interface
inline constexpr double kFactorResidualTol = 1e-10;  // |M M^T - D|

/// Parameters of the limit SDE
///   dX_t = K L_t(dt) + (1_{X1>0} M_+ + 1_{X1<0} M_-) dW_t
/// with X1 a skew Brownian motion (parameter `skew`, diffusivities D+-_11).
struct EffectiveModel {
  int dim = 0;
  Eigen::MatrixXd D_plus, D_minus;   // effective tensors of the two tails
  Eigen::MatrixXd M_plus, M_minus;   // factors, M M^T = D, first row (sqrt(D11),0,..)
  double q_plus = 0, q_minus = 0;    // asymptotic cell masses, q+ + q- = 1
  double p_plus = 0, p_minus = 0;    // transmissivities, p+ + p- = 1
  double skew = 0;                   // skew parameter of the first coordinate
  Eigen::VectorXd alpha;             // interface drift, entries alpha_2..alpha_d
  Eigen::VectorXd K;                 // local-time vector, K1 = p+ - p-, K_j = alpha_j
};

/// Smooth monotone switch profiles used to blend the two correctors.
enum class BlendProfile { smoothstep5, cosine };
const char* blend_name(BlendProfile blend);
BlendProfile parse_blend(const std::string& name);  // throws on unknown names

/// Global compensator g on the strip: g = g- left of the interface region,
/// g = g+ right of it, blended across |x1| < eta + 1 with a margin so the
/// switch is exactly constant wherever a stencil centred outside can reach.
struct Compensator {
  GridSpec spec;
  double eta = 0;
  int halo = 0;
  BlendProfile blend = BlendProfile::smoothstep5;
  double saturation = 0;  // chi constant for |x1| >= saturation (< eta + 1)
  std::vector<Eigen::VectorXd> g;  // per component, extended planes (+-halo)
  std::vector<Eigen::VectorXd> tail_plus, tail_minus;  // torus values of g+- per component
  double max_second_difference = 0;  // along x1, smoothness diagnostic

  double chi(double x1) const;
  /// Value of component i at an extended plane (plane in [-halo, planes+halo)).
  double at(const StripGrid& grid, int i, int plane_ext, std::int64_t t) const;
};

Compensator build_compensator(const Corrector& g_plus, const Corrector& g_minus,
                              const GridSpec& spec, double eta, BlendProfile blend);

/// Corrected drift b~ = b + Lg on the strip; vanishes outside I_{eta~}.
struct CorrectedDrift {
  GridSpec spec;
  double eta_tilde = 0;                  // support half-width eta + 1
  std::vector<Eigen::VectorXd> values;   // per component, strip nodes
  double max_outside = 0;                // sup |b~| at nodes with |x1| >= eta~
};
CorrectedDrift corrected_drift(const InterfaceDrift& field, const Compensator& comp);

/// p+- from tail weights and diffusivities; p+ + p- = 1 exactly.
std::pair<double, double> transmissivity(double q_plus, double q_minus, double d11_plus,
                                         double d11_minus);

/// alpha_j = 2 (p+/D+_11 + p-/D-_11) int b~_j dmu for j = 2..d, plus the
/// x1-component of the same integral as a consistency diagnostic (~0).
struct InterfaceDriftVector {
  Eigen::VectorXd alpha;    // size dim-1, entries alpha_2..alpha_d
  double diagnostic_x1 = 0; // prefactor times int b~_1 dmu
};
InterfaceDriftVector interface_drift_vector(const CorrectedDrift& bt, const StripMeasure& mu,
                                            double p_plus, double p_minus, double d11_plus,
                                            double d11_minus);

/// Assemble the limit-process parameters from the computed pieces.
EffectiveModel assemble_model(const Eigen::MatrixXd& D_plus, const Eigen::MatrixXd& D_minus,
                              double q_plus, double q_minus, const Eigen::VectorXd& alpha);

/// Asymptotic probability of finding the limit process on the + side;
/// identical to the skew parameter.
double asymptotic_side_probability(const EffectiveModel& model);

/// Left-hand side of the gluing identity
///   p+ d1f|_+ - p- d1f|_- + sum_j alpha_j d_j f  at the interface.
double gluing_residual(const EffectiveModel& model, double d1_plus, double d1_minus,
                       const Eigen::VectorXd& transverse_grad);

/// Bounded C^2-off-interface test function built to satisfy the gluing
/// identity: f = a+ (1-e^{-x1}) or a- (e^{x1}-1), plus a transverse linear
/// part and a curvature bump (1-e^{-x1^2}).
struct GluedTestFunction {
  double a_plus = 0, a_minus = 0;
  Eigen::VectorXd c;      // transverse coefficients, entry 0 unused
  double curvature = 0;

  double eval(const double* x, int dim) const;
  /// Generator of the limit process applied to f away from the interface;
  /// at x1 = 0 the mean of the two one-sided limits.
  double generator(const double* x, int dim, const EffectiveModel& model) const;
};
/// Choose a_plus so the gluing identity holds exactly.
GluedTestFunction make_glued_function(const EffectiveModel& model, double a_minus,
                                      const Eigen::VectorXd& c, double curvature);

/// Controlled perturbations used as negative controls by the verifier; they
/// touch only the predicted model, never the simulated process.
enum class ModelPerturbation { none, alpha_doubled, swapped_p };
const char* perturbation_name(ModelPerturbation kind);
EffectiveModel perturb_model(const EffectiveModel& model, ModelPerturbation kind);

/// One-call deterministic pipeline from a drift field to the limit model,
/// keeping the intermediate objects for diagnostics and tests.
struct ModelBuild {
  EffectiveModel model;
  CellSolution cell_plus, cell_minus;
  StripMeasure measure;
  CellMassFit fit;
  Compensator compensator;
  CorrectedDrift btilde;
  double alpha1_diagnostic = 0;
  std::string field_name;
};
ModelBuild build_model(const InterfaceDrift& field, const GridSpec& spec,
                       BlendProfile blend = BlendProfile::smoothstep5,
                       const std::string& field_name = "");

/// JSON document with the model parameters and solver diagnostics.
std::string render_model_json(const ModelBuild& build);

}  // namespace ifhom

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ifhom/eps_sim.hpp"
#include "ifhom/field.hpp"
#include "ifhom/geometry.hpp"
#include "ifhom/limit_sim.hpp"
#include "ifhom/model.hpp"

namespace ifhom {

/// One pass/fail record of the statistical comparison harness.  `tolerance`
/// spells out the rule the `pass` flag was computed with; `params` is a short
/// human-readable parameter string so the row is reproducible on its own.
struct CheckRow {
  std::string name;
  double predicted = 0;
  double estimated = 0;
  double se = 0;
  std::string tolerance;
  bool pass = false;
  std::string params;
  std::uint64_t seed = 0;
};

/// Ordered list of check rows; the verdict is the AND over all rows.
struct ComparisonReport {
  std::vector<CheckRow> rows;
  bool verdict = true;

  void add(CheckRow row);
  void merge(const ComparisonReport& section);
};

/// JSON rendering of a report (rows + verdict + free-form header fields).
std::string render_report_json(const ComparisonReport& report, const std::string& title,
                               std::uint64_t config_hash = 0);

/// Flat CSV of check rows: name,predicted,estimated,se,tolerance,pass,params,seed.
void write_checks_csv(const ComparisonReport& report, std::ostream& os);

/// Time-T marginal comparison between the rescaled process and the limit.
struct MarginalCheckParams {
  std::vector<double> eps_list{0.1, 0.05, 0.025};
  double T = 1.0;
  double limit_dt = 2.5e-4;
  std::uint64_t n = 10000;
  std::uint64_t seed = 1;
  int threads = 0;
  SkewBackend backend = SkewBackend::euler_mollified;
  double final_threshold = 0.05;  // KS gate at the smallest eps
  double trend_slack_se = 2.0;    // non-increasing within this many combined SE
};

/// Runs simulate_eps per eps (list must be decreasing, n >= 1000), reuses one
/// limit ensemble, and gates per-coordinate KS distances: non-increasing in
/// eps within the slack and below final_threshold at the smallest eps.
ComparisonReport compare_marginals(const InterfaceDrift& field, const EffectiveModel& model,
                                   const MarginalCheckParams& params);

/// Same comparison against a caller-provided limit ensemble (reused across
/// sections by full_pipeline).
ComparisonReport compare_marginals_against(const InterfaceDrift& field,
                                           const LimitEnsemble& limit,
                                           const MarginalCheckParams& params);

/// Exit-side probability sweep over eps, compared against the model's p+.
struct TransmissivityParams {
  std::vector<double> eps_list{0.1, 0.05, 0.025};
  double delta = 0;  // 0: auto = max(0.4, 10 * largest eps)
  std::uint64_t n = 10000;
  std::uint64_t seed = 1;
  int threads = 0;
  double trend_slack_se = 2.0;
};

/// |p_hat(eps) - p+| shrinking across the schedule (within the slack) and
/// within 3 SE at the smallest eps; cap-hit warnings are recorded per row.
ComparisonReport transmissivity_convergence(const InterfaceDrift& field,
                                            const EffectiveModel& model,
                                            const TransmissivityParams& params);

/// Discounted occupation of |x1| < delta(eps) = eps^a along the eps schedule.
struct OccupationParams {
  std::vector<double> eps_list{0.1, 0.05, 0.025};
  double exponent = 0.75;  // a in (1/2, 1), delta = eps^a
  double lambda = 1.0;
  std::uint64_t n = 1000;
  std::uint64_t seed = 1;
  int threads = 0;
  double dt_factor = 0.1;              // dt = dt_factor * eps^2
  bool check_brownian_oracle = false;  // gate each estimate against the 1D
                                       // resolvent oracle (zero field only)
};

/// Estimates strictly decreasing along the schedule beyond 2 combined SE
/// (1 SE when a >= 0.9, where consecutive deltas get close); the slope of
/// log-estimate vs log-eps is reported as an ungated row.
ComparisonReport occupation_convergence(const InterfaceDrift& field,
                                        const OccupationParams& params);

/// u(x1) for lambda u - u''/2 = 1 on (-delta, delta), 0 elsewhere, u -> 0 at
/// infinity: the discounted occupation of a standard 1D Brownian motion.
/// Solved by finite differences on a truncated domain (cell-averaged source).
double resolvent_occupation_oracle(double delta, double lambda, double x1);

/// Perturbations of the predicted model used as negative controls; the
/// rescaled process is always simulated from the true field.
enum class NegativeControl { none, alpha2x, swap_p };
const char* negative_control_name(NegativeControl control);

struct PipelineParams {
  std::vector<double> eps_list{0.1, 0.05, 0.025};
  double T = 1.0;
  std::uint64_t n_marginal = 10000;
  std::uint64_t n_exit = 10000;
  std::uint64_t n_occupation = 1000;
  double delta = 0;  // transmissivity slab; 0: auto
  double lambda = 1.0;
  double occupation_exponent = 0.75;
  SkewBackend backend = SkewBackend::euler_mollified;
  BlendProfile blend = BlendProfile::smoothstep5;
  std::uint64_t seed = 1;
  int threads = 0;
  NegativeControl control = NegativeControl::none;
  bool run_marginals = true;
  bool run_transmissivity = true;
  bool run_occupation = true;
};

struct PipelineResult {
  ModelBuild build;        // deterministic pipeline artifacts (true model)
  EffectiveModel checked;  // model under test (perturbed when control != none)
  ComparisonReport report;
  double elapsed_seconds = 0;
};

/// Deterministic pipeline (cells -> strip -> effective model) followed by the
/// statistical sections.  Failures abort at the first offending stage with a
/// "[stage ...]" prefix on the error message.
PipelineResult full_pipeline(const InterfaceDrift& field, const GridSpec& spec,
                             const PipelineParams& params);

}  // namespace ifhom

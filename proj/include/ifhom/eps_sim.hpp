#pragma once

/// @file eps_sim.hpp
/// @brief Monte Carlo simulation of the rescaled interface diffusion
///        dX^eps = eps^{-1} b(X^eps/eps) dt + dB and its interface statistics:
///        exit sides, discounted occupation, scaled increment moments.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ifhom/field.hpp"
#include "ifhom/model.hpp"
#include "ifhom/stats.hpp"

namespace ifhom {

/// Common simulation knobs. dt = 0 picks the stability default 0.05 eps^2;
/// an explicit dt above 0.1 eps^2 is refused.
struct SimParams {
  double T = 1.0;
  double dt = 0;          // 0: auto
  std::uint64_t n = 1000;
  std::uint64_t seed = 1;
  int threads = 0;        // 0: hardware concurrency
  int stored_states = 257;  // thinning target per path (>= 2)
};

/// Step size the stability rule would pick for this eps.
double suggested_dt(double eps);

/// Thinned ensemble of simulated paths (path-major storage).
struct PathEnsemble {
  int dim = 0;
  double eps = 0;
  double T = 0;
  double dt = 0;             // raw integration step
  int stride = 0;            // raw steps between stored states
  std::int64_t stored = 0;   // states per path
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  std::vector<double> times;   // stored times, size `stored`
  std::vector<double> states;  // (path * stored + k) * dim + a

  const double* state(std::uint64_t path, std::int64_t k) const {
    return states.data() + (path * static_cast<std::uint64_t>(stored) + k) * dim;
  }
};

PathEnsemble simulate_eps(const InterfaceDrift& field, double eps, const double* x0,
                          const SimParams& params);

/// Corrected process Y^eps = X^eps + eps g(X^eps/eps), evaluated by multilinear
/// interpolation of the compensator (its tails off the strip).
PathEnsemble corrected_paths(const PathEnsemble& ensemble, const Compensator& comp);

/// CSV export "path,t,x1,..,xd" of the thinned states.
void write_paths_csv(const PathEnsemble& ensemble, std::ostream& os);

/// Exit statistics from the slab |x1| <= delta.
struct ExitParams {
  double delta = 0.4;
  double dt = 0;          // 0: auto per the eps rule
  double horizon = 0;     // 0: 50 delta^2 (callers should scale by 1/min D11)
  std::uint64_t n = 10000;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct ExitSideEstimate {
  Estimate p_plus;        // fraction of paths leaving on the + side
  Estimate p_minus;
  double cap_fraction = 0;  // paths still inside at the horizon
  bool warning = false;     // cap fraction above 1%
  std::string message;
};
ExitSideEstimate exit_side_probability(const InterfaceDrift& field, double eps,
                                       const double* x0, const ExitParams& params);

/// Scaled moments of the transverse increment at the exit time:
/// first_j ~ alpha_j, second = (1/delta^2) E sum_j (X_j(tau)-x_j)^2.
struct IncrementMoments {
  std::vector<Estimate> first;  // j = 2..d
  Estimate second;
  double cap_fraction = 0;
  bool warning = false;
};
IncrementMoments interface_increment_moments(const InterfaceDrift& field, double eps,
                                             const double* x0, const ExitParams& params);

/// E int_0^inf e^{-lambda t} 1_{|X1| < delta} dt by Monte Carlo (truncated when
/// the discount drops below 1e-8).
Estimate discounted_occupation(const InterfaceDrift& field, double eps, double delta,
                               double lambda, const double* x0, std::uint64_t n,
                               std::uint64_t seed, double dt = 0, int threads = 0);

/// Non-rescaled drift integrals (1/n_strip) E int_0^{tau} b(X_s) ds for the
/// eps = 1 process stopped on leaving |x1| < n_strip; one estimate per
/// component (entries j >= 2 approximate alpha_j).
std::vector<Estimate> drift_estimate_nonrescaled(const InterfaceDrift& field, int n_strip,
                                                 const double* x0, std::uint64_t paths,
                                                 std::uint64_t seed, double dt = 0.002,
                                                 int threads = 0);

}  // namespace ifhom

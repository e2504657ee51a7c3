#pragma once

/// @file limit_sim.hpp
/// @brief Simulation of the limit process: skew Brownian motion with symmetric
///        local time driving the normal coordinate, piecewise noise factors and
///        a local-time drift K for the transverse coordinates.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ifhom/model.hpp"
#include "ifhom/stats.hpp"

namespace ifhom {

enum class SkewBackend { grid_walk, euler_mollified };
SkewBackend parse_backend(const std::string& name);
const char* backend_name(SkewBackend backend);

/// Thinned ensemble of skew Brownian paths with local time and martingale part.
struct SkewEnsemble {
  double p = 0;
  double T = 0;
  double dt = 0;          // raw step
  int stride = 0;
  std::int64_t stored = 0;
  std::uint64_t n = 0, seed = 0;
  SkewBackend backend = SkewBackend::grid_walk;
  std::vector<double> times;
  std::vector<double> z, l, w;  // (path * stored + k); l, w cumulative

  double at(const std::vector<double>& ch, std::uint64_t path, std::int64_t k) const {
    return ch[path * static_cast<std::uint64_t>(stored) + k];
  }
};

/// Skew BM from 0: grid_walk = lattice walk on h Z (h = sqrt(dt)) biased only
/// at the origin, L = h * (visits to 0); euler_mollified = Gaussian steps with
/// reflection/transmission at 0 and band-occupation local time (band sqrt(dt)).
SkewEnsemble simulate_skew_bm(double p, double T, double dt, std::uint64_t n,
                              std::uint64_t seed, SkewBackend backend, int threads = 0,
                              int stored_states = 257);

/// Ensemble of the limit process with its local-time channel.
struct LimitEnsemble {
  EffectiveModel model;
  int dim = 0;
  double T = 0;
  double dt = 0;
  int stride = 0;
  std::int64_t stored = 0;
  std::uint64_t n = 0, seed = 0;
  SkewBackend backend = SkewBackend::grid_walk;
  std::vector<double> times;
  std::vector<double> states;      // (path * stored + k) * dim + a
  std::vector<double> local_time;  // (path * stored + k), cumulative

  const double* state(std::uint64_t path, std::int64_t k) const {
    return states.data() + (path * static_cast<std::uint64_t>(stored) + k) * dim;
  }
};

LimitEnsemble simulate_limit(const EffectiveModel& model, const double* x0, double T,
                             double dt, std::uint64_t n, std::uint64_t seed,
                             SkewBackend backend = SkewBackend::grid_walk, int threads = 0,
                             int stored_states = 257);

/// CSV export "path,t,x1..xd,L".
void write_limit_csv(const LimitEnsemble& ensemble, std::ostream& os);

/// Mean of the discounted martingale functional
///   e^{-lambda T} f(X_T) - f(X_0) + int_0^T e^{-lambda s}(lambda f - Lf)(X_s) ds
/// over the ensemble; zero in expectation when f satisfies the gluing identity
/// of the ensemble's model.  `enforce_domain = false` lets the verifier feed a
/// mismatched f on purpose (negative control).
Estimate martingale_residual(const LimitEnsemble& ensemble, const GluedTestFunction& f,
                             double lambda, bool enforce_domain = true);

}  // namespace ifhom

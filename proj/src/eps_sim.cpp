#include "ifhom/eps_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "ifhom/geometry.hpp"
#include "ifhom/parallel.hpp"
#include "ifhom/rng.hpp"
#include "ifhom/step_plan.hpp"

namespace ifhom {

namespace {

double resolve_dt(double user_dt, double eps) {
  const double stable = 0.05 * eps * eps;
  if (user_dt <= 0) return stable;
  if (user_dt > 0.1 * eps * eps) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "dt = %.3e is unstable for eps = %.3g (drift is O(1/eps)); use dt <= %.3e",
                  user_dt, eps, stable);
    throw std::invalid_argument(buf);
  }
  return user_dt;
}

/// Mod-1 fractional part suitable for negative arguments.
double frac(double x) { return x - std::floor(x); }

/// Multilinear interpolation of one compensator component at z (strip scale).
double compensator_value(const Compensator& comp, const StripGrid& grid,
                         const TorusGrid& torus, int i, const double* z) {
  const int d = comp.spec.dim;
  const int ks = comp.spec.strip_halfwidth;
  if (z[0] >= ks || z[0] <= -ks) {
    // periodic tail: pure torus interpolation of g+-
    const Eigen::VectorXd& gt = (z[0] >= ks ? comp.tail_plus : comp.tail_minus)[
        static_cast<std::size_t>(i)];
    double wgt[kMaxDim];
    std::int64_t node[kMaxDim];
    for (int a = 0; a < d; ++a) {
      const double u = frac(z[a]) * torus.extent(a);
      const double fl = std::floor(u);
      node[a] = static_cast<std::int64_t>(fl) % torus.extent(a);
      wgt[a] = u - fl;
    }
    double acc = 0;
    for (int corner = 0; corner < (1 << d); ++corner) {
      double w = 1;
      std::int64_t idx = 0;
      for (int a = 0; a < d; ++a) {
        const int bit = (corner >> a) & 1;
        w *= bit ? wgt[a] : 1.0 - wgt[a];
        const std::int64_t na = (node[a] + bit) % torus.extent(a);
        idx = idx * torus.extent(a) + na;
      }
      acc += w * gt[idx];
    }
    return acc;
  }
  // inside the strip: linear between planes, multilinear + wrap transversally
  const double u0 = (z[0] + ks) / grid.spacing(0);
  int p0 = static_cast<int>(std::floor(u0));
  p0 = std::clamp(p0, 0, grid.planes() - 2);
  const double f0 = u0 - p0;
  std::int64_t tnode[kMaxDim];
  double tw[kMaxDim];
  for (int a = 1; a < d; ++a) {
    const int na = comp.spec.resolution[a];
    const double u = frac(z[a]) * na;
    const double fl = std::floor(u);
    tnode[a] = static_cast<std::int64_t>(fl) % na;
    tw[a] = u - fl;
  }
  double acc = 0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = (corner & 1) ? f0 : 1.0 - f0;
    std::int64_t t = 0;
    for (int a = 1; a < d; ++a) {
      const int bit = (corner >> a) & 1;
      w *= bit ? tw[a] : 1.0 - tw[a];
      const int na = comp.spec.resolution[a];
      t = t * na + (tnode[a] + bit) % na;
    }
    acc += w * comp.at(grid, i, p0 + (corner & 1), t);
  }
  return acc;
}

/// One exit record per path for the stopped-process statistics.
struct ExitRecord {
  int side = 0;  // +1 / -1, 0 = capped
  double time = 0;
  double state[kMaxDim] = {0, 0, 0, 0};
};

/// Simulate until |x1| >= delta (linear interpolation of the crossing) or the
/// time horizon; `per_step` observes each pre-step state and dt.
template <typename StepObserver>
ExitRecord run_until_exit(const InterfaceDrift& field, double eps, const double* x0,
                          double delta, double dt, double horizon, PathRng& rng,
                          StepObserver&& per_step) {
  const int d = field.dim();
  const double sqdt = std::sqrt(dt);
  const double inv_eps = 1.0 / eps;
  double x[kMaxDim], xs[kMaxDim], b[kMaxDim], prev[kMaxDim];
  for (int a = 0; a < d; ++a) x[a] = x0[a];
  ExitRecord rec;
  double t = 0;
  while (t < horizon) {
    per_step(x, t);
    for (int a = 0; a < d; ++a) {
      prev[a] = x[a];
      xs[a] = x[a] * inv_eps;
    }
    field.eval(xs, b);
    for (int a = 0; a < d; ++a) x[a] += b[a] * inv_eps * dt + sqdt * rng.next_normal();
    t += dt;
    if (x[0] >= delta || x[0] <= -delta) {
      const int side = x[0] >= delta ? 1 : -1;
      const double bound = side * delta;
      const double theta = (bound - prev[0]) / (x[0] - prev[0]);
      rec.side = side;
      rec.time = t - dt + theta * dt;
      for (int a = 0; a < d; ++a) rec.state[a] = prev[a] + theta * (x[a] - prev[a]);
      return rec;
    }
  }
  rec.side = 0;
  rec.time = horizon;
  for (int a = 0; a < d; ++a) rec.state[a] = x[a];
  return rec;
}

}  // namespace

double suggested_dt(double eps) { return 0.05 * eps * eps; }

PathEnsemble simulate_eps(const InterfaceDrift& field, double eps, const double* x0,
                          const SimParams& params) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  if (params.n == 0) throw std::invalid_argument("need at least one path");
  const StepPlan plan = plan_steps(params.T, resolve_dt(params.dt, eps), params.stored_states);

  PathEnsemble ens;
  ens.dim = field.dim();
  ens.eps = eps;
  ens.T = params.T;
  ens.dt = plan.dt;
  ens.stride = plan.stride;
  ens.stored = plan.stored;
  ens.n = params.n;
  ens.seed = params.seed;
  ens.times.resize(static_cast<std::size_t>(plan.stored));
  for (std::int64_t k = 0; k < plan.stored; ++k)
    ens.times[static_cast<std::size_t>(k)] = static_cast<double>(k) * plan.stride * plan.dt;
  ens.states.resize(params.n * static_cast<std::uint64_t>(plan.stored) * ens.dim);

  const int d = ens.dim;
  const double sqdt = std::sqrt(plan.dt);
  const double inv_eps = 1.0 / eps;
  parallel_for(params.n, params.threads, [&](std::uint64_t begin, std::uint64_t end) {
    double x[kMaxDim], xs[kMaxDim], b[kMaxDim];
    for (std::uint64_t path = begin; path < end; ++path) {
      PathRng rng(params.seed, path);
      for (int a = 0; a < d; ++a) x[a] = x0[a];
      double* out = ens.states.data() + path * static_cast<std::uint64_t>(plan.stored) * d;
      for (int a = 0; a < d; ++a) out[a] = x[a];
      std::int64_t next_store = 1;
      for (std::int64_t step = 1; step <= plan.steps; ++step) {
        for (int a = 0; a < d; ++a) xs[a] = x[a] * inv_eps;
        field.eval(xs, b);
        for (int a = 0; a < d; ++a) x[a] += b[a] * inv_eps * plan.dt + sqdt * rng.next_normal();
        if (step == next_store * plan.stride) {
          double* slot = out + next_store * d;
          for (int a = 0; a < d; ++a) slot[a] = x[a];
          ++next_store;
        }
      }
    }
  });
  return ens;
}

PathEnsemble corrected_paths(const PathEnsemble& ensemble, const Compensator& comp) {
  if (comp.spec.dim != ensemble.dim)
    throw std::invalid_argument("compensator dimension does not match the ensemble");
  PathEnsemble out = ensemble;
  StripGrid grid(comp.spec, comp.halo);
  TorusGrid torus(comp.spec);
  const int d = ensemble.dim;
  const double eps = ensemble.eps;
  const std::uint64_t total = ensemble.n * static_cast<std::uint64_t>(ensemble.stored);
  double z[kMaxDim];
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    double* y = out.states.data() + idx * d;
    for (int a = 0; a < d; ++a) z[a] = y[a] / eps;
    for (int i = 0; i < d; ++i) y[i] += eps * compensator_value(comp, grid, torus, i, z);
  }
  return out;
}

void write_paths_csv(const PathEnsemble& ensemble, std::ostream& os) {
  os << "path,t";
  for (int a = 1; a <= ensemble.dim; ++a) os << ",x" << a;
  os << '\n';
  char buf[64];
  for (std::uint64_t path = 0; path < ensemble.n; ++path) {
    for (std::int64_t k = 0; k < ensemble.stored; ++k) {
      os << path;
      std::snprintf(buf, sizeof buf, ",%.10g", ensemble.times[static_cast<std::size_t>(k)]);
      os << buf;
      const double* s = ensemble.state(path, k);
      for (int a = 0; a < ensemble.dim; ++a) {
        std::snprintf(buf, sizeof buf, ",%.10g", s[a]);
        os << buf;
      }
      os << '\n';
    }
  }
}

ExitSideEstimate exit_side_probability(const InterfaceDrift& field, double eps,
                                       const double* x0, const ExitParams& params) {
  if (!(params.delta > 0)) throw std::invalid_argument("delta must be positive");
  if (params.delta < 10 * eps)
    throw std::invalid_argument("delta must be at least 10 eps for the exit statistics");
  if (std::abs(x0[0]) >= params.delta)
    throw std::invalid_argument("starting point must lie inside the slab");
  const double dt = resolve_dt(params.dt, eps);
  const double horizon = params.horizon > 0 ? params.horizon : 50.0 * params.delta * params.delta;
  const std::uint64_t salt = 0x657869747369u;  // distinct stream family per operation
  const std::uint64_t seed = derive_seed(params.seed, salt);

  std::vector<signed char> side(params.n);
  parallel_for(params.n, params.threads, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t path = begin; path < end; ++path) {
      PathRng rng(seed, path);
      const ExitRecord rec = run_until_exit(field, eps, x0, params.delta, dt, horizon, rng,
                                            [](const double*, double) {});
      side[path] = static_cast<signed char>(rec.side);
    }
  });

  std::uint64_t np = 0, nm = 0;
  for (std::uint64_t i = 0; i < params.n; ++i) {
    if (side[i] > 0)
      ++np;
    else if (side[i] < 0)
      ++nm;
  }
  ExitSideEstimate est;
  est.p_plus = binomial_estimate(np, params.n);
  est.p_minus = binomial_estimate(nm, params.n);
  est.p_plus.method = "exit_side_fraction";
  est.p_minus.method = "exit_side_fraction";
  est.cap_fraction = static_cast<double>(params.n - np - nm) / static_cast<double>(params.n);
  if (est.cap_fraction > 0.01) {
    est.warning = true;
    char buf[120];
    std::snprintf(buf, sizeof buf, "%.2f%% of paths hit the %.3g horizon before exiting",
                  100.0 * est.cap_fraction, horizon);
    est.message = buf;
  }
  return est;
}

IncrementMoments interface_increment_moments(const InterfaceDrift& field, double eps,
                                             const double* x0, const ExitParams& params) {
  if (!(params.delta > 0)) throw std::invalid_argument("delta must be positive");
  if (params.delta < 10 * eps)
    throw std::invalid_argument("delta must be at least 10 eps for the exit statistics");
  const double dt = resolve_dt(params.dt, eps);
  const double horizon = params.horizon > 0 ? params.horizon : 50.0 * params.delta * params.delta;
  const std::uint64_t seed = derive_seed(params.seed, 0x696e63726d74u);
  const int d = field.dim();

  std::vector<double> incr(params.n * static_cast<std::uint64_t>(d - 1));
  std::vector<double> sq(params.n);
  std::vector<signed char> ok(params.n);
  parallel_for(params.n, params.threads, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t path = begin; path < end; ++path) {
      PathRng rng(seed, path);
      const ExitRecord rec = run_until_exit(field, eps, x0, params.delta, dt, horizon, rng,
                                            [](const double*, double) {});
      ok[path] = rec.side != 0;
      double s2 = 0;
      for (int j = 1; j < d; ++j) {
        const double dxj = rec.state[j] - x0[j];
        incr[path * (d - 1) + (j - 1)] = dxj;
        s2 += dxj * dxj;
      }
      sq[path] = s2;
    }
  });

  IncrementMoments mom;
  std::uint64_t ncap = 0;
  for (std::uint64_t i = 0; i < params.n; ++i)
    if (!ok[i]) ++ncap;
  mom.cap_fraction = static_cast<double>(ncap) / static_cast<double>(params.n);
  mom.warning = mom.cap_fraction > 0.01;

  const double inv_delta = 1.0 / params.delta;
  std::vector<double> tmp;
  tmp.reserve(params.n);
  for (int j = 0; j < d - 1; ++j) {
    tmp.clear();
    for (std::uint64_t i = 0; i < params.n; ++i)
      if (ok[i]) tmp.push_back(incr[i * (d - 1) + j] * inv_delta);
    Estimate e = mean_estimate(tmp);
    e.method = "exit_increment_first_moment";
    mom.first.push_back(e);
  }
  tmp.clear();
  for (std::uint64_t i = 0; i < params.n; ++i)
    if (ok[i]) tmp.push_back(sq[i] * inv_delta * inv_delta);
  mom.second = mean_estimate(tmp);
  mom.second.method = "exit_increment_second_moment";
  return mom;
}

Estimate discounted_occupation(const InterfaceDrift& field, double eps, double delta,
                               double lambda, const double* x0, std::uint64_t n,
                               std::uint64_t seed, double dt, int threads) {
  if (!(delta > 0)) throw std::invalid_argument("delta must be positive");
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
  const double dt_eff = resolve_dt(dt, eps);
  const double t_max = -std::log(1e-8) / lambda;  // discount below 1e-8 ignored
  const std::uint64_t base = derive_seed(seed, 0x6f636370u);
  const int d = field.dim();
  const double sqdt = std::sqrt(dt_eff);
  const double inv_eps = 1.0 / eps;
  const std::int64_t steps = static_cast<std::int64_t>(std::ceil(t_max / dt_eff));
  // per-step discount recursion keeps the inner loop free of exp calls
  const double decay = std::exp(-lambda * dt_eff);

  std::vector<double> occ(n);
  parallel_for(n, threads, [&](std::uint64_t begin, std::uint64_t end) {
    double x[kMaxDim], xs[kMaxDim], b[kMaxDim];
    for (std::uint64_t path = begin; path < end; ++path) {
      PathRng rng(base, path);
      for (int a = 0; a < d; ++a) x[a] = x0[a];
      double disc = 1.0;
      double acc = 0;
      for (std::int64_t step = 0; step < steps; ++step) {
        if (std::abs(x[0]) < delta) acc += disc * dt_eff;
        disc *= decay;
        for (int a = 0; a < d; ++a) xs[a] = x[a] * inv_eps;
        field.eval(xs, b);
        for (int a = 0; a < d; ++a) x[a] += b[a] * inv_eps * dt_eff + sqdt * rng.next_normal();
      }
      occ[path] = acc;
    }
  });
  Estimate e = mean_estimate(occ);
  e.method = "discounted_occupation";
  return e;
}

std::vector<Estimate> drift_estimate_nonrescaled(const InterfaceDrift& field, int n_strip,
                                                 const double* x0, std::uint64_t paths,
                                                 std::uint64_t seed, double dt, int threads) {
  if (n_strip < 8) throw std::invalid_argument("n_strip must be at least 8");
  if (!(dt > 0) || dt > 0.05) throw std::invalid_argument("dt must lie in (0, 0.05]");
  if (std::abs(x0[0]) >= n_strip)
    throw std::invalid_argument("starting point must lie inside the slab");
  const int d = field.dim();
  const double horizon = 50.0 * n_strip * static_cast<double>(n_strip);
  const std::uint64_t base = derive_seed(seed, 0x64726966747376u);
  const double inv_n = 1.0 / n_strip;

  std::vector<double> integrals(paths * static_cast<std::uint64_t>(d));
  parallel_for(paths, threads, [&](std::uint64_t begin, std::uint64_t end) {
    double b[kMaxDim];
    for (std::uint64_t path = begin; path < end; ++path) {
      PathRng rng(base, path);
      double acc[kMaxDim] = {0, 0, 0, 0};
      run_until_exit(field, 1.0, x0, static_cast<double>(n_strip), dt, horizon, rng,
                     [&](const double* x, double) {
                       field.eval(x, b);
                       for (int a = 0; a < d; ++a) acc[a] += b[a] * dt;
                     });
      for (int a = 0; a < d; ++a) integrals[path * d + a] = acc[a] * inv_n;
    }
  });

  std::vector<Estimate> out;
  std::vector<double> tmp(paths);
  for (int a = 0; a < d; ++a) {
    for (std::uint64_t i = 0; i < paths; ++i) tmp[i] = integrals[i * d + a];
    Estimate e = mean_estimate(tmp);
    e.method = "nonrescaled_drift_integral";
    out.push_back(e);
  }
  return out;
}

}  // namespace ifhom

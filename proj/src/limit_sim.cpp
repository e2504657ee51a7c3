#include "ifhom/limit_sim.hpp"

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

struct SkewIncrement {
  double dz = 0, dl = 0, dw = 0;
};

/// Lattice walk on h*Z: unbiased away from 0, up with probability p at 0,
/// local time h per visit of 0, martingale part via the Tanaka decomposition.
class GridWalkStepper {
 public:
  GridWalkStepper(double p, double dt) : p_(p), h_(std::sqrt(dt)) {}
  void init(double z0) { k_ = std::llround(z0 / h_); }
  double z() const { return static_cast<double>(k_) * h_; }

  SkewIncrement step(PathRng& rng) {
    SkewIncrement inc;
    if (k_ == 0) {
      const bool up = rng.next_u01() < p_;
      inc.dz = up ? h_ : -h_;
      inc.dl = h_;
      inc.dw = inc.dz - (2.0 * p_ - 1.0) * h_;
      k_ += up ? 1 : -1;
    } else {
      const bool up = rng.next_bit();
      inc.dz = up ? h_ : -h_;
      inc.dw = inc.dz;
      k_ += up ? 1 : -1;
    }
    return inc;
  }

 private:
  double p_, h_;
  std::int64_t k_ = 0;
};

/// Gaussian steps resolved against 0 by the reflected-walk construction: the
/// radius evolves as |r + xi sqrt(dt)|, a sign change happens on visible
/// crossings and on invisible ones (Brownian-bridge probability
/// exp(-2 r r'/dt)); each crossing resamples the excursion sign ~ Bernoulli(p).
/// Local time accrues through the centred band (-sqrt(dt), sqrt(dt)).
class MollifiedStepper {
 public:
  MollifiedStepper(double p, double dt)
      : p_(p), dt_(dt), sqdt_(std::sqrt(dt)), band_(std::sqrt(dt)) {}
  void init(double z0) { z_ = z0; }
  double z() const { return z_; }

  SkewIncrement step(PathRng& rng) {
    const double xi = rng.next_normal();
    const double z_old = z_;
    double r_new;
    bool crossing;
    if (z_ == 0.0) {
      r_new = std::abs(xi) * sqdt_;
      crossing = true;
    } else {
      const double r = std::abs(z_);
      const double raw = r + xi * sqdt_;
      if (raw <= 0) {
        r_new = -raw;
        crossing = true;
      } else {
        r_new = raw;
        const double expo = 2.0 * r * r_new / dt_;
        // skip the draw when the bridge-crossing probability is negligible
        crossing = expo < 40.0 && rng.next_u01() < std::exp(-expo);
      }
    }
    double sign = z_ > 0 ? 1.0 : -1.0;
    if (crossing) sign = rng.next_u01() < p_ ? 1.0 : -1.0;
    z_ = sign * r_new;

    SkewIncrement inc;
    inc.dz = z_ - z_old;
    inc.dl = std::abs(z_) < band_ ? dt_ / (2.0 * band_) : 0.0;
    inc.dw = inc.dz - (2.0 * p_ - 1.0) * inc.dl;
    return inc;
  }

 private:
  double p_, dt_, sqdt_, band_;
  double z_ = 0;
};

template <typename Stepper>
void run_skew_ensemble(SkewEnsemble& ens, int threads) {
  const StepPlan plan{ens.dt, static_cast<std::int64_t>(ens.stride) * (ens.stored - 1),
                      ens.stride, ens.stored};
  parallel_for(static_cast<std::int64_t>(ens.n), threads,
               [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t path = begin; path < end; ++path) {
      PathRng rng(ens.seed, static_cast<std::uint64_t>(path));
      Stepper st(ens.p, ens.dt);
      st.init(0.0);
      double l = 0, w = 0;
      const std::uint64_t base = static_cast<std::uint64_t>(path) *
                                 static_cast<std::uint64_t>(ens.stored);
      ens.z[base] = 0;
      ens.l[base] = 0;
      ens.w[base] = 0;
      std::int64_t next_store = 1;
      for (std::int64_t step = 1; step <= plan.steps; ++step) {
        const SkewIncrement inc = st.step(rng);
        l += inc.dl;
        w += inc.dw;
        if (step == next_store * plan.stride) {
          ens.z[base + next_store] = st.z();
          ens.l[base + next_store] = l;
          ens.w[base + next_store] = w;
          ++next_store;
        }
      }
    }
  });
}

template <typename Stepper>
void run_limit_ensemble(LimitEnsemble& ens, const double* x0, int threads) {
  const EffectiveModel& m = ens.model;
  const int d = ens.dim;
  const double sp = std::sqrt(m.D_plus(0, 0));
  const double sm = std::sqrt(m.D_minus(0, 0));
  const double lt_scale = sp * sm / (m.p_plus * sm + m.p_minus * sp);
  const double z0 = x0[0] >= 0 ? x0[0] / sp : x0[0] / sm;
  const double sqdt = std::sqrt(ens.dt);
  const std::int64_t steps = static_cast<std::int64_t>(ens.stride) * (ens.stored - 1);

  parallel_for(static_cast<std::int64_t>(ens.n), threads,
               [&](std::int64_t begin, std::int64_t end) {
    double xt[kMaxDim];
    for (std::int64_t path = begin; path < end; ++path) {
      PathRng rng(ens.seed, static_cast<std::uint64_t>(path));
      Stepper st(m.skew, ens.dt);
      st.init(z0);
      for (int j = 1; j < d; ++j) xt[j] = x0[j];
      double l = 0;
      const std::uint64_t base = static_cast<std::uint64_t>(path) *
                                 static_cast<std::uint64_t>(ens.stored);
      auto store = [&](std::int64_t k) {
        double* s = ens.states.data() + (base + static_cast<std::uint64_t>(k)) * d;
        const double zc = st.z();
        s[0] = zc >= 0 ? sp * zc : sm * zc;  // X1 = g(Z) pathwise
        for (int j = 1; j < d; ++j) s[j] = xt[j];
        ens.local_time[base + static_cast<std::uint64_t>(k)] = l;
      };
      store(0);
      std::int64_t next_store = 1;
      for (std::int64_t step = 1; step <= steps; ++step) {
        const bool plus_side = st.z() > 0;  // 0 counts as the minus side
        const Eigen::MatrixXd& M = plus_side ? m.M_plus : m.M_minus;
        const SkewIncrement inc = st.step(rng);
        const double dlx = lt_scale * inc.dl;
        l += dlx;
        double xi[kMaxDim];
        for (int j = 1; j < d; ++j) xi[j] = rng.next_normal();
        for (int j = 1; j < d; ++j) {
          double dx = M(j, 0) * inc.dw + m.K[j] * dlx;
          for (int k = 1; k <= j; ++k) dx += M(j, k) * sqdt * xi[k];
          xt[j] += dx;
        }
        if (step == next_store * ens.stride) {
          store(next_store);
          ++next_store;
        }
      }
    }
  });
}

}  // namespace

SkewBackend parse_backend(const std::string& name) {
  if (name == "grid_walk") return SkewBackend::grid_walk;
  if (name == "euler_mollified") return SkewBackend::euler_mollified;
  throw std::invalid_argument("unknown skew backend '" + name +
                              "' (expected grid_walk or euler_mollified)");
}

const char* backend_name(SkewBackend backend) {
  return backend == SkewBackend::grid_walk ? "grid_walk" : "euler_mollified";
}

SkewEnsemble simulate_skew_bm(double p, double T, double dt, std::uint64_t n,
                              std::uint64_t seed, SkewBackend backend, int threads,
                              int stored_states) {
  if (!(p > 0 && p < 1)) throw std::invalid_argument("skew parameter must lie in (0,1)");
  if (n == 0) throw std::invalid_argument("need at least one path");
  const StepPlan plan = plan_steps(T, dt, stored_states);

  SkewEnsemble ens;
  ens.p = p;
  ens.T = T;
  ens.dt = plan.dt;
  ens.stride = plan.stride;
  ens.stored = plan.stored;
  ens.n = n;
  ens.seed = seed;
  ens.backend = backend;
  ens.times.resize(static_cast<std::size_t>(plan.stored));
  for (std::int64_t k = 0; k < plan.stored; ++k)
    ens.times[static_cast<std::size_t>(k)] = static_cast<double>(k) * plan.stride * plan.dt;
  const std::uint64_t slots = n * static_cast<std::uint64_t>(plan.stored);
  ens.z.resize(slots);
  ens.l.resize(slots);
  ens.w.resize(slots);
  if (backend == SkewBackend::grid_walk)
    run_skew_ensemble<GridWalkStepper>(ens, threads);
  else
    run_skew_ensemble<MollifiedStepper>(ens, threads);
  return ens;
}

LimitEnsemble simulate_limit(const EffectiveModel& model, const double* x0, double T,
                             double dt, std::uint64_t n, std::uint64_t seed,
                             SkewBackend backend, int threads, int stored_states) {
  if (model.dim < 2) throw std::invalid_argument("model dimension must be at least 2");
  if (!(model.skew > 0 && model.skew < 1))
    throw std::invalid_argument("model skew parameter must lie in (0,1)");
  if (n == 0) throw std::invalid_argument("need at least one path");
  const StepPlan plan = plan_steps(T, dt, stored_states);

  LimitEnsemble ens;
  ens.model = model;
  ens.dim = model.dim;
  ens.T = T;
  ens.dt = plan.dt;
  ens.stride = plan.stride;
  ens.stored = plan.stored;
  ens.n = n;
  ens.seed = seed;
  ens.backend = backend;
  ens.times.resize(static_cast<std::size_t>(plan.stored));
  for (std::int64_t k = 0; k < plan.stored; ++k)
    ens.times[static_cast<std::size_t>(k)] = static_cast<double>(k) * plan.stride * plan.dt;
  const std::uint64_t slots = n * static_cast<std::uint64_t>(plan.stored);
  ens.states.resize(slots * static_cast<std::uint64_t>(model.dim));
  ens.local_time.resize(slots);
  if (backend == SkewBackend::grid_walk)
    run_limit_ensemble<GridWalkStepper>(ens, x0, threads);
  else
    run_limit_ensemble<MollifiedStepper>(ens, x0, threads);
  return ens;
}

void write_limit_csv(const LimitEnsemble& ensemble, std::ostream& os) {
  os << "path,t";
  for (int a = 1; a <= ensemble.dim; ++a) os << ",x" << a;
  os << ",L\n";
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
      std::snprintf(buf, sizeof buf, ",%.10g",
                    ensemble.local_time[path * static_cast<std::uint64_t>(ensemble.stored) + k]);
      os << buf << '\n';
    }
  }
}

Estimate martingale_residual(const LimitEnsemble& ensemble, const GluedTestFunction& f,
                             double lambda, bool enforce_domain) {
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
  const int d = ensemble.dim;
  const Eigen::VectorXd tg = f.c.segment(1, d - 1);
  const double glue = gluing_residual(ensemble.model, f.a_plus, f.a_minus, tg);
  if (enforce_domain && std::abs(glue) > 1e-12) {
    char buf[140];
    std::snprintf(buf, sizeof buf,
                  "test function violates the gluing identity by %.3e; "
                  "not in the generator domain", glue);
    throw std::invalid_argument(buf);
  }

  const std::int64_t stored = ensemble.stored;
  std::vector<double> disc(static_cast<std::size_t>(stored));
  for (std::int64_t k = 0; k < stored; ++k)
    disc[static_cast<std::size_t>(k)] = std::exp(-lambda * ensemble.times[static_cast<std::size_t>(k)]);

  std::vector<double> residuals(ensemble.n);
  for (std::uint64_t path = 0; path < ensemble.n; ++path) {
    double integral = 0;
    double prev_phi = 0;
    for (std::int64_t k = 0; k < stored; ++k) {
      const double* x = ensemble.state(path, k);
      const double phi = disc[static_cast<std::size_t>(k)] *
                         (lambda * f.eval(x, d) - f.generator(x, d, ensemble.model));
      if (k > 0) {
        const double dt_k = ensemble.times[static_cast<std::size_t>(k)] -
                            ensemble.times[static_cast<std::size_t>(k - 1)];
        integral += 0.5 * (prev_phi + phi) * dt_k;
      }
      prev_phi = phi;
    }
    const double* x_end = ensemble.state(path, stored - 1);
    const double* x_start = ensemble.state(path, 0);
    residuals[path] = disc[static_cast<std::size_t>(stored - 1)] * f.eval(x_end, d) -
                      f.eval(x_start, d) + integral;
  }
  Estimate e = mean_estimate(residuals);
  e.method = "martingale_residual";
  return e;
}

}  // namespace ifhom

#include "ifhom/strip.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "ifhom/linsolve.hpp"
#include "ifhom/operator.hpp"
#include "ifhom/rng.hpp"

namespace ifhom {

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

/// Trapezoid mass of the unit cell spanning planes [p0, p0 + n0].
double cell_mass(const StripGrid& grid, const Eigen::VectorXd& mu, int p0, int n0) {
  const std::int64_t nt = grid.transverse_size();
  const double w = grid.node_weight();
  CompensatedSum acc;
  for (int p = p0; p <= p0 + n0; ++p) {
    const double theta = (p == p0 || p == p0 + n0) ? 0.5 : 1.0;
    for (std::int64_t t = 0; t < nt; ++t) acc.add(theta * mu[grid.index(p, t)] * w);
  }
  return acc.total();
}

/// Least-squares (q, A) for fixed rho on the window, returning the residual RMS.
struct ProfilePoint {
  double q = 0, amplitude = 0, rms = 0;
};
ProfilePoint profile_ls(const std::vector<double>& m, int first, int last, double rho) {
  const int n = last - first + 1;
  double s1 = n, sr = 0, srr = 0, sm = 0, smr = 0;
  for (int j = first; j <= last; ++j) {
    const double r = std::pow(rho, j - first);
    sr += r;
    srr += r * r;
    sm += m[static_cast<std::size_t>(j)];
    smr += m[static_cast<std::size_t>(j)] * r;
  }
  const double det = s1 * srr - sr * sr;
  ProfilePoint out;
  if (std::abs(det) < 1e-14 * std::max(1.0, s1 * srr)) {
    // powers of rho indistinguishable from a constant: collapse to the mean
    out.q = sm / n;
    out.amplitude = 0;
  } else {
    out.q = (srr * sm - sr * smr) / det;
    out.amplitude = (s1 * smr - sr * sm) / det;
  }
  double ss = 0;
  for (int j = first; j <= last; ++j) {
    const double fit = out.q + out.amplitude * std::pow(rho, j - first);
    const double r = m[static_cast<std::size_t>(j)] - fit;
    ss += r * r;
  }
  out.rms = std::sqrt(ss / n);
  return out;
}

}  // namespace

SideFit fit_cell_masses(const std::vector<double>& masses, int first_cell, int last_cell) {
  if (first_cell < 0 || last_cell >= static_cast<int>(masses.size()) ||
      last_cell - first_cell + 1 < 4) {
    throw std::invalid_argument(
        "cell-mass fit needs at least 4 cells in range; increase strip_halfwidth");
  }
  double lo = masses[static_cast<std::size_t>(first_cell)];
  double hi = lo;
  double mean = 0;
  for (int j = first_cell; j <= last_cell; ++j) {
    const double v = masses[static_cast<std::size_t>(j)];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mean += v;
  }
  mean /= (last_cell - first_cell + 1);

  SideFit fit;
  if (hi - lo <= 1e-13 * std::max(std::abs(mean), 1e-300)) {
    fit.q = mean;
    fit.rho = 0;
    fit.amplitude = 0;
    fit.residual = hi - lo;
    fit.degenerate = true;
    return fit;
  }

  // profile least squares over the decay rate: coarse scan, then golden section
  const double rho_min = 1e-3, rho_max = 0.995;
  double best_rho = rho_min;
  double best_rms = profile_ls(masses, first_cell, last_cell, rho_min).rms;
  const int scan = 199;
  for (int k = 1; k <= scan; ++k) {
    const double rho = rho_min + (rho_max - rho_min) * k / scan;
    const double rms = profile_ls(masses, first_cell, last_cell, rho).rms;
    if (rms < best_rms) {
      best_rms = rms;
      best_rho = rho;
    }
  }
  const double step = (rho_max - rho_min) / scan;
  double a = std::max(rho_min, best_rho - step);
  double b = std::min(rho_max, best_rho + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = profile_ls(masses, first_cell, last_cell, x1).rms;
  double f2 = profile_ls(masses, first_cell, last_cell, x2).rms;
  for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = profile_ls(masses, first_cell, last_cell, x1).rms;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = profile_ls(masses, first_cell, last_cell, x2).rms;
    }
  }
  fit.rho = 0.5 * (a + b);
  const ProfilePoint p = profile_ls(masses, first_cell, last_cell, fit.rho);
  fit.q = p.q;
  fit.amplitude = p.amplitude;
  fit.residual = p.rms;
  fit.degenerate = false;
  return fit;
}

StripMeasure strip_invariant_measure(const InterfaceDrift& field, const GridSpec& spec,
                                     const TorusDensity& mu_plus,
                                     const TorusDensity& mu_minus) {
  spec.validate(true);
  if (spec.strip_halfwidth < field.eta() + 2) {
    throw std::invalid_argument("strip_halfwidth must be at least eta + 2");
  }
  for (const TorusDensity* td : {&mu_plus, &mu_minus}) {
    if (td->spec.dim != spec.dim)
      throw std::invalid_argument("tail density dimension does not match the strip");
    for (int a = 0; a < spec.dim; ++a) {
      if (td->spec.resolution[a] != spec.resolution[a])
        throw std::invalid_argument("tail density resolution does not match the strip");
    }
  }

  const int halo = 2 * kStencilRadius;
  StripGrid grid(spec, halo);
  DriftTable table = sample_on_grid(field, spec, halo);
  StripOperator op(grid, table);
  const std::vector<double> tail_p = to_std(mu_plus.values);
  const std::vector<double> tail_m = to_std(mu_minus.values);

  StripOperator::System sys = op.assemble_transpose(tail_p, tail_m);
  SparseSolver solver(sys.A);
  const Eigen::VectorXd mu_a = solver.solve(-sys.r_plus, kStripResidualTol);
  const Eigen::VectorXd mu_b = solver.solve(-sys.r_minus, kStripResidualTol);

  // Combine the two fundamental solutions so both end fluxes vanish.  Global
  // conservation makes the 2x2 flux matrix rank-deficient, so its smallest
  // singular vector is the (c_plus, c_minus) direction.
  const StripOperator::FluxDefect fa = op.flux_defect(mu_a, 1.0, 0.0, tail_p, tail_m);
  const StripOperator::FluxDefect fb = op.flux_defect(mu_b, 0.0, 1.0, tail_p, tail_m);
  Eigen::Matrix2d flux;
  flux << fa.plus, fb.plus, fa.minus, fb.minus;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(flux, Eigen::ComputeFullV);
  Eigen::Vector2d dir = svd.matrixV().col(1);
  if (dir[0] + dir[1] < 0) dir = -dir;
  const double ca = dir[0], cb = dir[1];

  StripMeasure out;
  out.spec = spec;
  out.eta = field.eta();
  out.halo = halo;
  out.values = ca * mu_a + cb * mu_b;
  out.c_plus = ca;
  out.c_minus = cb;
  out.flux_plus = ca * fa.plus + cb * fb.plus;
  out.flux_minus = ca * fa.minus + cb * fb.minus;

  const Eigen::VectorXd rhs = -(ca * sys.r_plus + cb * sys.r_minus);
  const double rhs_norm = rhs.norm();
  out.interior_residual = (sys.A * out.values - rhs).norm() / std::max(rhs_norm, 1e-300);
  if (out.interior_residual > kStripResidualTol) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "strip stationarity residual %.3e exceeds tolerance %.1e",
                  out.interior_residual, kStripResidualTol);
    throw std::runtime_error(msg);
  }
  if (out.values.minCoeff() <= 0) {
    throw std::runtime_error(
        "strip invariant measure not positive; refine the grid or enlarge the strip");
  }

  const int ks = spec.strip_halfwidth;
  const int n0 = spec.resolution[0];
  out.mass_plus.resize(static_cast<std::size_t>(ks));
  out.mass_minus.resize(static_cast<std::size_t>(ks));
  for (int j = 0; j < ks; ++j) {
    out.mass_plus[static_cast<std::size_t>(j)] = cell_mass(grid, out.values, (ks + j) * n0, n0);
    out.mass_minus[static_cast<std::size_t>(j)] =
        cell_mass(grid, out.values, (ks - j - 1) * n0, n0);
  }

  const int first = static_cast<int>(std::ceil(field.eta() + 1 - 1e-12));
  const int last = ks - 2;
  const SideFit fp = fit_cell_masses(out.mass_plus, first, last);
  const SideFit fm = fit_cell_masses(out.mass_minus, first, last);
  if (!(fp.q > 0) || !(fm.q > 0)) {
    throw std::runtime_error("cell-mass extrapolation produced a non-positive tail weight");
  }
  const double scale = 1.0 / (fp.q + fm.q);
  out.scale_factor = scale;
  out.values *= scale;
  out.c_plus *= scale;
  out.c_minus *= scale;
  out.flux_plus *= scale;
  out.flux_minus *= scale;
  for (double& m : out.mass_plus) m *= scale;
  for (double& m : out.mass_minus) m *= scale;
  return out;
}

CellMassFit limit_masses(const StripMeasure& measure) {
  const int ks = measure.spec.strip_halfwidth;
  const int first = static_cast<int>(std::ceil(measure.eta + 1 - 1e-12));
  const int last = ks - 2;
  const SideFit fp = fit_cell_masses(measure.mass_plus, first, last);
  const SideFit fm = fit_cell_masses(measure.mass_minus, first, last);

  CellMassFit fit;
  fit.first_cell = first;
  fit.last_cell = last;
  fit.rho_plus = fp.rho;
  fit.rho_minus = fm.rho;
  fit.amplitude_plus = fp.amplitude;
  fit.amplitude_minus = fm.amplitude;
  fit.degenerate_plus = fp.degenerate;
  fit.degenerate_minus = fm.degenerate;
  const double rel_p = fp.residual / std::max(std::abs(fp.q), 1e-300);
  const double rel_m = fm.residual / std::max(std::abs(fm.q), 1e-300);
  fit.residual = std::max(rel_p, rel_m);
  if (fit.residual > kMassFitResidualTol) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "cell-mass fit residual %.3e exceeds %.1e; increase strip_halfwidth",
                  fit.residual, kMassFitResidualTol);
    throw std::runtime_error(buf);
  }
  if (!(fp.q > 0) || !(fm.q > 0)) {
    throw std::runtime_error("cell-mass extrapolation produced a non-positive tail weight");
  }
  fit.q_plus = fp.q / (fp.q + fm.q);
  fit.q_minus = 1.0 - fit.q_plus;
  return fit;
}

void write_cell_masses_csv(const StripMeasure& measure, std::ostream& os) {
  os << "side,j,mass\n";
  char buf[64];
  for (std::size_t j = 0; j < measure.mass_plus.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g", measure.mass_plus[j]);
    os << "+," << j << ',' << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", measure.mass_minus[j]);
    os << "-," << j << ',' << buf << '\n';
  }
}

CellMassMC strip_cell_occupation_mc(const InterfaceDrift& field, int halfwidth,
                                    std::uint64_t n_cycles, double dt, std::uint64_t seed) {
  if (halfwidth < field.eta() + 2) throw std::invalid_argument("halfwidth must exceed eta + 2");
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  const int d = field.dim();
  const double sqdt = std::sqrt(dt);
  const std::uint64_t burn = n_cycles / 10 + 10;
  const std::uint64_t total = n_cycles + burn;

  PathRng rng(seed, 0);
  double x[kMaxDim] = {field.eta(), 0, 0, 0};
  double bvec[kMaxDim];

  const std::size_t cells = static_cast<std::size_t>(halfwidth);
  std::vector<double> occ_p(cells), occ_m(cells);
  // Welford accumulators over kept cycles
  std::vector<double> mean_p(cells, 0.0), m2_p(cells, 0.0);
  std::vector<double> mean_m(cells, 0.0), m2_m(cells, 0.0);
  std::uint64_t kept = 0;

  std::uint64_t steps_left = 400000000ull;  // global budget guard
  for (std::uint64_t cycle = 0; cycle < total; ++cycle) {
    std::fill(occ_p.begin(), occ_p.end(), 0.0);
    std::fill(occ_m.begin(), occ_m.end(), 0.0);
    // phase 0: run until |x1| >= halfwidth, then phase 1: until back to |x1| <= eta
    for (int phase = 0; phase < 2; ++phase) {
      while (true) {
        if (phase == 0 && std::abs(x[0]) >= halfwidth) break;
        if (phase == 1 && std::abs(x[0]) <= field.eta()) break;
        if (steps_left-- == 0)
          throw std::runtime_error("embedded-chain sampler exceeded its step budget");
        // occupation accrues at the pre-step position
        if (x[0] >= 0) {
          const int j = static_cast<int>(std::floor(x[0]));
          if (j < halfwidth) occ_p[static_cast<std::size_t>(j)] += dt;
        } else {
          const int j = static_cast<int>(std::floor(-x[0]));
          if (j < halfwidth) occ_m[static_cast<std::size_t>(j)] += dt;
        }
        field.eval(x, bvec);
        for (int a = 0; a < d; ++a) x[a] += bvec[a] * dt + sqdt * rng.next_normal();
        for (int a = 1; a < d; ++a) x[a] -= std::floor(x[a]);
      }
    }
    if (cycle >= burn) {
      ++kept;
      for (std::size_t c = 0; c < cells; ++c) {
        double delta = occ_p[c] - mean_p[c];
        mean_p[c] += delta / kept;
        m2_p[c] += delta * (occ_p[c] - mean_p[c]);
        delta = occ_m[c] - mean_m[c];
        mean_m[c] += delta / kept;
        m2_m[c] += delta * (occ_m[c] - mean_m[c]);
      }
    }
  }

  CellMassMC out;
  out.cycles = kept;
  auto pack = [&](const std::vector<double>& mean, const std::vector<double>& m2) {
    std::vector<Estimate> v(cells);
    for (std::size_t c = 0; c < cells; ++c) {
      Estimate e;
      e.value = mean[c];
      e.se = kept > 1 ? std::sqrt(m2[c] / (kept - 1) / kept) : 0.0;
      e.n = kept;
      e.method = "embedded_chain_occupation";
      v[c] = e;
    }
    return v;
  };
  out.mass_plus = pack(mean_p, m2_p);
  out.mass_minus = pack(mean_m, m2_m);
  return out;
}

}  // namespace ifhom

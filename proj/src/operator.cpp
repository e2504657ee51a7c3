#include "ifhom/operator.hpp"

#include <stdexcept>

namespace ifhom {

AxisStencil make_axis_stencil(double h) {
  AxisStencil s;
  const double ih2 = 1.0 / (12.0 * h * h);
  const double ih1 = 1.0 / (12.0 * h);
  s.d2[0] = -1.0 * ih2;
  s.d2[1] = 16.0 * ih2;
  s.d2[2] = -30.0 * ih2;
  s.d2[3] = 16.0 * ih2;
  s.d2[4] = -1.0 * ih2;
  s.d1[0] = 1.0 * ih1;
  s.d1[1] = -8.0 * ih1;
  s.d1[2] = 0.0;
  s.d1[3] = 8.0 * ih1;
  s.d1[4] = -1.0 * ih1;
  return s;
}

TorusOperator::TorusOperator(const TorusGrid& grid, std::vector<double> drift_values)
    : grid_(grid), drift_(std::move(drift_values)) {
  if (drift_.size() != static_cast<std::size_t>(grid_.size()) * grid_.dim())
    throw std::invalid_argument("drift table size does not match grid");
}

Eigen::VectorXd TorusOperator::apply(const Eigen::VectorXd& g) const {
  const int d = grid_.dim();
  Eigen::VectorXd out(grid_.size());
  std::vector<AxisStencil> st(d);
  for (int a = 0; a < d; ++a) st[a] = make_axis_stencil(grid_.spacing(a));
  for (std::int64_t i = 0; i < grid_.size(); ++i) {
    const double* b = &drift_[static_cast<std::size_t>(i) * d];
    double acc = 0;
    for (int a = 0; a < d; ++a) {
      for (int s = -kStencilRadius; s <= kStencilRadius; ++s) {
        const double c = 0.5 * st[a].d2[s + 2] + b[a] * st[a].d1[s + 2];
        if (c == 0.0) continue;
        acc += c * g[grid_.shift(i, a, s)];
      }
    }
    out[i] = acc;
  }
  return out;
}

Eigen::VectorXd TorusOperator::apply_transpose(const Eigen::VectorXd& mu) const {
  const int d = grid_.dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid_.size());
  std::vector<AxisStencil> st(d);
  for (int a = 0; a < d; ++a) st[a] = make_axis_stencil(grid_.spacing(a));
  // (L^T mu)_j = sum_i L_{ij} mu_i: scatter every generator row i
  for (std::int64_t i = 0; i < grid_.size(); ++i) {
    const double* b = &drift_[static_cast<std::size_t>(i) * d];
    const double mi = mu[i];
    for (int a = 0; a < d; ++a) {
      for (int s = -kStencilRadius; s <= kStencilRadius; ++s) {
        const double c = 0.5 * st[a].d2[s + 2] + b[a] * st[a].d1[s + 2];
        if (c == 0.0) continue;
        out[grid_.shift(i, a, s)] += c * mi;
      }
    }
  }
  return out;
}

Eigen::SparseMatrix<double> TorusOperator::assemble() const {
  const int d = grid_.dim();
  std::vector<AxisStencil> st(d);
  for (int a = 0; a < d; ++a) st[a] = make_axis_stencil(grid_.spacing(a));
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(grid_.size()) * (4 * d + 1));
  for (std::int64_t i = 0; i < grid_.size(); ++i) {
    const double* b = &drift_[static_cast<std::size_t>(i) * d];
    double diag = 0;
    for (int a = 0; a < d; ++a) {
      diag += 0.5 * st[a].d2[2];
      for (int s = -kStencilRadius; s <= kStencilRadius; ++s) {
        if (s == 0) continue;
        const double c = 0.5 * st[a].d2[s + 2] + b[a] * st[a].d1[s + 2];
        trips.emplace_back(static_cast<int>(i), static_cast<int>(grid_.shift(i, a, s)), c);
      }
    }
    trips.emplace_back(static_cast<int>(i), static_cast<int>(i), diag);
  }
  Eigen::SparseMatrix<double> L(grid_.size(), grid_.size());
  L.setFromTriplets(trips.begin(), trips.end());
  L.makeCompressed();
  return L;
}

Eigen::VectorXd TorusOperator::gradient(const Eigen::VectorXd& g, int axis) const {
  const AxisStencil st = make_axis_stencil(grid_.spacing(axis));
  Eigen::VectorXd out(grid_.size());
  for (std::int64_t i = 0; i < grid_.size(); ++i) {
    double acc = 0;
    for (int s = -kStencilRadius; s <= kStencilRadius; ++s) {
      if (st.d1[s + 2] == 0.0) continue;
      acc += st.d1[s + 2] * g[grid_.shift(i, axis, s)];
    }
    out[i] = acc;
  }
  return out;
}

StripOperator::StripOperator(const StripGrid& grid, const DriftTable& drift)
    : grid_(grid), table_(drift) {
  if (grid_.halo() < kStencilRadius)
    throw std::invalid_argument("strip halo narrower than the stencil radius");
  if (table_.halo < 2 * kStencilRadius)
    throw std::invalid_argument("drift table halo must cover two stencil radii");
}

StripOperator::System StripOperator::assemble_transpose(
    const std::vector<double>& tail_plus, const std::vector<double>& tail_minus) const {
  const int d = grid_.dim();
  const std::int64_t nt = grid_.transverse_size();
  const std::int64_t n = grid_.size();
  const TorusGrid torus(GridSpec{d, table_.spec.resolution, 0});
  if (tail_plus.size() != static_cast<std::size_t>(torus.size()) ||
      tail_minus.size() != static_cast<std::size_t>(torus.size()))
    throw std::invalid_argument("tail density size does not match grid");

  std::vector<AxisStencil> st(d);
  for (int a = 0; a < d; ++a) st[a] = make_axis_stencil(grid_.spacing(a));
  const int r = kStencilRadius;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) * (4 * d + 1));
  Eigen::VectorXd rp = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd rm = Eigen::VectorXd::Zero(n);

  // Equation at strip node j: (L^T mu)_j = sum over stencil neighbours m of
  // L_{mj} mu_m, where L_{mj} is the entry of generator row m at column j.
  // With m = j + s e_a the row-m stencil offset pointing back to j is -s, so
  // L_{mj} = 0.5 d2[s] + b_a(x_m) d1[-s] (d2 symmetric, d1 antisymmetric).
  for (int p = 0; p < grid_.planes(); ++p) {
    for (std::int64_t t = 0; t < nt; ++t) {
      const std::int64_t j = grid_.index(p, t);
      double diag = 0;
      for (int a = 0; a < d; ++a) diag += 0.5 * st[a].d2[2];
      trips.emplace_back(static_cast<int>(j), static_cast<int>(j), diag);
      for (int a = 0; a < d; ++a) {
        for (int s = -r; s <= r; ++s) {
          if (s == 0) continue;
          int pm = p;
          std::int64_t tm = t;
          if (a == 0)
            pm = p + s;
          else
            tm = grid_.trans_shift(t, a, s);
          const double* bm = table_.at(grid_, pm, tm);
          const double c = 0.5 * st[a].d2[s + 2] + bm[a] * st[a].d1[-s + 2];
          if (c == 0.0) continue;
          if (pm >= grid_.planes())
            rp[j] += c * tail_plus[grid_.torus_index(torus, pm, tm)];
          else if (pm < 0)
            rm[j] += c * tail_minus[grid_.torus_index(torus, pm, tm)];
          else
            trips.emplace_back(static_cast<int>(j), static_cast<int>(grid_.index(pm, tm)), c);
        }
      }
    }
  }

  System sys;
  sys.A.resize(n, n);
  sys.A.setFromTriplets(trips.begin(), trips.end());
  sys.A.makeCompressed();
  sys.r_plus = std::move(rp);
  sys.r_minus = std::move(rm);
  return sys;
}

StripOperator::FluxDefect StripOperator::flux_defect(
    const Eigen::VectorXd& mu, double c_plus, double c_minus,
    const std::vector<double>& tail_plus, const std::vector<double>& tail_minus) const {
  const int d = grid_.dim();
  const std::int64_t nt = grid_.transverse_size();
  const TorusGrid torus(GridSpec{d, table_.spec.resolution, 0});
  const int r = kStencilRadius;
  const double w = grid_.node_weight();

  auto value = [&](int plane, std::int64_t t) -> double {
    if (plane >= grid_.planes()) return c_plus * tail_plus[grid_.torus_index(torus, plane, t)];
    if (plane < 0) return c_minus * tail_minus[grid_.torus_index(torus, plane, t)];
    return mu[grid_.index(plane, t)];
  };

  std::vector<AxisStencil> st(d);
  for (int a = 0; a < d; ++a) st[a] = make_axis_stencil(grid_.spacing(a));

  // Stationarity residual (L^T mu)_k at a node k, with mu extended by its tails.
  auto lt_residual_at = [&](int plane_k, std::int64_t t_k) -> double {
    double acc = 0;
    double diag = 0;
    for (int a = 0; a < d; ++a) diag += 0.5 * st[a].d2[2];
    acc += diag * value(plane_k, t_k);
    for (int a = 0; a < d; ++a) {
      for (int s = -r; s <= r; ++s) {
        if (s == 0) continue;
        int pm = plane_k;
        std::int64_t tm = t_k;
        if (a == 0)
          pm = plane_k + s;
        else
          tm = grid_.trans_shift(t_k, a, s);
        const double* bm = table_.at(grid_, pm, tm);
        const double c = 0.5 * st[a].d2[s + 2] + bm[a] * st[a].d1[-s + 2];
        if (c == 0.0) continue;
        acc += c * value(pm, tm);
      }
    }
    return acc;
  };

  FluxDefect fd;
  for (int q = 0; q < r; ++q) {
    for (std::int64_t t = 0; t < nt; ++t) {
      fd.plus += lt_residual_at(grid_.planes() + q, t) * w;
      fd.minus += lt_residual_at(-1 - q, t) * w;
    }
  }
  return fd;
}

}  // namespace ifhom

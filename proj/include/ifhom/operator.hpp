#pragma once

/// @file operator.hpp
/// @brief Finite-difference discretization of the generator L = (1/2) Laplacian
///        + b . grad on the torus and on the interface strip.
///
/// Fourth-order centred stencils (radius 2) along every axis; the advection term
/// uses the drift sampled at the row node, so the discrete adjoint is exactly the
/// matrix transpose and the duality <L g, mu> = <g, L^T mu> holds to roundoff.

#include <Eigen/Sparse>
#include <vector>

#include "ifhom/field.hpp"
#include "ifhom/geometry.hpp"

namespace ifhom {

/// Stencil radius of the discretization.
inline constexpr int kStencilRadius = 2;

/// Generator on the torus for a periodic drift sampled at the grid nodes.
class TorusOperator {
 public:
  TorusOperator(const TorusGrid& grid, std::vector<double> drift_values);

  const TorusGrid& grid() const { return grid_; }
  const std::vector<double>& drift() const { return drift_; }

  /// Apply L to a grid function (matrix-free).
  Eigen::VectorXd apply(const Eigen::VectorXd& g) const;
  /// Apply the adjoint L^T (matrix transpose of apply).
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& mu) const;
  /// Assemble L as a sparse matrix (rows = nodes).
  Eigen::SparseMatrix<double> assemble() const;
  /// Centred fourth-order gradient component d/dx_axis of a grid function.
  Eigen::VectorXd gradient(const Eigen::VectorXd& g, int axis) const;

 private:
  TorusGrid grid_;
  std::vector<double> drift_;  // idx*dim + a
};

/// Generator transpose on the strip with Dirichlet tail data in the halo.
///
/// Unknowns live on the strip planes x1 in [-K_s, K_s]; the halo (kStencilRadius
/// planes beyond each end) carries multiples of the periodic tail densities.
class StripOperator {
 public:
  StripOperator(const StripGrid& grid, const DriftTable& drift);

  const StripGrid& grid() const { return grid_; }

  /// Assemble A = L^T restricted to strip rows/columns together with the halo
  /// contribution vectors: row i of the stationarity system reads
  ///   (A mu)_i + c_plus * r_plus_i + c_minus * r_minus_i = 0,
  /// where r_+- collect the halo columns evaluated on the tail densities.
  struct System {
    Eigen::SparseMatrix<double> A;
    Eigen::VectorXd r_plus, r_minus;
  };
  System assemble_transpose(const std::vector<double>& tail_plus,
                            const std::vector<double>& tail_minus) const;

  /// Residuals of the stationarity equations at the first halo planes beyond
  /// each strip end, evaluated on the solved density extended by its tails.
  /// These are the net probability fluxes through the two ends; the invariant
  /// measure of the infinite strip has both equal to zero.
  struct FluxDefect {
    double plus = 0, minus = 0;
  };
  FluxDefect flux_defect(const Eigen::VectorXd& mu, double c_plus, double c_minus,
                         const std::vector<double>& tail_plus,
                         const std::vector<double>& tail_minus) const;

  /// Apply L (not the transpose) to a grid function given together with halo
  /// values; `values(plane_ext, t)` must be defined for plane_ext in
  /// [-halo, planes + halo).  Returns L g on the strip planes.
  template <typename ValueFn>
  Eigen::VectorXd apply_generator(ValueFn&& values) const;

  /// Drift component at a strip node (row-node sampling used by the stencil).
  double drift_at(int plane, std::int64_t t, int axis) const {
    return table_.at(grid_, plane, t)[axis];
  }

 private:
  // stencil coefficient for offset s in {-2..2}: contribution of node (row+s*e_a)
  // to (L g)_row along axis a
  double coef(int axis, int s, double b_axis) const;

  StripGrid grid_;
  DriftTable table_;
};

/// Fourth-order second- and first-derivative stencil weights (offsets -2..2),
/// already divided by h^2 and h respectively.
struct AxisStencil {
  double d2[5];
  double d1[5];
};
AxisStencil make_axis_stencil(double h);

template <typename ValueFn>
Eigen::VectorXd StripOperator::apply_generator(ValueFn&& values) const {
  const int d = grid_.dim();
  const std::int64_t nt = grid_.transverse_size();
  Eigen::VectorXd out(grid_.size());
  std::vector<AxisStencil> st(d);
  for (int a = 0; a < d; ++a) st[a] = make_axis_stencil(grid_.spacing(a));
  for (int p = 0; p < grid_.planes(); ++p) {
    for (std::int64_t t = 0; t < nt; ++t) {
      const double* b = table_.at(grid_, p, t);
      double acc = 0;
      for (int a = 0; a < d; ++a) {
        for (int s = -kStencilRadius; s <= kStencilRadius; ++s) {
          const double c = 0.5 * st[a].d2[s + 2] + b[a] * st[a].d1[s + 2];
          if (c == 0.0) continue;
          double v;
          if (a == 0)
            v = values(p + s, t);
          else
            v = values(p, grid_.trans_shift(t, a, s));
          acc += c * v;
        }
      }
      out[grid_.index(p, t)] = acc;
    }
  }
  return out;
}

}  // namespace ifhom

#include "ifhom/torus_cell.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ifhom/linsolve.hpp"
#include "ifhom/operator.hpp"
#include "ifhom/stats.hpp"

namespace ifhom {

TorusDensity stationary_density(const PeriodicDrift& drift, const GridSpec& spec) {
  spec.validate();
  const TorusGrid grid(spec);
  TorusOperator op(grid, sample_torus(drift, grid));
  const double w = grid.node_weight();
  const std::int64_t n = grid.size();

  Eigen::SparseMatrix<double> L = op.assemble();
  Eigen::SparseMatrix<double> Lt = Eigen::SparseMatrix<double>(L.transpose());

  // Replace the first stationarity equation by the normalization sum(mu) w = 1,
  // with the row scaled to the magnitude of the operator rows (entry wildly
  // smaller than the ~1/h^2 stencil entries ruins the LU's pivot scaling).
  const double row_entry =
      2.5 * spec.dim / (grid.spacing(0) * grid.spacing(0) * std::sqrt(double(n)));
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(Lt.nonZeros()) + n);
  for (int k = 0; k < Lt.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(Lt, k); it; ++it)
      if (it.row() != 0) trips.emplace_back(it.row(), it.col(), it.value());
  for (std::int64_t j = 0; j < n; ++j)
    trips.emplace_back(0, static_cast<int>(j), row_entry);
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());

  // Solve with sum(mu) = 1 (node sum, not mass) so the right-hand side stays
  // O(row_entry); the exact Lebesgue mass is restored afterwards.
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[0] = row_entry;
  SparseSolver solver(A);
  Eigen::VectorXd mu = solver.solve(rhs, 1e-9);
  mu /= mu.sum() * w;

  TorusDensity density;
  density.spec = spec;
  density.values = mu;
  const Eigen::VectorXd res = op.apply_transpose(mu);
  density.residual_l2 = std::sqrt(res.array().square().sum() * w);
  density.residual_max = res.array().abs().maxCoeff();
  density.min_value = mu.minCoeff();

  if (density.min_value < kDensityNegativityTol) {
    char msg[128];
    std::snprintf(msg, sizeof msg,
                  "stationary density has a negative node value (%.3e); refine the grid",
                  density.min_value);
    throw std::runtime_error(msg);
  }
  // The absolute default tolerance is not reachable once the ~1/h^2 stencil
  // entries push the round-off floor of evaluating L^T mu above it; gate at
  // the larger of the two.
  double op_scale = 0;
  for (std::int64_t j = 0; j < n; ++j)
    op_scale = std::max(op_scale, std::abs(Lt.coeff(j, j)));
  const double tol =
      std::max(kDensityResidualTol, 256.0 * 1.1e-16 * op_scale * mu.cwiseAbs().maxCoeff());
  if (density.residual_l2 > tol) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "stationary density residual %.3e exceeds %.3e",
                  density.residual_l2, tol);
    throw std::runtime_error(msg);
  }
  return density;
}

Eigen::VectorXd centering_integral(const PeriodicDrift& drift, const TorusDensity& mu) {
  const TorusGrid grid(mu.spec);
  const std::vector<double> b = sample_torus(drift, grid);
  const int d = grid.dim();
  const double w = grid.node_weight();
  Eigen::VectorXd out(d);
  for (int a = 0; a < d; ++a) {
    CompensatedSum s;
    for (std::int64_t i = 0; i < grid.size(); ++i)
      s.add(b[static_cast<std::size_t>(i) * d + a] * mu.values[i]);
    out[a] = s.total() * w;
  }
  return out;
}

Corrector solve_corrector(const PeriodicDrift& drift, const TorusDensity& mu) {
  const TorusGrid grid(mu.spec);
  const int d = grid.dim();
  const std::int64_t n = grid.size();
  const double w = grid.node_weight();
  const std::vector<double> b = sample_torus(drift, grid);

  const Eigen::VectorXd cent = centering_integral(drift, mu);
  for (int a = 0; a < d; ++a)
    if (std::abs(cent[a]) > kCenteringTol)
    {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "corrector system is singular: drift is not centered (int b_%d dmu = "
                    "%.3e); the centering condition requires 0",
                    a + 1, cent[a]);
      throw std::runtime_error(msg);
    }

  TorusOperator op(grid, b);
  Eigen::SparseMatrix<double> L = op.assemble();

  // bordered system [[L, m], [m^T, 0]] with m_i = mu_i w pins <g>_mu = 0 and
  // absorbs the one-dimensional kernel; the multiplier reports any residual
  // centering defect.   The border is scaled to the ~1/h^2 magnitude of the
  // stencil rows so the LU's pivot scaling stays healthy at fine grids.
  const double border_scale =
      2.5 * d / (grid.spacing(0) * grid.spacing(0)) * std::sqrt(double(n));
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(L.nonZeros()) + 2 * n);
  for (int k = 0; k < L.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (std::int64_t i = 0; i < n; ++i) {
    const double m = mu.values[i] * w * border_scale;
    trips.emplace_back(static_cast<int>(i), static_cast<int>(n), m);
    trips.emplace_back(static_cast<int>(n), static_cast<int>(i), m);
  }
  Eigen::SparseMatrix<double> A(n + 1, n + 1);
  A.setFromTriplets(trips.begin(), trips.end());
  SparseSolver solver(A);

  Corrector out;
  out.spec = mu.spec;
  out.g.resize(d);
  out.grad.assign(d, std::vector<Eigen::VectorXd>(d));
  out.multiplier.resize(d);
  for (int comp = 0; comp < d; ++comp) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    for (std::int64_t i = 0; i < n; ++i) rhs[i] = -b[static_cast<std::size_t>(i) * d + comp];
    const Eigen::VectorXd sol = solver.solve(rhs, 1e-9);
    out.multiplier[comp] = sol[n] * border_scale;
    if (std::abs(out.multiplier[comp]) > 1e-6) {
      char msg[128];
      std::snprintf(msg, sizeof msg,
                    "corrector solve produced multiplier %.3e: drift violates the "
                    "centering condition",
                    out.multiplier[comp]);
      throw std::runtime_error(msg);
    }
    Eigen::VectorXd g = sol.head(n);
    // the border already pins the mean; subtract the roundoff remainder
    CompensatedSum mean;
    for (std::int64_t i = 0; i < n; ++i) mean.add(g[i] * mu.values[i] * w);
    g.array() -= mean.total();
    CompensatedSum check;
    for (std::int64_t i = 0; i < n; ++i) check.add(g[i] * mu.values[i] * w);
    if (std::abs(check.total()) > kCorrectorCenterTol)
      throw std::runtime_error("corrector component failed the mean-zero check");
    out.g[comp] = std::move(g);
    for (int axis = 0; axis < d; ++axis)
      out.grad[comp][axis] = op.gradient(out.g[comp], axis);
  }
  return out;
}

Eigen::MatrixXd effective_tensor(const Corrector& corrector, const TorusDensity& mu) {
  const TorusGrid grid(mu.spec);
  const int d = grid.dim();
  const double w = grid.node_weight();
  std::vector<std::vector<CompensatedSum>> acc(d, std::vector<CompensatedSum>(d));
  for (std::int64_t idx = 0; idx < grid.size(); ++idx) {
    const double mw = mu.values[idx] * w;
    double sigma[kMaxDim][kMaxDim];  // sigma[i][k] = delta_ik + d_k g_i
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k)
        sigma[i][k] = (i == k ? 1.0 : 0.0) + corrector.grad[i][k][idx];
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        double dot = 0;
        for (int k = 0; k < d; ++k) dot += sigma[i][k] * sigma[j][k];
        acc[i][j].add(mw * dot);
      }
  }
  Eigen::MatrixXd D(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) D(i, j) = D(j, i) = acc[i][j].total();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(D);
  if (eig.eigenvalues().minCoeff() < kTensorEigenFloor)
  {
    char msg[128];
    std::snprintf(msg, sizeof msg,
                  "effective tensor lost positive semi-definiteness (min eigenvalue %.3e)",
                  eig.eigenvalues().minCoeff());
    throw std::runtime_error(msg);
  }
  return D;
}

CellSolution solve_cell(const PeriodicDrift& drift, const GridSpec& spec) {
  CellSolution cell;
  cell.mu = stationary_density(drift, spec);
  cell.centering = centering_integral(drift, cell.mu);
  cell.corrector = solve_corrector(drift, cell.mu);
  cell.D = effective_tensor(cell.corrector, cell.mu);
  return cell;
}

}  // namespace ifhom

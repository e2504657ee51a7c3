#pragma once

/// @file torus_cell.hpp
/// @brief Cell problems on the unit torus: stationary density of the generator
///        L = (1/2) Laplacian + b . grad, the corrector g solving L g = -b with
///        <g>_mu = 0, and the effective diffusion tensor
///        D_ij = int (delta_ik + d_k g_i)(delta_jk + d_k g_j) dmu.

#include <Eigen/Dense>
#include <vector>

#include "ifhom/field.hpp"
#include "ifhom/geometry.hpp"

namespace ifhom {

// numerical contract of the cell solver
inline constexpr double kDensityResidualTol = 1e-10;  // |L^T mu| in the weighted L2 norm
inline constexpr double kDensityNegativityTol = -1e-12;
inline constexpr double kCenteringTol = 1e-8;         // |int b dmu| per component
inline constexpr double kCorrectorCenterTol = 1e-10;  // |int g dmu| after the solve
inline constexpr double kTensorSymmetryTol = 1e-12;
inline constexpr double kTensorEigenFloor = -1e-10;

/// Stationary density of the cell generator: L^T mu = 0, mu >= 0, int mu = 1.
struct TorusDensity {
  GridSpec spec;
  Eigen::VectorXd values;   // node values of the density (Lebesgue-normalized)
  double residual_l2 = 0;   // sqrt(sum (L^T mu)^2 w)
  double residual_max = 0;
  double min_value = 0;
};

/// Componentwise corrector with precomputed gradient tables.
struct Corrector {
  GridSpec spec;
  std::vector<Eigen::VectorXd> g;                  // g[i], i = 0..dim-1
  std::vector<std::vector<Eigen::VectorXd>> grad;  // grad[i][k] = d_k g_i
  std::vector<double> multiplier;                  // Lagrange multiplier per component
};

/// Everything the downstream interface model needs from one periodic tail.
struct CellSolution {
  TorusDensity mu;
  Corrector corrector;
  Eigen::MatrixXd D;
  Eigen::VectorXd centering;  // int b dmu, checked against kCenteringTol
};

/// Solve L^T mu = 0 with the normalization sum(mu) w = 1.
TorusDensity stationary_density(const PeriodicDrift& drift, const GridSpec& spec);

/// Quadrature of b against the density, one entry per component.
Eigen::VectorXd centering_integral(const PeriodicDrift& drift, const TorusDensity& mu);

/// Solve L g_i = -b_i with <g_i>_mu = 0 for every component; throws if the
/// centering condition fails (the system is singular exactly in that case).
Corrector solve_corrector(const PeriodicDrift& drift, const TorusDensity& mu);

/// Effective diffusion tensor from corrector gradients; symmetrized and checked
/// for positive semi-definiteness.
Eigen::MatrixXd effective_tensor(const Corrector& corrector, const TorusDensity& mu);

/// Density + corrector + tensor in one call.
CellSolution solve_cell(const PeriodicDrift& drift, const GridSpec& spec);

}  // namespace ifhom

#pragma once

/// @file strip.hpp
/// @brief Sigma-finite invariant measure of the interface diffusion on the strip
///        [-K_s, K_s] x T^{d-1}, its per-cell masses, and the exponential fit
///        extracting the limiting tail weights q+-.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ifhom/field.hpp"
#include "ifhom/geometry.hpp"
#include "ifhom/stats.hpp"
#include "ifhom/torus_cell.hpp"

namespace ifhom {

inline constexpr double kStripResidualTol = 1e-10;  // relative interior residual
inline constexpr double kMassFitResidualTol = 1e-3;  // relative; else K_s too small
inline constexpr double kTruncationTol = 1e-6;       // q drift under K_s -> K_s + 2

/// Invariant measure on the truncated strip, normalized so q+ + q- = 1.
struct StripMeasure {
  GridSpec spec;
  double eta = 0;
  int halo = 0;
  Eigen::VectorXd values;           // strip-node values
  double c_plus = 0, c_minus = 0;   // tail multipliers: mu ~ c_+- mu_+- beyond +-K_s
  double scale_factor = 0;          // normalization applied to the raw two-solve combination
  double interior_residual = 0;     // relative residual of the stationarity equations
  double flux_plus = 0, flux_minus = 0;  // boundary flux defects after combination
  std::vector<double> mass_plus;    // mass of [j, j+1] x T^{d-1}, j = 0..K_s-1
  std::vector<double> mass_minus;   // mass of [-j-1, -j] x T^{d-1}
};

/// Exponential fit m_j = q + A rho^j per side.
struct CellMassFit {
  double q_plus = 0, q_minus = 0;
  double rho_plus = 0, rho_minus = 0;
  double amplitude_plus = 0, amplitude_minus = 0;
  double residual = 0;  // max over the two sides, relative to q
  bool degenerate_plus = false, degenerate_minus = false;  // constant masses
  int first_cell = 0, last_cell = 0;  // fitted cell range
};

/// Solve the truncated stationarity problem with Dirichlet tail data
/// c_+- mu_+- in the halo, combining the two fundamental solutions so the net
/// probability flux through the strip vanishes; normalized so q+ + q- = 1.
StripMeasure strip_invariant_measure(const InterfaceDrift& field, const GridSpec& spec,
                                     const TorusDensity& mu_plus,
                                     const TorusDensity& mu_minus);

/// Fit m_j = q + A rho^j on the cells beyond x1 = eta + 1 (outermost cell
/// excluded); needs at least 4 cells per side in that range.
CellMassFit limit_masses(const StripMeasure& measure);

/// Single-side fit on a raw mass sequence (cells first..last inclusive).
struct SideFit {
  double q = 0, rho = 0, amplitude = 0, residual = 0;
  bool degenerate = false;
};
SideFit fit_cell_masses(const std::vector<double>& masses, int first_cell, int last_cell);

/// Write the per-cell masses as CSV rows "side,j,mass", interleaving the two
/// sides by distance from the interface.
void write_cell_masses_csv(const StripMeasure& measure, std::ostream& os);

/// Monte Carlo cross-check of the cell masses via the embedded interface chain:
/// excursions from the interface boundary that reach |x1| = K_s and return.
/// Returns per-cell occupation-time estimates (arbitrary common normalization).
struct CellMassMC {
  std::vector<Estimate> mass_plus, mass_minus;
  std::uint64_t cycles = 0;
};
CellMassMC strip_cell_occupation_mc(const InterfaceDrift& field, int halfwidth,
                                    std::uint64_t n_cycles, double dt, std::uint64_t seed);

}  // namespace ifhom

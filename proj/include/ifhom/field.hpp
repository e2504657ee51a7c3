#pragma once

/// @file field.hpp
/// @brief Drift fields for the interface problem: two smooth unit-periodic tails
///        glued across the strip |x1| <= eta, periodic in the transverse directions.

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ifhom/geometry.hpp"

namespace ifhom {

/// Smooth drift that is 1-periodic in every coordinate.
class PeriodicDrift {
 public:
  using Eval = std::function<void(const double* x, double* b)>;

  PeriodicDrift() = default;
  PeriodicDrift(int dim, Eval eval, std::string name = "");

  int dim() const { return dim_; }
  const std::string& name() const { return name_; }
  /// Evaluate at any point; coordinates are reduced mod 1 before evaluation.
  void eval(const double* x, double* b) const;

 private:
  int dim_ = 0;
  Eval eval_;
  std::string name_;
};

/// Drift field of the interface equation: equals tail_plus for x1 >= eta,
/// tail_minus for x1 <= -eta, and an arbitrary smooth transition in between.
/// Periodic (period 1) in all transverse coordinates everywhere.
class InterfaceDrift {
 public:
  using Eval = std::function<void(const double* x, double* b)>;

  InterfaceDrift() = default;
  InterfaceDrift(int dim, double eta, Eval core, PeriodicDrift tail_plus,
                 PeriodicDrift tail_minus, std::string name = "");

  int dim() const { return dim_; }
  double eta() const { return eta_; }
  const std::string& name() const { return name_; }
  const PeriodicDrift& tail_plus() const { return plus_; }
  const PeriodicDrift& tail_minus() const { return minus_; }
  /// Evaluate the full field; x1 may be any real, transverse coordinates wrap.
  void eval(const double* x, double* b) const;

 private:
  int dim_ = 0;
  double eta_ = 1.0;
  Eval core_;  // used on |x1| < eta; must match the tails smoothly at +-eta
  PeriodicDrift plus_, minus_;
  std::string name_;
};

/// Result of validate_drift: quantitative violations of the field contract.
struct ValidationReport {
  double sup_norm = 0;                  // max |b| over the sampled strip
  double max_transverse_violation = 0;  // |b(x) - b(x + e_j)|, j >= 2
  double max_tail_mismatch = 0;         // |b(x) - b_tail(x)| for |x1| >= eta
  double max_second_difference = 0;     // smoothness proxy: centred 2nd differences
  bool finite = true;
  std::vector<std::string> messages;

  bool passed(double tol = 1e-10) const;
};

/// Sample the field on a strip of half-width `x1_halfwidth` at the given
/// resolution, checking periodicity, tail agreement, finiteness, and a
/// bounded-second-difference smoothness proxy.
ValidationReport validate_drift(const InterfaceDrift& field, int resolution = 32,
                                double x1_halfwidth = 0.0 /* 0 = eta + 2 */);

/// Grid samples of the drift over the strip (CSV export: x1..xd,b1..bd).
struct DriftTable {
  GridSpec spec;
  double eta = 0;
  int halo = 0;                 // extra planes beyond each strip end
  std::vector<double> values;   // ((plane)*trans + t)*dim + a, plane 0 = lowest halo plane

  int planes_total() const;
  /// Value pointer for an extended plane index in [-halo, strip_planes + halo).
  const double* at(const StripGrid& grid, int plane_ext, std::int64_t t) const;
  void write_csv(std::ostream& os) const;  // strip planes only, index order
};

DriftTable sample_on_grid(const InterfaceDrift& field, const GridSpec& spec, int halo);

/// Sample a periodic drift on the torus; layout idx*dim + a.
std::vector<double> sample_torus(const PeriodicDrift& drift, const TorusGrid& grid);

/// Construct one of the built-in fields.  Unknown names or parameters throw.
///   zero         (dim)                          b = 0 everywhere
///   paper_shear  (amplitude, eta; dim = 2)      b = (0, amplitude * bump(x1/eta))
///   torus_shear  (c, dim)                       b = (0, c sin 2 pi x1, 0...), no interface
///   gradient1d   (a, dim)                       b = -grad V, V = a cos 2 pi x1
///   two_sided    (a_plus, a_minus, c_plus, c_minus, swirl, eta, dim)
///                tails b+- = (2 pi a+- sin 2 pi x1, c+- sin 2 pi x1, 0...),
///                blended across the strip plus a localized swirl in b1
InterfaceDrift builtin_field(const std::string& name,
                             const std::map<std::string, double>& params = {});

/// Smooth bump on (-1,1), equal to 1 at 0 and identically 0 outside; C-infinity.
double bump(double t);

/// Monotone C^2 switch: 0 for s <= 0, 1 for s >= 1 (quintic smoothstep).
double smoothstep5(double s);

/// Reflect a field through the interface plane: x1 -> -x1 (b1 flips sign).
/// Swaps the roles of the two tails; used by symmetry checks.
InterfaceDrift reflect_field(const InterfaceDrift& field);

}  // namespace ifhom

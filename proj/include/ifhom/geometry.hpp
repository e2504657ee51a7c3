#pragma once

/// @file geometry.hpp
/// @brief Uniform node-centred grids on the unit torus and on the interface strip.
///
/// Nodes sit at integer multiples of the spacing along each axis, so a grid of
/// resolution N has nodes at 0, 1/N, ..., (N-1)/N on the torus.  The strip grid
/// covers [-K_s, K_s] x T^{d-1} with the bounded axis sharing the torus spacing,
/// which makes strip nodes line up exactly with torus nodes of the periodic tails.

#include <array>
#include <cstdint>
#include <string>

namespace ifhom {

inline constexpr int kMaxDim = 4;

/// Grid resolution descriptor shared by the cell and strip solvers.
struct GridSpec {
  int dim = 2;
  std::array<int, kMaxDim> resolution{};  // nodes per unit length along each axis
  int strip_halfwidth = 0;                // K_s: strip covers x1 in [-K_s, K_s]

  static GridSpec uniform(int dim, int res, int strip_halfwidth = 0);
  void validate(bool need_strip = false) const;  // throws std::invalid_argument
};

/// Node-indexed view of the torus [0,1)^dim with periodic wrap-around.
/// Linear indices are row-major with axis 0 slowest.
class TorusGrid {
 public:
  explicit TorusGrid(const GridSpec& spec);
  int dim() const { return dim_; }
  std::int64_t size() const { return size_; }
  int extent(int axis) const { return n_[axis]; }
  double spacing(int axis) const { return h_[axis]; }
  double node_weight() const { return weight_; }  // product of spacings
  void coords(std::int64_t idx, double* x) const;
  /// Index of the node shifted by `offset` grid steps along `axis`, wrapping.
  std::int64_t shift(std::int64_t idx, int axis, int offset) const;

 private:
  int dim_ = 0;
  std::array<int, kMaxDim> n_{};
  std::array<double, kMaxDim> h_{};
  std::array<std::int64_t, kMaxDim> stride_{};
  std::int64_t size_ = 0;
  double weight_ = 0;
};

/// Node grid on the strip [-K_s, K_s] x T^{dim-1}.
///
/// Axis 0 (the x1 direction) is bounded; planes are indexed 0..planes()-1 with
/// plane p at x1 = -K_s + p*h.  Transverse axes wrap periodically.  `halo`
/// extra planes on each side hold Dirichlet data for wide stencils.
class StripGrid {
 public:
  StripGrid(const GridSpec& spec, int halo);
  int dim() const { return dim_; }
  int planes() const { return planes_; }
  int halo() const { return halo_; }
  int halfwidth() const { return ks_; }
  std::int64_t transverse_size() const { return trans_; }
  std::int64_t size() const { return size_; }
  double spacing(int axis) const { return h_[axis]; }
  double node_weight() const { return weight_; }
  double x1(int plane) const { return -ks_ + plane * h_[0]; }
  /// Linear index of (plane, transverse index).
  std::int64_t index(int plane, std::int64_t t) const { return plane * trans_ + t; }
  int plane_of(std::int64_t idx) const { return static_cast<int>(idx / trans_); }
  std::int64_t trans_of(std::int64_t idx) const { return idx % trans_; }
  /// Coordinates of a strip node: x1 in [-K_s, K_s], transverse in [0,1).
  void coords(std::int64_t idx, double* x) const;
  /// Coordinates for a plane that may lie in the halo (plane in [-halo, planes+halo)).
  void coords_ext(int plane, std::int64_t t, double* x) const;
  /// Transverse index shifted along transverse axis `axis` (1-based code axis >= 1).
  std::int64_t trans_shift(std::int64_t t, int axis, int offset) const;
  /// Torus node index (against a matching-resolution torus grid) for a strip node;
  /// used to read periodic tail data without interpolation.
  std::int64_t torus_index(const TorusGrid& torus, int plane, std::int64_t t) const;

 private:
  int dim_ = 0;
  int ks_ = 0;
  int halo_ = 0;
  int planes_ = 0;
  std::array<int, kMaxDim> n_{};  // n_[0]: nodes per unit along x1; n_[a], a>=1: transverse
  std::array<double, kMaxDim> h_{};
  std::array<std::int64_t, kMaxDim> tstride_{};  // strides within the transverse slab
  std::int64_t trans_ = 0;
  std::int64_t size_ = 0;
  double weight_ = 0;
};

}  // namespace ifhom

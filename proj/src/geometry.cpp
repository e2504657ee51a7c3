#include "ifhom/geometry.hpp"

#include <stdexcept>

namespace ifhom {

GridSpec GridSpec::uniform(int dim, int res, int strip_halfwidth) {
  GridSpec g;
  g.dim = dim;
  for (int a = 0; a < kMaxDim; ++a) g.resolution[a] = (a < dim) ? res : 0;
  g.strip_halfwidth = strip_halfwidth;
  return g;
}

void GridSpec::validate(bool need_strip) const {
  if (dim < 2 || dim > kMaxDim)
    throw std::invalid_argument("grid dimension must be in [2, " + std::to_string(kMaxDim) + "]");
  for (int a = 0; a < dim; ++a)
    if (resolution[a] < 8)
      throw std::invalid_argument("grid resolution must be >= 8 along every axis");
  if (need_strip && strip_halfwidth < 1)
    throw std::invalid_argument("strip_halfwidth must be a positive integer");
}

TorusGrid::TorusGrid(const GridSpec& spec) {
  spec.validate();
  dim_ = spec.dim;
  size_ = 1;
  weight_ = 1.0;
  for (int a = dim_ - 1; a >= 0; --a) {
    n_[a] = spec.resolution[a];
    h_[a] = 1.0 / n_[a];
    stride_[a] = size_;
    size_ *= n_[a];
    weight_ *= h_[a];
  }
}

void TorusGrid::coords(std::int64_t idx, double* x) const {
  for (int a = dim_ - 1; a >= 0; --a) {
    x[a] = (idx % n_[a]) * h_[a];
    idx /= n_[a];
  }
}

std::int64_t TorusGrid::shift(std::int64_t idx, int axis, int offset) const {
  const int n = n_[axis];
  int i = static_cast<int>((idx / stride_[axis]) % n);
  int j = (i + offset) % n;
  if (j < 0) j += n;
  return idx + static_cast<std::int64_t>(j - i) * stride_[axis];
}

StripGrid::StripGrid(const GridSpec& spec, int halo) {
  spec.validate(/*need_strip=*/true);
  dim_ = spec.dim;
  ks_ = spec.strip_halfwidth;
  halo_ = halo;
  for (int a = 0; a < dim_; ++a) {
    n_[a] = spec.resolution[a];
    h_[a] = 1.0 / n_[a];
  }
  planes_ = 2 * ks_ * n_[0] + 1;
  trans_ = 1;
  for (int a = dim_ - 1; a >= 1; --a) {
    tstride_[a] = trans_;
    trans_ *= n_[a];
  }
  size_ = static_cast<std::int64_t>(planes_) * trans_;
  weight_ = 1.0;
  for (int a = 0; a < dim_; ++a) weight_ *= h_[a];
}

void StripGrid::coords(std::int64_t idx, double* x) const {
  coords_ext(plane_of(idx), trans_of(idx), x);
}

void StripGrid::coords_ext(int plane, std::int64_t t, double* x) const {
  x[0] = -ks_ + plane * h_[0];
  for (int a = dim_ - 1; a >= 1; --a) {
    x[a] = (t % n_[a]) * h_[a];
    t /= n_[a];
  }
}

std::int64_t StripGrid::trans_shift(std::int64_t t, int axis, int offset) const {
  const int n = n_[axis];
  int i = static_cast<int>((t / tstride_[axis]) % n);
  int j = (i + offset) % n;
  if (j < 0) j += n;
  return t + static_cast<std::int64_t>(j - i) * tstride_[axis];
}

std::int64_t StripGrid::torus_index(const TorusGrid& torus, int plane, std::int64_t t) const {
  // plane may lie in the halo; reduce its x1 node index mod the torus extent
  int i0 = plane % n_[0];
  if (i0 < 0) i0 += n_[0];
  std::int64_t idx = i0;
  for (int a = 1; a < dim_; ++a) {
    const int ia = static_cast<int>((t / tstride_[a]) % n_[a]);
    idx = idx * torus.extent(a) + ia;
  }
  return idx;
}

}  // namespace ifhom

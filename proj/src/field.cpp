#include "ifhom/field.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace ifhom {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double reduce_mod1(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r -= 1.0;  // guard against floor rounding at negative epsilons
  return r;
}

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void check_keys(const std::map<std::string, double>& params,
                std::initializer_list<const char*> allowed, const std::string& field) {
  for (const auto& [k, v] : params) {
    bool ok = false;
    for (const char* a : allowed)
      if (k == a) ok = true;
    if (!ok)
      throw std::invalid_argument("unknown parameter '" + k + "' for builtin field '" + field +
                                  "'");
  }
}

}  // namespace

double bump(double t) {
  const double t2 = t * t;
  if (t2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - t2));
}

double smoothstep5(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

PeriodicDrift::PeriodicDrift(int dim, Eval eval, std::string name)
    : dim_(dim), eval_(std::move(eval)), name_(std::move(name)) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("drift dimension out of range");
  if (!eval_) throw std::invalid_argument("drift evaluator must be callable");
}

void PeriodicDrift::eval(const double* x, double* b) const {
  double y[kMaxDim];
  for (int a = 0; a < dim_; ++a) y[a] = reduce_mod1(x[a]);
  eval_(y, b);
}

InterfaceDrift::InterfaceDrift(int dim, double eta, Eval core, PeriodicDrift tail_plus,
                               PeriodicDrift tail_minus, std::string name)
    : dim_(dim),
      eta_(eta),
      core_(std::move(core)),
      plus_(std::move(tail_plus)),
      minus_(std::move(tail_minus)),
      name_(std::move(name)) {
  if (dim < 2 || dim > kMaxDim) throw std::invalid_argument("field dimension out of range");
  if (eta <= 0) throw std::invalid_argument("interface half-width eta must be positive");
  if (plus_.dim() != dim || minus_.dim() != dim)
    throw std::invalid_argument("tail dimension mismatch");
  if (!core_) throw std::invalid_argument("core evaluator must be callable");
}

void InterfaceDrift::eval(const double* x, double* b) const {
  if (x[0] >= eta_) {
    plus_.eval(x, b);
    return;
  }
  if (x[0] <= -eta_) {
    minus_.eval(x, b);
    return;
  }
  double y[kMaxDim];
  y[0] = x[0];
  for (int a = 1; a < dim_; ++a) y[a] = reduce_mod1(x[a]);
  core_(y, b);
}

bool ValidationReport::passed(double tol) const {
  return finite && max_transverse_violation <= tol && max_tail_mismatch <= tol;
}

ValidationReport validate_drift(const InterfaceDrift& field, int resolution,
                                double x1_halfwidth) {
  ValidationReport rep;
  const int d = field.dim();
  const double eta = field.eta();
  const double half = (x1_halfwidth > 0) ? x1_halfwidth : eta + 2.0;
  const double h = 1.0 / resolution;
  const int n1 = static_cast<int>(std::ceil(2.0 * half / h)) + 1;
  std::int64_t ntrans = 1;
  for (int a = 1; a < d; ++a) ntrans *= resolution;

  double x[kMaxDim], b[kMaxDim], b2[kMaxDim], bm[kMaxDim], bp[kMaxDim];
  for (int i = 0; i < n1; ++i) {
    x[0] = -half + i * h;
    for (std::int64_t t = 0; t < ntrans; ++t) {
      std::int64_t r = t;
      for (int a = d - 1; a >= 1; --a) {
        x[a] = (r % resolution) * h;
        r /= resolution;
      }
      field.eval(x, b);
      for (int a = 0; a < d; ++a) {
        if (!std::isfinite(b[a])) rep.finite = false;
        rep.sup_norm = std::max(rep.sup_norm, std::abs(b[a]));
      }
      // transverse periodicity: shift each transverse coordinate by a full period
      for (int j = 1; j < d; ++j) {
        double xs[kMaxDim];
        for (int a = 0; a < d; ++a) xs[a] = x[a];
        xs[j] += 1.0;
        field.eval(xs, b2);
        for (int a = 0; a < d; ++a)
          rep.max_transverse_violation =
              std::max(rep.max_transverse_violation, std::abs(b[a] - b2[a]));
      }
      // tail agreement outside the interface strip
      if (x[0] >= eta) {
        field.tail_plus().eval(x, b2);
        for (int a = 0; a < d; ++a)
          rep.max_tail_mismatch = std::max(rep.max_tail_mismatch, std::abs(b[a] - b2[a]));
      } else if (x[0] <= -eta) {
        field.tail_minus().eval(x, b2);
        for (int a = 0; a < d; ++a)
          rep.max_tail_mismatch = std::max(rep.max_tail_mismatch, std::abs(b[a] - b2[a]));
      }
      // smoothness proxy: centred second differences along every axis
      for (int j = 0; j < d; ++j) {
        double xs[kMaxDim];
        for (int a = 0; a < d; ++a) xs[a] = x[a];
        xs[j] = x[j] + h;
        field.eval(xs, bp);
        xs[j] = x[j] - h;
        field.eval(xs, bm);
        for (int a = 0; a < d; ++a) {
          const double dd = (bp[a] - 2.0 * b[a] + bm[a]) / (h * h);
          rep.max_second_difference = std::max(rep.max_second_difference, std::abs(dd));
        }
      }
    }
  }
  if (!rep.finite) rep.messages.push_back("field evaluates to non-finite values");
  if (rep.max_transverse_violation > 1e-10)
    rep.messages.push_back("field is not 1-periodic in a transverse direction");
  if (rep.max_tail_mismatch > 1e-10)
    rep.messages.push_back("field does not match its periodic tails outside |x1| <= eta");
  return rep;
}

int DriftTable::planes_total() const {
  return 2 * spec.strip_halfwidth * spec.resolution[0] + 1 + 2 * halo;
}

const double* DriftTable::at(const StripGrid& grid, int plane_ext, std::int64_t t) const {
  const std::int64_t row = (plane_ext + halo) * grid.transverse_size() + t;
  return &values[row * spec.dim];
}

void DriftTable::write_csv(std::ostream& os) const {
  const StripGrid grid(spec, halo);
  const int d = spec.dim;
  os << "x1";
  for (int a = 2; a <= d; ++a) os << ",x" << a;
  for (int a = 1; a <= d; ++a) os << ",b" << a;
  os << "\n";
  char buf[32];
  double x[kMaxDim];
  for (int p = 0; p < grid.planes(); ++p) {
    for (std::int64_t t = 0; t < grid.transverse_size(); ++t) {
      grid.coords_ext(p, t, x);
      const double* b = at(grid, p, t);
      for (int a = 0; a < d; ++a) {
        std::snprintf(buf, sizeof buf, "%.17g", x[a]);
        os << (a ? "," : "") << buf;
      }
      for (int a = 0; a < d; ++a) {
        std::snprintf(buf, sizeof buf, "%.17g", b[a]);
        os << "," << buf;
      }
      os << "\n";
    }
  }
}

DriftTable sample_on_grid(const InterfaceDrift& field, const GridSpec& spec, int halo) {
  spec.validate(/*need_strip=*/true);
  if (spec.dim != field.dim()) throw std::invalid_argument("grid/field dimension mismatch");
  DriftTable table;
  table.spec = spec;
  table.eta = field.eta();
  table.halo = halo;
  const StripGrid grid(spec, halo);
  const std::int64_t ntrans = grid.transverse_size();
  const int total = table.planes_total();
  table.values.resize(static_cast<std::size_t>(total) * ntrans * spec.dim);
  double x[kMaxDim];
  std::size_t pos = 0;
  for (int p = -halo; p < grid.planes() + halo; ++p) {
    for (std::int64_t t = 0; t < ntrans; ++t) {
      grid.coords_ext(p, t, x);
      field.eval(x, &table.values[pos]);
      pos += spec.dim;
    }
  }
  return table;
}

std::vector<double> sample_torus(const PeriodicDrift& drift, const TorusGrid& grid) {
  std::vector<double> values(static_cast<std::size_t>(grid.size()) * grid.dim());
  double x[kMaxDim];
  for (std::int64_t i = 0; i < grid.size(); ++i) {
    grid.coords(i, x);
    drift.eval(x, &values[static_cast<std::size_t>(i) * grid.dim()]);
  }
  return values;
}

namespace {

PeriodicDrift zero_tail(int dim) {
  return PeriodicDrift(
      dim, [dim](const double*, double* b) { for (int a = 0; a < dim; ++a) b[a] = 0.0; },
      "zero");
}

/// Tail drift (2 pi a sin 2 pi x1, c sin 2 pi x1, 0, ...): gradient part along x1
/// (invariant density proportional to exp(-2 a cos 2 pi x1)) plus a shear in x2.
PeriodicDrift cosine_tail(int dim, double a, double c) {
  return PeriodicDrift(
      dim,
      [dim, a, c](const double* x, double* b) {
        const double s = std::sin(kTwoPi * x[0]);
        b[0] = kTwoPi * a * s;
        if (dim > 1) b[1] = c * s;
        for (int k = 2; k < dim; ++k) b[k] = 0.0;
      },
      "cosine_tail");
}

}  // namespace

InterfaceDrift builtin_field(const std::string& name,
                             const std::map<std::string, double>& params) {
  if (name == "zero") {
    check_keys(params, {"dim", "eta"}, name);
    const int dim = static_cast<int>(get_param(params, "dim", 2));
    const double eta = get_param(params, "eta", 1.0);
    auto core = [dim](const double*, double* b) {
      for (int a = 0; a < dim; ++a) b[a] = 0.0;
    };
    return InterfaceDrift(dim, eta, core, zero_tail(dim), zero_tail(dim), "zero");
  }

  if (name == "paper_shear") {
    check_keys(params, {"amplitude", "eta", "dim"}, name);
    const int dim = static_cast<int>(get_param(params, "dim", 2));
    if (dim != 2) throw std::invalid_argument("paper_shear is a planar (dim = 2) field");
    const double amp = get_param(params, "amplitude", 1.0);
    const double eta = get_param(params, "eta", 1.0);
    auto core = [amp, eta](const double* x, double* b) {
      b[0] = 0.0;
      b[1] = amp * bump(x[0] / eta);
    };
    return InterfaceDrift(2, eta, core, zero_tail(2), zero_tail(2), "paper_shear");
  }

  if (name == "torus_shear") {
    check_keys(params, {"c", "dim", "eta"}, name);
    const int dim = static_cast<int>(get_param(params, "dim", 2));
    const double c = get_param(params, "c", 1.0);
    const double eta = get_param(params, "eta", 1.0);
    PeriodicDrift tail = cosine_tail(dim, 0.0, c);
    auto core = [dim, c](const double* x, double* b) {
      b[0] = 0.0;
      b[1] = c * std::sin(kTwoPi * x[0]);
      for (int k = 2; k < dim; ++k) b[k] = 0.0;
    };
    return InterfaceDrift(dim, eta, core, tail, tail, "torus_shear");
  }

  if (name == "gradient1d") {
    check_keys(params, {"a", "dim", "eta"}, name);
    const int dim = static_cast<int>(get_param(params, "dim", 2));
    const double a = get_param(params, "a", 1.0);
    const double eta = get_param(params, "eta", 1.0);
    PeriodicDrift tail = cosine_tail(dim, a, 0.0);
    auto core = [dim, a](const double* x, double* b) {
      b[0] = kTwoPi * a * std::sin(kTwoPi * x[0]);
      for (int k = 1; k < dim; ++k) b[k] = 0.0;
    };
    return InterfaceDrift(dim, eta, core, tail, tail, "gradient1d");
  }

  if (name == "two_sided") {
    check_keys(params, {"a_plus", "a_minus", "c_plus", "c_minus", "swirl", "eta", "dim"}, name);
    const int dim = static_cast<int>(get_param(params, "dim", 2));
    const double ap = get_param(params, "a_plus", 0.4);
    const double am = get_param(params, "a_minus", 0.0);
    const double cp = get_param(params, "c_plus", 0.0);
    const double cm = get_param(params, "c_minus", 1.0);
    const double sw = get_param(params, "swirl", 0.4);
    const double eta = get_param(params, "eta", 1.0);
    auto core = [dim, ap, am, cp, cm, sw, eta](const double* x, double* b) {
      // blend the tail parameters across the strip with a C^2 switch completed at +-eta
      const double chi = smoothstep5(0.5 * (x[0] / eta + 1.0));
      const double a = chi * ap + (1.0 - chi) * am;
      const double c = chi * cp + (1.0 - chi) * cm;
      const double s = std::sin(kTwoPi * x[0]);
      b[0] = kTwoPi * a * s;
      if (dim > 1) {
        b[0] += sw * bump(x[0] / eta) * std::sin(kTwoPi * x[1]);
        b[1] = c * s;
      }
      for (int k = 2; k < dim; ++k) b[k] = 0.0;
    };
    return InterfaceDrift(dim, eta, core, cosine_tail(dim, ap, cp), cosine_tail(dim, am, cm),
                          "two_sided");
  }

  throw std::invalid_argument("unknown builtin field '" + name + "'");
}

InterfaceDrift reflect_field(const InterfaceDrift& field) {
  const int d = field.dim();
  // reflected tails: the +side tail of the reflection is the -side tail with x1 -> -x1
  auto reflect_tail = [d](const PeriodicDrift& tail) {
    return PeriodicDrift(
        d,
        [d, tail](const double* x, double* b) {
          double y[kMaxDim];
          y[0] = -x[0];
          for (int a = 1; a < d; ++a) y[a] = x[a];
          tail.eval(y, b);
          b[0] = -b[0];
        },
        tail.name() + "_reflected");
  };
  auto core = [d, field](const double* x, double* b) {
    double y[kMaxDim];
    y[0] = -x[0];
    for (int a = 1; a < d; ++a) y[a] = x[a];
    field.eval(y, b);
    b[0] = -b[0];
  };
  return InterfaceDrift(d, field.eta(), core, reflect_tail(field.tail_minus()),
                        reflect_tail(field.tail_plus()), field.name() + "_reflected");
}

}  // namespace ifhom

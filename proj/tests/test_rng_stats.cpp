#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ifhom/rng.hpp"
#include "ifhom/stats.hpp"

using namespace ifhom;

TEST_CASE("philox4x32-10 reference vectors") {
  // Known-answer vectors of the Philox4x32-10 generator (zero, all-ones, and
  // pi-digit counters/keys).
  {
    const auto b = philox4x32(0, 0, 0);
    CHECK(b.w[0] == 0x6627e8d5u);
    CHECK(b.w[1] == 0xe169c58du);
    CHECK(b.w[2] == 0xbc57ac4cu);
    CHECK(b.w[3] == 0x9b00dbd8u);
  }
  {
    const auto b = philox4x32(0xffffffffffffffffull, 0xffffffffffffffffull,
                              0xffffffffffffffffull);
    CHECK(b.w[0] == 0x408f276du);
    CHECK(b.w[1] == 0x41c83b0eu);
    CHECK(b.w[2] == 0xa20bc7c6u);
    CHECK(b.w[3] == 0x6d5451fdu);
  }
  {
    const auto b = philox4x32(0x299f31d0a4093822ull, 0x0370734413198a2eull,
                              0x85a308d3243f6a88ull);
    CHECK(b.w[0] == 0xd16cfe09u);
    CHECK(b.w[1] == 0x94fdccebu);
    CHECK(b.w[2] == 0x5001e420u);
    CHECK(b.w[3] == 0x24126ea1u);
  }
}

TEST_CASE("path streams are deterministic and disjoint") {
  PathRng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool all_equal = true, path_differs = false, seed_differs = false;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next_u32();
    all_equal = all_equal && (va == b.next_u32());
    path_differs = path_differs || (va != c.next_u32());
    seed_differs = seed_differs || (va != d.next_u32());
  }
  CHECK(all_equal);
  CHECK(path_differs);
  CHECK(seed_differs);
}

TEST_CASE("uniform and normal draws have the right moments") {
  PathRng rng(2024, 0);
  const int n = 20000;
  double su = 0, su2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_u01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    su += u;
    su2 += u * u;
  }
  const double mu = su / n;
  // mean 1/2 (se = 1/sqrt(12 n)), second moment 1/3
  CHECK(std::abs(mu - 0.5) < 5.0 / std::sqrt(12.0 * n));
  CHECK(std::abs(su2 / n - 1.0 / 3.0) < 5.0 * 0.3 / std::sqrt(1.0 * n));

  double sn = 0, sn2 = 0, sn4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.next_normal();
    sn += z;
    sn2 += z * z;
    sn4 += z * z * z * z;
  }
  CHECK(std::abs(sn / n) < 5.0 / std::sqrt(1.0 * n));
  CHECK(std::abs(sn2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(sn4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
}

TEST_CASE("derive_seed separates salted streams") {
  CHECK(derive_seed(1, 100) == derive_seed(1, 100));
  CHECK(derive_seed(1, 100) != derive_seed(1, 101));
  CHECK(derive_seed(1, 100) != derive_seed(2, 100));
  // a zero seed must not collapse the stream
  CHECK(derive_seed(0, 100) != derive_seed(0, 101));
}

TEST_CASE("compensated sum survives catastrophic cancellation") {
  CompensatedSum s;
  s.add(1e100);
  s.add(1.0);
  s.add(-1e100);
  CHECK(s.total() == 1.0);

  CompensatedSum t;
  for (int i = 0; i < 10; ++i) t.add(0.1);
  CHECK(t.total() == 1.0);  // correctly rounded; the naive loop gives 0.999...9

  CompensatedSum u;
  const double big = 1e16;
  u.add(big);
  for (int i = 0; i < 1000; ++i) u.add(1e-3);
  u.add(-big);
  CHECK(u.total() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mean_estimate matches hand-computed mean and standard error") {
  const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
  const auto e = mean_estimate(xs);
  CHECK(e.value == doctest::Approx(2.5).epsilon(1e-15));
  // sample sd = sqrt(5/3), se = sd / 2
  CHECK(e.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-14));
  CHECK(e.n == 4);
  const std::vector<double> empty;
  CHECK_THROWS_AS(mean_estimate(empty), std::invalid_argument);
}

TEST_CASE("binomial_estimate matches the proportion formula") {
  const auto e = binomial_estimate(30, 100);
  CHECK(e.value == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(e.se == doctest::Approx(std::sqrt(0.3 * 0.7 / 100.0)).epsilon(1e-14));
  CHECK(binomial_estimate(0, 50).se > 0.0);  // degenerate counts keep a floor
  CHECK_THROWS_AS(binomial_estimate(1, 0), std::invalid_argument);
}

namespace {
// O(n m) reference: the sup of |F_a - F_b| over all sample points.
double ks_reference(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  auto cdf = [](const std::vector<double>& v, double x) {
    double c = 0;
    for (double y : v) c += (y <= x);
    return c / static_cast<double>(v.size());
  };
  for (double x : a) d = std::max(d, std::abs(cdf(a, x) - cdf(b, x)));
  for (double x : b) d = std::max(d, std::abs(cdf(a, x) - cdf(b, x)));
  return d;
}
}  // namespace

TEST_CASE("ks_distance agrees with the quadratic reference") {
  PathRng rng(5, 0);
  for (int rep = 0; rep < 4; ++rep) {
    std::vector<double> a(173), b(211);
    for (auto& x : a) x = rng.next_normal();
    for (auto& x : b) x = rng.next_normal() * (1.0 + 0.2 * rep) + 0.1 * rep;
    CHECK(ks_distance(a, b) == doctest::Approx(ks_reference(a, b)).epsilon(1e-12));
  }
  // ties across the two samples
  const std::vector<double> ta = {1, 1, 2, 3, 3, 3};
  const std::vector<double> tb = {1, 2, 2, 3};
  CHECK(ks_distance(ta, tb) == doctest::Approx(ks_reference(ta, tb)).epsilon(1e-12));
  // identical samples and disjoint supports
  CHECK(ks_distance({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_distance({0, 1}, {5, 6}) == 1.0);
  CHECK_THROWS_AS(ks_distance({}, {1.0}), std::invalid_argument);
}

TEST_CASE("ks_se is the two-sample null scale") {
  CHECK(ks_se(100, 100) == doctest::Approx(0.5 * std::sqrt(0.02)).epsilon(1e-15));
  CHECK(ks_se(10000, 40000) ==
        doctest::Approx(0.5 * std::sqrt(1.0 / 10000 + 1.0 / 40000)).epsilon(1e-15));
}

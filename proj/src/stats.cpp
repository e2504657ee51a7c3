#include "ifhom/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ifhom {

Estimate mean_estimate(std::span<const double> samples, std::string method) {
  if (samples.empty()) throw std::invalid_argument("mean_estimate: empty sample");
  const std::uint64_t n = samples.size();
  CompensatedSum s;
  for (double x : samples) s.add(x);
  const double mean = s.total() / static_cast<double>(n);
  CompensatedSum sq;
  for (double x : samples) {
    const double d = x - mean;
    sq.add(d * d);
  }
  Estimate e;
  e.value = mean;
  e.n = n;
  e.method = std::move(method);
  e.se = (n > 1) ? std::sqrt(sq.total() / (static_cast<double>(n) * (n - 1))) : 0.0;
  return e;
}

Estimate binomial_estimate(std::uint64_t successes, std::uint64_t trials, std::string method) {
  if (trials == 0) throw std::invalid_argument("binomial_estimate: zero trials");
  Estimate e;
  const double p = static_cast<double>(successes) / static_cast<double>(trials);
  e.value = p;
  e.se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(trials));
  e.n = trials;
  e.method = std::move(method);
  return e;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_se(std::uint64_t n, std::uint64_t m) {
  return 0.5 * std::sqrt(1.0 / static_cast<double>(n) + 1.0 / static_cast<double>(m));
}

}  // namespace ifhom

#pragma once

/// @file stats.hpp
/// @brief Point estimates with standard errors, compensated summation, and the
///        two-sample Kolmogorov-Smirnov distance.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ifhom {

/// Monte Carlo point estimate.
struct Estimate {
  double value = 0;
  double se = 0;
  std::uint64_t n = 0;
  std::string method;
};

/// Neumaier compensated accumulator; used for all fixed-order reductions.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double total() const { return sum_ + comp_; }

 private:
  double sum_ = 0;
  double comp_ = 0;
};

/// Sample mean with standard error of the mean (compensated sums).
Estimate mean_estimate(std::span<const double> samples, std::string method = "sample_mean");

/// Binomial proportion with exact-count bookkeeping.
Estimate binomial_estimate(std::uint64_t successes, std::uint64_t trials,
                           std::string method = "binomial");

/// Two-sample Kolmogorov-Smirnov distance (sup norm of empirical CDF difference).
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Scale of the null fluctuation of the two-sample KS distance; comparisons use
/// ks <= threshold + k * ks_se style rules.
double ks_se(std::uint64_t n, std::uint64_t m);

}  // namespace ifhom

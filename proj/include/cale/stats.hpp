#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cale::stats {

inline constexpr double kDefaultAlpha = 0.05;

struct CorrelationResult {
  double coefficient = 0.0;
  std::size_t n = 0;
  // Two-sided, from the Fisher transform under a normal approximation.
  double p_value = 1.0;

  bool significant(double alpha = kDefaultAlpha) const noexcept { return p_value < alpha; }
};

// Product-moment correlation. Needs >= 3 equal-length samples, neither side
// constant (DomainError otherwise).
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

// Pearson over average ranks (ties share the mean of their positions).
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

// 1-based ranks; tied values get the average of the ranks they span.
std::vector<double> average_ranks(std::span<const double> x);

// atanh(r); DomainError for |r| >= 1.
double fisher_z(double r);

// Two-sided p-value of a standard-normal statistic.
double normal_two_sided_p(double z) noexcept;

struct SteigerResult {
  double z = 0.0;
  double p_value = 1.0;
};

// Steiger's Z1* for two dependent correlations r_jk and r_jh that share the
// variable j, given the correlation r_kh between the other two variables and
// the sample size n (>= 4). The three correlations must form a positive
// definite matrix.
SteigerResult steiger_z(double r_jk, double r_jh, double r_kh, std::size_t n);

}  // namespace cale::stats

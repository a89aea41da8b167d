#include "cale/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cale/error.hpp"

namespace cale::stats {

namespace {

void check_samples(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DomainError("correlation of samples with lengths " + std::to_string(x.size()) + " and " +
                      std::to_string(y.size()));
  if (x.size() < 3) throw DomainError("correlation needs at least 3 samples, got " + std::to_string(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DomainError("non-finite sample value");
}

double fisher_p(double r, std::size_t n) {
  if (std::abs(r) >= 1.0) return 0.0;
  return normal_two_sided_p(std::atanh(r) * std::sqrt(static_cast<double>(n) - 3.0));
}

}  // namespace

double normal_two_sided_p(double z) noexcept { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  check_samples(x, y);
  const auto n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("correlation undefined for a constant sample");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return {r, n, fisher_p(r, n)};
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    // Positions i..j (0-based) share rank mean(i+1 .. j+1).
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  check_samples(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
      std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; }))
    throw DomainError("rank correlation undefined when every value is tied");
  return pearson(rx, ry);
}

double fisher_z(double r) {
  if (!(std::abs(r) < 1.0)) throw DomainError("Fisher transform needs |r| < 1, got " + std::to_string(r));
  return std::atanh(r);
}

SteigerResult steiger_z(double r_jk, double r_jh, double r_kh, std::size_t n) {
  if (n < 4) throw DomainError("Steiger's test needs n >= 4");
  if (!(std::abs(r_kh) < 1.0)) throw DomainError("Steiger's test needs |r_kh| < 1");
  const double det = 1.0 - r_jk * r_jk - r_jh * r_jh - r_kh * r_kh + 2.0 * r_jk * r_jh * r_kh;
  if (!(det > 0.0)) throw DomainError("correlations do not form a positive definite matrix");
  const double z1 = fisher_z(r_jk);
  const double z2 = fisher_z(r_jh);
  const double rbar = 0.5 * (r_jk + r_jh);
  const double rbar2 = rbar * rbar;
  const double psi = r_kh * (1.0 - 2.0 * rbar2) - 0.5 * rbar2 * (1.0 - 2.0 * rbar2 - r_kh * r_kh);
  const double s = psi / ((1.0 - rbar2) * (1.0 - rbar2));
  const double denom = 2.0 - 2.0 * s;
  if (!(denom > 0.0)) throw DomainError("Steiger's test is degenerate (covariance term >= 1)");
  SteigerResult res;
  res.z = (z1 - z2) * std::sqrt((static_cast<double>(n) - 3.0) / denom);
  res.p_value = normal_two_sided_p(res.z);
  return res;
}

}  // namespace cale::stats

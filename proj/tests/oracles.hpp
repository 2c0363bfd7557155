#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library's numerical routines.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle_ref {

/// Standard normal quantile by bisection on erfc, long double.
inline long double normal_quantile(long double p) {
  long double lo = -10.0L, hi = 10.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    const long double cdf = 0.5L * std::erfc(-mid / std::sqrt(2.0L));
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5L * (lo + hi);
}

/// P(Bin(n, p) >= x) by direct summation of log-space terms.
inline long double binomial_upper_tail(std::int64_t x, std::int64_t n, long double p) {
  if (x <= 0) return 1.0L;
  long double s = 0.0L;
  for (std::int64_t k = x; k <= n; ++k) {
    const long double lt = std::lgamma(static_cast<long double>(n) + 1) -
                           std::lgamma(static_cast<long double>(k) + 1) -
                           std::lgamma(static_cast<long double>(n - k) + 1) +
                           k * std::log(p) + (n - k) * std::log1p(-p);
    s += std::exp(lt);
  }
  return s;
}

/// Clopper-Pearson bounds from the binomial-tail definition, by bisection.
inline std::pair<double, double> clopper_pearson(std::int64_t x, std::int64_t n, double level) {
  const long double a2 = (1.0L - level) / 2.0L;
  double low = 0.0, high = 1.0;
  if (x > 0) {
    // lower: P(Bin(n, p) >= x) = alpha / 2
    long double lo = 0.0L, hi = 1.0L;
    for (int i = 0; i < 200; ++i) {
      const long double mid = 0.5L * (lo + hi);
      (binomial_upper_tail(x, n, mid) < a2 ? lo : hi) = mid;
    }
    low = static_cast<double>(0.5L * (lo + hi));
  }
  if (x < n) {
    // upper: P(Bin(n, p) <= x) = alpha / 2
    long double lo = 0.0L, hi = 1.0L;
    for (int i = 0; i < 200; ++i) {
      const long double mid = 0.5L * (lo + hi);
      (1.0L - binomial_upper_tail(x + 1, n, mid) > a2 ? lo : hi) = mid;
    }
    high = static_cast<double>(0.5L * (lo + hi));
  }
  return {low, high};
}

/// Grouped binomial data for the reference logistic fit.
struct Groups {
  std::vector<std::vector<double>> h;
  std::vector<double> trials;
  std::vector<double> successes;
};

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<long double> solve(std::vector<std::vector<long double>> a,
                                      std::vector<long double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const long double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<long double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    long double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Logistic MLE by plain Newton in long double, run to 1e-15 on the step.
inline std::vector<long double> logistic_fit(const Groups& g) {
  const std::size_t p = g.h.front().size();
  std::vector<long double> beta(p, 0.0L);
  for (int it = 0; it < 500; ++it) {
    std::vector<long double> s(p, 0.0L);
    std::vector<std::vector<long double>> info(p, std::vector<long double>(p, 0.0L));
    for (std::size_t j = 0; j < g.h.size(); ++j) {
      long double eta = 0.0L;
      for (std::size_t l = 0; l < p; ++l) eta += beta[l] * g.h[j][l];
      const long double mu = 1.0L / (1.0L + std::exp(-eta));
      for (std::size_t l = 0; l < p; ++l) {
        s[l] += (g.successes[j] - g.trials[j] * mu) * g.h[j][l];
        for (std::size_t k = 0; k < p; ++k)
          info[l][k] += g.trials[j] * mu * (1.0L - mu) * g.h[j][l] * g.h[j][k];
      }
    }
    const auto step = solve(info, s);
    long double size = 0.0L;
    for (std::size_t l = 0; l < p; ++l) {
      beta[l] += step[l];
      size = std::max(size, std::fabs(step[l]));
    }
    if (size < 1e-15L) break;
  }
  return beta;
}

inline long double expit(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

}  // namespace oracle_ref

#pragma once

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "seroprev/error.hpp"
#include "seroprev/model.hpp"

namespace seroprev {

inline void check_level(double level) {
  if (!(level > 0.0 && level < 1.0))
    fail(ErrorKind::input, "confidence level must lie in (0, 1), got " + std::to_string(level));
}

/// Standard normal quantile.
inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Two-sided critical value z_{1 - (1 - level) / 2}.
inline double critical_value(double level) {
  check_level(level);
  return normal_quantile(0.5 + 0.5 * level);
}

struct WaldInterval {
  ConfidenceInterval ci;
  bool truncated = false;
};

/// point_raw +/- z * sqrt(variance), with both bounds clamped into [0, 1].
inline WaldInterval wald_ci(double point_raw, double variance, double level = 0.95) {
  if (!(variance >= 0.0))
    fail(ErrorKind::input, "Wald interval requires a non-negative variance");
  const double half = critical_value(level) * std::sqrt(variance);
  const double lo = point_raw - half;
  const double hi = point_raw + half;
  WaldInterval w;
  w.ci = {std::clamp(lo, 0.0, 1.0), std::clamp(hi, 0.0, 1.0)};
  w.truncated = w.ci.low != lo || w.ci.high != hi;
  return w;
}

/// Exact (Clopper-Pearson) binomial interval by beta-quantile inversion.
inline ConfidenceInterval clopper_pearson(Count successes, Count trials, double level = 0.95) {
  check_level(level);
  if (trials < 1 || successes < 0 || successes > trials)
    fail(ErrorKind::input, "Clopper-Pearson requires 0 <= successes <= trials, trials >= 1");
  const double alpha = 1.0 - level;
  const double x = static_cast<double>(successes);
  const double n = static_cast<double>(trials);
  ConfidenceInterval ci{0.0, 1.0};
  if (successes > 0)
    ci.low = boost::math::quantile(boost::math::beta_distribution<double>(x, n - x + 1.0),
                                   alpha / 2.0);
  if (successes < trials)
    ci.high = boost::math::quantile(boost::math::beta_distribution<double>(x + 1.0, n - x),
                                    1.0 - alpha / 2.0);
  return ci;
}

}  // namespace seroprev

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "spdsig/errors.hpp"
#include "spdsig/skew_t.hpp"

namespace spdsig {

struct LogScoreResult {
  double value = 0.0;
  bool underflow = false;
};

/// Negative log predictive density at the realization; lower is better, the
/// same direction as CRPS. A numerically vanishing density is capped at
/// `cap` and flagged instead of propagating an infinity.
inline LogScoreResult log_score(const SkewTParams& p, double realized, double cap = 1e3) {
  validate_params(p);
  const double z = (realized - p.location) / p.scale;
  const detail::StudentT tnu(p.dof), tnu1(p.dof + 1.0);
  const double w = p.shape * z * std::sqrt((p.dof + 1.0) / (p.dof + z * z));
  const double tail = tnu1.cdf(w);
  LogScoreResult r;
  if (tail <= 0.0) {
    r.value = cap;
    r.underflow = true;
    return r;
  }
  const double log_pdf =
      std::log(2.0) + tnu.log_pdf(z) + std::log(tail) - std::log(p.scale);
  r.value = -log_pdf;
  if (!std::isfinite(r.value) || r.value > cap) {
    r.value = cap;
    r.underflow = true;
  }
  return r;
}

struct CrpsConfig {
  double coverage = 12.0;  // integration half-width in units of scale
  double tol = 1e-6;       // quadrature tolerance in units of scale
  int min_steps = 256;
  int max_steps = 1 << 17;
};

/// Integrates (F(x) - 1{x >= y})^2 dx over [lo, hi] by composite trapezoid,
/// split at the realization so each side is smooth, with step halving until
/// the estimate changes by less than `tol`. Mass outside [lo, hi] is treated
/// as settled (F ~ 0 below, ~ 1 above): a realization beyond the window adds
/// its overshoot distance. The caller chooses bounds wide enough for that
/// reading; tails of the generic cdf are otherwise ignored.
template <typename Cdf>
double crps_from_cdf(const Cdf& cdf, double lo, double hi, double realized, double tol,
                     int min_steps = 256, int max_steps = 1 << 17) {
  if (!(hi > lo)) fail(errc::numerical_failure, "empty CRPS integration window");
  const double y = std::clamp(realized, lo, hi);

  auto segment = [&](double a, double b, bool above, int n) {
    // trapezoid of (F - indicator)^2 with n intervals
    if (!(b > a)) return 0.0;
    const double h = (b - a) / n;
    auto g = [&](double x) {
      const double d = cdf(x) - (above ? 1.0 : 0.0);
      return d * d;
    };
    double s = 0.5 * (g(a) + g(b));
    for (int i = 1; i < n; ++i) s += g(a + h * static_cast<double>(i));
    return s * h;
  };

  int n = min_steps;
  double prev = segment(lo, y, false, n) + segment(y, hi, true, n);
  for (n *= 2; n <= max_steps; n *= 2) {
    const double cur = segment(lo, y, false, n) + segment(y, hi, true, n);
    const double change = std::fabs(cur - prev);
    prev = cur;
    if (change <= tol) break;
  }

  // realization outside the window: the integrand is ~1 between the window
  // edge and y
  if (realized > hi) prev += realized - hi;
  if (realized < lo) prev += lo - realized;
  return prev;
}

/// CRPS of a fitted skew-t forecast at the realization. Always >= 0 and
/// positively homogeneous: scaling location, scale and realization together
/// scales the score.
inline double crps(const SkewTParams& p, double realized, const CrpsConfig& cfg = {}) {
  validate_params(p);
  const SkewTDist dist(p, /*mass_tol=*/1e-9, /*min_cells=*/2048);
  const double lo = p.location - cfg.coverage * p.scale;
  const double hi = p.location + cfg.coverage * p.scale;
  const double v = crps_from_cdf([&](double x) { return dist.cdf(x); }, lo, hi, realized,
                                 cfg.tol * p.scale, cfg.min_steps, cfg.max_steps);
  if (!(v >= 0.0) || !std::isfinite(v))
    fail(errc::numerical_failure, "CRPS quadrature failed");
  return v;
}

}  // namespace spdsig

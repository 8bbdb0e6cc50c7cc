#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "spdsig/distribution.hpp"
#include "spdsig/errors.hpp"

namespace spdsig {

/// Saturation rule for quartile skewness when an originally-open tail bin
/// carries at least `tail_share` of the mass: such a histogram is read as an
/// unambiguous directional signal. The substitute values default to the
/// bounds of the coefficient and can be overridden with historically
/// calibrated ones.
struct ExtremeTailRule {
  double tail_share = 0.25;
  double positive_value = 1.0;
  double negative_value = -1.0;
};

struct MomentFlags {
  bool cv_undefined = false;
  bool mode_indeterminate = false;
  bool bowley_saturated_high = false;
  bool bowley_saturated_low = false;
  bool pearson_mode_tie = false;
  bool degenerate_quantiles = false;

  bool any() const {
    return cv_undefined || mode_indeterminate || bowley_saturated_high ||
           bowley_saturated_low || pearson_mode_tie || degenerate_quantiles;
  }
  std::string to_string() const {
    std::string s;
    auto add = [&](bool on, const char* name) {
      if (!on) return;
      if (!s.empty()) s += ';';
      s += name;
    };
    add(cv_undefined, "cv_undefined");
    add(mode_indeterminate, "mode_indeterminate");
    add(bowley_saturated_high, "bowley_saturated_high");
    add(bowley_saturated_low, "bowley_saturated_low");
    add(pearson_mode_tie, "pearson_mode_tie");
    add(degenerate_quantiles, "degenerate_quantiles");
    return s;
  }
};

struct MomentSet {
  double mean = 0.0;
  double median = 0.0;
  double mode = 0.0;
  double variance = 0.0;
  double cv = 0.0;
  double bowley = 0.0;
  double pearson_mode_skew = 0.0;
  double kelly = 0.0;
  double moors_kurtosis = 0.0;
  MomentFlags flags;
};

inline double mean(const ClosedDistribution& d) {
  detail::require_nonempty(d);
  double m = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) m += d.bins[i].midpoint() * d.probs[i];
  return m;
}

inline double median(const ClosedDistribution& d) { return quantile(d, 0.5); }

/// Mode under the weighted-run reading: locate the (adjacent) run of bins
/// with maximal probability and shift within it according to the mass on
/// either side. A centred run with equal flanks lands on the run's centre.
inline double mode(const ClosedDistribution& d) {
  detail::require_nonempty(d);
  double max_p = 0.0;
  for (double p : d.probs) max_p = std::max(max_p, p);
  std::size_t first = d.size(), last = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.probs[i] == max_p) {
      first = std::min(first, i);
      last = std::max(last, i);
    }
  }
  for (std::size_t i = first; i <= last; ++i)
    if (d.probs[i] != max_p)
      fail(errc::indeterminate_mode, "maximal-probability bins are not adjacent");
  double left = 0.0, right = 0.0;
  for (std::size_t i = 0; i < first; ++i) left += d.probs[i];
  for (std::size_t i = last + 1; i < d.size(); ++i) right += d.probs[i];
  const double x = d.bins[first].lower;
  const double run_width = d.bins[last].upper - d.bins[first].lower;
  if (left + right <= 0.0) return x + 0.5 * run_width;
  return x + right / (right + left) * run_width;
}

inline double variance(const ClosedDistribution& d) {
  const double mu = mean(d);
  double v = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double dev = d.bins[i].midpoint() - mu;
    v += dev * dev * d.probs[i];
  }
  return v;
}

/// Standard deviation over mean. Undefined near a zero mean; the caller is
/// expected to flag the record rather than drop it.
inline double cv(const ClosedDistribution& d, double epsilon_mean = 1e-6) {
  const double mu = mean(d);
  if (std::fabs(mu) <= epsilon_mean)
    fail(errc::mean_near_zero, "mean within epsilon of zero, CV undefined");
  return std::sqrt(variance(d)) / mu;
}

/// Quartile skewness ((Q3-Q2)-(Q2-Q1))/(Q3-Q1), bounded in [-1,1]. A tail
/// bin that was open in the reported histogram and holds at least the rule's
/// share of mass short-circuits to the rule's saturation value.
inline double bowley_skewness(const ClosedDistribution& d,
                              const ExtremeTailRule& rule = {},
                              MomentFlags* flags = nullptr) {
  detail::require_nonempty(d);
  const bool top = d.upper_was_open && d.probs.back() >= rule.tail_share;
  const bool bottom = d.lower_was_open && d.probs.front() >= rule.tail_share;
  if (top || bottom) {
    if (top && bottom) {
      // Both extreme tails loaded: resolve toward the heavier one, neutral
      // on an exact tie.
      if (flags) {
        flags->bowley_saturated_high = true;
        flags->bowley_saturated_low = true;
      }
      if (d.probs.back() > d.probs.front()) return rule.positive_value;
      if (d.probs.back() < d.probs.front()) return rule.negative_value;
      return 0.0;
    }
    if (top) {
      if (flags) flags->bowley_saturated_high = true;
      return rule.positive_value;
    }
    if (flags) flags->bowley_saturated_low = true;
    return rule.negative_value;
  }
  const double q1 = quantile(d, 0.25);
  const double q2 = quantile(d, 0.50);
  const double q3 = quantile(d, 0.75);
  if (!(q3 > q1)) fail(errc::degenerate_iqr, "interquartile range is zero");
  return ((q3 - q2) - (q2 - q1)) / (q3 - q1);
}

/// (mean - mode)/sd with the mode read as the midpoint of the single most
/// probable bin; a tie is broken toward the first such bin and flagged.
inline double pearson_mode_skewness(const ClosedDistribution& d,
                                    MomentFlags* flags = nullptr) {
  detail::require_nonempty(d);
  const double sd = std::sqrt(variance(d));
  if (!(sd > 0.0)) fail(errc::zero_std_dev, "zero standard deviation");
  std::size_t max_i = 0;
  int max_count = 0;
  double max_p = -1.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.probs[i] > max_p) {
      max_p = d.probs[i];
      max_i = i;
      max_count = 1;
    } else if (d.probs[i] == max_p) {
      ++max_count;
    }
  }
  if (max_count > 1 && flags) flags->pearson_mode_tie = true;
  return (mean(d) - d.bins[max_i].midpoint()) / sd;
}

/// Decile skewness (P90 - 2 P50 + P10)/(P90 - P10). Implemented for
/// completeness; the default pipeline does not use it.
inline double kelly_skewness(const ClosedDistribution& d) {
  detail::require_nonempty(d);
  const double p10 = quantile(d, 0.10);
  const double p50 = quantile(d, 0.50);
  const double p90 = quantile(d, 0.90);
  if (!(p90 > p10)) fail(errc::degenerate_range, "P90 equals P10");
  return (p90 - 2.0 * p50 + p10) / (p90 - p10);
}

/// Octile kurtosis ((Q7/8 - Q5/8) + (Q3/8 - Q1/8))/(Q6/8 - Q2/8).
inline double moors_kurtosis(const ClosedDistribution& d) {
  detail::require_nonempty(d);
  std::array<double, 8> o{};
  for (int k = 1; k <= 7; ++k) o[static_cast<std::size_t>(k)] = quantile(d, k / 8.0);
  if (!(o[6] > o[2])) fail(errc::degenerate_octiles, "Q6/8 equals Q2/8");
  return ((o[7] - o[5]) + (o[3] - o[1])) / (o[6] - o[2]);
}

struct MomentOptions {
  double epsilon_mean = 1e-6;
  ExtremeTailRule tail_rule;
};

/// Computes every estimator, converting per-estimator degeneracies into
/// flags (with NaN values) instead of aborting the record.
inline MomentSet compute_moments(const ClosedDistribution& d,
                                 const MomentOptions& opt = {}) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  MomentSet m;
  m.mean = mean(d);
  m.median = median(d);
  m.variance = variance(d);
  try {
    m.mode = mode(d);
  } catch (const Error& e) {
    if (e.code() != errc::indeterminate_mode) throw;
    m.mode = nan;
    m.flags.mode_indeterminate = true;
  }
  try {
    m.cv = cv(d, opt.epsilon_mean);
  } catch (const Error& e) {
    if (e.code() != errc::mean_near_zero) throw;
    m.cv = nan;
    m.flags.cv_undefined = true;
  }
  auto guarded = [&](auto&& f) {
    try {
      return f();
    } catch (const Error& e) {
      switch (e.code()) {
        case errc::degenerate_iqr:
        case errc::degenerate_range:
        case errc::degenerate_octiles:
        case errc::zero_std_dev:
          m.flags.degenerate_quantiles = true;
          return nan;
        default:
          throw;
      }
    }
  };
  m.bowley = guarded([&] { return bowley_skewness(d, opt.tail_rule, &m.flags); });
  m.pearson_mode_skew = guarded([&] { return pearson_mode_skewness(d, &m.flags); });
  m.kelly = guarded([&] { return kelly_skewness(d); });
  m.moors_kurtosis = guarded([&] { return moors_kurtosis(d); });
  return m;
}

/// Pairwise Pearson correlations of (mean, cv, skewness, kurtosis) over a
/// panel of moment records. Records with an undefined entry are excluded
/// pairwise, so a flagged CV only removes the record from CV pairs.
struct CorrelationMatrix {
  std::array<std::array<double, 4>, 4> values{};
  static constexpr std::array<const char*, 4> labels{"mean", "cv", "skewness", "kurtosis"};
};

inline CorrelationMatrix moment_correlations(std::span<const MomentSet> panel) {
  if (panel.size() < 3)
    fail(errc::insufficient_data, "need at least 3 records for correlations");
  auto value = [](const MomentSet& m, std::size_t k) {
    switch (k) {
      case 0: return m.mean;
      case 1: return m.cv;
      case 2: return m.bowley;
      default: return m.moors_kurtosis;
    }
  };
  CorrelationMatrix out;
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a; b < 4; ++b) {
      std::vector<double> xs, ys;
      xs.reserve(panel.size());
      ys.reserve(panel.size());
      for (const MomentSet& m : panel) {
        const double x = value(m, a), y = value(m, b);
        if (std::isfinite(x) && std::isfinite(y)) {
          xs.push_back(x);
          ys.push_back(y);
        }
      }
      if (xs.size() < 3)
        fail(errc::insufficient_data,
             std::string("fewer than 3 complete records for pair (") +
                 CorrelationMatrix::labels[a] + ", " + CorrelationMatrix::labels[b] + ")");
      if (a == b) {
        out.values[a][b] = 1.0;
        continue;
      }
      const auto n = static_cast<double>(xs.size());
      double mx = 0.0, my = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
      }
      mx /= n;
      my /= n;
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
      }
      if (sxx <= 0.0 || syy <= 0.0)
        fail(errc::insufficient_data,
             std::string("zero variance in ") + CorrelationMatrix::labels[sxx <= 0.0 ? a : b]);
      const double r = sxy / std::sqrt(sxx * syy);
      out.values[a][b] = out.values[b][a] = std::clamp(r, -1.0, 1.0);
    }
  }
  return out;
}

}  // namespace spdsig

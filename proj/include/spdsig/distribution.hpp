#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "spdsig/errors.hpp"

namespace spdsig {

/// One histogram interval in percentage points. Open edges are encoded as
/// +-infinity; only the first bin may be open below and only the last open
/// above.
struct Bin {
  double lower = 0.0;
  double upper = 0.0;

  bool lower_open() const { return std::isinf(lower); }
  bool upper_open() const { return std::isinf(upper); }
  double width() const { return upper - lower; }
  double midpoint() const { return 0.5 * (lower + upper); }
};

/// A forecaster's reported histogram: contiguous ordered bins with one
/// probability weight each. Zero-probability bins are kept so bin indices
/// stay aligned with the survey template.
struct BinnedDistribution {
  std::vector<Bin> bins;
  std::vector<double> probs;

  std::size_t size() const { return bins.size(); }
  bool lower_open() const { return !bins.empty() && bins.front().lower_open(); }
  bool upper_open() const { return !bins.empty() && bins.back().upper_open(); }
};

/// A BinnedDistribution whose edges are all finite, ready for midpoint and
/// quantile arithmetic. Keeps a memo of which tails were originally open so
/// downstream estimators can apply extreme-tail rules.
struct ClosedDistribution {
  std::vector<Bin> bins;
  std::vector<double> probs;
  bool lower_was_open = false;
  bool upper_was_open = false;

  std::size_t size() const { return bins.size(); }
};

/// How to replace an open tail with a finite edge. By default the open bin
/// is extended to the width of its closed neighbour; a fixed width can be
/// forced instead (e.g. the survey's template bin width).
struct TailPolicy {
  double fixed_width = 0.0;  // <= 0 means "copy the adjacent bin's width"
};

inline void validate_distribution(const BinnedDistribution& d, double edge_tol = 1e-9) {
  if (d.bins.size() != d.probs.size())
    fail(errc::schema_error, "bin/probability length mismatch");
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Bin& b = d.bins[i];
    if (d.probs[i] < 0.0)
      fail(errc::negative_probability,
           "bin " + std::to_string(i) + " has probability " + std::to_string(d.probs[i]));
    if (std::isnan(d.probs[i]))
      fail(errc::negative_probability, "bin " + std::to_string(i) + " has NaN probability");
    if (b.lower_open() && i != 0)
      fail(errc::non_contiguous_bins, "interior bin " + std::to_string(i) + " open below");
    if (b.upper_open() && i + 1 != d.size())
      fail(errc::non_contiguous_bins, "interior bin " + std::to_string(i) + " open above");
    if (!b.lower_open() && !b.upper_open() && !(b.upper > b.lower))
      fail(errc::non_contiguous_bins,
           "bin " + std::to_string(i) + " is empty or reversed");
    if (i > 0 && !d.bins[i - 1].upper_open() && !b.lower_open()) {
      const double gap = std::fabs(b.lower - d.bins[i - 1].upper);
      const double scale = std::max({1.0, std::fabs(b.lower), std::fabs(d.bins[i - 1].upper)});
      if (gap > edge_tol * scale)
        fail(errc::non_contiguous_bins,
             "bins " + std::to_string(i - 1) + " and " + std::to_string(i) +
                 " are not contiguous");
    }
  }
}

inline BinnedDistribution make_distribution(std::vector<Bin> bins, std::vector<double> probs) {
  BinnedDistribution d{std::move(bins), std::move(probs)};
  validate_distribution(d);
  return d;
}

/// Rescales probabilities to sum to one. Already-normalized input is
/// returned unchanged, so applying this twice equals applying it once.
inline BinnedDistribution normalize(BinnedDistribution d) {
  double sum = 0.0;
  for (double p : d.probs) sum += p;
  if (sum <= 0.0) fail(errc::zero_mass, "probabilities sum to zero");
  if (std::fabs(sum - 1.0) <= 1e-12) return d;
  for (double& p : d.probs) p /= sum;
  return d;
}

/// Replaces open tail bins with finite ones. With the default policy an open
/// bin copies the width of its (finite) neighbour, which for a survey grid
/// of uniform bins reproduces the template width.
inline ClosedDistribution close_open_bins(const BinnedDistribution& d,
                                          const TailPolicy& policy = {}) {
  if (d.bins.empty()) fail(errc::empty_distribution, "no bins");
  ClosedDistribution out;
  out.bins = d.bins;
  out.probs = d.probs;
  out.lower_was_open = d.lower_open();
  out.upper_was_open = d.upper_open();

  auto tail_width = [&](const Bin& neighbour, const char* which) {
    if (policy.fixed_width > 0.0) return policy.fixed_width;
    if (neighbour.lower_open() || neighbour.upper_open() || !(neighbour.width() > 0.0))
      fail(errc::no_closed_neighbor,
           std::string("cannot close ") + which + " tail: no closed adjacent bin");
    return neighbour.width();
  };

  if (out.lower_was_open) {
    if (out.size() < 2) fail(errc::no_closed_neighbor, "single open bin");
    const double w = tail_width(out.bins[1], "lower");
    out.bins.front().lower = out.bins.front().upper - w;
  }
  if (out.upper_was_open) {
    if (out.size() < 2) fail(errc::no_closed_neighbor, "single open bin");
    const double w = tail_width(out.bins[out.size() - 2], "upper");
    out.bins.back().upper = out.bins.back().lower + w;
  }
  return out;
}

namespace detail {
inline void require_nonempty(const ClosedDistribution& d) {
  if (d.bins.empty()) fail(errc::empty_distribution, "no bins");
}
}  // namespace detail

/// Inverse CDF under the piecewise-uniform reading of the histogram: find
/// the first bin whose cumulative probability reaches p and interpolate
/// linearly inside it.
inline double quantile(const ClosedDistribution& d, double p) {
  detail::require_nonempty(d);
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("quantile level must lie strictly inside (0,1)");
  double cum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double prev = cum;
    cum += d.probs[i];
    if (cum >= p) {
      // The first bin crossing p always has positive mass (a zero-mass bin
      // cannot move the cumulative past p).
      return d.bins[i].lower + (p - prev) / (cum - prev) * d.bins[i].width();
    }
  }
  // p < 1 but rounding left the cumulative fractionally short: clamp to the
  // top edge.
  return d.bins.back().upper;
}

/// Piecewise-linear CDF consistent with quantile(); clamps to 0 below the
/// support and 1 above it.
inline double cdf(const ClosedDistribution& d, double x) {
  detail::require_nonempty(d);
  if (x <= d.bins.front().lower) return 0.0;
  if (x >= d.bins.back().upper) return 1.0;
  double cum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (x < d.bins[i].upper) {
      const double w = d.bins[i].width();
      const double frac = w > 0.0 ? (x - d.bins[i].lower) / w : 1.0;
      return cum + d.probs[i] * frac;
    }
    cum += d.probs[i];
  }
  return 1.0;
}

}  // namespace spdsig

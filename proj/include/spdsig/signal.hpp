#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spdsig/calendar.hpp"
#include "spdsig/errors.hpp"
#include "spdsig/linalg.hpp"

namespace spdsig {

/// Quadrant of (median deviation from target, skewness). Agreement in sign
/// is a strong signal, disagreement a weak one; an exact zero in either
/// component is neutral.
enum class SignalClass { strong_up, weak_up, weak_down, strong_down, neutral };

inline const char* signal_class_name(SignalClass c) {
  switch (c) {
    case SignalClass::strong_up: return "strong_up";
    case SignalClass::weak_up: return "weak_up";
    case SignalClass::weak_down: return "weak_down";
    case SignalClass::strong_down: return "strong_down";
    case SignalClass::neutral: return "neutral";
  }
  return "neutral";
}

inline SignalClass classify(double median_dev, double skew) {
  if (median_dev == 0.0 || skew == 0.0) return SignalClass::neutral;
  if (median_dev > 0.0) return skew > 0.0 ? SignalClass::strong_up : SignalClass::weak_down;
  return skew > 0.0 ? SignalClass::weak_up : SignalClass::strong_down;
}

struct SignalRecord {
  std::string forecaster_id;
  Quarter round;
  std::string horizon;
  double median_dev = 0.0;  // distribution median minus the policy target
  double skew = 0.0;        // quartile skewness, demeaned per forecaster
  SignalClass cls = SignalClass::neutral;
};

/// Removes each forecaster's own average skewness (a forecaster fixed
/// effect) in place, then reclassifies. After this the per-forecaster mean
/// of `skew` is zero, so applying it twice is a no-op.
inline void demean_skew_by_forecaster(std::vector<SignalRecord>& records) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const SignalRecord& r : records) {
    auto& [sum, n] = acc[r.forecaster_id];
    sum += r.skew;
    ++n;
  }
  for (SignalRecord& r : records) {
    const auto& [sum, n] = acc[r.forecaster_id];
    r.skew -= sum / n;
    r.cls = classify(r.median_dev, r.skew);
  }
}

enum class AggregateMethod { mean, median };

/// Cross-section of one survey round: central tendency of the two signal
/// components, their quartiles for dispersion bands, and the class mix.
struct RoundAggregate {
  Quarter round;
  int n = 0;
  double q_bar = 0.0;  // aggregated median deviation
  double a_bar = 0.0;  // aggregated (demeaned) skewness
  double q_q1 = 0.0, q_q3 = 0.0;
  double a_q1 = 0.0, a_q3 = 0.0;
  std::array<int, 5> class_counts{};  // indexed by SignalClass order
};

inline RoundAggregate aggregate_round(Quarter round,
                                      std::span<const SignalRecord> records,
                                      AggregateMethod method) {
  if (records.empty())
    fail(errc::empty_round, "no records in round " + format_quarter(round));
  RoundAggregate agg;
  agg.round = round;
  agg.n = static_cast<int>(records.size());
  std::vector<double> devs, skews;
  devs.reserve(records.size());
  skews.reserve(records.size());
  for (const SignalRecord& r : records) {
    devs.push_back(r.median_dev);
    skews.push_back(r.skew);
    agg.class_counts[static_cast<std::size_t>(r.cls)] += 1;
  }
  auto centre = [&](const std::vector<double>& v) {
    if (method == AggregateMethod::median) return linalg::sample_quantile(v, 0.5);
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  agg.q_bar = centre(devs);
  agg.a_bar = centre(skews);
  agg.q_q1 = linalg::sample_quantile(devs, 0.25);
  agg.q_q3 = linalg::sample_quantile(devs, 0.75);
  agg.a_q1 = linalg::sample_quantile(skews, 0.25);
  agg.a_q3 = linalg::sample_quantile(skews, 0.75);
  return agg;
}

/// Groups records by round (ascending) and aggregates each cross-section.
inline std::vector<RoundAggregate> aggregate_rounds(std::span<const SignalRecord> records,
                                                    AggregateMethod method) {
  std::map<Quarter, std::vector<SignalRecord>> by_round;
  for (const SignalRecord& r : records) by_round[r.round].push_back(r);
  std::vector<RoundAggregate> out;
  out.reserve(by_round.size());
  for (const auto& [round, group] : by_round)
    out.push_back(aggregate_round(round, group, method));
  return out;
}

struct NormScheme {
  enum class Kind { full_sample, rolling } kind = Kind::full_sample;
  int window = 12;  // trailing quarters, rolling scheme only
};

/// Scales a series into [-1,1] by its maximum absolute value, either over
/// the whole sample (default) or over a trailing window for real-time use.
/// Signs are preserved.
inline std::vector<double> normalize_series(std::span<const double> x,
                                            const NormScheme& scheme = {}) {
  if (x.empty()) fail(errc::all_zero_series, "empty series");
  double max_abs = 0.0;
  for (double v : x) max_abs = std::max(max_abs, std::fabs(v));
  if (max_abs == 0.0) fail(errc::all_zero_series, "series is identically zero");
  std::vector<double> out(x.size());
  if (scheme.kind == NormScheme::Kind::full_sample) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / max_abs;
    return out;
  }
  const int w = std::max(1, scheme.window);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(w) ? i + 1 - w : 0;
    double m = 0.0;
    for (std::size_t j = lo; j <= i; ++j) m = std::max(m, std::fabs(x[j]));
    out[i] = m == 0.0 ? 0.0 : x[i] / m;
  }
  return out;
}

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Per-round index value. When the two components agree in sign the index
/// carries their joint magnitude with that sign; when they disagree it is
/// the scaled difference, which vanishes at equal opposite magnitudes. An
/// exact zero in either raw component makes the sign product zero, giving
/// both branches weight one half.
inline double ssi_combine(double q_bar, double a_bar, double q_norm, double a_norm) {
  const double s = sgn(a_bar) * sgn(q_bar);
  const double agree = std::fabs(q_norm) * std::fabs(a_norm) * (1.0 + s) / 2.0;
  const double diverge = (q_norm + a_norm) / 2.0 * (1.0 - s) / 2.0;
  return q_bar * (agree + diverge);
}

struct SsiSeries {
  std::vector<Quarter> rounds;
  std::vector<double> q_bar, a_bar;
  std::vector<double> q_norm, a_norm;
  std::vector<double> ssi;
};

struct RoundSeries {
  std::vector<Quarter> rounds;
  std::vector<double> values;
};

/// Builds the index series from aligned component series. Normalization is
/// computed on the full provided sample; an identically-zero component is
/// mapped to zeros (the index is then zero wherever the leading factor is).
inline SsiSeries ssi(const RoundSeries& q, const RoundSeries& a,
                     const NormScheme& scheme = {}) {
  if (q.rounds != a.rounds)
    fail(errc::alignment_error, "component series cover different rounds");
  if (q.rounds.size() != q.values.size() || a.rounds.size() != a.values.size())
    fail(errc::alignment_error, "series length mismatch");
  SsiSeries out;
  out.rounds = q.rounds;
  out.q_bar = q.values;
  out.a_bar = a.values;
  auto norm_or_zero = [&](const std::vector<double>& v) {
    try {
      return normalize_series(v, scheme);
    } catch (const Error& e) {
      if (e.code() != errc::all_zero_series || v.empty()) throw;
      return std::vector<double>(v.size(), 0.0);
    }
  };
  out.q_norm = norm_or_zero(out.q_bar);
  out.a_norm = norm_or_zero(out.a_bar);
  out.ssi.resize(out.rounds.size());
  for (std::size_t t = 0; t < out.rounds.size(); ++t)
    out.ssi[t] = ssi_combine(out.q_bar[t], out.a_bar[t], out.q_norm[t], out.a_norm[t]);
  return out;
}

inline SsiSeries ssi_from_aggregates(std::span<const RoundAggregate> aggs,
                                     const NormScheme& scheme = {}) {
  RoundSeries q, a;
  for (const RoundAggregate& g : aggs) {
    q.rounds.push_back(g.round);
    q.values.push_back(g.q_bar);
    a.rounds.push_back(g.round);
    a.values.push_back(g.a_bar);
  }
  return ssi(q, a, scheme);
}

}  // namespace spdsig

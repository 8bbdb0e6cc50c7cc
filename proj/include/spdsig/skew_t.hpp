#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "spdsig/errors.hpp"

namespace spdsig {

/// Azzalini-type skew-t: location-scale family over the standardized density
///   2 t_nu(z) T_{nu+1}(shape * z * sqrt((nu+1)/(nu+z^2))).
/// shape = 0 reduces to a location-scale Student-t. dof must exceed 1 so the
/// mean (and with it the CRPS integral) exists.
struct SkewTParams {
  double location = 0.0;
  double scale = 1.0;
  double shape = 0.0;
  double dof = 10.0;
};

inline void validate_params(const SkewTParams& p) {
  if (!(p.scale > 0.0)) throw std::invalid_argument("skew-t scale must be positive");
  if (!(p.dof > 1.0)) throw std::invalid_argument("skew-t dof must exceed 1");
  if (!std::isfinite(p.location) || !std::isfinite(p.shape))
    throw std::invalid_argument("skew-t parameters must be finite");
}

namespace detail {

/// Student-t density/cdf with the normalization constant cached per nu.
class StudentT {
 public:
  explicit StudentT(double nu)
      : nu_(nu),
        log_norm_(std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                  0.5 * std::log(nu * 3.14159265358979323846)),
        dist_(nu) {}

  double nu() const { return nu_; }
  double pdf(double x) const {
    return std::exp(log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(x * x / nu_));
  }
  double log_pdf(double x) const {
    return log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(x * x / nu_);
  }
  double cdf(double x) const {
    if (!std::isfinite(x)) return x > 0 ? 1.0 : 0.0;
    return boost::math::cdf(dist_, x);
  }

 private:
  double nu_;
  double log_norm_;
  boost::math::students_t_distribution<double> dist_;
};

/// Recursive adaptive Simpson quadrature.
template <typename F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol, int depth = 48) {
  if (!(b > a)) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

/// Standardized skew-t (location 0, scale 1). The CDF is obtained by
/// integrating the density: a cumulative composite-Simpson table over
/// [-zmax, zmax], refined until the total-mass defect meets `mass_tol`,
/// plus tail integrals on an inverted axis (u = z/t) so the polynomially
/// heavy tails are captured without truncation error.
class StdSkewT {
 public:
  StdSkewT(double alpha, double nu, double zmax = 40.0, int min_cells = 2048,
           double mass_tol = 1e-11)
      : alpha_(alpha), nu_(nu), tnu_(nu), tnu1_(nu + 1.0), zmax_(zmax),
        tail_tol_(std::min(1e-13, 1e-3 * mass_tol)) {
    left_base_ = tail_beyond(-zmax_);
    right_tail_at_zmax_ = tail_beyond(zmax_);
    int cells = min_cells;
    build_table(cells);
    while (cells < 65536 && mass_defect() > mass_tol) {
      cells *= 2;
      build_table(cells);
    }
  }

  double alpha() const { return alpha_; }
  double nu() const { return nu_; }

  double pdf(double z) const {
    const double w = alpha_ * z * std::sqrt((nu_ + 1.0) / (nu_ + z * z));
    return 2.0 * tnu_.pdf(z) * tnu1_.cdf(w);
  }

  double log_pdf(double z) const {
    const double w = alpha_ * z * std::sqrt((nu_ + 1.0) / (nu_ + z * z));
    const double t = tnu1_.cdf(w);
    if (t <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(2.0) + tnu_.log_pdf(z) + std::log(t);
  }

  double cdf(double z) const {
    if (std::isnan(z)) return std::numeric_limits<double>::quiet_NaN();
    if (z <= -zmax_) return tail_beyond(z);
    if (z >= zmax_) return 1.0 - tail_beyond(z);
    const double t = (z + zmax_) / h_;
    auto k = static_cast<std::size_t>(t);
    k = std::min(k, cum_.size() - 2);
    // cubic Hermite between table nodes: values from the cumulative table,
    // slopes from the stored density
    const double u = t - static_cast<double>(k);
    const double u2 = u * u, u3 = u2 * u;
    const double f0 = cum_[k], f1 = cum_[k + 1];
    const double d0 = pdf_nodes_[k] * h_, d1 = pdf_nodes_[k + 1] * h_;
    return (2.0 * u3 - 3.0 * u2 + 1.0) * f0 + (u3 - 2.0 * u2 + u) * d0 +
           (-2.0 * u3 + 3.0 * u2) * f1 + (u3 - u2) * d1;
  }

  /// Inverse CDF by monotone bracketing plus bisection; levels beyond the
  /// tabulated range invert the tail integral with a regularly-varying
  /// initial bracket.
  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0))
      throw std::invalid_argument("quantile level must lie strictly inside (0,1)");
    const double plo = cdf(-zmax_), phi = cdf(zmax_);
    if (p < plo) return tail_quantile(p, /*left=*/true);
    if (p > phi) return tail_quantile(p, /*left=*/false);
    std::size_t lo = 0, hi = cum_.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (cum_[mid] < p ? lo : hi) = mid;
    }
    double a = -zmax_ + static_cast<double>(lo) * h_;
    double b = a + h_;
    for (int it = 0; it < 80 && b - a > 1e-13 * std::max(1.0, std::fabs(a)); ++it) {
      const double m = 0.5 * (a + b);
      (cdf(m) < p ? a : b) = m;
    }
    return 0.5 * (a + b);
  }

 private:
  void build_table(int cells) {
    h_ = 2.0 * zmax_ / cells;
    cum_.assign(static_cast<std::size_t>(cells) + 1, 0.0);
    pdf_nodes_.assign(cum_.size(), 0.0);
    cum_[0] = left_base_;
    double z = -zmax_;
    double f0 = pdf(z);
    pdf_nodes_[0] = f0;
    for (int k = 0; k < cells; ++k) {
      const double zm = z + 0.5 * h_, z1 = z + h_;
      const double fm = pdf(zm), f1 = pdf(z1);
      cum_[static_cast<std::size_t>(k) + 1] =
          cum_[static_cast<std::size_t>(k)] + h_ / 6.0 * (f0 + 4.0 * fm + f1);
      pdf_nodes_[static_cast<std::size_t>(k) + 1] = f1;
      z = z1;
      f0 = f1;
    }
  }

  double mass_defect() const {
    return std::fabs(cum_.back() + right_tail_at_zmax_ - 1.0);
  }

  /// Mass strictly beyond z, away from the centre: for z < 0 the integral
  /// over (-inf, z], for z > 0 over [z, inf).
  double tail_beyond(double z) const {
    const double za = std::fabs(z);
    if (!(za > 0.0)) return 0.5;
    const bool left = z < 0.0;
    auto f = [&](double t) {
      if (t <= 0.0) return 0.0;
      const double u = (left ? -za : za) / t;
      return pdf(u) * za / (t * t);
    };
    return adaptive_simpson(f, 0.0, 1.0, tail_tol_);
  }

  double tail_quantile(double p, bool left) const {
    const double target = left ? p : 1.0 - p;
    if (target < std::numeric_limits<double>::min() * 1e6)
      fail(errc::numerical_failure, "quantile level too extreme to bracket");
    double a = zmax_;
    const double base = tail_beyond(left ? -a : a);
    double b = a * std::pow(base / target, 1.0 / nu_) * 2.0;
    int guard = 0;
    while (tail_beyond(left ? -b : b) > target) {
      b *= 4.0;
      if (++guard > 60)
        fail(errc::numerical_failure, "tail quantile bracketing failed");
    }
    for (int it = 0; it < 200 && b - a > 1e-12 * b; ++it) {
      const double m = 0.5 * (a + b);
      (tail_beyond(left ? -m : m) > target ? a : b) = m;
    }
    const double z = 0.5 * (a + b);
    return left ? -z : z;
  }

  double alpha_, nu_;
  StudentT tnu_, tnu1_;
  double zmax_;
  double tail_tol_;
  double h_ = 0.0;
  double left_base_ = 0.0;
  double right_tail_at_zmax_ = 0.0;
  std::vector<double> cum_;
  std::vector<double> pdf_nodes_;
};

}  // namespace detail

/// Immutable skew-t distribution object. Construction integrates the
/// standardized density once; pdf/cdf/quantile evaluations are then cheap.
/// Prefer this over the free functions inside loops. `mass_tol` trades CDF
/// accuracy for construction cost.
class SkewTDist {
 public:
  explicit SkewTDist(const SkewTParams& p, double mass_tol = 1e-11, int min_cells = 2048,
                     double zmax = 40.0)
      : p_((validate_params(p), p)), core_(p.shape, p.dof, zmax, min_cells, mass_tol) {}

  const SkewTParams& params() const { return p_; }

  double pdf(double x) const { return core_.pdf(z(x)) / p_.scale; }
  double log_pdf(double x) const { return core_.log_pdf(z(x)) - std::log(p_.scale); }
  double cdf(double x) const { return core_.cdf(z(x)); }
  double quantile(double p) const { return p_.location + p_.scale * core_.quantile(p); }

 private:
  double z(double x) const { return (x - p_.location) / p_.scale; }

  SkewTParams p_;
  detail::StdSkewT core_;
};

inline double skewt_pdf(const SkewTParams& p, double x) {
  validate_params(p);
  const double z = (x - p.location) / p.scale;
  const detail::StudentT tnu(p.dof), tnu1(p.dof + 1.0);
  const double w = p.shape * z * std::sqrt((p.dof + 1.0) / (p.dof + z * z));
  return 2.0 / p.scale * tnu.pdf(z) * tnu1.cdf(w);
}

inline double skewt_cdf(const SkewTParams& p, double x) { return SkewTDist(p).cdf(x); }

inline double skewt_quantile(const SkewTParams& p, double prob) {
  return SkewTDist(p).quantile(prob);
}

struct SkewTFitConfig {
  std::array<double, 4> taus{0.05, 0.25, 0.75, 0.95};
  double shape_min = -30.0, shape_max = 30.0;
  double dof_min = 1.2, dof_max = 100.0;
  double residual_tol = 1e-6;
  int nm_max_iter = 220;
  int max_starts = 9;
  int extra_random_starts = 4;
  std::uint64_t seed = 0;
  std::optional<std::pair<double, double>> warm_start;  // (shape, dof)
};

struct SkewTFit {
  SkewTParams params;
  double residual = 0.0;  // sqrt of the summed squared quantile mismatches
  bool converged = false;
  int evaluations = 0;
};

namespace detail {

/// Location and scale enter the quantile map affinely, so a trial
/// (shape, dof) determines them by least squares on the standardized
/// quantiles; the numerical search runs over (shape, log(dof-1)) only.
struct ProfileEval {
  double ss = std::numeric_limits<double>::infinity();
  double location = 0.0, scale = 1.0, shape = 0.0, dof = 10.0;
  std::array<double, 4> z{};
};

inline ProfileEval profile_from_z(const std::array<double, 4>& z,
                                  const std::array<double, 4>& target, double shape,
                                  double dof) {
  ProfileEval e;
  e.shape = shape;
  e.dof = dof;
  e.z = z;
  double zm = 0.0, qm = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    zm += z[i];
    qm += target[i];
  }
  zm /= 4.0;
  qm /= 4.0;
  double szz = 0.0, szq = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    szz += (z[i] - zm) * (z[i] - zm);
    szq += (z[i] - zm) * (target[i] - qm);
  }
  if (!(szz > 0.0)) return e;
  e.scale = std::max(szq / szz, 1e-12);
  e.location = qm - e.scale * zm;
  double ss = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double r = target[i] - (e.location + e.scale * z[i]);
    ss += r * r;
  }
  e.ss = ss;
  return e;
}

/// Pointwise high-accuracy standardized quantiles: the CDF at a point is the
/// cached tail mass at -Z plus one adaptive integral of the density, and the
/// quantile refines a nearby initial guess by safeguarded Newton steps.
class AccurateQuantileMap {
 public:
  AccurateQuantileMap(double alpha, double nu)
      : alpha_(alpha), nu_(nu), tnu_(nu), tnu1_(nu + 1.0) {
    base_ = tail_beyond(-kZ);
  }

  double pdf(double z) const {
    const double w = alpha_ * z * std::sqrt((nu_ + 1.0) / (nu_ + z * z));
    return 2.0 * tnu_.pdf(z) * tnu1_.cdf(w);
  }

  double cdf(double z) const {
    if (z <= -kZ) return tail_beyond(z);
    if (z >= kZ) return 1.0 - tail_beyond(z);
    return base_ + adaptive_simpson([this](double u) { return pdf(u); }, -kZ, z, 5e-13);
  }

  double quantile(double tau, double z0) const {
    double z = std::clamp(z0, -kZ + 1e-6, kZ - 1e-6);
    double lo = -kZ, hi = kZ;
    for (int it = 0; it < 20; ++it) {
      const double f = cdf(z) - tau;
      if (f > 0.0) hi = std::min(hi, z); else lo = std::max(lo, z);
      if (std::fabs(f) <= 1e-12) break;
      const double d = pdf(z);
      double step = d > 0.0 ? -f / d : 0.0;
      double zn = z + step;
      if (!(zn > lo && zn < hi) || step == 0.0) zn = 0.5 * (lo + hi);
      if (std::fabs(zn - z) <= 1e-14 * std::max(1.0, std::fabs(z))) {
        z = zn;
        break;
      }
      z = zn;
    }
    return z;
  }

 private:
  static constexpr double kZ = 40.0;

  double tail_beyond(double z) const {
    const double za = std::fabs(z);
    if (!(za > 0.0)) return 0.5;
    const bool left = z < 0.0;
    auto f = [&](double t) {
      if (t <= 0.0) return 0.0;
      const double u = (left ? -za : za) / t;
      return pdf(u) * za / (t * t);
    };
    return adaptive_simpson(f, 0.0, 1.0, 1e-14);
  }

  double alpha_, nu_;
  StudentT tnu_, tnu1_;
  double base_ = 0.0;
};

/// Plain deterministic Nelder-Mead on a 2-D objective.
template <typename F>
std::pair<std::array<double, 2>, double> nelder_mead_2d(const F& f, std::array<double, 2> x0,
                                                        double step0, double step1,
                                                        int max_iter, double ftol_abs) {
  struct Vertex {
    std::array<double, 2> x;
    double fx;
  };
  std::array<Vertex, 3> s{Vertex{x0, f(x0)},
                          Vertex{{x0[0] + step0, x0[1]}, 0.0},
                          Vertex{{x0[0], x0[1] + step1}, 0.0}};
  s[1].fx = f(s[1].x);
  s[2].fx = f(s[2].x);
  auto by_value = [](const Vertex& a, const Vertex& b) { return a.fx < b.fx; };
  for (int it = 0; it < max_iter; ++it) {
    std::sort(s.begin(), s.end(), by_value);
    const double size = std::fabs(s[1].x[0] - s[0].x[0]) + std::fabs(s[2].x[0] - s[0].x[0]) +
                        std::fabs(s[1].x[1] - s[0].x[1]) + std::fabs(s[2].x[1] - s[0].x[1]);
    if (s[0].fx <= ftol_abs || size < 1e-10) break;
    const std::array<double, 2> c{0.5 * (s[0].x[0] + s[1].x[0]), 0.5 * (s[0].x[1] + s[1].x[1])};
    auto blend = [&](double t) {
      return std::array<double, 2>{c[0] + t * (c[0] - s[2].x[0]), c[1] + t * (c[1] - s[2].x[1])};
    };
    const auto xr = blend(1.0);
    const double fr = f(xr);
    if (fr < s[0].fx) {
      const auto xe = blend(2.0);
      const double fe = f(xe);
      s[2] = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
    } else if (fr < s[1].fx) {
      s[2] = Vertex{xr, fr};
    } else {
      const auto xc = blend(fr < s[2].fx ? 0.5 : -0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, s[2].fx)) {
        s[2] = Vertex{xc, fc};
      } else {
        for (int i = 1; i < 3; ++i) {
          for (int j = 0; j < 2; ++j) s[i].x[j] = s[0].x[j] + 0.5 * (s[i].x[j] - s[0].x[j]);
          s[i].fx = f(s[i].x);
        }
      }
    }
  }
  std::sort(s.begin(), s.end(), by_value);
  return {s[0].x, s[0].fx};
}

}  // namespace detail

/// Fits the four skew-t parameters to four predicted quantiles (the exactly
/// identified case) by minimizing the summed squared quantile mismatches.
/// Stage 1 is a multi-start Nelder-Mead over (shape, dof) with location and
/// scale profiled out, against a fast tabulated quantile map; stage 2 is a
/// damped Gauss-Newton refinement of the same profiled residuals against
/// pointwise high-accuracy quantiles. Slow convergence never throws: the
/// best point found is returned with its residual and `converged` unset.
inline SkewTFit fit_skewt_to_quantiles(const std::array<double, 4>& values,
                                       const SkewTFitConfig& cfg = {}) {
  for (std::size_t i = 1; i < 4; ++i)
    if (!(values[i] > values[i - 1]))
      fail(errc::non_increasing_quantiles, "input quantiles must be strictly increasing");
  for (std::size_t i = 1; i < 4; ++i)
    if (!(cfg.taus[i] > cfg.taus[i - 1]))
      throw std::invalid_argument("fit taus must be strictly increasing");

  const double spread = values[3] - values[0];
  const double log_df_min = std::log(cfg.dof_min - 1.0);
  const double log_df_max = std::log(cfg.dof_max - 1.0);
  int evaluations = 0;

  auto coarse_eval = [&](double shape_raw, double log_df_raw) {
    ++evaluations;
    const double shape = std::clamp(shape_raw, cfg.shape_min, cfg.shape_max);
    const double log_df = std::clamp(log_df_raw, log_df_min, log_df_max);
    const double dof = 1.0 + std::exp(log_df);
    detail::StdSkewT core(shape, dof, /*zmax=*/16.0, /*min_cells=*/768, /*mass_tol=*/1e-6);
    std::array<double, 4> z{};
    for (std::size_t i = 0; i < 4; ++i) z[i] = core.quantile(cfg.taus[i]);
    auto e = detail::profile_from_z(z, values, shape, dof);
    const double excess = (shape_raw - shape) * (shape_raw - shape) +
                          (log_df_raw - log_df) * (log_df_raw - log_df);
    e.ss += excess * (1.0 + e.ss);
    return e;
  };

  // direction heuristic from the asymmetry of the target quantiles
  const double upper = values[3] - values[2], lower = values[1] - values[0];
  const double asym = (upper - lower) / std::max(upper + lower, 1e-300);
  const double a0 = 6.0 * asym;

  std::vector<std::array<double, 2>> starts{
      {a0, std::log(7.0)},  {0.0, std::log(7.0)},  {2.0, std::log(4.0)},
      {-2.0, std::log(4.0)}, {6.0, std::log(2.0)}, {-6.0, std::log(2.0)},
      {0.0, std::log(49.0)}, {15.0, std::log(1.5)}, {-15.0, std::log(1.5)}};
  if (starts.size() > static_cast<std::size_t>(cfg.max_starts))
    starts.resize(static_cast<std::size_t>(cfg.max_starts));
  if (cfg.warm_start) {
    const double t = std::clamp(std::log(std::max(cfg.warm_start->second - 1.0, 1e-6)),
                                log_df_min, log_df_max);
    starts.insert(starts.begin(),
                  {std::clamp(cfg.warm_start->first, cfg.shape_min, cfg.shape_max), t});
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> ua(cfg.shape_min, cfg.shape_max);
  std::uniform_real_distribution<double> ut(log_df_min, log_df_max);
  for (int i = 0; i < cfg.extra_random_starts; ++i) starts.push_back({ua(rng), ut(rng)});

  const double ss_stop = std::pow(1e-8 * std::max(spread, 1e-12), 2);
  auto obj = [&](const std::array<double, 2>& x) { return coarse_eval(x[0], x[1]).ss; };

  detail::ProfileEval best;
  std::array<double, 2> best_x{0.0, std::log(9.0)};
  for (const auto& s0 : starts) {
    auto [x, fx] = detail::nelder_mead_2d(obj, s0, 0.7, 0.35, cfg.nm_max_iter, ss_stop);
    if (fx < best.ss) {
      best = coarse_eval(x[0], x[1]);
      best_x = x;
    }
    if (best.ss <= ss_stop) break;
  }

  // Gauss-Newton against the high-accuracy quantile map, warm-started on the
  // coarse solution's standardized quantiles
  auto accurate_eval = [&](double shape_raw, double log_df_raw,
                           const std::array<double, 4>& z_hint) {
    ++evaluations;
    const double shape = std::clamp(shape_raw, cfg.shape_min, cfg.shape_max);
    const double log_df = std::clamp(log_df_raw, log_df_min, log_df_max);
    const double dof = 1.0 + std::exp(log_df);
    detail::AccurateQuantileMap map(shape, dof);
    std::array<double, 4> z{};
    for (std::size_t i = 0; i < 4; ++i) z[i] = map.quantile(cfg.taus[i], z_hint[i]);
    return detail::profile_from_z(z, values, shape, dof);
  };

  auto residuals_of = [&](const detail::ProfileEval& e) {
    std::array<double, 4> r{};
    for (std::size_t i = 0; i < 4; ++i)
      r[i] = values[i] - (e.location + e.scale * e.z[i]);
    return r;
  };

  std::array<double, 2> x = best_x;
  x[0] = std::clamp(x[0], cfg.shape_min, cfg.shape_max);
  x[1] = std::clamp(x[1], log_df_min, log_df_max);
  auto acc = accurate_eval(x[0], x[1], best.z);
  const double gn_target = std::pow(1e-9 * std::max(spread, 1e-12), 2);
  for (int it = 0; it < 8 && acc.ss > gn_target; ++it) {
    const auto r0 = residuals_of(acc);
    const double h0 = 1e-4, h1 = 1e-4;
    const auto ea = accurate_eval(x[0] + h0, x[1], acc.z);
    const auto eb = accurate_eval(x[0], x[1] + h1, acc.z);
    const auto ra = residuals_of(ea), rb = residuals_of(eb);
    double jtj00 = 0, jtj01 = 0, jtj11 = 0, jtr0 = 0, jtr1 = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      const double j0 = (ra[i] - r0[i]) / h0;
      const double j1 = (rb[i] - r0[i]) / h1;
      jtj00 += j0 * j0;
      jtj01 += j0 * j1;
      jtj11 += j1 * j1;
      jtr0 += j0 * r0[i];
      jtr1 += j1 * r0[i];
    }
    const double damp = 1e-10 * (jtj00 + jtj11) + 1e-300;
    const double det = (jtj00 + damp) * (jtj11 + damp) - jtj01 * jtj01;
    if (!(std::fabs(det) > 0.0)) break;
    double d0 = (-jtr0 * (jtj11 + damp) + jtr1 * jtj01) / det;
    double d1 = (-jtr1 * (jtj00 + damp) + jtr0 * jtj01) / det;
    bool accepted = false;
    for (double step = 1.0; step >= 1.0 / 64.0; step *= 0.5) {
      std::array<double, 2> xn{std::clamp(x[0] + step * d0, cfg.shape_min, cfg.shape_max),
                               std::clamp(x[1] + step * d1, log_df_min, log_df_max)};
      auto en = accurate_eval(xn[0], xn[1], acc.z);
      if (en.ss < acc.ss) {
        x = xn;
        acc = en;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }

  SkewTFit out;
  out.params.location = acc.location;
  out.params.scale = std::max(acc.scale, 1e-12);
  out.params.shape = acc.shape;
  out.params.dof = acc.dof;
  out.residual = std::sqrt(acc.ss);
  out.converged = out.residual <= cfg.residual_tol * std::max(1.0, spread);
  out.evaluations = evaluations;
  return out;
}

}  // namespace spdsig

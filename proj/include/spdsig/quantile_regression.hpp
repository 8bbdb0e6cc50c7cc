#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spdsig/errors.hpp"
#include "spdsig/linalg.hpp"

namespace spdsig {

/// Asymmetric absolute (check) loss summed over observations; its minimizer
/// in beta is the conditional tau-quantile fit.
inline double pinball_loss(std::span<const double> y, const Matrix& X,
                           std::span<const double> beta, double tau) {
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double u = y[i] - linalg::dot(X.row(i), beta);
    loss += u >= 0.0 ? tau * u : (tau - 1.0) * (-u);
  }
  return loss;
}

struct QrConfig {
  double tol = 1e-10;      // interior-point termination (feasibility + gap)
  int max_iter = 200;      // interior-point iteration cap
  double rank_tol = 1e-10; // collinearity detection on the design matrix
  int max_exchange = 2000; // vertex-exchange iteration cap
};

struct QuantileFit {
  double tau = 0.5;
  std::vector<double> coefficients;
  double loss = 0.0;
  std::vector<std::size_t> basis;  // interpolated observations (warm-start seed)
  int interior_iterations = 0;
  int exchanges = 0;
};

namespace detail {

/// Solves the bounded dual LP  max y'a  s.t.  X'a = (1-tau) X'1, 0 <= a <= 1
/// with a Mehrotra-style predictor-corrector. Returns the dual iterate `a`
/// and the multiplier on the equality constraints, whose negative is the
/// regression coefficient vector.
struct InteriorPointResult {
  std::vector<double> a;
  std::vector<double> beta;
  int iterations = 0;
  bool converged = false;
};

inline InteriorPointResult qr_interior_point(std::span<const double> y, const Matrix& X,
                                             double tau, const QrConfig& cfg) {
  const std::size_t n = X.rows(), p = X.cols();
  InteriorPointResult res;

  std::vector<double> b(p, 0.0);  // (1-tau) X'1
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) b[j] += (1.0 - tau) * X(i, j);

  std::vector<double> a(n, std::clamp(1.0 - tau, 0.01, 0.99));
  std::vector<double> s(n), z(n), w(n), lambda(p, 0.0);
  double ynorm = 0.0;
  for (double v : y) ynorm = std::max(ynorm, std::fabs(v));
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = 1.0 - a[i];
    z[i] = w[i] = 1.0 + 0.01 * ynorm;
  }
  double bnorm = 0.0;
  for (double v : b) bnorm = std::max(bnorm, std::fabs(v));

  std::vector<double> rp(p), rd(n), dinv(n), rhs(p), dl(p), da(n), ds(n), dz(n), dw(n);
  std::vector<double> da_aff(n), dz_aff(n), ds_aff(n), dw_aff(n);

  for (int it = 0; it < cfg.max_iter; ++it) {
    // residuals
    for (std::size_t j = 0; j < p; ++j) {
      double s_j = b[j];
      for (std::size_t i = 0; i < n; ++i) s_j -= X(i, j) * a[i];
      rp[j] = s_j;
    }
    double dual_obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double xl = 0.0;
      for (std::size_t j = 0; j < p; ++j) xl += X(i, j) * lambda[j];
      rd[i] = -y[i] - xl - z[i] + w[i];
      dual_obj += y[i] * a[i];
    }
    double gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) gap += a[i] * z[i] + s[i] * w[i];
    const double mu = gap / (2.0 * static_cast<double>(n));
    double pinf = 0.0, dinf = 0.0;
    for (double v : rp) pinf = std::max(pinf, std::fabs(v));
    for (double v : rd) dinf = std::max(dinf, std::fabs(v));
    res.iterations = it;
    if (pinf / (1.0 + bnorm) < cfg.tol && dinf / (1.0 + ynorm) < cfg.tol &&
        gap / (1.0 + std::fabs(dual_obj)) < cfg.tol) {
      res.converged = true;
      break;
    }

    for (std::size_t i = 0; i < n; ++i) dinv[i] = 1.0 / (z[i] / a[i] + w[i] / s[i]);

    Matrix M(p, p);
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = X.row(i);
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = j; k < p; ++k) M(j, k) += dinv[i] * xi[j] * xi[k];
    }
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = 0; k < j; ++k) M(j, k) = M(k, j);

    auto solve_step = [&](const std::vector<double>& rxz, const std::vector<double>& rsw,
                          std::vector<double>& oa, std::vector<double>& os,
                          std::vector<double>& oz, std::vector<double>& ow) -> bool {
      // rhs1_i = rd_i - rxz_i/a_i + rsw_i/s_i   (r_u is zero: a+s=1 is kept exactly)
      for (std::size_t j = 0; j < p; ++j) rhs[j] = rp[j];
      for (std::size_t i = 0; i < n; ++i) {
        const double r1 = rd[i] - rxz[i] / a[i] + rsw[i] / s[i];
        for (std::size_t j = 0; j < p; ++j) rhs[j] += X(i, j) * dinv[i] * r1;
      }
      if (!linalg::solve_square(M, rhs, dl)) return false;
      for (std::size_t i = 0; i < n; ++i) {
        double xdl = 0.0;
        for (std::size_t j = 0; j < p; ++j) xdl += X(i, j) * dl[j];
        const double r1 = rd[i] - rxz[i] / a[i] + rsw[i] / s[i];
        oa[i] = dinv[i] * (xdl - r1);
        os[i] = -oa[i];
        oz[i] = (rxz[i] - z[i] * oa[i]) / a[i];
        ow[i] = (rsw[i] - w[i] * os[i]) / s[i];
      }
      return true;
    };

    auto max_step = [&](const std::vector<double>& v, const std::vector<double>& dv,
                        double alpha) {
      for (std::size_t i = 0; i < n; ++i)
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
      return alpha;
    };

    // predictor
    std::vector<double> rxz(n), rsw(n);
    for (std::size_t i = 0; i < n; ++i) {
      rxz[i] = -a[i] * z[i];
      rsw[i] = -s[i] * w[i];
    }
    if (!solve_step(rxz, rsw, da_aff, ds_aff, dz_aff, dw_aff)) break;
    double ap = max_step(a, da_aff, 1.0);
    ap = max_step(s, ds_aff, ap);
    double ad = max_step(z, dz_aff, 1.0);
    ad = max_step(w, dw_aff, ad);
    double gap_aff = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      gap_aff += (a[i] + ap * da_aff[i]) * (z[i] + ad * dz_aff[i]) +
                 (s[i] + ap * ds_aff[i]) * (w[i] + ad * dw_aff[i]);
    const double mu_aff = gap_aff / (2.0 * static_cast<double>(n));
    double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3.0) : 0.1;
    sigma = std::clamp(sigma, 1e-8, 0.9);

    // corrector
    for (std::size_t i = 0; i < n; ++i) {
      rxz[i] = sigma * mu - a[i] * z[i] - da_aff[i] * dz_aff[i];
      rsw[i] = sigma * mu - s[i] * w[i] - ds_aff[i] * dw_aff[i];
    }
    if (!solve_step(rxz, rsw, da, ds, dz, dw)) break;
    ap = max_step(a, da, 1.0);
    ap = max_step(s, ds, ap);
    ad = max_step(z, dz, 1.0);
    ad = max_step(w, dw, ad);
    ap = std::min(1.0, 0.9995 * ap);
    ad = std::min(1.0, 0.9995 * ad);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] += ap * da[i];
      s[i] += ap * ds[i];
      z[i] += ad * dz[i];
      w[i] += ad * dw[i];
    }
    for (std::size_t j = 0; j < p; ++j) lambda[j] += ad * dl[j];
  }

  res.a = std::move(a);
  res.beta.resize(p);
  for (std::size_t j = 0; j < p; ++j) res.beta[j] = -lambda[j];
  return res;
}

/// Picks `p` linearly independent rows of X, preferring the order given in
/// `candidates` (modified Gram-Schmidt with a relative threshold).
inline std::vector<std::size_t> independent_rows(const Matrix& X,
                                                 const std::vector<std::size_t>& candidates) {
  const std::size_t p = X.cols();
  std::vector<std::vector<double>> basis_vecs;
  std::vector<std::size_t> chosen;
  for (std::size_t idx : candidates) {
    if (chosen.size() == p) break;
    std::vector<double> v(X.row(idx).begin(), X.row(idx).end());
    double norm0 = std::sqrt(linalg::dot(v, v));
    if (norm0 == 0.0) continue;
    for (const auto& q : basis_vecs) {
      const double proj = linalg::dot(v, q);
      for (std::size_t j = 0; j < p; ++j) v[j] -= proj * q[j];
    }
    const double norm = std::sqrt(linalg::dot(v, v));
    if (norm <= 1e-9 * norm0) continue;
    for (double& x : v) x /= norm;
    basis_vecs.push_back(std::move(v));
    chosen.push_back(idx);
  }
  return chosen;
}

inline bool solve_basis(std::span<const double> y, const Matrix& X,
                        std::span<const std::size_t> h, std::vector<double>& beta) {
  const std::size_t p = X.cols();
  Matrix A(p, p);
  std::vector<double> rhs(p);
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t j = 0; j < p; ++j) A(r, j) = X(h[r], j);
    rhs[r] = y[h[r]];
  }
  return linalg::solve_square(A, rhs, beta);
}

}  // namespace detail

/// Fits a linear tau-quantile regression by exact minimization of the check
/// loss: a primal-dual interior-point pass followed by a vertex-exchange
/// polish that lands on an optimal basic solution (one interpolating
/// `cols(X)` observations). Deterministic. A warm-start basis from a
/// neighbouring problem skips the interior-point stage.
inline QuantileFit fit_quantile(std::span<const double> y, const Matrix& X, double tau,
                                const QrConfig& cfg = {},
                                const std::vector<std::size_t>* warm_basis = nullptr) {
  const std::size_t n = X.rows(), p = X.cols();
  if (n != y.size()) throw std::invalid_argument("fit_quantile: X rows != len(y)");
  if (p == 0 || n < p + 1)
    throw std::invalid_argument("fit_quantile: need at least cols(X)+1 observations");
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("fit_quantile: tau must lie strictly inside (0,1)");
  if (linalg::qr_rank(X, cfg.rank_tol) < p)
    fail(errc::rank_deficient, "design matrix has collinear columns");

  QuantileFit fit;
  fit.tau = tau;

  std::vector<std::size_t> h;
  std::vector<double> beta_ip;
  double loss_ip = std::numeric_limits<double>::infinity();

  bool warm_ok = false;
  if (warm_basis && warm_basis->size() == p) {
    warm_ok = std::all_of(warm_basis->begin(), warm_basis->end(),
                          [&](std::size_t i) { return i < n; });
    if (warm_ok) {
      std::vector<double> beta;
      warm_ok = detail::solve_basis(y, X, *warm_basis, beta);
      if (warm_ok) h = *warm_basis;
    }
  }
  if (!warm_ok) {
    auto ip = detail::qr_interior_point(y, X, tau, cfg);
    fit.interior_iterations = ip.iterations;
    beta_ip = ip.beta;
    loss_ip = pinball_loss(y, X, beta_ip, tau);
    // order observations by interiorness of the dual variable: fractional
    // entries mark the interpolated points of the optimal vertex
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
      const double fi = std::min(ip.a[i], 1.0 - ip.a[i]);
      const double fj = std::min(ip.a[j], 1.0 - ip.a[j]);
      return fi > fj;
    });
    h = detail::independent_rows(X, order);
    if (h.size() < p) fail(errc::rank_deficient, "could not assemble a full basis");
  }

  std::vector<double> beta;
  detail::solve_basis(y, X, h, beta);
  double loss = pinball_loss(y, X, beta, tau);

  // exchange until no single swap of a basic observation improves the loss
  std::vector<double> cand_beta, best_beta;
  for (int round = 0; round < cfg.max_exchange; ++round) {
    double best_loss = loss;
    std::size_t best_pos = 0, best_obs = 0;
    bool improved = false;
    for (std::size_t pos = 0; pos < p; ++pos) {
      const std::size_t saved = h[pos];
      for (std::size_t i = 0; i < n; ++i) {
        if (std::find(h.begin(), h.end(), i) != h.end()) continue;
        h[pos] = i;
        if (detail::solve_basis(y, X, h, cand_beta)) {
          const double l = pinball_loss(y, X, cand_beta, tau);
          if (l < best_loss - 1e-13 * (1.0 + std::fabs(best_loss))) {
            best_loss = l;
            best_pos = pos;
            best_obs = i;
            best_beta = cand_beta;
            improved = true;
          }
        }
      }
      h[pos] = saved;
    }
    if (!improved) break;
    h[best_pos] = best_obs;
    beta = best_beta;
    loss = best_loss;
    ++fit.exchanges;
  }

  if (loss_ip < loss) {  // should not happen; keep the better point regardless
    beta = beta_ip;
    loss = loss_ip;
  }
  fit.coefficients = std::move(beta);
  fit.loss = loss;
  std::sort(h.begin(), h.end());
  fit.basis = std::move(h);
  return fit;
}

struct PredictedQuantiles {
  std::vector<double> taus;
  std::vector<double> values;
  bool rearranged = false;  // raw predictions crossed and were re-sorted
};

/// Evaluates each fitted quantile at one regressor row. Crossing predictions
/// are monotone-rearranged (sorted) and flagged.
inline PredictedQuantiles predict_quantiles(std::span<const QuantileFit> fits,
                                            std::span<const double> x) {
  PredictedQuantiles out;
  out.taus.reserve(fits.size());
  out.values.reserve(fits.size());
  std::vector<std::size_t> order(fits.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return fits[i].tau < fits[j].tau; });
  for (std::size_t k : order) {
    if (fits[k].coefficients.size() != x.size())
      fail(errc::layout_mismatch, "regressor row length does not match fit layout");
    out.taus.push_back(fits[k].tau);
    out.values.push_back(linalg::dot(fits[k].coefficients, x));
  }
  if (!std::is_sorted(out.values.begin(), out.values.end())) {
    std::sort(out.values.begin(), out.values.end());
    out.rearranged = true;
  }
  return out;
}

}  // namespace spdsig

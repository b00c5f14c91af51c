#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "svcox/common.hpp"
#include "svcox/graph.hpp"
#include "svcox/model.hpp"
#include "svcox/rng.hpp"
#include "svcox/survival.hpp"

namespace svcox {

namespace detail {

inline double log_inv_gamma_pdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

inline double log_gamma_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double log_beta_pdf(double x, double a, double b) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
         (b - 1.0) * std::log(1.0 - x);
}

}  // namespace detail

// ---------------------------------------------------------------------- //
// stage 2: Gibbs/Metropolis sampler on the Gaussian approximation
// ---------------------------------------------------------------------- //
//
// Data: betahat(s_i) ~ N(beta(s_i), Vhat_i) per site.
// Priors: beta_k ~ N_n(0, tau^2 lambda_k^2 H(gamma_k)), half-Cauchy on
// lambda_k and tau via the inverse-gamma auxiliary representation,
// gamma_k = c_k * gamma0_k with gamma0_k ~ Gamma(a0, b0),
// c_k ~ Bern(pi_k), pi_k ~ Beta(0.5, 0.5).
//
// All H matrices carry the diagonal nugget so the gamma = 0 spike keeps
// a proper density.
class Sampler {
 public:
  Sampler(const std::vector<PmleEstimate>& pmles, const DistanceMatrix& D, PriorConfig prior)
      : D_(D), prior_(prior) {
    prior_.validate();
    n_ = static_cast<int>(pmles.size());
    if (n_ == 0) throw std::invalid_argument("Sampler: no site estimates");
    if (D.n() != n_)
      throw std::invalid_argument("Sampler: distance matrix dimension " +
                                  std::to_string(D.n()) + " != site count " +
                                  std::to_string(n_));
    p_ = static_cast<int>(pmles[0].beta_hat.size());
    beta_hat_.resize(n_, p_);
    site_prec_.resize(n_);
    site_chol_.resize(n_);
    site_logdet_v_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      if (pmles[i].beta_hat.size() != p_ || pmles[i].v_hat.rows() != p_ ||
          pmles[i].v_hat.cols() != p_)
        throw std::invalid_argument("Sampler: inconsistent PMLE dimensions at site " +
                                    pmles[i].site_id);
      beta_hat_.row(i) = pmles[i].beta_hat.transpose();
      Eigen::LLT<Matrix> llt(pmles[i].v_hat);
      if (llt.info() != Eigen::Success)
        throw NumericalError("Sampler: Vhat not positive definite at site " + pmles[i].site_id);
      site_chol_[i] = llt.matrixL();
      site_prec_[i] = llt.solve(Matrix::Identity(p_, p_));
      site_logdet_v_[i] = 2.0 * site_chol_[i].diagonal().array().log().sum();
    }
    spike_ = build_cache(0.0);
    slab_.assign(p_, HCache{});
  }

  int n_sites() const { return n_; }
  int n_pred() const { return p_; }
  const PriorConfig& prior() const { return prior_; }
  const Matrix& beta_hat() const { return beta_hat_; }

  // Successive-conditional testing swaps in synthetic data; Vhat (and
  // everything cached from it) stays fixed.
  void set_beta_hat(const Matrix& bh) {
    if (bh.rows() != n_ || bh.cols() != p_)
      throw std::invalid_argument("set_beta_hat: wrong shape");
    beta_hat_ = bh;
  }

  ModelState init_state() const {
    ModelState s;
    s.beta = beta_hat_;
    s.tau2 = 1.0;
    s.lambda2 = Vector::Ones(p_);
    s.nu = Vector::Ones(p_);
    s.xi = 1.0;
    s.gamma0 = Vector::Ones(p_);
    s.c = Eigen::VectorXi::Ones(p_);
    s.pi = Vector::Constant(p_, 0.5);
    return s;
  }

  // ---- Gibbs/Metropolis kernels -------------------------------------- //

  // Exact Gaussian conditional for column k. Posterior precision
  // P = diag_i([Vhat_i^-1]_kk) + H_k^-1 / (tau^2 lambda_k^2), and the
  // data contribution b_i folds in the cross-coefficient corrections
  // from the off-diagonal entries of Vhat_i^-1.
  void update_beta_k(ModelState& s, int k, Rng& rng) {
    Vector b(n_), w(n_);
    column_pull(s, k, b, w);
    const Vector y = b.cwiseQuotient(w);
    const double scale = s.tau2 * s.lambda2[k];
    if (s.c[k] == 0) {
      draw_beta_spike(s, k, y, w, scale, rng);
      return;
    }
    ensure_slab(s, k);
    const ColumnSolve cs = slab_solve(y, w, slab_[k], scale);
    draw_beta_slab(s, k, y, w, slab_[k], cs.llt, scale, rng);
  }

  struct InvGammaParams {
    double shape;
    double scale;
  };

  // lambda_k^2 | . ~ InvGamma((n+1)/2, 1/nu_k + q_k/(2 tau^2)) with
  // q_k = beta_k' H_k^-1 beta_k
  InvGammaParams lambda2_conditional(ModelState& s, int k) {
    const double q = quad_form(s, k);
    if (!std::isfinite(q)) throw NumericalError("lambda2_conditional: non-finite quadratic form");
    return {0.5 * (n_ + 1), 1.0 / s.nu[k] + q / (2.0 * s.tau2)};
  }

  InvGammaParams nu_conditional(const ModelState& s, int k) const {
    return {1.0, 1.0 + 1.0 / s.lambda2[k]};
  }

  // tau^2 | . ~ InvGamma((np+1)/2, 1/xi + sum_k q_k/(2 lambda_k^2))
  InvGammaParams tau2_conditional(ModelState& s) {
    double rate = 1.0 / s.xi;
    for (int k = 0; k < p_; ++k) {
      const double q = quad_form(s, k);
      if (!std::isfinite(q)) throw NumericalError("tau2_conditional: non-finite quadratic form");
      rate += q / (2.0 * s.lambda2[k]);
    }
    return {0.5 * (n_ * p_ + 1), rate};
  }

  InvGammaParams xi_conditional(const ModelState& s) const {
    return {1.0, 1.0 + 1.0 / s.tau2};
  }

  void update_lambda_k(ModelState& s, int k, Rng& rng) {
    const auto lp = lambda2_conditional(s, k);
    s.lambda2[k] = rng.inv_gamma(lp.shape, lp.scale);
    const auto np = nu_conditional(s, k);
    s.nu[k] = rng.inv_gamma(np.shape, np.scale);
  }

  void update_tau(ModelState& s, Rng& rng) {
    const auto tp = tau2_conditional(s);
    s.tau2 = rng.inv_gamma(tp.shape, tp.scale);
    const auto xp = xi_conditional(s);
    s.xi = rng.inv_gamma(xp.shape, xp.scale);
  }

  // Pseudo-prior scheme: with c_k = 0 the conditional is the prior, so
  // gamma0_k is refreshed from Gamma(a0, b0); with c_k = 1 one
  // random-walk Metropolis step on log gamma0_k.
  void update_gamma0_k(ModelState& s, int k, Rng& rng, double mh_step) {
    if (s.c[k] == 0) {
      double g = 0.0;
      do {
        g = rng.gamma(prior_.a0, prior_.b0);
      } while (!(g > 0.0));
      s.gamma0[k] = g;
      ensure_slab(s, k);
      return;
    }
    ensure_slab(s, k);
    const double cur = s.gamma0[k];
    const double prop = std::exp(std::log(cur) + mh_step * rng.normal());
    if (!(prop > 0.0) || !std::isfinite(prop)) return;
    HCache cand = build_cache(prop);
    // target on log gamma0: Gamma(a0,b0) x MVN slab density, times the
    // gamma0 Jacobian, so the (a0-1) prior exponent becomes a0
    const double log_cur = prior_.a0 * std::log(cur) - prior_.b0 * cur +
                           log_mvn(s.beta.col(k), slab_[k], s.tau2 * s.lambda2[k]);
    const double log_prop = prior_.a0 * std::log(prop) - prior_.b0 * prop +
                            log_mvn(s.beta.col(k), cand, s.tau2 * s.lambda2[k]);
    if (std::log(rng.uniform()) < log_prop - log_cur) {
      s.gamma0[k] = prop;
      slab_[k] = std::move(cand);
    }
  }

  // Unnormalized log conditional of gamma0_k (on the gamma0 scale,
  // without the log-scale Jacobian); shared by the MH step tests.
  double gamma0_log_target(const ModelState& s, int k, double gamma_value) {
    HCache hc = build_cache(gamma_value);
    return (prior_.a0 - 1.0) * std::log(gamma_value) - prior_.b0 * gamma_value +
           (s.c[k] == 1 ? log_mvn(s.beta.col(k), hc, s.tau2 * s.lambda2[k]) : 0.0);
  }

  // Spike/slab indicator, then its Bernoulli probability.
  void update_c_k(ModelState& s, int k, Rng& rng) {
    s.c[k] = rng.bernoulli(slab_probability(s, k)) ? 1 : 0;
    s.pi[k] = rng.beta(prior_.beta_pi_a + s.c[k], prior_.beta_pi_b + 1 - s.c[k]);
    // keep pi strictly inside (0,1)
    s.pi[k] = std::min(std::max(s.pi[k], 1e-300), 1.0 - 1e-16);
  }

  // P(c_k = 1 | .), computed on log scale from the two multivariate
  // normal densities (slab H(gamma0_k) vs spike H(0), both nuggeted).
  double slab_probability(ModelState& s, int k) {
    ensure_slab(s, k);
    const double scale = s.tau2 * s.lambda2[k];
    const double log_slab = std::log(s.pi[k]) + log_mvn(s.beta.col(k), slab_[k], scale);
    const double log_spike = std::log1p(-s.pi[k]) + log_mvn(s.beta.col(k), spike_, scale);
    const double diff = log_slab - log_spike;
    if (diff > 0) return 1.0 / (1.0 + std::exp(-diff));
    return std::exp(diff) / (1.0 + std::exp(diff));
  }

  // P(c_k = 1 | everything except beta_k). Integrating beta_k out of
  // both branches compares how well the data column supports the slab
  // against the near-degenerate spike. The pointwise draw (update_c_k)
  // conditions on a beta_k sampled under the current branch's own
  // prior, which leaves the indicator frozen for small nuggets; the
  // marginalized form mixes at any nugget.
  double collapsed_slab_probability(ModelState& s, int k) {
    ensure_slab(s, k);
    Vector b(n_), w(n_);
    column_pull(s, k, b, w);
    const Vector y = b.cwiseQuotient(w);
    const double scale = s.tau2 * s.lambda2[k];
    const double diff = std::log(s.pi[k]) - std::log1p(-s.pi[k]) +
                        slab_solve(y, w, slab_[k], scale).log_weight -
                        spike_log_weight(y, w, scale);
    if (diff > 0) return 1.0 / (1.0 + std::exp(-diff));
    return std::exp(diff) / (1.0 + std::exp(diff));
  }

  // Blocked draw of (c_k, beta_k): indicator from its beta_k-marginal
  // conditional, then beta_k refreshed under the chosen branch.
  void update_c_beta_k(ModelState& s, int k, Rng& rng) {
    ensure_slab(s, k);
    Vector b(n_), w(n_);
    column_pull(s, k, b, w);
    const Vector y = b.cwiseQuotient(w);
    const double scale = s.tau2 * s.lambda2[k];
    const ColumnSolve cs = slab_solve(y, w, slab_[k], scale);
    const double diff = std::log(s.pi[k]) - std::log1p(-s.pi[k]) + cs.log_weight -
                        spike_log_weight(y, w, scale);
    const double q = diff > 0 ? 1.0 / (1.0 + std::exp(-diff))
                              : std::exp(diff) / (1.0 + std::exp(diff));
    s.c[k] = rng.bernoulli(q) ? 1 : 0;
    s.pi[k] = rng.beta(prior_.beta_pi_a + s.c[k], prior_.beta_pi_b + 1 - s.c[k]);
    s.pi[k] = std::min(std::max(s.pi[k], 1e-300), 1.0 - 1e-16);
    if (s.c[k] == 0)
      draw_beta_spike(s, k, y, w, scale, rng);
    else
      draw_beta_slab(s, k, y, w, slab_[k], cs.llt, scale, rng);
  }

  // One systematic-scan sweep.
  void sweep(ModelState& s, Rng& rng, double mh_step) {
    for (int k = 0; k < p_; ++k) update_beta_k(s, k, rng);
    for (int k = 0; k < p_; ++k) update_lambda_k(s, k, rng);
    update_tau(s, rng);
    for (int k = 0; k < p_; ++k) {
      update_gamma0_k(s, k, rng, mh_step);
      update_c_beta_k(s, k, rng);
    }
  }

  PosteriorDraws run_single_chain(const ChainConfig& cfg, int chain_index) {
    cfg.validate();
    PosteriorDraws draws;
    draws.n_sites = n_;
    draws.n_pred = p_;
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(chain_index));
    ModelState s = init_state();
    slab_.assign(p_, HCache{});  // caches resync against the fresh state
    for (int iter = 1; iter <= cfg.n_iter; ++iter) {
      try {
        sweep(s, rng, cfg.mh_step);
      } catch (const NumericalError& e) {
        throw NumericalError("chain " + std::to_string(chain_index) + " iteration " +
                             std::to_string(iter) + ": " + e.what());
      }
      if (iter > cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0) {
        draws.chain.push_back(chain_index);
        draws.iteration.push_back(iter);
        draws.beta.push_back(s.beta);
        draws.lambda.push_back(s.lambda2.cwiseSqrt());
        draws.c.push_back(s.c);
        draws.tau.push_back(std::sqrt(s.tau2));
      }
    }
    return draws;
  }

  // ---- helpers shared with tests ------------------------------------- //

  // Unnormalized log joint density of (data, state); the reference the
  // per-kernel conditionals are checked against.
  double log_joint(const ModelState& s) {
    double lp = 0.0;
    // likelihood: betahat_i | beta_i ~ N(beta_i, Vhat_i)
    for (int i = 0; i < n_; ++i) {
      const Vector resid = (beta_hat_.row(i) - s.beta.row(i)).transpose();
      lp += -0.5 * p_ * std::log(2.0 * M_PI) - 0.5 * site_logdet_v_[i] -
            0.5 * resid.dot(site_prec_[i] * resid);
    }
    for (int k = 0; k < p_; ++k) {
      const HCache& hc = active_cache(s, k);
      lp += log_mvn(s.beta.col(k), hc, s.tau2 * s.lambda2[k]);
      lp += s.c[k] == 1 ? std::log(s.pi[k]) : std::log1p(-s.pi[k]);
      lp += detail::log_beta_pdf(s.pi[k], prior_.beta_pi_a, prior_.beta_pi_b);
      lp += detail::log_gamma_pdf(s.gamma0[k], prior_.a0, prior_.b0);
      lp += detail::log_inv_gamma_pdf(s.lambda2[k], 0.5, 1.0 / s.nu[k]);
      lp += detail::log_inv_gamma_pdf(s.nu[k], 0.5, 1.0);
    }
    lp += detail::log_inv_gamma_pdf(s.tau2, 0.5, 1.0 / s.xi);
    lp += detail::log_inv_gamma_pdf(s.xi, 0.5, 1.0);
    return lp;
  }

  // Draw every parameter from its prior (data not involved).
  ModelState draw_state_from_prior(Rng& rng) {
    ModelState s = init_state();
    s.xi = rng.inv_gamma(0.5, 1.0);
    s.tau2 = rng.inv_gamma(0.5, 1.0 / s.xi);
    for (int k = 0; k < p_; ++k) {
      s.nu[k] = rng.inv_gamma(0.5, 1.0);
      s.lambda2[k] = rng.inv_gamma(0.5, 1.0 / s.nu[k]);
      s.pi[k] = std::min(std::max(rng.beta(prior_.beta_pi_a, prior_.beta_pi_b), 1e-300),
                         1.0 - 1e-16);
      s.c[k] = rng.bernoulli(s.pi[k]) ? 1 : 0;
      do {
        s.gamma0[k] = rng.gamma(prior_.a0, prior_.b0);
      } while (!(s.gamma0[k] > 0.0));
    }
    for (int k = 0; k < p_; ++k) s.beta.col(k) = draw_beta_prior(s, k, rng);
    return s;
  }

  // beta_k | scales ~ N_n(0, tau^2 lambda_k^2 H_k)
  Vector draw_beta_prior(ModelState& s, int k, Rng& rng) {
    const HCache& hc = active_cache(s, k);
    const double sd = std::sqrt(s.tau2 * s.lambda2[k]);
    Vector z(n_);
    for (int i = 0; i < n_; ++i) z[i] = rng.normal();
    return sd * (hc.chol_L * z);
  }

  // Synthetic betahat | beta from the approximation likelihood.
  Matrix simulate_beta_hat(const ModelState& s, Rng& rng) {
    Matrix bh(n_, p_);
    Vector z(p_);
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < p_; ++j) z[j] = rng.normal();
      bh.row(i) = s.beta.row(i) + (site_chol_[i] * z).transpose();
    }
    return bh;
  }

  // Exposed so tests can compare the column conditional against a dense
  // joint-posterior assembly.
  struct BetaConditional {
    Vector mean;
    Matrix covariance;
  };
  BetaConditional beta_conditional(ModelState& s, int k) {
    const HCache& hc = active_cache(s, k);
    const double scale = s.tau2 * s.lambda2[k];
    Vector b(n_), w(n_);
    for (int i = 0; i < n_; ++i) {
      const Vector resid = (beta_hat_.row(i) - s.beta.row(i)).transpose();
      const double wi = site_prec_[i](k, k);
      const double cross = site_prec_[i].row(k).dot(resid) - wi * resid[k];
      w[i] = wi;
      b[i] = wi * beta_hat_(i, k) + cross;
    }
    Matrix prec = inverse(hc) / scale;
    prec.diagonal() += w;
    Eigen::LLT<Matrix> llt(prec);
    if (llt.info() != Eigen::Success)
      throw NumericalError("beta_conditional: precision not positive definite");
    BetaConditional out;
    out.covariance = llt.solve(Matrix::Identity(n_, n_));
    out.mean = llt.solve(b);
    return out;
  }

  const std::vector<Matrix>& site_precisions() const { return site_prec_; }

 private:
  struct HCache {
    double gamma = -1.0;  // -1 marks "not built"
    Matrix H;
    Matrix chol_L;
    double logdet = 0.0;
    Matrix inv;
    bool has_inv = false;
    Eigen::LLT<Matrix> llt;
  };

  HCache build_cache(double gamma) const {
    HCache hc;
    hc.gamma = gamma;
    hc.H = correlation_matrix(D_, gamma, prior_.nugget);
    hc.llt.compute(hc.H);
    if (hc.llt.info() != Eigen::Success)
      throw NumericalError("Cholesky of H(gamma=" + std::to_string(gamma) +
                           ") failed; nugget too small");
    hc.chol_L = hc.llt.matrixL();
    hc.logdet = 2.0 * hc.chol_L.diagonal().array().log().sum();
    return hc;
  }

  // Gaussian data pull on column k: precision w_i = [Vhat_i^-1]_kk and
  // b_i folding in the cross-coefficient corrections from the
  // off-diagonal entries of Vhat_i^-1.
  void column_pull(const ModelState& s, int k, Vector& b, Vector& w) const {
    for (int i = 0; i < n_; ++i) {
      const Vector resid = (beta_hat_.row(i) - s.beta.row(i)).transpose();
      const double wi = site_prec_[i](k, k);
      // A_i.row(k) * resid includes the j = k term; remove it, then add
      // back the data pull toward betahat_k(i).
      const double cross = site_prec_[i].row(k).dot(resid) - wi * resid[k];
      w[i] = wi;
      b[i] = wi * beta_hat_(i, k) + cross;
    }
  }

  // Everything below works on the covariance form
  //   C = scale * H + diag(1/w),
  // the marginal covariance of the pseudo-observation y = b / w. One
  // factorization serves both the beta_k-marginalized branch weight
  // log N(y; 0, C) and the conditional draw (Matheron shift
  // beta = beta0 + scale H C^-1 (y - beta0 - eps)). The spike H is the
  // all-ones matrix plus the nugget, so its C is diagonal plus rank one
  // and every spike-branch operation is O(n).

  struct ColumnSolve {
    Eigen::LLT<Matrix> llt;
    double log_weight = 0.0;
  };

  ColumnSolve slab_solve(const Vector& y, const Vector& w, const HCache& hc, double scale) {
    Matrix C = scale * hc.H;
    C.diagonal() += w.cwiseInverse();
    ColumnSolve cs;
    cs.llt.compute(C);
    if (cs.llt.info() != Eigen::Success)
      throw NumericalError("slab_solve: marginal covariance not positive definite");
    const double logdet = 2.0 * Matrix(cs.llt.matrixL()).diagonal().array().log().sum();
    const double quad = y.dot(cs.llt.solve(y));
    if (!std::isfinite(quad)) throw NumericalError("slab_solve: non-finite quadratic form");
    cs.log_weight = -0.5 * (logdet + quad);
    return cs;
  }

  // C_spike = diag(d) + scale * ones, d_i = scale*nugget + 1/w_i;
  // Sherman-Morrison / determinant lemma.
  double spike_log_weight(const Vector& y, const Vector& w, double scale) const {
    const Vector d = (w.cwiseInverse().array() + scale * prior_.nugget).matrix();
    const double s1 = d.cwiseInverse().sum();
    const double sy = y.cwiseQuotient(d).sum();
    const double logdet = d.array().log().sum() + std::log1p(scale * s1);
    const double quad = y.dot(y.cwiseQuotient(d)) - scale * sy * sy / (1.0 + scale * s1);
    if (!std::isfinite(quad)) throw NumericalError("spike_log_weight: non-finite quadratic form");
    return -0.5 * (logdet + quad);
  }

  Vector spike_cov_solve(const Vector& r, const Vector& w, double scale) const {
    const Vector d = (w.cwiseInverse().array() + scale * prior_.nugget).matrix();
    const double s1 = d.cwiseInverse().sum();
    const double sr = r.cwiseQuotient(d).sum();
    return r.cwiseQuotient(d) -
           (scale * sr / (1.0 + scale * s1)) * d.cwiseInverse();
  }

  void draw_beta_slab(ModelState& s, int k, const Vector& y, const Vector& w,
                      const HCache& hc, const Eigen::LLT<Matrix>& llt, double scale,
                      Rng& rng) {
    Vector z(n_), eps(n_);
    for (int i = 0; i < n_; ++i) z[i] = rng.normal();
    for (int i = 0; i < n_; ++i) eps[i] = rng.normal() / std::sqrt(w[i]);
    const Vector beta0 = std::sqrt(scale) * (hc.chol_L * z);
    const Vector shift = llt.solve(y - beta0 - eps);
    s.beta.col(k) = beta0 + scale * (hc.H * shift);
  }

  void draw_beta_spike(ModelState& s, int k, const Vector& y, const Vector& w,
                       double scale, Rng& rng) {
    const double z0 = rng.normal();
    Vector z(n_), eps(n_);
    for (int i = 0; i < n_; ++i) z[i] = rng.normal();
    for (int i = 0; i < n_; ++i) eps[i] = rng.normal() / std::sqrt(w[i]);
    const Vector beta0 =
        std::sqrt(scale) * (Vector::Constant(n_, z0) + std::sqrt(prior_.nugget) * z);
    const Vector v = spike_cov_solve(y - beta0 - eps, w, scale);
    s.beta.col(k) = beta0 + scale * (Vector::Constant(n_, v.sum()) + prior_.nugget * v);
  }

  void ensure_slab(const ModelState& s, int k) {
    if (slab_[k].gamma != s.gamma0[k]) slab_[k] = build_cache(s.gamma0[k]);
  }

  HCache& active_cache(const ModelState& s, int k) {
    if (s.c[k] == 0) return spike_;
    ensure_slab(s, k);
    return slab_[k];
  }

  const Matrix& inverse(const HCache& hc) {
    auto& mut = const_cast<HCache&>(hc);
    if (!mut.has_inv) {
      mut.inv = mut.llt.solve(Matrix::Identity(n_, n_));
      mut.has_inv = true;
    }
    return mut.inv;
  }

  double quad_form(ModelState& s, int k) {
    const HCache& hc = active_cache(s, k);
    const Vector beta_k = s.beta.col(k);
    return beta_k.dot(hc.llt.solve(beta_k));
  }

  // log N_n(x; 0, scale * H) with H described by the cache
  double log_mvn(const Vector& x, const HCache& hc, double scale) const {
    const double quad = x.dot(hc.llt.solve(x));
    return -0.5 * n_ * std::log(2.0 * M_PI * scale) - 0.5 * hc.logdet - quad / (2.0 * scale);
  }

  int n_ = 0, p_ = 0;
  DistanceMatrix D_;
  PriorConfig prior_;
  Matrix beta_hat_;                 // n x p
  std::vector<Matrix> site_prec_;   // Vhat_i^-1
  std::vector<Matrix> site_chol_;   // chol(Vhat_i), lower
  std::vector<double> site_logdet_v_;
  HCache spike_;                    // H(0) + nugget, fixed
  std::vector<HCache> slab_;        // per k, tracks gamma0_k
};

// Runs cfg.n_chains chains (concurrently when possible, each on its own
// Sampler copy) and merges draws in chain order.
inline PosteriorDraws run_chain(const std::vector<PmleEstimate>& pmles, const DistanceMatrix& D,
                                const PriorConfig& prior, const ChainConfig& cfg) {
  cfg.validate();
  std::vector<PosteriorDraws> per_chain(cfg.n_chains);
  std::vector<std::string> errors(cfg.n_chains);
  auto run_one = [&](int c) {
    try {
      Sampler sampler(pmles, D, prior);
      per_chain[c] = sampler.run_single_chain(cfg, c);
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  };
  if (cfg.n_chains == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(cfg.n_chains);
    for (int c = 0; c < cfg.n_chains; ++c) threads.emplace_back(run_one, c);
    for (auto& t : threads) t.join();
  }
  for (int c = 0; c < cfg.n_chains; ++c)
    if (!errors[c].empty()) throw NumericalError(errors[c]);

  PosteriorDraws merged = std::move(per_chain[0]);
  for (int c = 1; c < cfg.n_chains; ++c) {
    auto& d = per_chain[c];
    merged.chain.insert(merged.chain.end(), d.chain.begin(), d.chain.end());
    merged.iteration.insert(merged.iteration.end(), d.iteration.begin(), d.iteration.end());
    merged.beta.insert(merged.beta.end(), d.beta.begin(), d.beta.end());
    merged.lambda.insert(merged.lambda.end(), d.lambda.begin(), d.lambda.end());
    merged.c.insert(merged.c.end(), d.c.begin(), d.c.end());
    merged.tau.insert(merged.tau.end(), d.tau.begin(), d.tau.end());
  }
  return merged;
}

// ---------------------------------------------------------------------- //
// posterior summaries
// ---------------------------------------------------------------------- //

// Geyer initial-positive-sequence truncation. Constant series report
// their full length.
inline double effective_sample_size(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  if (n == 0) throw std::invalid_argument("effective_sample_size: empty series");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  auto autocov = [&](int lag) {
    double s = 0.0;
    for (int t = 0; t + lag < n; ++t) s += (x[t] - mean) * (x[t + lag] - mean);
    return s / n;
  };
  const double c0 = autocov(0);
  if (c0 <= 0.0) return static_cast<double>(n);
  double rho_sum = 0.0;
  for (int m = 0; 2 * m + 2 < n; ++m) {
    const double pair = autocov(2 * m + 1) + autocov(2 * m + 2);
    if (pair <= 0.0) break;
    rho_sum += pair / c0;
  }
  return n / (1.0 + 2.0 * rho_sum);
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const int n = static_cast<int>(sorted.size());
  if (n == 1) return sorted[0];
  const double h = q * (n - 1);
  const int lo = static_cast<int>(std::floor(h));
  const int hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

inline PosteriorSummary summarize(const PosteriorDraws& draws) {
  const int m = draws.size();
  if (m == 0) throw std::invalid_argument("summarize: no retained draws");
  const int n = draws.n_sites, p = draws.n_pred;

  PosteriorSummary out;
  out.beta_mean = Matrix::Zero(n, p);
  out.lambda_mean = Vector::Zero(p);
  out.c_mean = Vector::Zero(p);
  for (int t = 0; t < m; ++t) {
    out.beta_mean += draws.beta[t];
    out.lambda_mean += draws.lambda[t];
    out.c_mean += draws.c[t].cast<double>();
    out.tau_mean += draws.tau[t];
  }
  out.beta_mean /= m;
  out.lambda_mean /= m;
  out.c_mean /= m;
  out.tau_mean /= m;

  out.beta_q025 = Matrix::Zero(n, p);
  out.beta_q50 = Matrix::Zero(n, p);
  out.beta_q975 = Matrix::Zero(n, p);
  std::vector<double> buf(m);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < p; ++k) {
      for (int t = 0; t < m; ++t) buf[t] = draws.beta[t](i, k);
      std::sort(buf.begin(), buf.end());
      out.beta_q025(i, k) = quantile_sorted(buf, 0.025);
      out.beta_q50(i, k) = quantile_sorted(buf, 0.5);
      out.beta_q975(i, k) = quantile_sorted(buf, 0.975);
    }

  // per-chain ESS summed over chains
  auto ess_of = [&](auto getter, const std::string& name) {
    double total = 0.0;
    int c_lo = *std::min_element(draws.chain.begin(), draws.chain.end());
    int c_hi = *std::max_element(draws.chain.begin(), draws.chain.end());
    for (int c = c_lo; c <= c_hi; ++c) {
      std::vector<double> series;
      for (int t = 0; t < m; ++t)
        if (draws.chain[t] == c) series.push_back(getter(t));
      if (!series.empty()) total += effective_sample_size(series);
    }
    out.ess[name] = total;
  };
  ess_of([&](int t) { return draws.tau[t]; }, "tau");
  for (int k = 0; k < p; ++k) {
    ess_of([&](int t) { return draws.lambda[t][k]; }, "lambda[" + std::to_string(k + 1) + "]");
    ess_of([&](int t) { return static_cast<double>(draws.c[t][k]); },
           "c[" + std::to_string(k + 1) + "]");
  }
  return out;
}

}  // namespace svcox

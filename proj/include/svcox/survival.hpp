#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "svcox/common.hpp"

namespace svcox {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------- //
// stage 1: per-site Cox partial likelihood
// ---------------------------------------------------------------------- //

struct SiteSurvivalData {
  std::string site_id;
  Vector times;        // n_i, strictly positive
  Eigen::VectorXi status;  // n_i, 1 = event, 0 = censored
  Matrix covariates;   // n_i x p

  int n() const { return static_cast<int>(times.size()); }
  int p() const { return static_cast<int>(covariates.cols()); }
  int n_events() const { return status.sum(); }

  void validate() const {
    if (times.size() == 0) throw std::invalid_argument("site " + site_id + ": no subjects");
    if (status.size() != times.size() || covariates.rows() != times.size())
      throw std::invalid_argument("site " + site_id + ": inconsistent dimensions");
    for (int i = 0; i < n(); ++i) {
      if (!(times[i] > 0.0) || !std::isfinite(times[i]))
        throw std::invalid_argument("site " + site_id + ": nonpositive time");
      if (status[i] != 0 && status[i] != 1)
        throw std::invalid_argument("site " + site_id + ": status must be 0/1");
    }
    if (!covariates.allFinite())
      throw std::invalid_argument("site " + site_id + ": non-finite covariate");
  }
};

struct PmleEstimate {
  std::string site_id;
  Vector beta_hat;   // p
  Matrix v_hat;      // p x p, inverse observed information
  bool converged = false;
  int n_events = 0;
  double log_pl = 0.0;
};

struct FitOptions {
  int max_iter = 50;
  double grad_tol = 1e-8;
  int step_halving_max = 20;
  double divergence_bound = 15.0;
  double exclusion_variance = 100.0;  // site dropped if any diag(v_hat) exceeds this
};

namespace detail {

// Subjects ordered by descending time so the risk-set sums accumulate in
// one sweep. Ties share a risk set (Breslow).
inline std::vector<int> desc_time_order(const SiteSurvivalData& d) {
  std::vector<int> idx(d.n());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return d.times[a] > d.times[b]; });
  return idx;
}

}  // namespace detail

inline double log_partial_likelihood(const SiteSurvivalData& data, const Vector& beta) {
  data.validate();
  if (beta.size() != data.p() || !beta.allFinite())
    throw std::invalid_argument("log_partial_likelihood: invalid beta");
  if (data.n_events() == 0)
    throw std::invalid_argument("site " + data.site_id + ": no events");

  const Vector eta = data.covariates * beta;
  const double shift = eta.maxCoeff();
  const auto order = detail::desc_time_order(data);

  double s0 = 0.0;   // running sum of exp(eta - shift) over the risk set
  double ll = 0.0;
  int i = 0;
  const int n = data.n();
  while (i < n) {
    int j = i;
    const double t = data.times[order[i]];
    // enter everyone tied at this time before scoring its events
    while (j < n && data.times[order[j]] == t) {
      s0 += std::exp(eta[order[j]] - shift);
      ++j;
    }
    const double log_denom = shift + std::log(s0);
    for (int k = i; k < j; ++k)
      if (data.status[order[k]] == 1) ll += eta[order[k]] - log_denom;
    i = j;
  }
  return ll;
}

inline Vector pl_gradient(const SiteSurvivalData& data, const Vector& beta) {
  data.validate();
  if (beta.size() != data.p() || !beta.allFinite())
    throw std::invalid_argument("pl_gradient: invalid beta");
  if (data.n_events() == 0)
    throw std::invalid_argument("site " + data.site_id + ": no events");

  const int p = data.p();
  const Vector eta = data.covariates * beta;
  const double shift = eta.maxCoeff();
  const auto order = detail::desc_time_order(data);

  double s0 = 0.0;
  Vector s1 = Vector::Zero(p);
  Vector grad = Vector::Zero(p);
  int i = 0;
  const int n = data.n();
  while (i < n) {
    int j = i;
    const double t = data.times[order[i]];
    while (j < n && data.times[order[j]] == t) {
      const int l = order[j];
      const double w = std::exp(eta[l] - shift);
      s0 += w;
      s1 += w * data.covariates.row(l).transpose();
      ++j;
    }
    for (int k = i; k < j; ++k)
      if (data.status[order[k]] == 1)
        grad += data.covariates.row(order[k]).transpose() - s1 / s0;
    i = j;
  }
  return grad;
}

inline Matrix pl_hessian(const SiteSurvivalData& data, const Vector& beta) {
  data.validate();
  if (beta.size() != data.p() || !beta.allFinite())
    throw std::invalid_argument("pl_hessian: invalid beta");
  if (data.n_events() == 0)
    throw std::invalid_argument("site " + data.site_id + ": no events");

  const int p = data.p();
  const Vector eta = data.covariates * beta;
  const double shift = eta.maxCoeff();
  const auto order = detail::desc_time_order(data);

  double s0 = 0.0;
  Vector s1 = Vector::Zero(p);
  Matrix s2 = Matrix::Zero(p, p);
  Matrix hess = Matrix::Zero(p, p);
  int i = 0;
  const int n = data.n();
  while (i < n) {
    int j = i;
    const double t = data.times[order[i]];
    while (j < n && data.times[order[j]] == t) {
      const int l = order[j];
      const double w = std::exp(eta[l] - shift);
      const Vector x = data.covariates.row(l).transpose();
      s0 += w;
      s1 += w * x;
      s2 += w * x * x.transpose();
      ++j;
    }
    for (int k = i; k < j; ++k)
      if (data.status[order[k]] == 1) {
        const Vector mean = s1 / s0;
        hess -= s2 / s0 - mean * mean.transpose();
      }
    i = j;
  }
  return hess;
}

// Newton-Raphson from beta = 0 with step halving. Nonconvergence
// (max_iter, divergence, singular information) is reported via the
// converged flag, never an exception.
inline PmleEstimate fit_pmle(const SiteSurvivalData& data, const FitOptions& opts = {}) {
  data.validate();
  const int p = data.p();
  if (data.n() < p + 1)
    throw std::invalid_argument("site " + data.site_id + ": fewer than p+1 subjects");
  if (data.n_events() == 0)
    throw std::invalid_argument("site " + data.site_id + ": no events");

  PmleEstimate est;
  est.site_id = data.site_id;
  est.n_events = data.n_events();
  est.beta_hat = Vector::Zero(p);
  est.v_hat = Matrix::Zero(p, p);

  Vector beta = Vector::Zero(p);
  double ll = log_partial_likelihood(data, beta);
  bool at_optimum = false;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Vector grad = pl_gradient(data, beta);
    if (grad.cwiseAbs().maxCoeff() < opts.grad_tol) {
      at_optimum = true;
      break;
    }
    const Matrix hess = pl_hessian(data, beta);
    Eigen::LDLT<Matrix> ldlt(-hess);
    if (ldlt.info() != Eigen::Success) break;
    const Vector direction = ldlt.solve(grad);
    if (!direction.allFinite()) break;

    // Near the optimum the remaining improvement drops below double
    // resolution, so acceptance tolerates rounding noise in the log PL.
    const double slack = 1e-12 * (1.0 + std::abs(ll));
    double step = 1.0;
    bool improved = false;
    for (int h = 0; h <= opts.step_halving_max; ++h) {
      const Vector candidate = beta + step * direction;
      const double cand_ll = log_partial_likelihood(data, candidate);
      if (std::isfinite(cand_ll) && cand_ll > ll - slack) {
        beta = candidate;
        ll = cand_ll;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    if (beta.cwiseAbs().maxCoeff() > opts.divergence_bound) break;
  }

  est.beta_hat = beta;
  est.log_pl = ll;
  if (!at_optimum || beta.cwiseAbs().maxCoeff() > opts.divergence_bound) return est;

  Eigen::LLT<Matrix> llt(-pl_hessian(data, beta));
  if (llt.info() != Eigen::Success) return est;
  est.v_hat = llt.solve(Matrix::Identity(p, p));
  est.v_hat = 0.5 * (est.v_hat + est.v_hat.transpose().eval());  // enforce symmetry
  est.converged = true;
  return est;
}

struct ExcludedSite {
  std::string site_id;
  std::string reason;
};

struct StageOneFit {
  std::vector<PmleEstimate> estimates;  // input order preserved
  std::vector<ExcludedSite> excluded;
};

inline StageOneFit fit_all_sites(const std::vector<SiteSurvivalData>& dataset,
                                 const FitOptions& opts = {}) {
  if (dataset.empty()) throw std::invalid_argument("fit_all_sites: empty dataset");
  StageOneFit out;
  for (const auto& site : dataset) {
    PmleEstimate est;
    try {
      est = fit_pmle(site, opts);
    } catch (const std::invalid_argument& e) {
      out.excluded.push_back({site.site_id, e.what()});
      continue;
    }
    if (!est.converged) {
      out.excluded.push_back({site.site_id, "partial-likelihood maximization did not converge"});
      continue;
    }
    if (est.v_hat.diagonal().maxCoeff() > opts.exclusion_variance) {
      out.excluded.push_back(
          {site.site_id, "coefficient variance exceeds exclusion threshold (" +
                             std::to_string(opts.exclusion_variance) + ")"});
      continue;
    }
    out.estimates.push_back(std::move(est));
  }
  if (out.estimates.empty())
    throw std::runtime_error("fit_all_sites: every site was excluded");
  return out;
}

}  // namespace svcox

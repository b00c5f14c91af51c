#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "svcox/survival.hpp"
#include "test_util.hpp"

using namespace svcox;
using testutil::random_site;
using testutil::three_subject_site;

namespace {

// Independent oracle: evaluate the partial likelihood literally as a
// product over event times, one risk-set scan per event.
double direct_log_pl(const SiteSurvivalData& d, const Vector& beta) {
  double ll = 0.0;
  for (int j = 0; j < d.n(); ++j) {
    if (d.status[j] != 1) continue;
    double denom = 0.0;
    for (int l = 0; l < d.n(); ++l)
      if (d.times[l] >= d.times[j]) denom += std::exp(d.covariates.row(l).dot(beta));
    ll += d.covariates.row(j).dot(beta) - std::log(denom);
  }
  return ll;
}

}  // namespace

TEST_CASE("log PL at beta=0 counts risk sets") {
  SiteSurvivalData d;
  d.site_id = "a";
  d.times.resize(3);
  d.times << 1, 2, 3;
  d.status.resize(3);
  d.status << 1, 1, 1;
  d.covariates = Matrix::Zero(3, 1);
  const double expected = -std::log(6.0);  // 1/3 * 1/2 * 1/1
  CHECK(log_partial_likelihood(d, Vector::Zero(1)) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("constant covariate column cancels") {
  Rng rng(11);
  auto d = random_site(rng, 12, 1);
  d.covariates.col(0).setConstant(2.7);
  Vector beta(1);
  beta << 1.3;
  CHECK(log_partial_likelihood(d, beta) ==
        Catch::Approx(log_partial_likelihood(d, Vector::Zero(1))).epsilon(1e-12));
  CHECK(pl_gradient(d, beta)[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(pl_hessian(d, beta)(0, 0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("three-subject example matches direct product evaluation") {
  const auto d = three_subject_site();
  Vector beta(1);
  beta << 0.5;
  // oracle by hand: log[1/(2+e^.5)] + log[e^.5/(1+e^.5)] + log(1)
  const double by_hand =
      std::log(1.0 / (2.0 + std::exp(0.5))) + std::log(std::exp(0.5) / (1.0 + std::exp(0.5)));
  CHECK(direct_log_pl(d, beta) == Catch::Approx(by_hand).epsilon(1e-12));
  CHECK(log_partial_likelihood(d, beta) == Catch::Approx(by_hand).epsilon(1e-12));
}

TEST_CASE("log PL matches direct oracle on random data") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform() * 25);
    const int p = 1 + static_cast<int>(rng.uniform() * 4);
    const auto d = random_site(rng, n, p);
    Vector beta(p);
    for (int k = 0; k < p; ++k) beta[k] = rng.normal(0.0, 0.7);
    CHECK(log_partial_likelihood(d, beta) ==
          Catch::Approx(direct_log_pl(d, beta)).epsilon(1e-10));
  }
}

TEST_CASE("Breslow ties agree with shared-risk-set direct evaluation") {
  SiteSurvivalData d;
  d.site_id = "ties";
  d.times.resize(4);
  d.times << 1, 1, 2, 2;
  d.status.resize(4);
  d.status << 1, 1, 1, 0;
  d.covariates.resize(4, 1);
  d.covariates << 0.5, -0.3, 1.0, 0.2;
  Vector beta(1);
  beta << 0.4;
  CHECK(log_partial_likelihood(d, beta) == Catch::Approx(direct_log_pl(d, beta)).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(7);
  const double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform() * 25);
    const int p = 1 + static_cast<int>(rng.uniform() * 4);
    const auto d = random_site(rng, n, p);
    Vector beta(p);
    for (int k = 0; k < p; ++k) beta[k] = rng.normal(0.0, 0.5);
    const Vector g = pl_gradient(d, beta);
    for (int k = 0; k < p; ++k) {
      Vector bp = beta, bm = beta;
      bp[k] += h;
      bm[k] -= h;
      const double fd = (log_partial_likelihood(d, bp) - log_partial_likelihood(d, bm)) / (2 * h);
      CHECK(std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])) < 1e-5);
    }
  }
}

TEST_CASE("hessian matches finite differences of gradient") {
  Rng rng(9);
  const double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform() * 25);
    const int p = 1 + static_cast<int>(rng.uniform() * 4);
    const auto d = random_site(rng, n, p);
    Vector beta(p);
    for (int k = 0; k < p; ++k) beta[k] = rng.normal(0.0, 0.5);
    const Matrix H = pl_hessian(d, beta);
    for (int k = 0; k < p; ++k) {
      Vector bp = beta, bm = beta;
      bp[k] += h;
      bm[k] -= h;
      const Vector fd = (pl_gradient(d, bp) - pl_gradient(d, bm)) / (2 * h);
      for (int j = 0; j < p; ++j)
        CHECK(std::abs(fd[j] - H(j, k)) / std::max(1.0, std::abs(H(j, k))) < 1e-4);
    }
  }
}

TEST_CASE("hessian is negative semidefinite") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_site(rng, 15, 3);
    Vector beta(3);
    for (int k = 0; k < 3; ++k) beta[k] = rng.normal();
    const Matrix H = pl_hessian(d, beta);
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    CHECK(es.eigenvalues().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("log PL is concave") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = random_site(rng, 12, 2);
    Vector b1(2), b2(2);
    for (int k = 0; k < 2; ++k) {
      b1[k] = rng.normal();
      b2[k] = rng.normal();
    }
    const double mid = log_partial_likelihood(d, Vector(0.5 * (b1 + b2)));
    const double avg =
        0.5 * (log_partial_likelihood(d, b1) + log_partial_likelihood(d, b2));
    CHECK(mid >= avg - 1e-10);
  }
}

TEST_CASE("fit_pmle recovers the closed-form optimum") {
  const auto d = three_subject_site();
  const auto est = fit_pmle(d);
  REQUIRE(est.converged);
  CHECK(est.beta_hat[0] == Catch::Approx(0.5 * std::log(2.0)).margin(1e-6));
  CHECK(pl_gradient(d, est.beta_hat)[0] == Catch::Approx(0.0).margin(1e-7));
  CHECK(est.n_events == 3);
  // v_hat = inverse negative hessian, positive
  CHECK(est.v_hat(0, 0) > 0.0);
}

TEST_CASE("monotone likelihood is flagged, not thrown") {
  SiteSurvivalData d;
  d.site_id = "sep";
  d.times.resize(2);
  d.times << 1, 2;
  d.status.resize(2);
  d.status << 1, 1;
  d.covariates.resize(2, 1);
  d.covariates << 1.0, 0.0;
  const auto est = fit_pmle(d);
  CHECK_FALSE(est.converged);
}

TEST_CASE("shift invariance of the fit") {
  Rng rng(21);
  auto d = random_site(rng, 25, 2);
  const auto est0 = fit_pmle(d);
  REQUIRE(est0.converged);
  auto shifted = d;
  shifted.covariates.col(0).array() += 5.0;
  const auto est1 = fit_pmle(shifted);
  REQUIRE(est1.converged);
  CHECK((est0.beta_hat - est1.beta_hat).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((est0.v_hat - est1.v_hat).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("scale equivariance of the fit") {
  Rng rng(23);
  auto d = random_site(rng, 25, 2);
  const auto est0 = fit_pmle(d);
  REQUIRE(est0.converged);
  const double c = 2.5;
  auto scaled = d;
  scaled.covariates.col(1) *= c;
  const auto est1 = fit_pmle(scaled);
  REQUIRE(est1.converged);
  CHECK(est1.beta_hat[1] == Catch::Approx(est0.beta_hat[1] / c).margin(1e-7));
  CHECK(est1.beta_hat[0] == Catch::Approx(est0.beta_hat[0]).margin(1e-7));
  CHECK(est1.v_hat(1, 1) == Catch::Approx(est0.v_hat(1, 1) / (c * c)).epsilon(1e-6));
}

TEST_CASE("large-sample fit lands near the truth") {
  // one coefficient, exponential baseline, heavy event rate
  int within = 0;
  const int n_seeds = 100;
  for (int seed = 0; seed < n_seeds; ++seed) {
    Rng rng(1000 + seed);
    const double truth = 0.7;
    SiteSurvivalData d;
    d.site_id = "mc";
    const int n = 1000;
    d.times.resize(n);
    d.status.resize(n);
    d.covariates.resize(n, 1);
    for (int i = 0; i < n; ++i) {
      const double x = rng.normal();
      d.covariates(i, 0) = x;
      const double t = rng.exponential(0.5 * std::exp(truth * x));
      d.times[i] = std::min(t, 20.0);
      d.status[i] = t <= 20.0 ? 1 : 0;
    }
    const auto est = fit_pmle(d);
    REQUIRE(est.converged);
    const double se = std::sqrt(est.v_hat(0, 0));
    if (std::abs(est.beta_hat[0] - truth) <= 3.0 * se) ++within;
  }
  CHECK(within >= 99);
}

TEST_CASE("fit_all_sites excludes pathological sites with a reason") {
  Rng rng(31);
  std::vector<SiteSurvivalData> sites;
  for (int s = 0; s < 3; ++s) {
    auto d = random_site(rng, 30, 2);
    d.site_id = "ok" + std::to_string(s);
    sites.push_back(d);
  }
  // near-degenerate covariate level: the separation pathology
  SiteSurvivalData bad;
  bad.site_id = "cameron";
  bad.times.resize(4);
  bad.times << 1, 2, 3, 4;
  bad.status.resize(4);
  bad.status << 1, 1, 1, 1;
  bad.covariates.resize(4, 2);
  bad.covariates << 1, 0.1, 0, -0.2, 0, 0.3, 0, -0.1;
  bad.covariates(0, 0) = 1.0;  // only the earliest death carries the level
  sites.push_back(bad);

  const auto fit = fit_all_sites(sites);
  CHECK(fit.estimates.size() + fit.excluded.size() == 4);
  bool cameron_excluded = false;
  for (const auto& ex : fit.excluded)
    if (ex.site_id == "cameron") {
      cameron_excluded = true;
      CHECK_FALSE(ex.reason.empty());
    }
  CHECK(cameron_excluded);
  // input order preserved for survivors
  for (size_t i = 1; i < fit.estimates.size(); ++i)
    CHECK(fit.estimates[i - 1].site_id < fit.estimates[i].site_id);
}

TEST_CASE("fit_all_sites rejects empty input and all-excluded input") {
  CHECK_THROWS_AS(fit_all_sites({}), std::invalid_argument);
  SiteSurvivalData bad;
  bad.site_id = "only";
  bad.times.resize(2);
  bad.times << 1, 2;
  bad.status.resize(2);
  bad.status << 1, 1;
  bad.covariates.resize(2, 1);
  bad.covariates << 1.0, 0.0;
  CHECK_THROWS_AS(fit_all_sites({bad}), std::runtime_error);
}

TEST_CASE("input validation") {
  SiteSurvivalData d;
  d.site_id = "v";
  d.times.resize(2);
  d.times << -1.0, 2.0;
  d.status.resize(2);
  d.status << 1, 0;
  d.covariates = Matrix::Zero(2, 1);
  CHECK_THROWS_AS(log_partial_likelihood(d, Vector::Zero(1)), std::invalid_argument);
  d.times[0] = 1.0;
  Vector bad_beta(1);
  bad_beta << std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(log_partial_likelihood(d, bad_beta), std::invalid_argument);
  d.status << 0, 0;  // zero events
  CHECK_THROWS_AS(log_partial_likelihood(d, Vector::Zero(1)), std::invalid_argument);
}

// Acceptance gate: one pass/fail line per criterion.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <unistd.h>

#include "svcox/io.hpp"
#include "svcox/sampler.hpp"
#include "svcox/sim.hpp"
#include "svcox/survival.hpp"
#include "test_util.hpp"

using namespace svcox;
namespace fs = std::filesystem;

namespace {

void report(int idx, const std::string& desc, bool ok) {
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << idx << ": " << desc << std::endl;
  CHECK(ok);
}

Matrix random_spd(Rng& rng, int p, double scale = 0.05) {
  Matrix A(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) A(i, j) = rng.normal();
  return scale * (A * A.transpose() + p * Matrix::Identity(p, p));
}

std::vector<PmleEstimate> synthetic_pmles(Rng& rng, int n, int p) {
  std::vector<PmleEstimate> pmles(n);
  for (int i = 0; i < n; ++i) {
    pmles[i].site_id = "g" + std::to_string(i);
    pmles[i].beta_hat = Vector::NullaryExpr(p, [&](int) { return rng.normal(); });
    pmles[i].v_hat = random_spd(rng, p);
    pmles[i].converged = true;
    pmles[i].n_events = 50;
  }
  return pmles;
}

DistanceMatrix path_distance(int n) {
  SpatialGraph g;
  for (int i = 0; i < n; ++i) g.site_ids.push_back("g" + std::to_string(i));
  for (int i = 1; i < n; ++i) g.edges.emplace_back(i - 1, i);
  return graph_distance_matrix(g);
}

// ---- shared CLI replicate runs (criteria 5, 8, 10) -------------------- //

struct CliRuns {
  fs::path base, run_a, run_b, run_c;
  bool ok = false;
};

const CliRuns& cli_runs() {
  static CliRuns runs = [] {
    CliRuns r;
    r.base = fs::temp_directory_path() / ("svcox-acceptance-" + std::to_string(::getpid()));
    r.run_a = r.base / "a";
    r.run_b = r.base / "b";
    r.run_c = r.base / "c";
    fs::create_directories(r.base);
    r.ok = true;
    const std::string cli = SVCOX_CLI_PATH;
    for (const auto& [dir, workers] :
         std::vector<std::pair<fs::path, int>>{{r.run_a, 1}, {r.run_b, 1}, {r.run_c, 3}}) {
      const std::string cmd = cli + " replicate --preset study1-desk --seed 7 --workers " +
                              std::to_string(workers) + " --out-dir " + dir.string() + " > " +
                              (dir.string() + ".log") + " 2>&1";
      if (std::system(cmd.c_str()) != 0) r.ok = false;
    }
    return r;
  }();
  return runs;
}

double json_mean(const json& node) {
  return node.is_null() ? std::numeric_limits<double>::quiet_NaN() : node.get<double>();
}

}  // namespace

TEST_CASE("criterion 01") {
  // dense joint-posterior oracle for the beta Gibbs step, n=2 p=2
  Rng rng(101);
  const int n = 2, p = 2;
  auto pmles = synthetic_pmles(rng, n, p);
  const DistanceMatrix D = path_distance(n);
  const PriorConfig prior;
  Sampler sampler(pmles, D, prior);
  ModelState s = sampler.init_state();
  s.tau2 = 0.7;
  s.lambda2 << 1.3, 0.4;
  s.gamma0 << 0.8, 2.0;
  s.c << 1, 1;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < p; ++k) s.beta(i, k) = rng.normal();

  const int dim = n * p;
  Matrix P = Matrix::Zero(dim, dim);
  Vector b = Vector::Zero(dim);
  for (int i = 0; i < n; ++i) {
    const Matrix A = pmles[i].v_hat.inverse();
    P.block(i * p, i * p, p, p) += A;
    b.segment(i * p, p) += A * pmles[i].beta_hat;
  }
  for (int k = 0; k < p; ++k) {
    const Matrix Q =
        correlation_matrix(D, s.gamma(k), prior.nugget).inverse() / (s.tau2 * s.lambda2[k]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) P(i * p + k, j * p + k) += Q(i, j);
  }
  const Vector mu = P.ldlt().solve(b);

  double max_err = 0.0;
  for (int k = 0; k < p; ++k) {
    Matrix Pss(n, n), Psr(n, dim - n);
    Vector xr(dim - n), mur(dim - n), mus(n);
    std::vector<int> Sidx, Ridx;
    for (int i = 0; i < n; ++i) Sidx.push_back(i * p + k);
    for (int d = 0; d < dim; ++d)
      if (d % p != k) Ridx.push_back(d);
    for (int a = 0; a < n; ++a) {
      mus[a] = mu[Sidx[a]];
      for (int c2 = 0; c2 < n; ++c2) Pss(a, c2) = P(Sidx[a], Sidx[c2]);
      for (int c2 = 0; c2 < dim - n; ++c2) Psr(a, c2) = P(Sidx[a], Ridx[c2]);
    }
    for (int c2 = 0; c2 < dim - n; ++c2) {
      xr[c2] = s.beta(Ridx[c2] / p, Ridx[c2] % p);
      mur[c2] = mu[Ridx[c2]];
    }
    const Matrix cov = Pss.inverse();
    const Vector mean = mus - cov * Psr * (xr - mur);
    const auto got = sampler.beta_conditional(s, k);
    max_err = std::max(max_err, (got.mean - mean).cwiseAbs().maxCoeff());
    max_err = std::max(max_err, (got.covariance - cov).cwiseAbs().maxCoeff());
  }
  report(1, "beta Gibbs step matches dense joint-posterior oracle (tol 1e-8)", max_err < 1e-8);
}

TEST_CASE("criterion 02") {
  // full-conditional log-ratio consistency for every kernel, 100 states
  Rng rng(102);
  const int n = 3, p = 2;
  auto pmles = synthetic_pmles(rng, n, p);
  Sampler sampler(pmles, path_distance(n), PriorConfig{});
  const PriorConfig prior;

  auto ig_ratio = [](double x1, double x2, Sampler::InvGammaParams pr) {
    return -(pr.shape + 1.0) * (std::log(x1) - std::log(x2)) -
           pr.scale * (1.0 / x1 - 1.0 / x2);
  };

  bool ok = true;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    ModelState s = sampler.init_state();
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < p; ++k) s.beta(i, k) = rng.normal();
    s.tau2 = rng.inv_gamma(2.0, 2.0);
    s.xi = rng.inv_gamma(1.5, 1.5);
    for (int k = 0; k < p; ++k) {
      s.lambda2[k] = rng.inv_gamma(2.0, 2.0);
      s.nu[k] = rng.inv_gamma(1.5, 1.5);
      s.gamma0[k] = rng.gamma(25.0, 50.0);
      s.c[k] = rng.bernoulli(0.5) ? 1 : 0;
      s.pi[k] = 0.1 + 0.8 * rng.uniform();
    }
    const int k = trial % p;
    // 1e-8 absolute, graded to relative where the log-joint differences
    // themselves exceed O(1) (the near-singular spike puts them at ~1e5,
    // past what an absolute 1e-8 can resolve in double precision)
    auto close = [&](double a, double b) {
      return std::abs(a - b) < 1e-8 * (1.0 + std::max(std::abs(a), std::abs(b)));
    };

    {  // lambda2
      ModelState sa = s, sb = s;
      sa.lambda2[k] = rng.inv_gamma(2.0, 2.0);
      sb.lambda2[k] = rng.inv_gamma(2.0, 2.0);
      ok = ok && close(sampler.log_joint(sa) - sampler.log_joint(sb),
                       ig_ratio(sa.lambda2[k], sb.lambda2[k], sampler.lambda2_conditional(s, k)));
    }
    {  // nu
      ModelState sa = s, sb = s;
      sa.nu[k] = rng.inv_gamma(2.0, 2.0);
      sb.nu[k] = rng.inv_gamma(2.0, 2.0);
      ok = ok && close(sampler.log_joint(sa) - sampler.log_joint(sb),
                       ig_ratio(sa.nu[k], sb.nu[k], sampler.nu_conditional(s, k)));
    }
    {  // tau2
      ModelState sa = s, sb = s;
      sa.tau2 = rng.inv_gamma(2.0, 2.0);
      sb.tau2 = rng.inv_gamma(2.0, 2.0);
      ok = ok && close(sampler.log_joint(sa) - sampler.log_joint(sb),
                       ig_ratio(sa.tau2, sb.tau2, sampler.tau2_conditional(s)));
    }
    {  // xi
      ModelState sa = s, sb = s;
      sa.xi = rng.inv_gamma(2.0, 2.0);
      sb.xi = rng.inv_gamma(2.0, 2.0);
      ok = ok && close(sampler.log_joint(sa) - sampler.log_joint(sb),
                       ig_ratio(sa.xi, sb.xi, sampler.xi_conditional(s)));
    }
    {  // c; the near-singular spike saturates q in double precision, so
       // log-odds are only comparable in the representable band
      const double q = sampler.slab_probability(s, k);
      ModelState sa = s, sb = s;
      sa.c[k] = 1;
      sb.c[k] = 0;
      const double diff = sampler.log_joint(sa) - sampler.log_joint(sb);
      if (diff > 36.0)
        ok = ok && q > 1.0 - 1e-12;
      else if (diff < -36.0)
        ok = ok && q < 1e-12;
      else
        ok = ok && close(diff, std::log(q) - std::log1p(-q));
    }
    {  // pi
      ModelState sa = s, sb = s;
      sa.pi[k] = 0.1 + 0.8 * rng.uniform();
      sb.pi[k] = 0.1 + 0.8 * rng.uniform();
      const double a = prior.beta_pi_a + s.c[k], bb = prior.beta_pi_b + 1 - s.c[k];
      const double rhs = (a - 1.0) * (std::log(sa.pi[k]) - std::log(sb.pi[k])) +
                         (bb - 1.0) * (std::log1p(-sa.pi[k]) - std::log1p(-sb.pi[k]));
      ok = ok && close(sampler.log_joint(sa) - sampler.log_joint(sb), rhs);
    }
    {  // gamma0 (MH target)
      ModelState sa = s, sb = s;
      sa.gamma0[k] = rng.gamma(25.0, 50.0);
      sb.gamma0[k] = rng.gamma(25.0, 50.0);
      ok = ok && close(sampler.log_joint(sa) - sampler.log_joint(sb),
                       sampler.gamma0_log_target(s, k, sa.gamma0[k]) -
                           sampler.gamma0_log_target(s, k, sb.gamma0[k]));
    }
    {  // beta column Gaussian conditional
      const auto cond = sampler.beta_conditional(s, k);
      Eigen::LLT<Matrix> llt(cond.covariance);
      ModelState sa = s, sb = s;
      for (int i = 0; i < n; ++i) {
        sa.beta(i, k) = cond.mean[i] + 0.3 * rng.normal();
        sb.beta(i, k) = cond.mean[i] + 0.3 * rng.normal();
      }
      const Vector ra = Vector(sa.beta.col(k)) - cond.mean;
      const Vector rb = Vector(sb.beta.col(k)) - cond.mean;
      const double rhs = -0.5 * (ra.dot(llt.solve(ra)) - rb.dot(llt.solve(rb)));
      ok = ok && close(sampler.log_joint(sa) - sampler.log_joint(sb), rhs);
    }
  }
  report(2, "full conditionals consistent with the log joint on 100 random states (tol 1e-8)",
         ok);
}

TEST_CASE("criterion 03") {
  // prior lambda draws vs the standard half-Cauchy CDF, KS at alpha 0.01
  Rng rng(103);
  auto pmles = synthetic_pmles(rng, 2, 1);
  Sampler sampler(pmles, path_distance(2), PriorConfig{});
  const int m = 10000;
  std::vector<double> lambda(m);
  for (int t = 0; t < m; ++t) {
    const ModelState s = sampler.draw_state_from_prior(rng);
    lambda[t] = std::sqrt(s.lambda2[0]);
  }
  std::sort(lambda.begin(), lambda.end());
  double d = 0.0;
  for (int i = 0; i < m; ++i) {
    const double f = (2.0 / M_PI) * std::atan(lambda[i]);
    d = std::max(d, std::abs(f - double(i + 1) / m));
    d = std::max(d, std::abs(f - double(i) / m));
  }
  const double crit = 1.62762 / std::sqrt(double(m));
  report(3, "10,000 prior lambda draws pass a KS test against half-Cauchy (alpha 0.01)",
         d < crit);
}

TEST_CASE("criterion 04") {
  // closed-form PMLE plus finite-difference suites
  bool ok = true;
  {
    const auto site = testutil::three_subject_site();
    const auto est = fit_pmle(site, FitOptions{});
    ok = ok && est.converged && std::abs(est.beta_hat[0] - 0.5 * std::log(2.0)) < 1e-6;
  }
  Rng rng(104);
  for (int trial = 0; trial < 50 && ok; ++trial) {
    const int n = 8 + static_cast<int>(rng.uniform() * 12);
    const int p = 1 + static_cast<int>(rng.uniform() * 3);
    const auto site = testutil::random_site(rng, n, p);
    Vector beta(p);
    for (int k = 0; k < p; ++k) beta[k] = 0.5 * rng.normal();
    const Vector g = pl_gradient(site, beta);
    const Matrix H = pl_hessian(site, beta);
    const double h = 1e-5;
    for (int k = 0; k < p; ++k) {
      Vector bp = beta, bm = beta;
      bp[k] += h;
      bm[k] -= h;
      const double fd = (log_partial_likelihood(site, bp) - log_partial_likelihood(site, bm)) /
                        (2.0 * h);
      ok = ok && std::abs(fd - g[k]) < 1e-4 * std::max(1.0, std::abs(g[k]));
      const Vector gfd = (pl_gradient(site, bp) - pl_gradient(site, bm)) / (2.0 * h);
      for (int j = 0; j < p; ++j)
        ok = ok && std::abs(gfd[j] - H(k, j)) < 1e-3 * std::max(1.0, std::abs(H(k, j)));
    }
  }
  report(4, "PMLE recovers ln(2)/2 within 1e-6; FD gradient/Hessian suites pass (50 datasets)",
         ok);
}

TEST_CASE("criterion 05") {
  const auto& runs = cli_runs();
  bool ok = runs.ok;
  double sig_tpr = NAN, sig_tnr = NAN, sp_tpr = NAN, sp_tnr = NAN;
  if (ok) {
    const json agg = parse_json_file(runs.run_a / "aggregate.json");
    sig_tpr = json_mean(agg["significance"]["tpr"]["mean"]);
    sig_tnr = json_mean(agg["significance"]["tnr"]["mean"]);
    sp_tpr = json_mean(agg["spatial"]["tpr"]["mean"]);
    sp_tnr = json_mean(agg["spatial"]["tnr"]["mean"]);
    ok = sig_tpr >= 0.90 && sig_tnr >= 0.95 && sp_tpr >= 0.55 && sp_tnr >= 0.85;
  }
  std::ostringstream desc;
  desc << "study-1 desk scale: significance TPR " << sig_tpr << " (>=0.90), TNR " << sig_tnr
       << " (>=0.95); spatial TPR " << sp_tpr << " (>=0.55), TNR " << sp_tnr << " (>=0.85)";
  report(5, desc.str(), ok);
}

TEST_CASE("criterion 06") {
  auto spec = make_preset("study2-desk");
  const auto results = run_study(spec, 11, 1);
  int both_selected = 0, varying20 = 0, static19 = 0, n_ok = 0;
  for (const auto& r : results) {
    if (!r.ok) continue;
    ++n_ok;
    if (r.selected[18] == 1 && r.selected[19] == 1) ++both_selected;
    if (r.varying[19] == 1) ++varying20;
    if (r.selected[18] == 1 && r.varying[18] == 0) ++static19;
  }
  const bool ok = n_ok == 10 && both_selected >= 9 && varying20 >= 8 && static19 >= 8;
  std::ostringstream desc;
  desc << "study-2 desk scale: both signals selected " << both_selected
       << "/10 (>=9); beta20 varying " << varying20 << "/10 (>=8); beta19 static " << static19
       << "/10 (>=8)";
  report(6, desc.str(), ok);
}

TEST_CASE("criterion 07") {
  auto spec = make_preset("null-desk");
  const auto results = run_study(spec, 13, 1);
  int clean = 0, n_ok = 0;
  for (const auto& r : results) {
    if (!r.ok) continue;
    ++n_ok;
    if (r.selected.sum() == 0) ++clean;
  }
  const bool ok = n_ok == 10 && clean >= 9;
  std::ostringstream desc;
  desc << "null model: zero predictors selected in " << clean << "/10 replications (>=9)";
  report(7, desc.str(), ok);
}

TEST_CASE("criterion 08") {
  const auto& runs = cli_runs();
  bool ok = runs.ok;
  double null_mse = NAN;
  if (ok) {
    const json agg = parse_json_file(runs.run_a / "aggregate.json");
    const auto mse = agg["average_mse"].get<std::vector<double>>();
    double sum = 0.0;
    for (int k = 0; k < 10; ++k) sum += mse[k];  // study-1 null coefficients
    null_mse = sum / 10.0;
    ok = null_mse < 0.01;
  }
  std::ostringstream desc;
  desc << "null-coefficient average MSE " << null_mse << " (< 0.01) at desk scale";
  report(8, desc.str(), ok);
}

TEST_CASE("criterion 09") {
  const auto spec = make_preset("study1-desk");
  const auto D = graph_distance_matrix(spec.graph);
  double total_rate = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto seed = replication_seed(21, i);
    Rng rng_coef = Rng::substream(seed, 1);
    Rng rng_data = Rng::substream(seed, 2);
    const Matrix beta = generate_coefficients(spec, D, rng_coef);
    const auto data = generate_survival_data(beta, spec, rng_data);
    int events = 0, total = 0;
    for (const auto& site : data) {
      events += site.n_events();
      total += site.n();
    }
    total_rate += 1.0 - double(events) / total;
  }
  const double mean_rate = total_rate / 10.0;
  const bool ok = mean_rate >= 0.30 && mean_rate <= 0.40;
  std::ostringstream desc;
  desc << "study-1 censoring rate " << mean_rate << " over 10 seeds (0.35 +- 0.05)";
  report(9, desc.str(), ok);
}

TEST_CASE("criterion 10") {
  const auto& runs = cli_runs();
  bool ok = runs.ok;
  if (ok) {
    for (const char* name : {"metrics.csv", "aggregate_metrics.csv", "aggregate_frequencies.csv",
                             "aggregate_mse.csv", "aggregate.json"}) {
      const std::string a = read_file(runs.run_a / name);
      ok = ok && a == read_file(runs.run_b / name) && a == read_file(runs.run_c / name);
    }
  }
  report(10, "replicate --preset study1-desk --seed 7 is byte-identical across runs and worker counts",
         ok);
}

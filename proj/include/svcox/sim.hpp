#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "svcox/graph.hpp"
#include "svcox/model.hpp"
#include "svcox/rng.hpp"
#include "svcox/sampler.hpp"
#include "svcox/selection.hpp"
#include "svcox/survival.hpp"

namespace svcox {

// ---------------------------------------------------------------------- //
// simulation studies
// ---------------------------------------------------------------------- //

struct CoefficientSpec {
  enum class Kind { Null, Static, Varying };
  Kind kind = Kind::Null;
  double value = 0.0;  // Static: the constant level
  double mean = 0.0;   // Varying: marginal mean
  double decay = 0.0;  // Varying: correlation decay rate

  static CoefficientSpec null_coef() { return {}; }
  static CoefficientSpec static_coef(double v) {
    return {Kind::Static, v, 0.0, 0.0};
  }
  static CoefficientSpec varying_coef(double m, double d) {
    return {Kind::Varying, 0.0, m, d};
  }
};

struct StudySpec {
  int n_sites = 64;
  int p = 20;
  int per_site_n = 100;
  double baseline_hazard = 0.5;
  double censor_time = 155.0;
  std::vector<CoefficientSpec> pattern;  // length p
  SpatialGraph graph;                    // defaults to the 8x8 lattice
  PriorConfig prior;
  int replications = 10;
  ChainConfig chain;
  FitOptions fit;

  void validate() const {
    if (static_cast<int>(pattern.size()) != p)
      throw std::invalid_argument("StudySpec: pattern length != p");
    if (graph.n() != n_sites)
      throw std::invalid_argument("StudySpec: graph has " + std::to_string(graph.n()) +
                                  " sites, spec says " + std::to_string(n_sites));
    if (per_site_n < p + 1)
      throw std::invalid_argument("StudySpec: per_site_n must exceed p");
    for (const auto& cs : pattern)
      if (cs.kind == CoefficientSpec::Kind::Varying && !(cs.decay > 0))
        throw std::invalid_argument("StudySpec: varying coefficient needs decay > 0");
    prior.validate();
    chain.validate();
  }
};

// True beta field: null columns zero, static columns constant, varying
// columns one draw from N_n(mean * 1, exp(-decay * D)).
inline Matrix generate_coefficients(const StudySpec& spec, const DistanceMatrix& D, Rng& rng) {
  Matrix beta = Matrix::Zero(spec.n_sites, spec.p);
  for (int k = 0; k < spec.p; ++k) {
    const auto& cs = spec.pattern[k];
    switch (cs.kind) {
      case CoefficientSpec::Kind::Null:
        break;
      case CoefficientSpec::Kind::Static:
        beta.col(k).setConstant(cs.value);
        break;
      case CoefficientSpec::Kind::Varying: {
        Matrix H = correlation_matrix(D, cs.decay, 0.0);
        Eigen::LLT<Matrix> llt(H);
        if (llt.info() != Eigen::Success)
          throw NumericalError("generate_coefficients: exp(-decay*D) not positive definite");
        Vector z(spec.n_sites);
        for (int i = 0; i < spec.n_sites; ++i) z[i] = rng.normal();
        beta.col(k) = Vector::Constant(spec.n_sites, cs.mean) + Matrix(llt.matrixL()) * z;
        break;
      }
    }
  }
  return beta;
}

// Cox model with constant baseline hazard: T = Exp(h0 * exp(x'beta)),
// censored at the fixed time. Linear predictor clamped at +-700 before
// exponentiation.
inline std::vector<SiteSurvivalData> generate_survival_data(const Matrix& true_beta,
                                                            const StudySpec& spec, Rng& rng) {
  std::vector<SiteSurvivalData> dataset;
  dataset.reserve(spec.n_sites);
  for (int i = 0; i < spec.n_sites; ++i) {
    SiteSurvivalData site;
    site.site_id = spec.graph.site_ids[i];
    site.covariates.resize(spec.per_site_n, spec.p);
    site.times.resize(spec.per_site_n);
    site.status.resize(spec.per_site_n);
    for (int j = 0; j < spec.per_site_n; ++j) {
      for (int k = 0; k < spec.p; ++k) site.covariates(j, k) = rng.normal();
      double eta = site.covariates.row(j).dot(true_beta.row(i));
      eta = std::clamp(eta, -700.0, 700.0);
      const double rate = spec.baseline_hazard * std::exp(eta);
      const double t = rng.exponential(rate);
      if (t <= spec.censor_time) {
        site.times[j] = t;
        site.status[j] = 1;
      } else {
        site.times[j] = spec.censor_time;
        site.status[j] = 0;
      }
    }
    dataset.push_back(std::move(site));
  }
  return dataset;
}

struct ReplicationResult {
  std::uint64_t seed = 0;
  int index = 0;
  bool ok = false;
  std::string error;
  OperatingCharacteristics significance;
  OperatingCharacteristics spatial;  // over the truly significant subset
  Eigen::VectorXi selected;          // p
  Eigen::VectorXi varying;           // p, -1 where not selected
  Vector mse;                        // p
  int n_excluded_sites = 0;
  double censoring_rate = 0.0;
  double wall_seconds = 0.0;
};

inline Eigen::VectorXi significance_truth(const StudySpec& spec) {
  Eigen::VectorXi t(spec.p);
  for (int k = 0; k < spec.p; ++k)
    t[k] = spec.pattern[k].kind != CoefficientSpec::Kind::Null ? 1 : 0;
  return t;
}

inline std::uint64_t replication_seed(std::uint64_t master_seed, int index) {
  return Rng::derive(master_seed, 0x5eed0000ULL + static_cast<std::uint64_t>(index));
}

// One end-to-end replication: generate -> stage-1 fits -> chain ->
// summarize -> decide -> metrics. Pure function of (spec, seed).
inline ReplicationResult run_replication(const StudySpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ReplicationResult res;
  res.seed = seed;
  try {
    const DistanceMatrix D = graph_distance_matrix(spec.graph);
    Rng rng_coef = Rng::substream(seed, 1);
    Rng rng_data = Rng::substream(seed, 2);
    const Matrix true_beta = generate_coefficients(spec, D, rng_coef);
    const auto dataset = generate_survival_data(true_beta, spec, rng_data);

    int n_events = 0;
    for (const auto& site : dataset) n_events += site.n_events();
    res.censoring_rate = 1.0 - double(n_events) / (spec.n_sites * spec.per_site_n);

    const StageOneFit stage1 = fit_all_sites(dataset, spec.fit);
    res.n_excluded_sites = static_cast<int>(stage1.excluded.size());

    std::vector<std::string> kept_ids;
    std::vector<int> kept_rows;
    for (const auto& est : stage1.estimates) {
      kept_ids.push_back(est.site_id);
      kept_rows.push_back(spec.graph.index_of(est.site_id));
    }
    const SpatialGraph sub = spec.graph.induced(kept_ids);
    const DistanceMatrix Dsub = graph_distance_matrix(sub);

    ChainConfig chain = spec.chain;
    chain.seed = Rng::derive(seed, 3);
    const PosteriorDraws draws = run_chain(stage1.estimates, Dsub, spec.prior, chain);
    const PosteriorSummary summary = summarize(draws);
    const SelectionReport report = decide(summary);

    const Eigen::VectorXi sig_truth = significance_truth(spec);
    res.selected = report.selected;
    res.varying = report.spatially_varying;
    res.significance = confusion_metrics(report.selected, sig_truth);

    // spatial detection only over truly significant predictors; an
    // unselected predictor counts as "not detected varying"
    std::vector<int> sub_idx;
    for (int k = 0; k < spec.p; ++k)
      if (sig_truth[k] == 1) sub_idx.push_back(k);
    Eigen::VectorXi sp_dec(sub_idx.size()), sp_truth(sub_idx.size());
    for (size_t j = 0; j < sub_idx.size(); ++j) {
      sp_dec[j] = report.spatially_varying[sub_idx[j]] == 1 ? 1 : 0;
      sp_truth[j] =
          spec.pattern[sub_idx[j]].kind == CoefficientSpec::Kind::Varying ? 1 : 0;
    }
    res.spatial = confusion_metrics(sp_dec, sp_truth);

    Matrix truth_kept(kept_rows.size(), spec.p);
    for (size_t r = 0; r < kept_rows.size(); ++r)
      truth_kept.row(r) = true_beta.row(kept_rows[r]);
    res.mse = average_mse(summary.beta_mean, truth_kept);
    res.ok = true;
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// Replications are independent; a bounded worker pool picks them off a
// shared counter and results land slot-by-index, so the batch output is
// identical for any worker count.
inline std::vector<ReplicationResult> run_study(const StudySpec& spec,
                                                std::uint64_t master_seed, int workers = 1) {
  spec.validate();
  std::vector<ReplicationResult> results(spec.replications);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= spec.replications) return;
      results[i] = run_replication(spec, replication_seed(master_seed, i));
      results[i].index = i;
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return results;
}

// ---------------------------------------------------------------------- //
// aggregation across replications
// ---------------------------------------------------------------------- //

struct MetricSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
  int n_defined = 0;
  int n_nan = 0;
};

struct AggregateTables {
  int n_replications = 0;
  int n_failed = 0;
  // rows: tpr, tnr, ppv, npv; one column set per detection level
  MetricSummary significance[4];
  MetricSummary spatial[4];
  std::vector<int> selection_count;  // per coefficient
  std::vector<int> varying_count;    // per coefficient, among selected replicates
  Vector mean_mse;                   // per coefficient, averaged over replications
};

inline MetricSummary summarize_metric(const std::vector<double>& values) {
  MetricSummary ms;
  double sum = 0.0;
  for (double v : values) {
    if (std::isnan(v)) {
      ++ms.n_nan;
    } else {
      sum += v;
      ++ms.n_defined;
    }
  }
  if (ms.n_defined == 0) return ms;
  ms.mean = sum / ms.n_defined;
  double ss = 0.0;
  for (double v : values)
    if (!std::isnan(v)) ss += (v - ms.mean) * (v - ms.mean);
  ms.sd = ms.n_defined > 1 ? std::sqrt(ss / (ms.n_defined - 1)) : 0.0;
  return ms;
}

inline AggregateTables aggregate(const std::vector<ReplicationResult>& results) {
  if (results.empty()) throw std::invalid_argument("aggregate: no replication results");
  AggregateTables agg;
  std::vector<const ReplicationResult*> ok;
  for (const auto& r : results) {
    ++agg.n_replications;
    if (r.ok) ok.push_back(&r);
    else ++agg.n_failed;
  }
  if (ok.empty()) throw std::runtime_error("aggregate: every replication failed");

  const int p = static_cast<int>(ok.front()->selected.size());
  agg.selection_count.assign(p, 0);
  agg.varying_count.assign(p, 0);
  agg.mean_mse = Vector::Zero(p);

  auto metric = [&](auto get, MetricSummary* dest) {
    for (int m = 0; m < 4; ++m) {
      std::vector<double> vals;
      for (const auto* r : ok) vals.push_back(get(*r, m));
      dest[m] = summarize_metric(vals);
    }
  };
  auto pick = [](const OperatingCharacteristics& oc, int m) {
    switch (m) {
      case 0: return oc.tpr;
      case 1: return oc.tnr;
      case 2: return oc.ppv;
      default: return oc.npv;
    }
  };
  metric([&](const ReplicationResult& r, int m) { return pick(r.significance, m); },
         agg.significance);
  metric([&](const ReplicationResult& r, int m) { return pick(r.spatial, m); }, agg.spatial);

  for (const auto* r : ok) {
    for (int k = 0; k < p; ++k) {
      if (r->selected[k] == 1) {
        ++agg.selection_count[k];
        if (r->varying[k] == 1) ++agg.varying_count[k];
      }
    }
    agg.mean_mse += r->mse;
  }
  agg.mean_mse /= static_cast<double>(ok.size());
  return agg;
}

// ---------------------------------------------------------------------- //
// named presets
// ---------------------------------------------------------------------- //

inline StudySpec make_preset(const std::string& name) {
  StudySpec spec;
  spec.graph = lattice_graph(8, 8);

  const bool desk = name.size() > 5 && name.substr(name.size() - 5) == "-desk";
  const std::string base = desk ? name.substr(0, name.size() - 5) : name;

  if (desk) {
    spec.replications = 10;
    spec.chain.n_iter = 50000;
    spec.chain.burn_in = 40000;
    spec.chain.thin = 10;
  } else {
    spec.replications = 100;
    spec.chain.n_iter = 1000000;
    spec.chain.burn_in = 900000;
    spec.chain.thin = 20;
  }

  spec.pattern.assign(spec.p, CoefficientSpec::null_coef());
  if (base == "study1" || base == "study3") {
    const double decay = base == "study1" ? 10.0 : 1.0;
    for (int k = 10; k < 15; ++k)
      spec.pattern[k] = CoefficientSpec::static_coef(static_cast<double>(k - 9));
    for (int k = 15; k < 20; ++k)
      spec.pattern[k] = CoefficientSpec::varying_coef(3.0, decay);
  } else if (base == "study2") {
    spec.pattern[18] = CoefficientSpec::static_coef(3.0);
    spec.pattern[19] = CoefficientSpec::varying_coef(3.0, 10.0);
  } else if (base == "null") {
    // all coefficients zero
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return spec;
}

}  // namespace svcox

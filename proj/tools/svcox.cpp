// svcox: two-stage Bayesian variable selection for spatially varying
// Cox regression. Subcommands: fit-sites, select, simulate, replicate,
// evaluate.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "svcox/io.hpp"
#include "svcox/sampler.hpp"
#include "svcox/selection.hpp"
#include "svcox/sim.hpp"
#include "svcox/survival.hpp"

namespace fs = std::filesystem;
using namespace svcox;

namespace {

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::string& config_path, std::uint64_t seed,
                    const std::vector<std::string>& inputs) {
  RunManifest m;
  m.command = command;
  m.config_path = config_path;
  m.seed = seed;
  m.timestamp = iso_timestamp();
  for (const auto& path : inputs) {
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a_hash(read_file(path))));
    m.input_hashes[path] = hex;
  }
  write_file_atomic(out_dir / "run_manifest.json", manifest_to_json(m).dump(2) + "\n");
}

std::vector<std::string> default_predictor_names(int p) {
  std::vector<std::string> names;
  for (int k = 1; k <= p; ++k) names.push_back("x" + std::to_string(k));
  return names;
}

struct CommonOpts {
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::string config;
};

int cmd_fit_sites(const std::string& data_path, const std::string& graph_path,
                  const CommonOpts& opts) {
  const Dataset ds = parse_dataset(data_path);
  std::vector<std::string> site_ids;
  for (const auto& s : ds.sites) site_ids.push_back(s.site_id);
  std::vector<std::string> inputs = {data_path};
  if (!graph_path.empty()) {
    parse_edge_list(graph_path, site_ids);  // cross-check only
    inputs.push_back(graph_path);
  }

  FitOptions fit;
  if (!opts.config.empty()) {
    const json cfg = parse_json_file(opts.config);
    if (cfg.contains("fit")) {
      const auto& f = cfg.at("fit");
      if (f.contains("max_iter")) fit.max_iter = f.at("max_iter").get<int>();
      if (f.contains("grad_tol")) fit.grad_tol = f.at("grad_tol").get<double>();
      if (f.contains("divergence_bound"))
        fit.divergence_bound = f.at("divergence_bound").get<double>();
      if (f.contains("exclusion_variance"))
        fit.exclusion_variance = f.at("exclusion_variance").get<double>();
    }
  }

  StageOneDocument doc;
  doc.covariate_names = ds.covariate_names;
  doc.fit = fit_all_sites(ds.sites, fit);

  fs::create_directories(opts.out_dir);
  write_file_atomic(fs::path(opts.out_dir) / "stage1.json", stage1_to_json(doc).dump(2) + "\n");
  write_manifest(opts.out_dir, "fit-sites", opts.config, opts.seed, inputs);
  std::cout << "fit-sites: " << doc.fit.estimates.size() << " sites fitted, "
            << doc.fit.excluded.size() << " excluded\n";
  for (const auto& ex : doc.fit.excluded)
    std::cout << "  excluded " << ex.site_id << ": " << ex.reason << "\n";
  return 0;
}

int cmd_select(const std::string& stage1_path, const std::string& graph_path,
               const CommonOpts& opts, int chains) {
  const StageOneDocument doc = stage1_from_json(parse_json_file(stage1_path));
  std::vector<std::string> kept_ids;
  for (const auto& est : doc.fit.estimates) kept_ids.push_back(est.site_id);

  const SpatialGraph graph = parse_edge_list(graph_path, kept_ids);
  const DistanceMatrix D = graph_distance_matrix(graph);

  PriorConfig prior;
  ChainConfig chain;
  if (!opts.config.empty()) {
    const json cfg = parse_json_file(opts.config);
    if (cfg.contains("prior")) prior = prior_from_json(cfg.at("prior"));
    if (cfg.contains("chain")) chain = chain_from_json(cfg.at("chain"));
  }
  chain.seed = opts.seed;
  if (chains > 0) chain.n_chains = chains;

  const PosteriorDraws draws = run_chain(doc.fit.estimates, D, prior, chain);
  const PosteriorSummary summary = summarize(draws);
  const SelectionReport report = decide(summary);

  fs::create_directories(opts.out_dir);
  const auto preds =
      doc.covariate_names.empty()
          ? default_predictor_names(static_cast<int>(doc.fit.estimates[0].beta_hat.size()))
          : doc.covariate_names;
  write_file_atomic(fs::path(opts.out_dir) / "draws.csv", draws_to_csv(draws, kept_ids, preds));
  write_file_atomic(fs::path(opts.out_dir) / "summary.json",
                    summary_to_json(summary, kept_ids, preds).dump(2) + "\n");
  write_file_atomic(fs::path(opts.out_dir) / "report.json",
                    report_to_json(report, preds).dump(2) + "\n");
  write_manifest(opts.out_dir, "select", opts.config, opts.seed, {stage1_path, graph_path});

  for (size_t k = 0; k < preds.size(); ++k) {
    std::cout << preds[k] << ": lambda_mean=" << format_double(report.lambda_mean[k])
              << (report.selected[k] ? " selected" : " not selected");
    if (report.selected[k])
      std::cout << (report.spatially_varying[k] == 1 ? ", spatially varying"
                                                     : ", spatially static");
    std::cout << "\n";
  }
  return 0;
}

StudySpec load_study_spec(const std::string& preset, const CommonOpts& opts) {
  if (!opts.config.empty()) return study_spec_from_json(parse_json_file(opts.config));
  if (!preset.empty()) return make_preset(preset);
  throw std::invalid_argument("need --preset or --config");
}

int cmd_simulate(const std::string& preset, const CommonOpts& opts) {
  StudySpec spec = load_study_spec(preset, opts);
  spec.validate();
  const DistanceMatrix D = graph_distance_matrix(spec.graph);
  Rng rng_coef = Rng::substream(opts.seed, 1);
  Rng rng_data = Rng::substream(opts.seed, 2);
  const Matrix true_beta = generate_coefficients(spec, D, rng_coef);
  const auto sites = generate_survival_data(true_beta, spec, rng_data);

  Dataset ds;
  ds.sites = sites;
  ds.covariate_names = default_predictor_names(spec.p);

  fs::create_directories(opts.out_dir);
  write_file_atomic(fs::path(opts.out_dir) / "dataset.csv", dataset_to_csv(ds));
  write_file_atomic(fs::path(opts.out_dir) / "truth.json",
                    truth_to_json(true_beta, spec).dump(2) + "\n");
  write_file_atomic(fs::path(opts.out_dir) / "graph.txt", graph_to_edge_list(spec.graph));
  write_manifest(opts.out_dir, "simulate", opts.config, opts.seed,
                 opts.config.empty() ? std::vector<std::string>{}
                                     : std::vector<std::string>{opts.config});
  int events = 0, total = 0;
  for (const auto& s : sites) {
    events += s.n_events();
    total += s.n();
  }
  std::cout << "simulate: " << sites.size() << " sites, " << total << " subjects, censoring rate "
            << format_double(1.0 - double(events) / total) << "\n";
  return 0;
}

int cmd_replicate(const std::string& preset, const CommonOpts& opts, int workers) {
  StudySpec spec = load_study_spec(preset, opts);
  spec.validate();
  const auto results = run_study(spec, opts.seed, workers);
  const AggregateTables agg = aggregate(results);

  fs::create_directories(opts.out_dir);
  std::vector<std::pair<std::string, OperatingCharacteristics>> rows;
  for (const auto& r : results) {
    if (!r.ok) continue;
    rows.emplace_back("significance", r.significance);
    rows.emplace_back("spatial", r.spatial);
  }
  write_file_atomic(fs::path(opts.out_dir) / "metrics.csv", metrics_to_csv(rows));
  write_file_atomic(fs::path(opts.out_dir) / "aggregate_metrics.csv", aggregate_metrics_csv(agg));
  write_file_atomic(fs::path(opts.out_dir) / "aggregate_frequencies.csv",
                    aggregate_frequencies_csv(agg));
  write_file_atomic(fs::path(opts.out_dir) / "aggregate_mse.csv", aggregate_mse_csv(agg));
  write_file_atomic(fs::path(opts.out_dir) / "aggregate.json",
                    aggregate_to_json(agg).dump(2) + "\n");
  write_manifest(opts.out_dir, "replicate", opts.config, opts.seed,
                 opts.config.empty() ? std::vector<std::string>{}
                                     : std::vector<std::string>{opts.config});

  for (const auto& r : results)
    if (!r.ok)
      std::cout << "replication " << r.index << " failed: " << r.error << "\n";
  std::cout << "replicate: " << (agg.n_replications - agg.n_failed) << "/" << agg.n_replications
            << " replications succeeded\n";
  std::cout << "significance TPR mean " << format_double(agg.significance[0].mean) << ", TNR mean "
            << format_double(agg.significance[1].mean) << "\n";
  std::cout << "spatial TPR mean " << format_double(agg.spatial[0].mean) << ", TNR mean "
            << format_double(agg.spatial[1].mean) << "\n";
  return 0;
}

int cmd_evaluate(const std::string& report_path, const std::string& truth_path,
                 const CommonOpts& opts) {
  const SelectionReport report = report_from_json(parse_json_file(report_path));
  const json truth_doc = parse_json_file(truth_path);
  check_schema(truth_doc, kTruthSchema);
  const auto pattern = truth_doc.at("pattern").get<std::vector<std::string>>();
  const int p = static_cast<int>(pattern.size());
  if (report.selected.size() != p)
    throw std::invalid_argument("report and truth disagree on predictor count");

  Eigen::VectorXi sig_truth(p);
  for (int k = 0; k < p; ++k) sig_truth[k] = pattern[k] != "null" ? 1 : 0;
  const OperatingCharacteristics sig = confusion_metrics(report.selected, sig_truth);

  std::vector<int> sub;
  for (int k = 0; k < p; ++k)
    if (sig_truth[k] == 1) sub.push_back(k);
  Eigen::VectorXi sp_dec(sub.size()), sp_truth(sub.size());
  for (size_t j = 0; j < sub.size(); ++j) {
    sp_dec[j] = report.spatially_varying[sub[j]] == 1 ? 1 : 0;
    sp_truth[j] = pattern[sub[j]] == "varying" ? 1 : 0;
  }
  const OperatingCharacteristics sp = confusion_metrics(sp_dec, sp_truth);

  fs::create_directories(opts.out_dir);
  write_file_atomic(fs::path(opts.out_dir) / "metrics.csv",
                    metrics_to_csv({{"significance", sig}, {"spatial", sp}}));
  write_manifest(opts.out_dir, "evaluate", opts.config, opts.seed, {report_path, truth_path});
  std::cout << "significance: tpr=" << format_double(sig.tpr) << " tnr=" << format_double(sig.tnr)
            << " ppv=" << format_double(sig.ppv) << " npv=" << format_double(sig.npv) << "\n";
  std::cout << "spatial: tpr=" << format_double(sp.tpr) << " tnr=" << format_double(sp.tnr)
            << " ppv=" << format_double(sp.ppv) << " npv=" << format_double(sp.npv) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage Bayesian variable selection for spatially varying Cox regression"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOpts opts;
  std::string data_path, graph_path, stage1_path, report_path, truth_path, preset;
  int chains = 0, workers = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", opts.out_dir, "output directory");
    sub->add_option("--seed", opts.seed, "RNG seed");
    sub->add_option("--config", opts.config, "JSON config file");
  };

  auto* fit = app.add_subcommand("fit-sites", "stage 1: per-site Cox fits from a dataset CSV");
  fit->add_option("--data", data_path, "dataset CSV")->required();
  fit->add_option("--graph", graph_path, "edge-list file (cross-checked against the dataset)");
  add_common(fit);

  auto* sel = app.add_subcommand("select", "stage 2: MCMC variable selection from stage-1 output");
  sel->add_option("--stage1", stage1_path, "stage-1 JSON")->required();
  sel->add_option("--graph", graph_path, "edge-list file")->required();
  sel->add_option("--chains", chains, "number of MCMC chains");
  add_common(sel);

  auto* sim = app.add_subcommand("simulate", "generate one synthetic dataset");
  sim->add_option("--preset", preset, "study1[-desk], study2[-desk], study3[-desk], null[-desk]");
  add_common(sim);

  auto* rep = app.add_subcommand("replicate", "run a replication batch and aggregate");
  rep->add_option("--preset", preset, "named study preset");
  rep->add_option("--workers", workers, "worker pool size");
  add_common(rep);

  auto* eva = app.add_subcommand("evaluate", "operating characteristics of decisions vs truth");
  eva->add_option("--report", report_path, "selection report JSON")->required();
  eva->add_option("--truth", truth_path, "truth JSON")->required();
  add_common(eva);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit_sites(data_path, graph_path, opts);
    if (sel->parsed()) return cmd_select(stage1_path, graph_path, opts, chains);
    if (sim->parsed()) return cmd_simulate(preset, opts);
    if (rep->parsed()) return cmd_replicate(preset, opts, workers);
    if (eva->parsed()) return cmd_evaluate(report_path, truth_path, opts);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

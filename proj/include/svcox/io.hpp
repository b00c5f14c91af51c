#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "svcox/graph.hpp"
#include "svcox/model.hpp"
#include "svcox/selection.hpp"
#include "svcox/sim.hpp"
#include "svcox/survival.hpp"

namespace svcox {

using json = nlohmann::json;

// ---------------------------------------------------------------------- //
// low-level helpers
// ---------------------------------------------------------------------- //

// Locale-independent number parsing (decimal point only).
inline double parse_double(const std::string& tok, const std::string& context) {
  double value = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw std::invalid_argument(context + ": cannot parse number '" + tok + "'");
  return value;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

// Single-writer atomic file replacement: write a sibling temp file, then
// rename over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void check_schema(const json& doc, const std::string& expected) {
  if (!doc.contains("schema_version") || !doc["schema_version"].is_string())
    throw std::runtime_error("schema error: expected '" + expected + "', found no schema_version");
  const std::string found = doc["schema_version"].get<std::string>();
  if (found != expected)
    throw std::runtime_error("schema error: expected '" + expected + "', found '" + found + "'");
}

inline json parse_json_file(const std::filesystem::path& path) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded())
    throw std::runtime_error("schema error: " + path.string() + " is not valid JSON");
  return doc;
}

// ---------------------------------------------------------------------- //
// dataset CSV: site_id,time,status,x1,...,xp
// ---------------------------------------------------------------------- //

struct Dataset {
  std::vector<SiteSurvivalData> sites;  // first-appearance site order
  std::vector<std::string> covariate_names;
};

inline Dataset parse_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset is empty: " + path.string());
  auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "site_id" || header[1] != "time" ||
      header[2] != "status")
    throw std::invalid_argument("dataset header must be site_id,time,status,x1,...");
  Dataset ds;
  ds.covariate_names.assign(header.begin() + 3, header.end());
  const int p = static_cast<int>(ds.covariate_names.size());

  struct Row {
    double time;
    int status;
    std::vector<double> x;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> by_site;

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path.filename().string() + " line " + std::to_string(line_no);
    auto cols = split_csv_line(line);
    if (static_cast<int>(cols.size()) != p + 3)
      throw std::invalid_argument(ctx + ": expected " + std::to_string(p + 3) + " columns, got " +
                                  std::to_string(cols.size()));
    Row row;
    row.time = parse_double(cols[1], ctx);
    if (!(row.time > 0.0)) throw std::invalid_argument(ctx + ": time must be positive");
    const double st = parse_double(cols[2], ctx);
    if (st != 0.0 && st != 1.0) throw std::invalid_argument(ctx + ": status must be 0 or 1");
    row.status = static_cast<int>(st);
    for (int k = 0; k < p; ++k) {
      const double v = parse_double(cols[3 + k], ctx);
      if (!std::isfinite(v)) throw std::invalid_argument(ctx + ": non-finite covariate");
      row.x.push_back(v);
    }
    if (by_site.find(cols[0]) == by_site.end()) order.push_back(cols[0]);
    by_site[cols[0]].push_back(std::move(row));
  }
  if (order.empty()) throw std::invalid_argument("dataset has no data rows: " + path.string());

  for (const auto& id : order) {
    const auto& rows = by_site[id];
    SiteSurvivalData site;
    site.site_id = id;
    const int n = static_cast<int>(rows.size());
    site.times.resize(n);
    site.status.resize(n);
    site.covariates.resize(n, p);
    for (int j = 0; j < n; ++j) {
      site.times[j] = rows[j].time;
      site.status[j] = rows[j].status;
      for (int k = 0; k < p; ++k) site.covariates(j, k) = rows[j].x[k];
    }
    ds.sites.push_back(std::move(site));
  }
  return ds;
}

inline std::string dataset_to_csv(const Dataset& ds) {
  std::ostringstream out;
  out << "site_id,time,status";
  for (const auto& name : ds.covariate_names) out << "," << name;
  out << "\n";
  for (const auto& site : ds.sites)
    for (int j = 0; j < site.n(); ++j) {
      out << site.site_id << "," << format_double(site.times[j]) << "," << site.status[j];
      for (int k = 0; k < site.p(); ++k) out << "," << format_double(site.covariates(j, k));
      out << "\n";
    }
  return out.str();
}

// ---------------------------------------------------------------------- //
// edge-list graph file
// ---------------------------------------------------------------------- //

// One edge per line, whitespace separated, '#' starts a comment. The
// site order comes from the caller (the dataset); every requested site
// must appear in the file.
inline SpatialGraph parse_edge_list(const std::filesystem::path& path,
                                    const std::vector<std::string>& site_order) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph: " + path.string());

  std::vector<std::pair<std::string, std::string>> raw_edges;
  std::set<std::string> mentioned;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ss(line);
    std::string a, b, extra;
    if (!(ss >> a)) continue;
    if (!(ss >> b) || (ss >> extra))
      throw std::invalid_argument(path.filename().string() + " line " +
                                  std::to_string(line_no) + ": expected 'site_a site_b'");
    raw_edges.emplace_back(a, b);
    mentioned.insert(a);
    mentioned.insert(b);
  }

  SpatialGraph g;
  g.site_ids = site_order;
  for (const auto& id : site_order)
    if (mentioned.find(id) == mentioned.end())
      throw std::invalid_argument("site '" + id + "' does not appear in graph " +
                                  path.string());
  for (const auto& [a, b] : raw_edges) {
    const int ia = g.index_of(a), ib = g.index_of(b);
    if (ia < 0 || ib < 0) continue;  // edge touching a site outside the dataset
    g.edges.emplace_back(ia, ib);
  }
  validate_graph(g);
  return g;
}

inline std::string graph_to_edge_list(const SpatialGraph& g) {
  std::ostringstream out;
  out << "# edge list: one 'site_a site_b' pair per line\n";
  for (auto [a, b] : g.edges) out << g.site_ids[a] << " " << g.site_ids[b] << "\n";
  return out.str();
}

// ---------------------------------------------------------------------- //
// stage-1 artifact
// ---------------------------------------------------------------------- //

inline constexpr const char* kStage1Schema = "svcox-stage1/1";

struct StageOneDocument {
  std::vector<std::string> covariate_names;
  StageOneFit fit;
};

inline json stage1_to_json(const StageOneDocument& doc) {
  json j;
  j["schema_version"] = kStage1Schema;
  j["covariates"] = doc.covariate_names;
  json sites = json::array();
  for (const auto& est : doc.fit.estimates) {
    json s;
    s["site_id"] = est.site_id;
    s["beta_hat"] = std::vector<double>(est.beta_hat.data(),
                                        est.beta_hat.data() + est.beta_hat.size());
    std::vector<double> v;
    for (int r = 0; r < est.v_hat.rows(); ++r)
      for (int c = 0; c < est.v_hat.cols(); ++c) v.push_back(est.v_hat(r, c));
    s["v_hat"] = v;  // row-major p*p
    s["converged"] = est.converged;
    s["n_events"] = est.n_events;
    s["log_pl"] = est.log_pl;
    s["excluded"] = false;
    sites.push_back(std::move(s));
  }
  for (const auto& ex : doc.fit.excluded) {
    json s;
    s["site_id"] = ex.site_id;
    s["excluded"] = true;
    s["reason"] = ex.reason;
    sites.push_back(std::move(s));
  }
  j["sites"] = std::move(sites);
  return j;
}

inline StageOneDocument stage1_from_json(const json& j) {
  check_schema(j, kStage1Schema);
  StageOneDocument doc;
  doc.covariate_names = j.at("covariates").get<std::vector<std::string>>();
  const int p = static_cast<int>(doc.covariate_names.size());
  for (const auto& s : j.at("sites")) {
    if (s.at("excluded").get<bool>()) {
      doc.fit.excluded.push_back({s.at("site_id").get<std::string>(),
                                  s.value("reason", std::string("unspecified"))});
      continue;
    }
    PmleEstimate est;
    est.site_id = s.at("site_id").get<std::string>();
    const auto bh = s.at("beta_hat").get<std::vector<double>>();
    const auto vh = s.at("v_hat").get<std::vector<double>>();
    if (static_cast<int>(bh.size()) != p || static_cast<int>(vh.size()) != p * p)
      throw std::runtime_error("stage-1 site " + est.site_id + ": dimension mismatch");
    est.beta_hat = Eigen::Map<const Vector>(bh.data(), p);
    est.v_hat.resize(p, p);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c) est.v_hat(r, c) = vh[r * p + c];
    est.converged = s.at("converged").get<bool>();
    est.n_events = s.at("n_events").get<int>();
    est.log_pl = s.at("log_pl").get<double>();
    doc.fit.estimates.push_back(std::move(est));
  }
  return doc;
}

// ---------------------------------------------------------------------- //
// draws / summary / report artifacts
// ---------------------------------------------------------------------- //

// One row per retained draw: chain, iteration, beta (site-major:
// beta[s1,x1..xp], beta[s2,...], ...), lambda_1..p, c_1..p, tau.
inline std::string draws_to_csv(const PosteriorDraws& draws,
                                const std::vector<std::string>& site_ids,
                                const std::vector<std::string>& pred_names) {
  std::ostringstream out;
  out << "chain,iteration";
  for (const auto& s : site_ids)
    for (const auto& x : pred_names) out << ",beta." << s << "." << x;
  for (const auto& x : pred_names) out << ",lambda." << x;
  for (const auto& x : pred_names) out << ",c." << x;
  out << ",tau\n";
  for (int t = 0; t < draws.size(); ++t) {
    out << draws.chain[t] << "," << draws.iteration[t];
    for (int i = 0; i < draws.n_sites; ++i)
      for (int k = 0; k < draws.n_pred; ++k) out << "," << format_double(draws.beta[t](i, k));
    for (int k = 0; k < draws.n_pred; ++k) out << "," << format_double(draws.lambda[t][k]);
    for (int k = 0; k < draws.n_pred; ++k) out << "," << draws.c[t][k];
    out << "," << format_double(draws.tau[t]) << "\n";
  }
  return out.str();
}

inline constexpr const char* kSummarySchema = "svcox-summary/1";

inline json summary_to_json(const PosteriorSummary& sm, const std::vector<std::string>& site_ids,
                            const std::vector<std::string>& pred_names) {
  auto matrix_rows = [](const Matrix& mat) {
    json rows = json::array();
    for (int i = 0; i < mat.rows(); ++i) {
      json row = json::array();
      for (int k = 0; k < mat.cols(); ++k) row.push_back(mat(i, k));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  json j;
  j["schema_version"] = kSummarySchema;
  j["site_ids"] = site_ids;
  j["predictors"] = pred_names;
  j["beta_mean"] = matrix_rows(sm.beta_mean);
  j["lambda_mean"] =
      std::vector<double>(sm.lambda_mean.data(), sm.lambda_mean.data() + sm.lambda_mean.size());
  j["c_mean"] = std::vector<double>(sm.c_mean.data(), sm.c_mean.data() + sm.c_mean.size());
  j["tau_mean"] = sm.tau_mean;
  j["ess"] = sm.ess;
  j["beta_q025"] = matrix_rows(sm.beta_q025);
  j["beta_q50"] = matrix_rows(sm.beta_q50);
  j["beta_q975"] = matrix_rows(sm.beta_q975);
  return j;
}

inline PosteriorSummary summary_from_json(const json& j) {
  check_schema(j, kSummarySchema);
  auto rows_matrix = [&](const json& rows) {
    const int n = static_cast<int>(rows.size());
    const int p = n > 0 ? static_cast<int>(rows[0].size()) : 0;
    Matrix mat(n, p);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < p; ++k) mat(i, k) = rows[i][k].get<double>();
    return mat;
  };
  PosteriorSummary sm;
  sm.beta_mean = rows_matrix(j.at("beta_mean"));
  const auto lm = j.at("lambda_mean").get<std::vector<double>>();
  sm.lambda_mean = Eigen::Map<const Vector>(lm.data(), lm.size());
  const auto cm = j.at("c_mean").get<std::vector<double>>();
  sm.c_mean = Eigen::Map<const Vector>(cm.data(), cm.size());
  sm.tau_mean = j.at("tau_mean").get<double>();
  sm.ess = j.at("ess").get<std::map<std::string, double>>();
  sm.beta_q025 = rows_matrix(j.at("beta_q025"));
  sm.beta_q50 = rows_matrix(j.at("beta_q50"));
  sm.beta_q975 = rows_matrix(j.at("beta_q975"));
  return sm;
}

inline constexpr const char* kReportSchema = "svcox-report/1";

inline json report_to_json(const SelectionReport& rep, const std::vector<std::string>& pred_names) {
  json j;
  j["schema_version"] = kReportSchema;
  json preds = json::array();
  for (int k = 0; k < rep.selected.size(); ++k) {
    json r;
    r["name"] = pred_names[k];
    r["lambda_mean"] = rep.lambda_mean[k];
    r["selected"] = rep.selected[k] == 1;
    r["c_mean"] = rep.c_mean[k];
    if (rep.selected[k] == 1)
      r["spatially_varying"] = rep.spatially_varying[k] == 1;
    else
      r["spatially_varying"] = nullptr;
    preds.push_back(std::move(r));
  }
  j["predictors"] = std::move(preds);
  return j;
}

inline SelectionReport report_from_json(const json& j) {
  check_schema(j, kReportSchema);
  const auto& preds = j.at("predictors");
  const int p = static_cast<int>(preds.size());
  SelectionReport rep;
  rep.selected.resize(p);
  rep.spatially_varying.resize(p);
  rep.lambda_mean.resize(p);
  rep.c_mean.resize(p);
  for (int k = 0; k < p; ++k) {
    const auto& r = preds[k];
    rep.selected[k] = r.at("selected").get<bool>() ? 1 : 0;
    rep.lambda_mean[k] = r.at("lambda_mean").get<double>();
    rep.c_mean[k] = r.at("c_mean").get<double>();
    rep.spatially_varying[k] =
        r.at("spatially_varying").is_null() ? -1 : (r.at("spatially_varying").get<bool>() ? 1 : 0);
  }
  return rep;
}

// ---------------------------------------------------------------------- //
// truth / metrics / aggregates
// ---------------------------------------------------------------------- //

inline constexpr const char* kTruthSchema = "svcox-truth/1";

inline json truth_to_json(const Matrix& true_beta, const StudySpec& spec) {
  json j;
  j["schema_version"] = kTruthSchema;
  j["site_ids"] = spec.graph.site_ids;
  json rows = json::array();
  for (int i = 0; i < true_beta.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < true_beta.cols(); ++k) row.push_back(true_beta(i, k));
    rows.push_back(std::move(row));
  }
  j["true_beta"] = std::move(rows);
  json kinds = json::array();
  for (const auto& cs : spec.pattern) {
    switch (cs.kind) {
      case CoefficientSpec::Kind::Null: kinds.push_back("null"); break;
      case CoefficientSpec::Kind::Static: kinds.push_back("static"); break;
      case CoefficientSpec::Kind::Varying: kinds.push_back("varying"); break;
    }
  }
  j["pattern"] = std::move(kinds);
  return j;
}

inline std::string metrics_to_csv(
    const std::vector<std::pair<std::string, OperatingCharacteristics>>& rows) {
  std::ostringstream out;
  out << "replication,level,tpr,tnr,ppv,npv\n";
  int rep = 0;
  for (const auto& [level, oc] : rows) {
    if (level == "significance") ++rep;
    out << rep << "," << level << "," << format_double(oc.tpr) << "," << format_double(oc.tnr)
        << "," << format_double(oc.ppv) << "," << format_double(oc.npv) << "\n";
  }
  return out.str();
}

inline std::string aggregate_metrics_csv(const AggregateTables& agg) {
  static const char* names[4] = {"tpr", "tnr", "ppv", "npv"};
  std::ostringstream out;
  out << "level,metric,mean,sd,n_defined,n_nan\n";
  for (int m = 0; m < 4; ++m)
    out << "significance," << names[m] << "," << format_double(agg.significance[m].mean) << ","
        << format_double(agg.significance[m].sd) << "," << agg.significance[m].n_defined << ","
        << agg.significance[m].n_nan << "\n";
  for (int m = 0; m < 4; ++m)
    out << "spatial," << names[m] << "," << format_double(agg.spatial[m].mean) << ","
        << format_double(agg.spatial[m].sd) << "," << agg.spatial[m].n_defined << ","
        << agg.spatial[m].n_nan << "\n";
  return out.str();
}

inline std::string aggregate_frequencies_csv(const AggregateTables& agg) {
  std::ostringstream out;
  out << "coefficient,selected_count,varying_count,n_replications\n";
  for (size_t k = 0; k < agg.selection_count.size(); ++k)
    out << "beta" << (k + 1) << "," << agg.selection_count[k] << "," << agg.varying_count[k]
        << "," << (agg.n_replications - agg.n_failed) << "\n";
  return out.str();
}

inline std::string aggregate_mse_csv(const AggregateTables& agg) {
  std::ostringstream out;
  out << "coefficient,average_mse\n";
  for (int k = 0; k < agg.mean_mse.size(); ++k)
    out << "beta" << (k + 1) << "," << format_double(agg.mean_mse[k]) << "\n";
  return out.str();
}

inline json aggregate_to_json(const AggregateTables& agg) {
  static const char* names[4] = {"tpr", "tnr", "ppv", "npv"};
  json j;
  j["schema_version"] = "svcox-aggregate/1";
  j["n_replications"] = agg.n_replications;
  j["n_failed"] = agg.n_failed;
  for (const char* level : {"significance", "spatial"}) {
    const MetricSummary* src = level == std::string("significance") ? agg.significance : agg.spatial;
    json lvl;
    for (int m = 0; m < 4; ++m) {
      json ms;
      ms["mean"] = std::isnan(src[m].mean) ? json(nullptr) : json(src[m].mean);
      ms["sd"] = std::isnan(src[m].sd) ? json(nullptr) : json(src[m].sd);
      ms["n_defined"] = src[m].n_defined;
      ms["n_nan"] = src[m].n_nan;
      lvl[names[m]] = std::move(ms);
    }
    j[level] = std::move(lvl);
  }
  j["selection_count"] = agg.selection_count;
  j["varying_count"] = agg.varying_count;
  j["average_mse"] =
      std::vector<double>(agg.mean_mse.data(), agg.mean_mse.data() + agg.mean_mse.size());
  return j;
}

// ---------------------------------------------------------------------- //
// StudySpec config
// ---------------------------------------------------------------------- //

inline StudySpec study_spec_from_json(const json& j) {
  StudySpec spec =
      j.contains("preset") ? make_preset(j.at("preset").get<std::string>()) : make_preset("null-desk");
  if (j.contains("n_sites")) spec.n_sites = j.at("n_sites").get<int>();
  if (j.contains("p")) spec.p = j.at("p").get<int>();
  if (j.contains("per_site_n")) spec.per_site_n = j.at("per_site_n").get<int>();
  if (j.contains("baseline_hazard")) spec.baseline_hazard = j.at("baseline_hazard").get<double>();
  if (j.contains("censor_time")) spec.censor_time = j.at("censor_time").get<double>();
  if (j.contains("replications")) spec.replications = j.at("replications").get<int>();
  if (j.contains("pattern")) {
    spec.pattern.clear();
    for (const auto& c : j.at("pattern")) {
      const std::string kind = c.at("kind").get<std::string>();
      if (kind == "null")
        spec.pattern.push_back(CoefficientSpec::null_coef());
      else if (kind == "static")
        spec.pattern.push_back(CoefficientSpec::static_coef(c.at("value").get<double>()));
      else if (kind == "varying")
        spec.pattern.push_back(
            CoefficientSpec::varying_coef(c.at("mean").get<double>(), c.at("decay").get<double>()));
      else
        throw std::invalid_argument("unknown coefficient kind: " + kind);
    }
    spec.p = static_cast<int>(spec.pattern.size());
  }
  if (j.contains("lattice")) {
    const auto dims = j.at("lattice").get<std::vector<int>>();
    if (dims.size() != 2) throw std::invalid_argument("lattice must be [rows, cols]");
    spec.graph = lattice_graph(dims[0], dims[1]);
    spec.n_sites = spec.graph.n();
  }
  if (j.contains("hyperprior")) {
    const auto& h = j.at("hyperprior");
    if (h.contains("a0")) spec.prior.a0 = h.at("a0").get<double>();
    if (h.contains("b0")) spec.prior.b0 = h.at("b0").get<double>();
    if (h.contains("beta_pi_a")) spec.prior.beta_pi_a = h.at("beta_pi_a").get<double>();
    if (h.contains("beta_pi_b")) spec.prior.beta_pi_b = h.at("beta_pi_b").get<double>();
    if (h.contains("nugget")) spec.prior.nugget = h.at("nugget").get<double>();
  }
  if (j.contains("chain")) {
    const auto& c = j.at("chain");
    if (c.contains("n_iter")) spec.chain.n_iter = c.at("n_iter").get<int>();
    if (c.contains("burn_in")) spec.chain.burn_in = c.at("burn_in").get<int>();
    if (c.contains("thin")) spec.chain.thin = c.at("thin").get<int>();
    if (c.contains("n_chains")) spec.chain.n_chains = c.at("n_chains").get<int>();
    if (c.contains("mh_step")) spec.chain.mh_step = c.at("mh_step").get<double>();
  }
  // pattern length may have changed without n_sites/p consistency; let
  // validate() flag real problems
  return spec;
}

inline PriorConfig prior_from_json(const json& j) {
  PriorConfig prior;
  if (j.contains("a0")) prior.a0 = j.at("a0").get<double>();
  if (j.contains("b0")) prior.b0 = j.at("b0").get<double>();
  if (j.contains("beta_pi_a")) prior.beta_pi_a = j.at("beta_pi_a").get<double>();
  if (j.contains("beta_pi_b")) prior.beta_pi_b = j.at("beta_pi_b").get<double>();
  if (j.contains("nugget")) prior.nugget = j.at("nugget").get<double>();
  return prior;
}

inline ChainConfig chain_from_json(const json& j) {
  ChainConfig cfg;
  if (j.contains("n_iter")) cfg.n_iter = j.at("n_iter").get<int>();
  if (j.contains("burn_in")) cfg.burn_in = j.at("burn_in").get<int>();
  if (j.contains("thin")) cfg.thin = j.at("thin").get<int>();
  if (j.contains("n_chains")) cfg.n_chains = j.at("n_chains").get<int>();
  if (j.contains("mh_step")) cfg.mh_step = j.at("mh_step").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

// ---------------------------------------------------------------------- //
// run manifest
// ---------------------------------------------------------------------- //

struct RunManifest {
  std::string command;
  std::string config_path;
  std::map<std::string, std::string> input_hashes;  // path -> fnv1a hex
  std::uint64_t seed = 0;
  std::string tool_version = kVersion;
  std::string timestamp;
};

inline json manifest_to_json(const RunManifest& m) {
  json j;
  j["schema_version"] = "svcox-manifest/1";
  j["command"] = m.command;
  j["config_path"] = m.config_path;
  j["input_hashes"] = m.input_hashes;
  j["seed"] = m.seed;
  j["tool_version"] = m.tool_version;
  j["timestamp"] = m.timestamp;
  return j;
}

}  // namespace svcox

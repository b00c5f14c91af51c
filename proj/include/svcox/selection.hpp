#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "svcox/model.hpp"

namespace svcox {

// ---------------------------------------------------------------------- //
// posterior decisions and operating characteristics
// ---------------------------------------------------------------------- //

// Per-predictor decisions. spatially_varying is only defined where
// selected is true; -1 marks "not applicable".
struct SelectionReport {
  Eigen::VectorXi selected;           // p, 0/1
  Eigen::VectorXi spatially_varying;  // p, 0/1, -1 when not selected
  Eigen::VectorXd lambda_mean;        // p
  Eigen::VectorXd c_mean;             // p
};

// Ratios with zero denominators stay NaN and must never be coerced to 0.
struct OperatingCharacteristics {
  double tpr = std::numeric_limits<double>::quiet_NaN();
  double tnr = std::numeric_limits<double>::quiet_NaN();
  double ppv = std::numeric_limits<double>::quiet_NaN();
  double npv = std::numeric_limits<double>::quiet_NaN();
  int tp = 0, tn = 0, fp = 0, fn = 0;
};

// Selection rule: a predictor is significant iff the posterior mean of
// its local shrinkage lambda_k is >= lambda_threshold; a selected
// predictor is spatially varying iff the posterior P(gamma_k != 0)
// strictly exceeds c_threshold. Boundary ties resolve toward the null.
inline SelectionReport decide(const PosteriorSummary& summary, double lambda_threshold = 1.0,
                              double c_threshold = 0.5) {
  const int p = static_cast<int>(summary.lambda_mean.size());
  SelectionReport rep;
  rep.selected.resize(p);
  rep.spatially_varying.resize(p);
  rep.lambda_mean = summary.lambda_mean;
  rep.c_mean = summary.c_mean;
  for (int k = 0; k < p; ++k) {
    rep.selected[k] = summary.lambda_mean[k] >= lambda_threshold ? 1 : 0;
    rep.spatially_varying[k] =
        rep.selected[k] ? (summary.c_mean[k] > c_threshold ? 1 : 0) : -1;
  }
  return rep;
}

inline OperatingCharacteristics confusion_metrics(const Eigen::VectorXi& decisions,
                                                  const Eigen::VectorXi& truth) {
  if (decisions.size() != truth.size())
    throw std::invalid_argument("confusion_metrics: length mismatch");
  OperatingCharacteristics oc;
  for (int k = 0; k < truth.size(); ++k) {
    const bool d = decisions[k] == 1;
    const bool t = truth[k] == 1;
    if (d && t) ++oc.tp;
    else if (!d && !t) ++oc.tn;
    else if (d && !t) ++oc.fp;
    else ++oc.fn;
  }
  if (oc.tp + oc.fn > 0) oc.tpr = double(oc.tp) / (oc.tp + oc.fn);
  if (oc.tn + oc.fp > 0) oc.tnr = double(oc.tn) / (oc.tn + oc.fp);
  if (oc.tp + oc.fp > 0) oc.ppv = double(oc.tp) / (oc.tp + oc.fp);
  if (oc.tn + oc.fn > 0) oc.npv = double(oc.tn) / (oc.tn + oc.fn);
  return oc;
}

// Per-coefficient MSE of the point estimate, averaged over sites.
inline Eigen::VectorXd average_mse(const Eigen::MatrixXd& beta_mean,
                                   const Eigen::MatrixXd& truth) {
  if (beta_mean.rows() != truth.rows() || beta_mean.cols() != truth.cols())
    throw std::invalid_argument("average_mse: dimension mismatch");
  return (beta_mean - truth).array().square().colwise().mean();
}

}  // namespace svcox

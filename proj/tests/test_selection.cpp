#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "svcox/selection.hpp"

using namespace svcox;

namespace {

PosteriorSummary toy_summary(std::initializer_list<double> lambda_mean,
                             std::initializer_list<double> c_mean) {
  PosteriorSummary sm;
  const int p = static_cast<int>(lambda_mean.size());
  sm.lambda_mean.resize(p);
  sm.c_mean.resize(p);
  int k = 0;
  for (double v : lambda_mean) sm.lambda_mean[k++] = v;
  k = 0;
  for (double v : c_mean) sm.c_mean[k++] = v;
  sm.beta_mean = Matrix::Zero(1, p);
  sm.beta_q025 = sm.beta_mean;
  sm.beta_q50 = sm.beta_mean;
  sm.beta_q975 = sm.beta_mean;
  return sm;
}

Eigen::VectorXi vec(std::initializer_list<int> vals) {
  Eigen::VectorXi v(static_cast<int>(vals.size()));
  int k = 0;
  for (int x : vals) v[k++] = x;
  return v;
}

}  // namespace

TEST_CASE("decide applies the lambda and c thresholds") {
  const auto rep = decide(toy_summary({1.0, 0.999, 1.4, 2.0}, {0.9, 0.9, 0.5, 0.51}));
  REQUIRE(rep.selected.size() == 4);

  // lambda >= 1 selects, strictly below does not
  CHECK(rep.selected[0] == 1);
  CHECK(rep.selected[1] == 0);
  CHECK(rep.selected[2] == 1);
  CHECK(rep.selected[3] == 1);

  // c > 0.5 strictly; ties go to the static side
  CHECK(rep.spatially_varying[0] == 1);
  CHECK(rep.spatially_varying[1] == -1);  // undefined when not selected
  CHECK(rep.spatially_varying[2] == 0);
  CHECK(rep.spatially_varying[3] == 1);
}

TEST_CASE("decide honors custom thresholds") {
  const auto rep = decide(toy_summary({0.6, 0.4}, {0.3, 0.3}), 0.5, 0.25);
  CHECK(rep.selected[0] == 1);
  CHECK(rep.selected[1] == 0);
  CHECK(rep.spatially_varying[0] == 1);
}

TEST_CASE("confusion metrics on a hand-built case") {
  // truth:     1 1 0 0 1
  // decision:  1 0 0 1 1
  const auto oc = confusion_metrics(vec({1, 0, 0, 1, 1}), vec({1, 1, 0, 0, 1}));
  CHECK(oc.tp == 2);
  CHECK(oc.fn == 1);
  CHECK(oc.tn == 1);
  CHECK(oc.fp == 1);
  CHECK(oc.tpr == Catch::Approx(2.0 / 3.0));
  CHECK(oc.tnr == Catch::Approx(1.0 / 2.0));
  CHECK(oc.ppv == Catch::Approx(2.0 / 3.0));
  CHECK(oc.npv == Catch::Approx(1.0 / 2.0));
}

TEST_CASE("confusion metrics leave empty classes as NaN") {
  SECTION("no positives in truth") {
    const auto oc = confusion_metrics(vec({0, 1}), vec({0, 0}));
    CHECK(std::isnan(oc.tpr));
    CHECK(oc.tnr == Catch::Approx(0.5));
  }
  SECTION("no negatives in truth") {
    const auto oc = confusion_metrics(vec({1, 0}), vec({1, 1}));
    CHECK(std::isnan(oc.tnr));
    CHECK(oc.tpr == Catch::Approx(0.5));
  }
  SECTION("mismatched lengths are rejected") {
    CHECK_THROWS_AS(confusion_metrics(vec({1}), vec({1, 0})), std::invalid_argument);
  }
}

TEST_CASE("perfect and inverted decisions") {
  const auto truth = vec({1, 0, 1, 0});
  auto oc = confusion_metrics(truth, truth);
  CHECK(oc.tpr == 1.0);
  CHECK(oc.tnr == 1.0);
  oc = confusion_metrics(vec({0, 1, 0, 1}), truth);
  CHECK(oc.tpr == 0.0);
  CHECK(oc.tnr == 0.0);
}

TEST_CASE("per-coefficient mse matches a direct computation") {
  Matrix est(2, 2), truth(2, 2);
  est << 1.0, 2.0, 3.0, 4.0;
  truth << 1.5, 2.0, 2.0, 6.0;
  const Vector mse = average_mse(est, truth);
  // column 0: (0.25 + 1)/2; column 1: (0 + 4)/2
  CHECK(mse[0] == Catch::Approx(0.625));
  CHECK(mse[1] == Catch::Approx(2.0));
  CHECK_THROWS_AS(average_mse(est, Matrix::Zero(1, 2)), std::invalid_argument);
}

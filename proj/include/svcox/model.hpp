#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "svcox/common.hpp"

namespace svcox {

struct PriorConfig {
  double a0 = 25.0;        // gamma shape on the slab decay
  double b0 = 50.0;        // gamma rate
  double beta_pi_a = 0.5;
  double beta_pi_b = 0.5;
  double nugget = 1e-6;

  void validate() const {
    if (!(a0 > 0) || !(b0 > 0) || !(beta_pi_a > 0) || !(beta_pi_b > 0) || !(nugget >= 0))
      throw std::invalid_argument("PriorConfig: parameters must be positive (nugget >= 0)");
  }
};

struct ChainConfig {
  int n_iter = 50000;
  int burn_in = 40000;
  int thin = 10;
  std::uint64_t seed = 0;
  int n_chains = 1;
  double mh_step = 0.3;  // random-walk scale on log gamma0

  int retained_per_chain() const { return (n_iter - burn_in) / thin; }

  void validate() const {
    if (n_iter <= 0 || burn_in < 0 || burn_in >= n_iter || thin < 1 || n_chains < 1 ||
        !(mh_step > 0))
      throw std::invalid_argument("ChainConfig: need burn_in < n_iter, thin >= 1, mh_step > 0");
  }
};

// Full MCMC state. gamma_k = c_k * gamma0_k is derived, never stored.
struct ModelState {
  Eigen::MatrixXd beta;    // n x p, beta_k(s_i)
  double tau2 = 1.0;
  Eigen::VectorXd lambda2; // p
  Eigen::VectorXd nu;      // p, auxiliary for lambda
  double xi = 1.0;         // auxiliary for tau
  Eigen::VectorXd gamma0;  // p, slab decay values (alive even when c_k = 0)
  Eigen::VectorXi c;       // p, 0 = spike (spatially static), 1 = slab
  Eigen::VectorXd pi;      // p, in (0,1)

  int n_sites() const { return static_cast<int>(beta.rows()); }
  int n_pred() const { return static_cast<int>(beta.cols()); }

  double gamma(int k) const { return c[k] == 1 ? gamma0[k] : 0.0; }

  bool positivity_ok() const {
    if (!(tau2 > 0) || !(xi > 0)) return false;
    for (int k = 0; k < n_pred(); ++k) {
      if (!(lambda2[k] > 0) || !(nu[k] > 0) || !(gamma0[k] > 0)) return false;
      if (!(pi[k] > 0) || !(pi[k] < 1)) return false;
      if (c[k] != 0 && c[k] != 1) return false;
    }
    return true;
  }
};

// Retained draws of the monitored quantities (beta, lambda, c, plus tau
// for diagnostics), flattened across chains.
struct PosteriorDraws {
  int n_sites = 0;
  int n_pred = 0;
  std::vector<int> chain;                 // per draw
  std::vector<int> iteration;             // per draw, 1-based sweep index
  std::vector<Eigen::MatrixXd> beta;      // per draw, n x p
  std::vector<Eigen::VectorXd> lambda;    // per draw, p (sqrt of lambda2)
  std::vector<Eigen::VectorXi> c;         // per draw, p
  std::vector<double> tau;                // per draw

  int size() const { return static_cast<int>(tau.size()); }
};

struct PosteriorSummary {
  Eigen::MatrixXd beta_mean;     // n x p
  Eigen::VectorXd lambda_mean;   // p
  Eigen::VectorXd c_mean;        // p, posterior P(gamma_k != 0)
  double tau_mean = 0.0;
  std::map<std::string, double> ess;          // monitored scalars
  Eigen::MatrixXd beta_q025, beta_q50, beta_q975;  // n x p each
};

}  // namespace svcox

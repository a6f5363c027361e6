#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlmi/dataset.hpp"

namespace mlmi {

enum class OutcomeModel { RandomIntercept, RandomSlope };

std::string to_string(OutcomeModel m);
OutcomeModel outcome_model_from_string(std::string_view s);

// Fixed effects and variance components of the generating outcome equation.
// Defaults give three active and three null coefficients at each level.
struct Coefficients {
  double intercept = 0.3;
  std::vector<double> beta_level1{0.5, 1.0, 1.5, 0.0, 0.0, 0.0};
  std::vector<double> beta_level2{0.5, 1.0, 1.5, 0.0, 0.0, 0.0};
  double sd_random_intercept = 1.0;
  double sd_random_slope1 = 1.0;  // on the first level-1 covariate
  double sd_random_slope2 = 1.0;  // on the second
  double sd_residual = 1.0;
};

struct GenConfig {
  int n_clusters = 25;
  int total_n = 1000;  // must be divisible by n_clusters
  int n_level1 = 6;
  int n_level2 = 6;
  double icc_lo = 0.1;
  double icc_hi = 0.5;
  OutcomeModel model = OutcomeModel::RandomIntercept;
  Coefficients coefs;
  std::uint64_t seed = 0;

  int cluster_size() const { return total_n / n_clusters; }
  void validate() const;
};

// Raw two-level draws, one inner vector per variable (n_level1 + n_level2 of
// them), each of length total_n: v_ij = b_j + w_ij with b_j ~ N(0, rho_v),
// w_ij ~ N(0, 1 - rho_v) and rho_v ~ U(icc_lo, icc_hi). Exposed so tests can
// check the intraclass correlation before aggregation.
std::vector<std::vector<double>> gen_raw_covariates(const GenConfig& cfg);

// Covariate frame: columns X1..Xk at level 1 and L1..Lk at level 2, the
// latter formed by replacing raw draws with their cluster means. Rows are
// grouped by cluster, labels 1..n_clusters.
Dataset gen_covariates(const GenConfig& cfg);

// Appends the outcome column Y to a covariate frame according to cfg.model.
Dataset gen_outcome(const Dataset& covariates, const GenConfig& cfg);

Dataset gen_dataset(const GenConfig& cfg);

// True values of the pooled coefficients ("intercept", X1.., L1..) used
// when scoring estimates against the generating model.
std::vector<std::pair<std::string, double>> true_coefficients(const GenConfig& cfg);

}  // namespace mlmi

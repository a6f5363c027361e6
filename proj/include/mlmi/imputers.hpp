#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mlmi/dataset.hpp"
#include "mlmi/rng.hpp"
#include "mlmi/trees.hpp"

namespace mlmi {

// The seven imputation strategies compared by the study harness.
enum class Method {
  Ce2Level,       // two-level chained equations (Gibbs + level-2 matching)
  Rf,             // chained random forests, raw predictions
  RfPmm,          // chained random forests + predictive mean matching
  RfDummies,      // rf on a cluster-dummy frame
  RfPmmDummies,   // rf_pmm on a cluster-dummy frame
  Boost,          // chained boosted trees (+ matching, always)
  BoostDummies,   // boost on a cluster-dummy frame
};

std::string to_string(Method m);
Method method_from_string(std::string_view s);
const std::vector<Method>& all_methods();

struct ImputeParams {
  int m = 5;  // completed datasets per run

  int rf_maxiter = 10;  // chained-forest sweeps
  int rf_pmm_k = 5;     // donor pool; 0 writes raw forest predictions

  int boost_maxit = 5;  // chained-boosting sweeps
  int boost_pmm_k = 5;  // donor pool (always > 0)

  int ce_maxit = 10;          // Gibbs sweeps per chain
  int ce_pmm_k = 5;           // cluster-level donor pool
  double ce_prior_eps = 1e-3; // inverse-gamma(eps, eps) variance priors

  bool use_outcome = true;  // include the outcome among predictors

  ForestParams forest;
  BoostParams boost;

  std::uint64_t seed = 0;

  void validate() const;
};

// m completed copies of one incomplete source frame.
struct ImputationSet {
  Dataset source;
  std::string engine;
  ImputeParams params;
  std::vector<Dataset> completed;
};

// Replaces every masked cell's payload by its column's observed mean; the
// missingness mask is kept so originally-missing cells stay identifiable.
Dataset initial_fill(const Dataset& ds);

// Predictive mean matching: for each missing-row prediction, pick uniformly
// among the k observed rows whose predictions are nearest (ties broken toward
// the lower index) and return the donor's observed value. k larger than the
// donor pool is clamped.
std::vector<double> pmm_match(const std::vector<double>& pred_missing,
                              const std::vector<double>& pred_obs,
                              const std::vector<double>& y_obs, int k,
                              Rng& rng);

// Chained random-forest imputation (rf / rf_pmm depending on rf_pmm_k).
ImputationSet impute_chained_rf(const Dataset& ds, const ImputeParams& params,
                                Rng& rng);

// Chained gradient-boosting imputation with matching always on.
ImputationSet impute_boosted(const Dataset& ds, const ImputeParams& params,
                             Rng& rng);

// Two-level chained equations: Bayesian random-intercept Gibbs draws for
// individual-level targets, cluster-level regression plus matching for
// cluster-level targets.
ImputationSet impute_ce_2level(const Dataset& ds, const ImputeParams& params,
                               Rng& rng);

// Cluster-dummy adaptation: append dummies, run the base engine (one of Rf,
// RfPmm, Boost), drop the dummies, and re-aggregate cluster-level columns.
ImputationSet with_dummies(Method base_engine, const Dataset& ds,
                           const ImputeParams& params, Rng& rng);

// Dispatch by method name; forces rf_pmm_k to 0 for the raw-forest variants.
ImputationSet run_method(Method method, const Dataset& ds, ImputeParams params,
                         Rng& rng);

// Directory layout: imp_1.csv .. imp_m.csv, source.csv, manifest.txt.
void save_imputation_set(const ImputationSet& set, const std::string& dir);
ImputationSet load_imputation_set(const std::string& dir);

}  // namespace mlmi

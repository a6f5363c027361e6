#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mlmi/dataset.hpp"

namespace mlmi {

// Restricted-likelihood fit of a two-level linear mixed model. The fixed part
// is always intercept + every level-1 column + every level-2 column, in
// dataset order; the random part distinguishes the two fitters below.
struct FitResult {
  bool converged = true;
  std::vector<std::string> coef_names;
  std::vector<double> estimates;
  std::vector<double> std_errors;
  // Reference degrees of freedom per coefficient for complete-data Wald
  // tests: n - #fixed effects for individual-level terms, J - #cluster-level
  // design columns for cluster-level terms.
  std::vector<double> complete_df;
  double sigma2_e = 0.0;
  // Random-effect variances: {intercept} for the random-intercept model,
  // {intercept, slope 1, slope 2} for the random-slope model.
  std::vector<double> tau2;
  int n_obs = 0;
  int n_clusters = 0;
  int n_fixed = 0;
  double criterion = 0.0;  // profiled -2 restricted log-likelihood, up to a constant

  int coef_index(const std::string& name) const;
};

struct WaldTest {
  double estimate = 0.0;
  double std_error = 0.0;
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

struct PooledCoef {
  std::string name;
  double estimate = 0.0;  // mean of per-imputation estimates
  double within = 0.0;    // mean squared standard error
  double between = 0.0;   // sample variance of estimates
  double total = 0.0;     // within + (1 + 1/m) * between
  double df = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

struct PooledResult {
  int m = 0;
  double alpha = 0.05;
  std::vector<PooledCoef> coefs;

  const PooledCoef& coef(const std::string& name) const;
};

struct CoefficientMetrics {
  std::string name;
  double true_value = 0.0;
  double rejection_rate = 0.0;
  double bias = 0.0;
  double relative_bias = 0.0;  // bias / true value; plain bias when true = 0
  double mc_se = 0.0;          // sqrt(r (1 - r) / R) for the rejection rate
  int n_reps = 0;
};

// Random-intercept model: y = X beta + u_j + e, u_j ~ N(0, tau^2) iid per
// cluster. One-dimensional profile over theta = tau^2 / sigma^2_e solved by
// golden-section search on log(theta + 1e-8) for theta in [1e-8, 1e3] to
// tolerance 1e-8.
FitResult fit_lmm_ri(const Dataset& ds);

// Random intercept plus independent random slopes on the named level-1
// columns (diagonal covariance). The three variance ratios are profiled and
// optimized on the log scale by Nelder-Mead started at ratios all 0.1,
// converged when the simplex diameter falls below 1e-6, capped at 2000
// objective evaluations; hitting the cap flags the fit as non-converged.
FitResult fit_lmm_rs(const Dataset& ds,
                     const std::vector<std::string>& slope_cols = {"X1", "X2"});

// As fit_lmm_rs but with the optimizer started at explicit variance ratios
// (one per random effect, all > 0); fit_lmm_rs uses ratios all 0.1.
FitResult fit_lmm_rs_started(const Dataset& ds,
                             const std::vector<double>& start_ratios,
                             const std::vector<std::string>& slope_cols = {
                                 "X1", "X2"});

// Diagnostic surfaces behind the two fitters: the profiled -2 restricted
// log-likelihood (constants dropped) at fixed variance ratios, comparable
// with FitResult::criterion. Ratios are clamped into [1e-8, 1e6].
double reml_criterion_ri(const Dataset& ds, double theta);
double reml_criterion_rs(const Dataset& ds, const std::vector<double>& ratios,
                         const std::vector<std::string>& slope_cols = {"X1",
                                                                       "X2"});

// t statistic, reference df, and two-sided p for one coefficient.
WaldTest wald(const FitResult& fr, const std::string& coef);

// Rubin's rules across m >= 2 aligned fits with Barnard-Rubin adjusted df.
PooledResult pool_rubin(const std::vector<FitResult>& fits, double alpha = 0.05);

// Monte Carlo summary over replications for the named true coefficients.
std::vector<CoefficientMetrics> evaluate_metrics(
    const std::vector<PooledResult>& pooled,
    const std::vector<std::pair<std::string, double>>& truth);

}  // namespace mlmi

#include "mlmi/imputers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <utility>

#include "mlmi/config.hpp"
#include "mlmi/errors.hpp"
#include "mlmi/stats.hpp"

namespace mlmi {

namespace {

constexpr std::uint64_t kImputationTag = 0x696d70ull;  // stream per completion

// Target columns in the pinned visit order: ascending count of masked cells,
// ties toward the lower column index.
std::vector<int> target_columns(const Dataset& ds) {
  std::vector<int> t;
  for (int c = 0; c < ds.n_cols(); ++c)
    if (ds.missing_count(c) > 0) t.push_back(c);
  std::stable_sort(t.begin(), t.end(), [&](int a, int b) {
    return ds.missing_count(a) < ds.missing_count(b);
  });
  return t;
}

std::vector<int> predictor_columns(const Dataset& ds, int target,
                                   bool use_outcome) {
  std::vector<int> p;
  for (int c = 0; c < ds.n_cols(); ++c) {
    if (c == target) continue;
    if (!use_outcome && ds.role(c) == ColumnRole::Outcome) continue;
    p.push_back(c);
  }
  if (p.empty()) throw PreconditionError("imputation target has no predictors");
  return p;
}

FeatureMatrix gather_features(const Dataset& ds, const std::vector<int>& cols) {
  FeatureMatrix X;
  X.reserve(cols.size());
  for (int c : cols) X.push_back(ds.column(c).values);
  return X;
}

void split_rows(const Dataset& ds, int c, std::vector<int>& obs,
                std::vector<int>& mis) {
  obs.clear();
  mis.clear();
  for (int r = 0; r < ds.n_rows(); ++r)
    (ds.observed(r, c) ? obs : mis).push_back(r);
}

// Marks every cell observed, turning a chained working frame into a
// completed dataset.
void finalize(Dataset& ds) {
  for (int c = 0; c < ds.n_cols(); ++c)
    for (int r = 0; r < ds.n_rows(); ++r)
      if (!ds.observed(r, c)) ds.set_cell(r, c, ds.raw(r, c));
}

// One chained sweep step for the tree engines: fit on the target's observed
// rows against all predictors' current payloads, predict the originally
// missing rows, optionally match, and write the fills.
void tree_column_step(Dataset& work, int c, const std::vector<int>& preds,
                      const ImputeParams& params, bool boosted, int pmm_k,
                      Rng& rng) {
  const FeatureMatrix X = gather_features(work, preds);
  const std::vector<double>& y = work.column(c).values;
  std::vector<int> rows_obs, rows_mis;
  split_rows(work, c, rows_obs, rows_mis);

  std::vector<double> pred_mis, pred_obs;
  if (boosted) {
    const BoostedModel model = fit_boosted(X, y, rows_obs, params.boost, rng);
    pred_mis = predict(model, X, rows_mis);
    if (pmm_k > 0) pred_obs = predict(model, X, rows_obs);
  } else {
    const Forest model = fit_forest(X, y, rows_obs, params.forest, rng);
    pred_mis = predict(model, X, rows_mis);
    if (pmm_k > 0) pred_obs = predict(model, X, rows_obs);
  }

  if (pmm_k > 0) {
    std::vector<double> y_obs(rows_obs.size());
    for (std::size_t i = 0; i < rows_obs.size(); ++i)
      y_obs[i] = work.value(rows_obs[i], c);
    pred_mis = pmm_match(pred_mis, pred_obs, y_obs, pmm_k, rng);
  }
  for (std::size_t i = 0; i < rows_mis.size(); ++i)
    work.fill_cell(rows_mis[i], c, pred_mis[i]);
}

// ---------------------------------------------------------------------------
// Two-level chained equations internals
// ---------------------------------------------------------------------------

struct GibbsState {
  Eigen::VectorXd u;  // cluster intercept deviations
  double sigma2 = 1.0;
  double tau2 = 1.0;
};

Eigen::VectorXd draw_coefs(const Eigen::LLT<Eigen::MatrixXd>& llt,
                           const Eigen::VectorXd& mean, double sigma, Rng& rng) {
  Eigen::VectorXd z(mean.size());
  for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
  // beta = mean + sigma * L^-T z draws from N(mean, sigma^2 (X'X)^-1).
  return mean + sigma * llt.matrixU().solve(z);
}

// One Gibbs scan of the Bayesian random-intercept regression for an
// individual-level target, followed by posterior-predictive fills.
void ce_level1_step(Dataset& work, int c, const std::vector<int>& preds,
                    GibbsState& st, const ImputeParams& params, Rng& rng) {
  const int n = work.n_rows();
  const int J = work.n_clusters();
  const int p = 1 + static_cast<int>(preds.size());
  const double eps = params.ce_prior_eps;
  const std::vector<int>& cluster_of = work.cluster_index();

  Eigen::MatrixXd X(n, p);
  X.col(0).setOnes();
  for (std::size_t k = 0; k < preds.size(); ++k)
    for (int r = 0; r < n; ++r)
      X(r, static_cast<int>(k) + 1) = work.raw(r, preds[k]);

  std::vector<int> rows_obs, rows_mis;
  split_rows(work, c, rows_obs, rows_mis);
  const int n_o = static_cast<int>(rows_obs.size());
  if (n_o <= p)
    throw FitError("too few observed rows for the level-1 imputation model");

  Eigen::MatrixXd Xo(n_o, p);
  Eigen::VectorXd yo(n_o);
  for (int i = 0; i < n_o; ++i) {
    Xo.row(i) = X.row(rows_obs[i]);
    yo(i) = work.value(rows_obs[i], c);
  }

  if (st.u.size() == 0) st.u = Eigen::VectorXd::Zero(J);

  // beta | u, sigma2
  Eigen::VectorXd adj = yo;
  for (int i = 0; i < n_o; ++i) adj(i) -= st.u(cluster_of[rows_obs[i]]);
  const Eigen::MatrixXd XtX = Xo.transpose() * Xo;
  Eigen::LLT<Eigen::MatrixXd> llt(XtX);
  if (llt.info() != Eigen::Success)
    throw FitError("level-1 imputation design is singular");
  const Eigen::VectorXd beta_hat = llt.solve(Xo.transpose() * adj);
  const Eigen::VectorXd beta =
      draw_coefs(llt, beta_hat, std::sqrt(st.sigma2), rng);

  // u | beta, sigma2, tau2 (clusters without observed rows draw the prior)
  Eigen::VectorXd resid = yo - Xo * beta;
  Eigen::VectorXd cl_sum = Eigen::VectorXd::Zero(J);
  Eigen::VectorXd cl_n = Eigen::VectorXd::Zero(J);
  for (int i = 0; i < n_o; ++i) {
    const int j = cluster_of[rows_obs[i]];
    cl_sum(j) += resid(i);
    cl_n(j) += 1.0;
  }
  for (int j = 0; j < J; ++j) {
    const double prec = cl_n(j) / st.sigma2 + 1.0 / st.tau2;
    const double mean = (cl_sum(j) / st.sigma2) / prec;
    st.u(j) = mean + rng.normal() / std::sqrt(prec);
  }

  // sigma2 | beta, u and tau2 | u
  double ssr = 0.0;
  for (int i = 0; i < n_o; ++i) {
    const double e = resid(i) - st.u(cluster_of[rows_obs[i]]);
    ssr += e * e;
  }
  st.sigma2 = rng.inverse_gamma(eps + 0.5 * n_o, eps + 0.5 * ssr);
  st.tau2 = rng.inverse_gamma(eps + 0.5 * J, eps + 0.5 * st.u.squaredNorm());

  // posterior predictive for the originally missing rows
  const double sigma = std::sqrt(st.sigma2);
  for (int r : rows_mis) {
    const double mu = X.row(r).dot(beta) + st.u(cluster_of[r]);
    work.fill_cell(r, c, mu + sigma * rng.normal());
  }
}

// Cluster-level table for a level-2 target: response per cluster plus
// predictors built from cluster means of individual-level columns (and the
// outcome when enabled) and the payloads of the other cluster-level columns.
struct ClusterTable {
  Eigen::MatrixXd W;           // J x p, intercept first
  std::vector<double> value;   // response where known
  std::vector<char> known;     // response availability per cluster
};

ClusterTable build_cluster_table(const Dataset& work, int c, bool use_outcome) {
  const int J = work.n_clusters();
  const auto& rows_of = work.cluster_rows();
  std::vector<int> pred_cols;
  for (int k = 0; k < work.n_cols(); ++k) {
    if (k == c) continue;
    const ColumnRole role = work.role(k);
    if (role == ColumnRole::Outcome && !use_outcome) continue;
    if (role == ColumnRole::ClusterDummy) continue;
    pred_cols.push_back(k);
  }
  ClusterTable t;
  t.W.resize(J, 1 + static_cast<int>(pred_cols.size()));
  t.W.col(0).setOnes();
  t.value.assign(J, 0.0);
  t.known.assign(J, 0);
  for (int j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < pred_cols.size(); ++k) {
      double s = 0.0;
      for (int r : rows_of[j]) s += work.raw(r, pred_cols[k]);
      t.W(j, static_cast<int>(k) + 1) = s / rows_of[j].size();
    }
    for (int r : rows_of[j])
      if (work.observed(r, c)) {
        t.value[j] = work.value(r, c);
        t.known[j] = 1;
        break;
      }
  }
  return t;
}

// One chained step for a cluster-level target: Bayesian linear regression on
// the clusters whose value is known, matching for the fully masked clusters,
// constancy restoration for partially observed ones.
void ce_level2_step(Dataset& work, int c, const ImputeParams& params,
                    Rng& rng) {
  const int J = work.n_clusters();
  const auto& rows_of = work.cluster_rows();
  ClusterTable t = build_cluster_table(work, c, params.use_outcome);

  std::vector<int> obs_cl, mis_cl;
  for (int j = 0; j < J; ++j) (t.known[j] ? obs_cl : mis_cl).push_back(j);
  if (obs_cl.empty())
    throw PreconditionError("cluster-level target has no observed cluster");

  if (!mis_cl.empty()) {
    // Drop to intercept + the 3 predictors most correlated with the response
    // when the known clusters cannot support the full regression.
    Eigen::MatrixXd W = t.W;
    if (static_cast<int>(obs_cl.size()) < W.cols() + 2) {
      std::vector<double> resp;
      for (int j : obs_cl) resp.push_back(t.value[j]);
      std::vector<std::pair<double, int>> score;  // (-|corr|, column)
      for (int k = 1; k < t.W.cols(); ++k) {
        std::vector<double> col;
        for (int j : obs_cl) col.push_back(t.W(j, k));
        double rho = pearson_correlation(col, resp);
        if (!std::isfinite(rho)) rho = 0.0;
        score.emplace_back(-std::fabs(rho), k);
      }
      std::sort(score.begin(), score.end());
      const int keep = std::min<int>(
          3, std::max<int>(0, static_cast<int>(obs_cl.size()) - 2));
      W.resize(J, 1 + keep);
      W.col(0).setOnes();
      for (int k = 0; k < keep; ++k) W.col(k + 1) = t.W.col(score[k].second);
    }
    const int p = static_cast<int>(W.cols());
    const int n_o = static_cast<int>(obs_cl.size());

    Eigen::MatrixXd Wo(n_o, p);
    Eigen::VectorXd yo(n_o);
    for (int i = 0; i < n_o; ++i) {
      Wo.row(i) = W.row(obs_cl[i]);
      yo(i) = t.value[obs_cl[i]];
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Wo.transpose() * Wo);
    if (llt.info() != Eigen::Success)
      throw FitError("cluster-level imputation design is singular");
    const Eigen::VectorXd gamma_hat = llt.solve(Wo.transpose() * yo);
    const double ssr = (yo - Wo * gamma_hat).squaredNorm();
    const double eps = params.ce_prior_eps;
    const double sigma2 = rng.inverse_gamma(
        eps + 0.5 * std::max(0, n_o - p), eps + 0.5 * ssr);
    const Eigen::VectorXd gamma =
        draw_coefs(llt, gamma_hat, std::sqrt(sigma2), rng);

    std::vector<double> pred_obs(n_o);
    for (int i = 0; i < n_o; ++i) pred_obs[i] = Wo.row(i).dot(gamma);
    std::vector<double> pred_mis, y_obs;
    for (int j : mis_cl) pred_mis.push_back(W.row(j).dot(gamma));
    for (int j : obs_cl) y_obs.push_back(t.value[j]);
    const std::vector<double> donated =
        pmm_match(pred_mis, pred_obs, y_obs, params.ce_pmm_k, rng);
    for (std::size_t i = 0; i < mis_cl.size(); ++i)
      for (int r : rows_of[mis_cl[i]])
        if (!work.observed(r, c)) work.fill_cell(r, c, donated[i]);
  }

  // Partially observed clusters keep their own value on the masked rows.
  for (int j : obs_cl)
    for (int r : rows_of[j])
      if (!work.observed(r, c)) work.fill_cell(r, c, t.value[j]);
}

std::vector<std::pair<std::string, std::string>> manifest_pairs(
    const ImputationSet& set) {
  const ImputeParams& p = set.params;
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("engine", set.engine);
  kv.emplace_back("m", std::to_string(p.m));
  kv.emplace_back("seed", std::to_string(p.seed));
  kv.emplace_back("rf_maxiter", std::to_string(p.rf_maxiter));
  kv.emplace_back("rf_pmm_k", std::to_string(p.rf_pmm_k));
  kv.emplace_back("boost_maxit", std::to_string(p.boost_maxit));
  kv.emplace_back("boost_pmm_k", std::to_string(p.boost_pmm_k));
  kv.emplace_back("ce_maxit", std::to_string(p.ce_maxit));
  kv.emplace_back("ce_pmm_k", std::to_string(p.ce_pmm_k));
  kv.emplace_back("ce_prior_eps", format_double(p.ce_prior_eps));
  kv.emplace_back("use_outcome", p.use_outcome ? "true" : "false");
  kv.emplace_back("num_trees", std::to_string(p.forest.num_trees));
  kv.emplace_back("sample_fraction", format_double(p.forest.sample_fraction));
  kv.emplace_back("replace", p.forest.replace ? "true" : "false");
  kv.emplace_back("forest_min_leaf", std::to_string(p.forest.tree.min_leaf));
  kv.emplace_back("forest_mtry", std::to_string(p.forest.tree.mtry));
  kv.emplace_back("forest_max_depth", std::to_string(p.forest.tree.max_depth));
  kv.emplace_back("n_rounds", std::to_string(p.boost.n_rounds));
  kv.emplace_back("eta", format_double(p.boost.eta));
  kv.emplace_back("lambda", format_double(p.boost.lambda));
  kv.emplace_back("gamma", format_double(p.boost.gamma));
  kv.emplace_back("boost_max_depth", std::to_string(p.boost.max_depth));
  kv.emplace_back("boost_min_leaf", std::to_string(p.boost.min_leaf));
  kv.emplace_back("subsample", format_double(p.boost.subsample));
  for (int c = 0; c < set.source.n_cols(); ++c)
    kv.emplace_back("column." + set.source.name(c),
                    to_string(set.source.role(c)));
  return kv;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::Ce2Level: return "ce_2level";
    case Method::Rf: return "rf";
    case Method::RfPmm: return "rf_pmm";
    case Method::RfDummies: return "rf_dummies";
    case Method::RfPmmDummies: return "rf_pmm_dummies";
    case Method::Boost: return "boost";
    case Method::BoostDummies: return "boost_dummies";
  }
  throw PreconditionError("unknown method");
}

Method method_from_string(std::string_view s) {
  for (Method m : all_methods())
    if (to_string(m) == s) return m;
  throw ConfigError("unknown imputation method: " + std::string(s));
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> ms{
      Method::Ce2Level,     Method::Rf,    Method::RfPmm,
      Method::RfDummies,    Method::RfPmmDummies,
      Method::Boost,        Method::BoostDummies};
  return ms;
}

void ImputeParams::validate() const {
  if (m < 2) throw ConfigError("m must be at least 2");
  if (rf_maxiter < 1 || boost_maxit < 1 || ce_maxit < 1)
    throw ConfigError("sweep counts must be at least 1");
  if (rf_pmm_k < 0) throw ConfigError("rf_pmm_k must be >= 0");
  if (boost_pmm_k < 1) throw ConfigError("boost_pmm_k must be >= 1");
  if (ce_pmm_k < 1) throw ConfigError("ce_pmm_k must be >= 1");
  if (!(ce_prior_eps > 0.0)) throw ConfigError("ce_prior_eps must be > 0");
}

Dataset initial_fill(const Dataset& ds) {
  Dataset out = ds;
  for (int c = 0; c < out.n_cols(); ++c) {
    const int miss = out.missing_count(c);
    if (miss == 0) continue;
    if (miss == out.n_rows())
      throw PreconditionError("column is entirely missing: " + out.name(c));
    double sum = 0.0;
    for (int r = 0; r < out.n_rows(); ++r)
      if (out.observed(r, c)) sum += out.value(r, c);
    const double mean = sum / (out.n_rows() - miss);
    for (int r = 0; r < out.n_rows(); ++r)
      if (!out.observed(r, c)) out.fill_cell(r, c, mean);
  }
  return out;
}

std::vector<double> pmm_match(const std::vector<double>& pred_missing,
                              const std::vector<double>& pred_obs,
                              const std::vector<double>& y_obs, int k,
                              Rng& rng) {
  if (pred_obs.size() != y_obs.size())
    throw PreconditionError("matching needs one value per observed prediction");
  if (pred_obs.empty()) throw PreconditionError("matching needs donors");
  if (k < 1) throw PreconditionError("matching needs k >= 1");
  const int n = static_cast<int>(pred_obs.size());
  k = std::min(k, n);

  // Donor predictions sorted by value; equal values keep ascending original
  // indices, which makes the lower-index tie-break a plain stable sort.
  std::vector<int> ord(n);
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(),
                   [&](int a, int b) { return pred_obs[a] < pred_obs[b]; });
  std::vector<double> sorted(n);
  for (int i = 0; i < n; ++i) sorted[i] = pred_obs[ord[i]];

  std::vector<double> out(pred_missing.size());
  std::vector<std::pair<std::pair<double, int>, int>> cand;  // ((dist, idx), pos)
  for (std::size_t q = 0; q < pred_missing.size(); ++q) {
    const double target = pred_missing[q];
    const int hi0 = static_cast<int>(
        std::lower_bound(sorted.begin(), sorted.end(), target) -
        sorted.begin());
    int lo = hi0 - 1, hi = hi0;
    cand.clear();
    // Collect k nearest by walking outward, then widen to every donor tied
    // with the current k-th distance so the index tie-break is exact.
    while (static_cast<int>(cand.size()) < k) {
      const double dl = lo >= 0 ? target - sorted[lo] : 1.0 / 0.0;
      const double dh = hi < n ? sorted[hi] - target : 1.0 / 0.0;
      if (dl <= dh) {
        cand.push_back({{dl, ord[lo]}, lo});
        --lo;
      } else {
        cand.push_back({{dh, ord[hi]}, hi});
        ++hi;
      }
    }
    double dk = 0.0;
    for (const auto& e : cand) dk = std::max(dk, e.first.first);
    while (lo >= 0 && target - sorted[lo] == dk) {
      cand.push_back({{target - sorted[lo], ord[lo]}, lo});
      --lo;
    }
    while (hi < n && sorted[hi] - target == dk) {
      cand.push_back({{sorted[hi] - target, ord[hi]}, hi});
      ++hi;
    }
    std::sort(cand.begin(), cand.end());
    const int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    out[q] = y_obs[cand[pick].first.second];
  }
  return out;
}

ImputationSet impute_chained_rf(const Dataset& ds, const ImputeParams& params,
                                Rng& rng) {
  params.validate();
  ImputationSet out{ds, params.rf_pmm_k > 0 ? "rf_pmm" : "rf", params, {}};
  const std::vector<int> targets = target_columns(ds);
  const std::uint64_t base = rng.next();
  for (int i = 0; i < params.m; ++i) {
    Rng irng(derive_seed(base, {kImputationTag, static_cast<std::uint64_t>(i)}));
    Dataset work = initial_fill(ds);
    for (int sweep = 0; sweep < params.rf_maxiter; ++sweep)
      for (int c : targets)
        tree_column_step(work, c, predictor_columns(ds, c, params.use_outcome),
                         params, /*boosted=*/false, params.rf_pmm_k, irng);
    finalize(work);
    out.completed.push_back(std::move(work));
  }
  return out;
}

ImputationSet impute_boosted(const Dataset& ds, const ImputeParams& params,
                             Rng& rng) {
  params.validate();
  ImputationSet out{ds, "boost", params, {}};
  const std::vector<int> targets = target_columns(ds);
  const std::uint64_t base = rng.next();
  for (int i = 0; i < params.m; ++i) {
    Rng irng(derive_seed(base, {kImputationTag, static_cast<std::uint64_t>(i)}));
    Dataset work = ds;
    // Start from uniformly resampled observed values of each target column.
    for (int c : targets) {
      std::vector<double> obs;
      for (int r = 0; r < work.n_rows(); ++r)
        if (work.observed(r, c)) obs.push_back(work.value(r, c));
      if (obs.empty())
        throw PreconditionError("column is entirely missing: " + work.name(c));
      for (int r = 0; r < work.n_rows(); ++r)
        if (!work.observed(r, c))
          work.fill_cell(r, c, obs[irng.below(obs.size())]);
    }
    for (int sweep = 0; sweep < params.boost_maxit; ++sweep)
      for (int c : targets)
        tree_column_step(work, c, predictor_columns(ds, c, params.use_outcome),
                         params, /*boosted=*/true, params.boost_pmm_k, irng);
    finalize(work);
    out.completed.push_back(std::move(work));
  }
  return out;
}

ImputationSet impute_ce_2level(const Dataset& ds, const ImputeParams& params,
                               Rng& rng) {
  params.validate();
  ImputationSet out{ds, "ce_2level", params, {}};
  const std::vector<int> targets = target_columns(ds);
  for (int c : targets)
    if (ds.role(c) == ColumnRole::ClusterDummy)
      throw PreconditionError("dummy columns cannot be imputation targets");
  const std::uint64_t base = rng.next();
  for (int i = 0; i < params.m; ++i) {
    Rng irng(derive_seed(base, {kImputationTag, static_cast<std::uint64_t>(i)}));
    Dataset work = initial_fill(ds);
    std::map<int, GibbsState> state;
    for (int sweep = 0; sweep < params.ce_maxit; ++sweep)
      for (int c : targets) {
        if (ds.role(c) == ColumnRole::Level2)
          ce_level2_step(work, c, params, irng);
        else
          ce_level1_step(work, c,
                         predictor_columns(ds, c, params.use_outcome),
                         state[c], params, irng);
      }
    finalize(work);
    out.completed.push_back(std::move(work));
  }
  return out;
}

ImputationSet with_dummies(Method base_engine, const Dataset& ds,
                           const ImputeParams& params, Rng& rng) {
  if (base_engine != Method::Rf && base_engine != Method::RfPmm &&
      base_engine != Method::Boost)
    throw PreconditionError(
        "dummy adaptation applies to the chained tree engines only");
  const Dataset with = add_cluster_dummies(ds);
  ImputationSet inner = base_engine == Method::Boost
                            ? impute_boosted(with, params, rng)
                            : impute_chained_rf(with, params, rng);
  ImputationSet out{ds, inner.engine + "_dummies", params, {}};
  for (Dataset& comp : inner.completed) {
    for (int c = comp.n_cols() - 1; c >= 0; --c)
      if (comp.role(c) == ColumnRole::ClusterDummy) comp.drop_column(c);
    Dataset agg = aggregate_level2(comp);
    // Re-aggregation averages within clusters, which can nudge an observed
    // value by rounding; observed cells must pass through untouched.
    for (int c = 0; c < ds.n_cols(); ++c)
      for (int r = 0; r < ds.n_rows(); ++r)
        if (ds.observed(r, c)) agg.set_cell(r, c, ds.value(r, c));
    out.completed.push_back(std::move(agg));
  }
  return out;
}

ImputationSet run_method(Method method, const Dataset& ds, ImputeParams params,
                         Rng& rng) {
  switch (method) {
    case Method::Ce2Level:
      return impute_ce_2level(ds, params, rng);
    case Method::Rf:
      params.rf_pmm_k = 0;
      return impute_chained_rf(ds, params, rng);
    case Method::RfPmm:
      if (params.rf_pmm_k < 1)
        throw ConfigError("rf_pmm requires a positive donor pool");
      return impute_chained_rf(ds, params, rng);
    case Method::RfDummies:
      params.rf_pmm_k = 0;
      return with_dummies(Method::Rf, ds, params, rng);
    case Method::RfPmmDummies:
      if (params.rf_pmm_k < 1)
        throw ConfigError("rf_pmm_dummies requires a positive donor pool");
      return with_dummies(Method::RfPmm, ds, params, rng);
    case Method::Boost:
      return impute_boosted(ds, params, rng);
    case Method::BoostDummies:
      return with_dummies(Method::Boost, ds, params, rng);
  }
  throw PreconditionError("unknown method");
}

void save_imputation_set(const ImputationSet& set, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir);
  write_csv(set.source, (std::filesystem::path(dir) / "source.csv").string());
  for (std::size_t i = 0; i < set.completed.size(); ++i)
    write_csv(set.completed[i],
              (std::filesystem::path(dir) / ("imp_" + std::to_string(i + 1) + ".csv"))
                  .string());
  write_key_value_file((std::filesystem::path(dir) / "manifest.txt").string(),
                       manifest_pairs(set));
}

ImputationSet load_imputation_set(const std::string& dir) {
  const KeyValueFile kv =
      read_key_value_file((std::filesystem::path(dir) / "manifest.txt").string());
  std::map<std::string, ColumnRole> schema;
  for (const std::string& key : kv.order)
    if (key.rfind("column.", 0) == 0)
      schema[key.substr(7)] = column_role_from_string(kv.get(key));

  ImputationSet set;
  set.engine = kv.get("engine");
  ImputeParams& p = set.params;
  p.m = parse_int_value("m", kv.get("m"));
  p.seed = static_cast<std::uint64_t>(
      std::stoull(kv.get("seed")));
  p.rf_maxiter = parse_int_value("rf_maxiter", kv.get("rf_maxiter"));
  p.rf_pmm_k = parse_int_value("rf_pmm_k", kv.get("rf_pmm_k"));
  p.boost_maxit = parse_int_value("boost_maxit", kv.get("boost_maxit"));
  p.boost_pmm_k = parse_int_value("boost_pmm_k", kv.get("boost_pmm_k"));
  p.ce_maxit = parse_int_value("ce_maxit", kv.get("ce_maxit"));
  p.ce_pmm_k = parse_int_value("ce_pmm_k", kv.get("ce_pmm_k"));
  p.ce_prior_eps = parse_double_value("ce_prior_eps", kv.get("ce_prior_eps"));
  p.use_outcome = parse_bool_value("use_outcome", kv.get("use_outcome"));
  p.forest.num_trees = parse_int_value("num_trees", kv.get("num_trees"));
  p.forest.sample_fraction =
      parse_double_value("sample_fraction", kv.get("sample_fraction"));
  p.forest.replace = parse_bool_value("replace", kv.get("replace"));
  p.forest.tree.min_leaf =
      parse_int_value("forest_min_leaf", kv.get("forest_min_leaf"));
  p.forest.tree.mtry = parse_int_value("forest_mtry", kv.get("forest_mtry"));
  p.forest.tree.max_depth =
      parse_int_value("forest_max_depth", kv.get("forest_max_depth"));
  p.boost.n_rounds = parse_int_value("n_rounds", kv.get("n_rounds"));
  p.boost.eta = parse_double_value("eta", kv.get("eta"));
  p.boost.lambda = parse_double_value("lambda", kv.get("lambda"));
  p.boost.gamma = parse_double_value("gamma", kv.get("gamma"));
  p.boost.max_depth = parse_int_value("boost_max_depth", kv.get("boost_max_depth"));
  p.boost.min_leaf = parse_int_value("boost_min_leaf", kv.get("boost_min_leaf"));
  p.boost.subsample = parse_double_value("subsample", kv.get("subsample"));

  set.source = read_csv((std::filesystem::path(dir) / "source.csv").string(), schema);
  for (int i = 1; i <= p.m; ++i) {
    Dataset comp = read_csv(
        (std::filesystem::path(dir) / ("imp_" + std::to_string(i) + ".csv")).string(),
        schema);
    if (!comp.complete())
      throw SchemaError("completed dataset " + std::to_string(i) +
                        " has missing cells");
    set.completed.push_back(std::move(comp));
  }
  return set;
}

}  // namespace mlmi

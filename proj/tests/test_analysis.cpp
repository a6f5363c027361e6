#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "mlmi/analysis.hpp"
#include "mlmi/datagen.hpp"
#include "mlmi/dataset.hpp"
#include "mlmi/errors.hpp"
#include "mlmi/rng.hpp"

using namespace mlmi;

namespace {

// Dense normal-equation least squares via Gauss-Jordan, independent of the
// library's linear algebra.
std::vector<double> ols(const std::vector<std::vector<double>>& cols,
                        const std::vector<double>& y) {
  const int p = static_cast<int>(cols.size());
  const int n = static_cast<int>(y.size());
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j)
      for (int r = 0; r < n; ++r) a[i][j] += cols[i][r] * cols[j][r];
    for (int r = 0; r < n; ++r) a[i][p] += cols[i][r] * y[r];
  }
  for (int i = 0; i < p; ++i) {
    int piv = i;
    for (int k = i + 1; k < p; ++k)
      if (std::fabs(a[k][i]) > std::fabs(a[piv][i])) piv = k;
    std::swap(a[i], a[piv]);
    for (int k = 0; k < p; ++k) {
      if (k == i) continue;
      const double f = a[k][i] / a[i][i];
      for (int j = i; j <= p; ++j) a[k][j] -= f * a[i][j];
    }
  }
  std::vector<double> beta(p);
  for (int i = 0; i < p; ++i) beta[i] = a[i][p] / a[i][i];
  return beta;
}

// Balanced one-way layout: J clusters of size K, y_ij = mu + u_j + e_ij.
Dataset one_way(int J, int K, double mu, double sd_u, double sd_e,
                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> ids;
  std::vector<double> y;
  for (int j = 0; j < J; ++j) {
    const double uj = rng.normal(0.0, sd_u);
    for (int i = 0; i < K; ++i) {
      ids.push_back(j + 1);
      y.push_back(mu + uj + rng.normal(0.0, sd_e));
    }
  }
  std::vector<Column> cols;
  cols.emplace_back("Y", ColumnRole::Outcome, std::move(y));
  return Dataset(std::move(ids), std::move(cols));
}

// Flattens the fixed design (intercept + level-1 + level-2 columns) of a
// complete dataset for the independent OLS solver.
std::vector<std::vector<double>> design_cols(const Dataset& ds) {
  std::vector<std::vector<double>> cols;
  cols.emplace_back(ds.n_rows(), 1.0);
  for (auto role : {ColumnRole::Level1, ColumnRole::Level2})
    for (int c : ds.columns_with_role(role)) {
      std::vector<double> col(ds.n_rows());
      for (int r = 0; r < ds.n_rows(); ++r) col[r] = ds.value(r, c);
      cols.push_back(std::move(col));
    }
  return cols;
}

std::vector<double> outcome_vec(const Dataset& ds) {
  std::vector<double> y(ds.n_rows());
  for (int r = 0; r < ds.n_rows(); ++r) y[r] = ds.value(r, ds.outcome_col());
  return y;
}

FitResult toy_fit(std::vector<double> est, std::vector<double> se, double df) {
  FitResult fr;
  fr.converged = true;
  for (std::size_t i = 0; i < est.size(); ++i)
    fr.coef_names.push_back("b" + std::to_string(i));
  fr.estimates = std::move(est);
  fr.std_errors = std::move(se);
  fr.complete_df.assign(fr.estimates.size(), df);
  return fr;
}

}  // namespace

TEST_CASE("balanced one-way layout matches the closed-form variance split") {
  for (const auto& [sd_u, seed] : {std::pair{1.0, 101ull}, {0.0, 202ull}}) {
    const int J = 20, K = 15;
    const Dataset ds = one_way(J, K, 2.0, sd_u, 1.3, seed);
    const FitResult fr = fit_lmm_ri(ds);
    REQUIRE(fr.converged);
    REQUIRE(fr.coef_names == std::vector<std::string>{"intercept"});

    const std::vector<double> y = outcome_vec(ds);
    double grand = 0.0;
    for (double v : y) grand += v;
    grand /= y.size();
    std::vector<double> cm(J, 0.0);
    for (int j = 0; j < J; ++j) {
      for (int i = 0; i < K; ++i) cm[j] += y[j * K + i];
      cm[j] /= K;
    }
    double ssw = 0.0, ssb = 0.0;
    for (int j = 0; j < J; ++j) {
      for (int i = 0; i < K; ++i)
        ssw += (y[j * K + i] - cm[j]) * (y[j * K + i] - cm[j]);
      ssb += K * (cm[j] - grand) * (cm[j] - grand);
    }
    const double msw = ssw / (J * (K - 1.0));
    const double msb = ssb / (J - 1.0);
    const double tau2_ref = std::max(0.0, (msb - msw) / K);

    CHECK(fr.sigma2_e == doctest::Approx(msw).epsilon(1e-6));
    CHECK(fr.tau2[0] == doctest::Approx(tau2_ref).epsilon(1e-6).scale(1.0));
    CHECK(fr.estimates[0] == doctest::Approx(grand).epsilon(1e-9));
  }
}

TEST_CASE("random-intercept optimum beats a 2000-point grid") {
  GenConfig cfg;
  cfg.seed = 42;
  const Dataset ds = gen_dataset(cfg);
  const FitResult fr = fit_lmm_ri(ds);
  REQUIRE(fr.coef_names.size() == 13);
  for (double se : fr.std_errors) CHECK(se > 0.0);
  CHECK(fr.estimates.size() == fr.std_errors.size());
  CHECK(fr.complete_df.size() == fr.coef_names.size());

  const double a = std::log(2e-8);
  const double b = std::log(1e3 + 1e-8);
  double best = 1e308;
  for (int i = 0; i < 2000; ++i) {
    const double u = a + (b - a) * i / 1999.0;
    best = std::min(best, reml_criterion_ri(ds, std::exp(u) - 1e-8));
  }
  CHECK(fr.criterion <= best + 1e-6);
}

TEST_CASE("zero random-intercept variance collapses toward least squares") {
  GenConfig cfg;
  cfg.seed = 7;
  cfg.coefs.sd_random_intercept = 0.0;
  const Dataset ds = gen_dataset(cfg);
  const FitResult fr = fit_lmm_ri(ds);
  CHECK(fr.tau2[0] / fr.sigma2_e < 0.01);
  const std::vector<double> beta = ols(design_cols(ds), outcome_vec(ds));
  for (std::size_t i = 0; i < beta.size(); ++i)
    CHECK(std::fabs(fr.estimates[i] - beta[i]) <= 2.0 * fr.std_errors[i]);
}

TEST_CASE("a single cluster reduces to ordinary regression") {
  Rng rng(31);
  const int n = 60;
  std::vector<int> ids(n, 1);
  std::vector<double> x1(n), x2(n), y(n);
  for (int i = 0; i < n; ++i) {
    x1[i] = rng.normal();
    x2[i] = rng.normal();
    y[i] = 0.5 + 1.5 * x1[i] - 0.7 * x2[i] + rng.normal();
  }
  std::vector<Column> cols;
  cols.emplace_back("X1", ColumnRole::Level1, std::move(x1));
  cols.emplace_back("X2", ColumnRole::Level1, std::move(x2));
  cols.emplace_back("Y", ColumnRole::Outcome, std::move(y));
  const Dataset ds(std::move(ids), std::move(cols));

  const FitResult fr = fit_lmm_ri(ds);
  CHECK(fr.tau2[0] / fr.sigma2_e <= 1e-6);
  const std::vector<double> beta = ols(design_cols(ds), outcome_vec(ds));
  for (std::size_t i = 0; i < beta.size(); ++i)
    CHECK(std::fabs(fr.estimates[i] - beta[i]) <= 1e-8);
}

TEST_CASE("collinear fixed effects are rejected by name") {
  Rng rng(5);
  const int n = 40;
  std::vector<int> ids;
  std::vector<double> x1(n), x2(n), y(n);
  for (int i = 0; i < n; ++i) {
    ids.push_back(i % 4 + 1);
    x1[i] = rng.normal();
    x2[i] = 2.0 * x1[i];
    y[i] = rng.normal();
  }
  std::vector<Column> cols;
  cols.emplace_back("X1", ColumnRole::Level1, std::move(x1));
  cols.emplace_back("X2", ColumnRole::Level1, std::move(x2));
  cols.emplace_back("Y", ColumnRole::Outcome, std::move(y));
  const Dataset ds(std::move(ids), std::move(cols));
  try {
    fit_lmm_ri(ds);
    FAIL("expected a fit error");
  } catch (const FitError& e) {
    CHECK(std::string(e.what()).find("X2") != std::string::npos);
  }
}

TEST_CASE("random-slope fit degenerates to the random-intercept fit") {
  GenConfig cfg;
  cfg.seed = 11;  // random-intercept generating model: slope variances zero
  const Dataset ds = gen_dataset(cfg);
  const FitResult ri = fit_lmm_ri(ds);
  const FitResult rs = fit_lmm_rs(ds);
  REQUIRE(rs.converged);
  REQUIRE(rs.coef_names == ri.coef_names);
  for (std::size_t i = 0; i < ri.estimates.size(); ++i)
    CHECK(std::fabs(rs.estimates[i] - ri.estimates[i]) <=
          2.0 * ri.std_errors[i]);
}

TEST_CASE("random-slope optimum survives 200 random restarts") {
  GenConfig cfg;
  cfg.n_clusters = 20;
  cfg.total_n = 600;
  cfg.model = OutcomeModel::RandomSlope;
  cfg.seed = 5;
  const Dataset ds = gen_dataset(cfg);
  const FitResult fr = fit_lmm_rs(ds);
  REQUIRE(fr.converged);

  Rng rng(123);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> start(3);
    for (auto& s : start)
      s = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
    const FitResult alt = fit_lmm_rs_started(ds, start);
    CHECK(fr.criterion <= alt.criterion + 1e-4);
  }
}

TEST_CASE("random-slope gradient vanishes at an interior optimum") {
  GenConfig cfg;
  cfg.n_clusters = 20;
  cfg.total_n = 600;
  cfg.model = OutcomeModel::RandomSlope;
  cfg.seed = 17;
  const Dataset ds = gen_dataset(cfg);
  const FitResult fr = fit_lmm_rs(ds);
  REQUIRE(fr.converged);
  std::vector<double> psi(3);
  bool interior = true;
  for (int k = 0; k < 3; ++k) {
    psi[k] = fr.tau2[k] / fr.sigma2_e;
    interior = interior && psi[k] > 1e-6 && psi[k] < 1e4;
  }
  REQUIRE(interior);

  const double h = 1e-4;
  double norm2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    auto up = psi, dn = psi;
    up[k] = std::exp(std::log(psi[k]) + h);
    dn[k] = std::exp(std::log(psi[k]) - h);
    const double g =
        (reml_criterion_rs(ds, up) - reml_criterion_rs(ds, dn)) / (2.0 * h);
    norm2 += g * g;
  }
  CHECK(std::sqrt(norm2) < 1e-3);
}

TEST_CASE("wald test arithmetic and reference df") {
  const FitResult zero = toy_fit({0.0}, {1.0}, 100.0);
  const WaldTest w0 = wald(zero, "b0");
  CHECK(w0.statistic == 0.0);
  CHECK(w0.p_value == doctest::Approx(1.0).epsilon(1e-12));

  const FitResult crit = toy_fit({1.96}, {1.0}, 1e6);
  CHECK(std::fabs(wald(crit, "b0").p_value - 0.05) <= 0.002);

  CHECK_THROWS_AS(wald(zero, "nope"), PreconditionError);

  GenConfig cfg;
  cfg.seed = 3;
  const FitResult fr = fit_lmm_ri(gen_dataset(cfg));
  CHECK(wald(fr, "X1").df == 987.0);
  CHECK(wald(fr, "X4").df == 987.0);
  CHECK(wald(fr, "intercept").df == 987.0);
  CHECK(wald(fr, "L1").df == 18.0);
  CHECK(wald(fr, "L6").df == 18.0);
}

TEST_CASE("pooling reproduces the two-fit hand computation") {
  const std::vector<FitResult> fits{toy_fit({1.0}, {0.2}, 100.0),
                                    toy_fit({1.2}, {0.2}, 100.0)};
  const PooledResult pr = pool_rubin(fits);
  const PooledCoef& pc = pr.coef("b0");
  CHECK(std::fabs(pc.estimate - 1.1) <= 1e-12);
  CHECK(std::fabs(pc.within - 0.04) <= 1e-12);
  CHECK(std::fabs(pc.between - 0.02) <= 1e-12);
  CHECK(std::fabs(pc.total - 0.07) <= 1e-12);
  CHECK(pc.statistic == doctest::Approx(1.1 / std::sqrt(0.07)).epsilon(1e-12));

  const double gamma = 1.5 * 0.02 / 0.07;
  const double nu_obs = 101.0 / 103.0 * 100.0 * (1.0 - gamma);
  const double nu = 1.0 / (gamma * gamma / 1.0 + 1.0 / nu_obs);
  CHECK(pc.df == doctest::Approx(nu).epsilon(1e-12));
}

TEST_CASE("pooling identical fits gives zero between-variance") {
  const FitResult one = toy_fit({0.8}, {0.3}, 50.0);
  const PooledResult pr = pool_rubin({one, one, one});
  const PooledCoef& pc = pr.coef("b0");
  CHECK(pc.between <= 1e-30);
  CHECK(pc.total == doctest::Approx(pc.within).epsilon(1e-15));
  CHECK(pc.df == doctest::Approx(51.0 / 53.0 * 50.0).epsilon(1e-12));
  CHECK(pc.reject == (wald(one, "b0").p_value < 0.05));
}

TEST_CASE("pooling is scale-equivariant and order-invariant") {
  Rng rng(77);
  std::vector<FitResult> fits, scaled;
  const double c = 3.7;
  for (int k = 0; k < 5; ++k) {
    const double est = rng.normal(1.0, 0.5);
    const double se = 0.1 + rng.uniform();
    fits.push_back(toy_fit({est}, {se}, 200.0));
    scaled.push_back(toy_fit({c * est}, {c * se}, 200.0));
  }
  const PooledResult base = pool_rubin(fits);
  const PooledResult sc = pool_rubin(scaled);
  CHECK(sc.coefs[0].estimate ==
        doctest::Approx(c * base.coefs[0].estimate).epsilon(1e-12));
  CHECK(std::sqrt(sc.coefs[0].total) ==
        doctest::Approx(c * std::sqrt(base.coefs[0].total)).epsilon(1e-12));
  CHECK(sc.coefs[0].statistic ==
        doctest::Approx(base.coefs[0].statistic).epsilon(1e-12));
  CHECK(sc.coefs[0].reject == base.coefs[0].reject);

  std::vector<FitResult> rev(fits.rbegin(), fits.rend());
  const PooledResult pr = pool_rubin(rev);
  CHECK(pr.coefs[0].estimate ==
        doctest::Approx(base.coefs[0].estimate).epsilon(1e-12));
  CHECK(pr.coefs[0].p_value ==
        doctest::Approx(base.coefs[0].p_value).epsilon(1e-12));
}

TEST_CASE("pooling rejects misaligned or insufficient input") {
  FitResult a = toy_fit({1.0}, {0.1}, 10.0);
  CHECK_THROWS_AS(pool_rubin({a}), PreconditionError);
  FitResult b = toy_fit({1.0}, {0.1}, 10.0);
  b.coef_names[0] = "other";
  CHECK_THROWS_AS(pool_rubin({a, b}), PreconditionError);
}

TEST_CASE("metric arithmetic over replications") {
  const auto pooled_with = [](double est, bool reject) {
    PooledResult pr;
    pr.m = 5;
    PooledCoef pc;
    pc.name = "b";
    pc.estimate = est;
    pc.reject = reject;
    pr.coefs.push_back(pc);
    return pr;
  };
  const std::vector<PooledResult> pooled{
      pooled_with(1.40, true), pooled_with(1.45, true), pooled_with(1.40, true),
      pooled_with(1.45, false)};
  const auto ms = evaluate_metrics(pooled, {{"b", 1.5}});
  REQUIRE(ms.size() == 1);
  CHECK(ms[0].rejection_rate == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(ms[0].bias == doctest::Approx(-0.075).epsilon(1e-12));
  CHECK(ms[0].relative_bias == doctest::Approx(-0.05).epsilon(1e-12));
  CHECK(ms[0].mc_se ==
        doctest::Approx(std::sqrt(0.75 * 0.25 / 4.0)).epsilon(1e-12));

  const auto null_ms = evaluate_metrics(pooled, {{"b", 0.0}});
  CHECK(null_ms[0].relative_bias == doctest::Approx(null_ms[0].bias).epsilon(1e-15));
  CHECK_THROWS_AS(evaluate_metrics({}, {{"b", 0.0}}), PreconditionError);
}

TEST_CASE("null coefficients are estimated without bias on complete data") {
  const std::vector<std::string> nulls{"X4", "X5", "X6", "L4", "L5", "L6"};
  const int reps = 500;
  std::vector<std::vector<double>> draws(nulls.size());
  for (int r = 0; r < reps; ++r) {
    GenConfig cfg;
    cfg.seed = 90000 + r;
    const FitResult fr = fit_lmm_ri(gen_dataset(cfg));
    for (std::size_t i = 0; i < nulls.size(); ++i)
      draws[i].push_back(fr.estimates[fr.coef_index(nulls[i])]);
  }
  for (std::size_t i = 0; i < nulls.size(); ++i) {
    double m = 0.0;
    for (double v : draws[i]) m += v;
    m /= reps;
    double s2 = 0.0;
    for (double v : draws[i]) s2 += (v - m) * (v - m);
    s2 /= (reps - 1);
    // Mean of estimates should sit within Monte Carlo noise of zero. The
    // individual-level terms are tight; the cluster-level terms carry the
    // sampling noise of only 25 cluster means per replication.
    CHECK(std::fabs(m) <= 3.5 * std::sqrt(s2 / reps));
    if (nulls[i][0] == 'X') CHECK(std::fabs(m) < 0.01);
  }
}

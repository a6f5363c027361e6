#include "mlmi/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "mlmi/errors.hpp"
#include "mlmi/stats.hpp"

namespace mlmi {

namespace {

constexpr double kBadCriterion = 1e300;
constexpr double kThetaFloor = 1e-8;
constexpr double kLogRatioMin = -18.420680743952367;  // log(1e-8)
constexpr double kLogRatioMax = 13.815510557964274;   // log(1e6)

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;
  std::vector<double> df;
  int n = 0;
  int J = 0;
  int p = 0;
};

std::string join_names(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += v[i];
  }
  return s;
}

Design build_design(const Dataset& ds) {
  if (!ds.complete())
    throw PreconditionError("analysis requires a complete dataset");
  const int yc = ds.outcome_col();
  if (yc < 0) throw SchemaError("analysis requires an outcome column");
  if (!ds.columns_with_role(ColumnRole::ClusterDummy).empty())
    throw PreconditionError(
        "cluster dummy columns must be removed before analysis");
  const auto l1 = ds.columns_with_role(ColumnRole::Level1);
  const auto l2 = ds.columns_with_role(ColumnRole::Level2);

  Design d;
  d.n = ds.n_rows();
  d.J = ds.n_clusters();
  d.p = 1 + static_cast<int>(l1.size() + l2.size());
  if (d.n <= d.p)
    throw FitError("fixed-effects design has at least as many columns as rows");
  const double df1 = static_cast<double>(d.n - d.p);
  const double df2 = static_cast<double>(d.J) - (1.0 + static_cast<double>(l2.size()));

  d.X.resize(d.n, d.p);
  d.y.resize(d.n);
  d.X.col(0).setOnes();
  d.names.push_back("intercept");
  d.df.push_back(df1);
  int k = 1;
  for (int c : l1) {
    for (int r = 0; r < d.n; ++r) d.X(r, k) = ds.value(r, c);
    d.names.push_back(ds.name(c));
    d.df.push_back(df1);
    ++k;
  }
  for (int c : l2) {
    for (int r = 0; r < d.n; ++r) d.X(r, k) = ds.value(r, c);
    d.names.push_back(ds.name(c));
    d.df.push_back(df2);
    ++k;
  }
  for (int r = 0; r < d.n; ++r) d.y(r) = ds.value(r, yc);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
  if (qr.rank() < d.p) {
    // Blame the later columns: scan left to right, keeping each column that
    // raises the rank of the prefix.
    std::vector<std::string> bad;
    Eigen::MatrixXd sub(d.n, d.p);
    int kept = 0;
    for (int c = 0; c < d.p; ++c) {
      sub.col(kept) = d.X.col(c);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> q2(sub.leftCols(kept + 1));
      if (q2.rank() == kept + 1)
        ++kept;
      else
        bad.push_back(d.names[c]);
    }
    throw FitError("singular fixed-effects design; collinear columns: " +
                   join_names(bad));
  }
  return d;
}

struct ProfilePoint {
  bool ok = false;
  double criterion = kBadCriterion;
  double rss = 0.0;
  Eigen::VectorXd beta;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;  // factorization of the weighted normal matrix
};

// Shared tail of both profiles: solve the weighted normal equations and
// assemble the profiled -2 restricted log-likelihood (constants dropped).
void finish_point(ProfilePoint& pt, const Eigen::MatrixXd& A,
                  const Eigen::VectorXd& b, double yWy, double log_det_v0,
                  int n, int p) {
  pt.ldlt.compute(A);
  if (pt.ldlt.info() != Eigen::Success) return;
  double log_det_a = 0.0;
  for (int i = 0; i < A.rows(); ++i) {
    const double di = pt.ldlt.vectorD()(i);
    if (!(di > 0.0)) return;
    log_det_a += std::log(di);
  }
  pt.beta = pt.ldlt.solve(b);
  pt.rss = yWy - pt.beta.dot(b);
  if (!(pt.rss > 0.0) || !std::isfinite(pt.rss)) return;
  pt.criterion = (n - p) * std::log(pt.rss) + log_det_v0 + log_det_a;
  pt.ok = std::isfinite(pt.criterion);
  if (!pt.ok) pt.criterion = kBadCriterion;
}

// Random-intercept profile in theta = tau^2 / sigma^2_e. The marginal
// precision is sigma^-2 (I - sum_j c_j 1_j 1_j^T) with c_j = theta/(1+n_j
// theta), so cluster row sums are sufficient statistics.
struct RiProfile {
  Eigen::MatrixXd XtX;
  Eigen::VectorXd Xty;
  double yty = 0.0;
  std::vector<Eigen::VectorXd> s;  // per-cluster column sums of X
  std::vector<double> t;           // per-cluster sums of y
  std::vector<double> nj;
  int n = 0, p = 0;

  explicit RiProfile(const Design& d, const std::vector<std::vector<int>>& rows)
      : n(d.n), p(d.p) {
    XtX = d.X.transpose() * d.X;
    Xty = d.X.transpose() * d.y;
    yty = d.y.squaredNorm();
    for (const auto& rr : rows) {
      Eigen::VectorXd sj = Eigen::VectorXd::Zero(p);
      double tj = 0.0;
      for (int r : rr) {
        sj += d.X.row(r).transpose();
        tj += d.y(r);
      }
      s.push_back(std::move(sj));
      t.push_back(tj);
      nj.push_back(static_cast<double>(rr.size()));
    }
  }

  ProfilePoint at(double theta) const {
    Eigen::MatrixXd A = XtX;
    Eigen::VectorXd b = Xty;
    double yWy = yty;
    double log_det_v0 = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double c = theta / (1.0 + nj[j] * theta);
      A.noalias() -= c * (s[j] * s[j].transpose());
      b.noalias() -= c * t[j] * s[j];
      yWy -= c * t[j] * t[j];
      log_det_v0 += std::log1p(nj[j] * theta);
    }
    ProfilePoint pt;
    finish_point(pt, A, b, yWy, log_det_v0, n, p);
    return pt;
  }
};

// Random-slope profile in psi = (tau_0^2, tau_1^2, tau_2^2) / sigma^2_e with
// diagonal random-effect covariance. Per cluster, Woodbury gives
// V0_j^-1 = I - Z_j S M_j^-1 S Z_j^T with S = diag(sqrt(psi)) and
// M_j = I + S Z_j^T Z_j S, and log|V0_j| = log|M_j|.
struct RsProfile {
  Eigen::MatrixXd XtX;
  Eigen::VectorXd Xty;
  double yty = 0.0;
  std::vector<Eigen::MatrixXd> ZtZ;  // q x q
  std::vector<Eigen::MatrixXd> ZtX;  // q x p
  std::vector<Eigen::VectorXd> Zty;  // q
  int n = 0, p = 0, q = 0;

  RsProfile(const Design& d, const std::vector<std::vector<int>>& rows,
            const std::vector<int>& slope_design_cols)
      : n(d.n), p(d.p), q(1 + static_cast<int>(slope_design_cols.size())) {
    XtX = d.X.transpose() * d.X;
    Xty = d.X.transpose() * d.y;
    yty = d.y.squaredNorm();
    for (const auto& rr : rows) {
      const int m = static_cast<int>(rr.size());
      Eigen::MatrixXd Z(m, q);
      Eigen::MatrixXd Xj(m, p);
      Eigen::VectorXd yj(m);
      for (int i = 0; i < m; ++i) {
        Z(i, 0) = 1.0;
        for (int k = 0; k < q - 1; ++k) Z(i, k + 1) = d.X(rr[i], slope_design_cols[k]);
        Xj.row(i) = d.X.row(rr[i]);
        yj(i) = d.y(rr[i]);
      }
      ZtZ.push_back(Z.transpose() * Z);
      ZtX.push_back(Z.transpose() * Xj);
      Zty.push_back(Z.transpose() * yj);
    }
  }

  ProfilePoint at(const Eigen::VectorXd& psi) const {
    Eigen::MatrixXd A = XtX;
    Eigen::VectorXd b = Xty;
    double yWy = yty;
    double log_det_v0 = 0.0;
    const Eigen::VectorXd sq = psi.cwiseSqrt();
    ProfilePoint pt;
    for (std::size_t j = 0; j < ZtZ.size(); ++j) {
      Eigen::MatrixXd M = sq.asDiagonal() * ZtZ[j] * sq.asDiagonal();
      M.diagonal().array() += 1.0;
      Eigen::LLT<Eigen::MatrixXd> llt(M);
      if (llt.info() != Eigen::Success) return pt;
      for (int i = 0; i < q; ++i)
        log_det_v0 += 2.0 * std::log(llt.matrixLLT()(i, i));
      const Eigen::MatrixXd SZX = sq.asDiagonal() * ZtX[j];
      const Eigen::VectorXd SZy = sq.asDiagonal() * Zty[j];
      A.noalias() -= SZX.transpose() * llt.solve(SZX);
      b.noalias() -= SZX.transpose() * llt.solve(SZy);
      yWy -= SZy.dot(llt.solve(SZy));
    }
    finish_point(pt, A, b, yWy, log_det_v0, n, p);
    return pt;
  }
};

Eigen::VectorXd ratios_from_log(const Eigen::VectorXd& u) {
  Eigen::VectorXd psi(u.size());
  for (int i = 0; i < u.size(); ++i)
    psi(i) = std::exp(std::clamp(u(i), kLogRatioMin, kLogRatioMax));
  return psi;
}

struct NmOut {
  Eigen::VectorXd x;
  double f = kBadCriterion;
  bool converged = false;
};

// Nelder-Mead with the standard reflection/expansion/contraction/shrink
// coefficients (1, 2, 1/2, 1/2). Converged when every vertex lies within
// `tol` of the best vertex; gives up (converged = false) once `max_evals`
// objective evaluations are spent.
NmOut nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                  const Eigen::VectorXd& x0, double step, double tol,
                  int max_evals) {
  const int d = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> v(d + 1, x0);
  std::vector<double> fv(d + 1);
  int evals = 0;
  const auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };
  for (int i = 1; i <= d; ++i) v[i](i - 1) += step;
  for (int i = 0; i <= d; ++i) fv[i] = eval(v[i]);

  const auto order = [&]() {
    std::vector<int> idx(d + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return fv[a] < fv[b]; });
    std::vector<Eigen::VectorXd> v2(d + 1);
    std::vector<double> f2(d + 1);
    for (int i = 0; i <= d; ++i) {
      v2[i] = v[idx[i]];
      f2[i] = fv[idx[i]];
    }
    v.swap(v2);
    fv.swap(f2);
  };

  for (;;) {
    order();
    double diam = 0.0;
    for (int i = 1; i <= d; ++i) diam = std::max(diam, (v[i] - v[0]).norm());
    if (diam < tol) return {v[0], fv[0], true};
    if (evals >= max_evals) return {v[0], fv[0], false};

    Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) c += v[i];
    c /= static_cast<double>(d);

    const Eigen::VectorXd xr = c + (c - v[d]);
    const double fr = eval(xr);
    bool shrink = false;
    if (fr < fv[0]) {
      const Eigen::VectorXd xe = c + 2.0 * (c - v[d]);
      const double fe = eval(xe);
      if (fe < fr) {
        v[d] = xe;
        fv[d] = fe;
      } else {
        v[d] = xr;
        fv[d] = fr;
      }
    } else if (fr < fv[d - 1]) {
      v[d] = xr;
      fv[d] = fr;
    } else if (fr < fv[d]) {
      const Eigen::VectorXd xc = c + 0.5 * (xr - c);
      const double fc = eval(xc);
      if (fc <= fr) {
        v[d] = xc;
        fv[d] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Eigen::VectorXd xc = c + 0.5 * (v[d] - c);
      const double fc = eval(xc);
      if (fc < fv[d]) {
        v[d] = xc;
        fv[d] = fc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (int i = 1; i <= d; ++i) {
        v[i] = v[0] + 0.5 * (v[i] - v[0]);
        fv[i] = eval(v[i]);
      }
    }
  }
}

void fill_common(FitResult& fr, const Design& d, const ProfilePoint& pt) {
  fr.coef_names = d.names;
  fr.complete_df = d.df;
  fr.n_obs = d.n;
  fr.n_clusters = d.J;
  fr.n_fixed = d.p;
  fr.criterion = pt.criterion;
  fr.sigma2_e = pt.rss / static_cast<double>(d.n - d.p);
  fr.estimates.assign(pt.beta.data(), pt.beta.data() + d.p);
  const Eigen::MatrixXd cov =
      fr.sigma2_e * pt.ldlt.solve(Eigen::MatrixXd::Identity(d.p, d.p));
  fr.std_errors.resize(d.p);
  for (int i = 0; i < d.p; ++i) fr.std_errors[i] = std::sqrt(cov(i, i));
}

}  // namespace

int FitResult::coef_index(const std::string& name) const {
  for (std::size_t i = 0; i < coef_names.size(); ++i)
    if (coef_names[i] == name) return static_cast<int>(i);
  throw PreconditionError("unknown coefficient: " + name);
}

const PooledCoef& PooledResult::coef(const std::string& name) const {
  for (const auto& c : coefs)
    if (c.name == name) return c;
  throw PreconditionError("unknown coefficient: " + name);
}

FitResult fit_lmm_ri(const Dataset& ds) {
  const Design d = build_design(ds);
  const RiProfile prof(d, ds.cluster_rows());

  const auto crit = [&](double u) {
    const double theta = std::max(std::exp(u) - kThetaFloor, kThetaFloor);
    return prof.at(theta).criterion;
  };
  const double invphi = 0.6180339887498949;
  double a = std::log(kThetaFloor + kThetaFloor);
  double b = std::log(1e3 + kThetaFloor);
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = crit(x1);
  double f2 = crit(x2);
  while (b - a > 1e-8) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = crit(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = crit(x2);
    }
  }
  double theta = std::max(std::exp(0.5 * (a + b)) - kThetaFloor, kThetaFloor);
  ProfilePoint pt = prof.at(theta);
  // A flat profile (e.g. a single cluster) leaves theta unidentified; prefer
  // the parsimonious boundary when it loses essentially nothing.
  const ProfilePoint lo = prof.at(kThetaFloor);
  if (lo.ok && lo.criterion <= pt.criterion + 1e-7) {
    theta = kThetaFloor;
    pt = lo;
  }
  if (!pt.ok) throw FitError("random-intercept profile is degenerate");

  FitResult fr;
  fr.converged = true;
  fill_common(fr, d, pt);
  fr.tau2 = {theta * fr.sigma2_e};
  return fr;
}

namespace {

std::vector<int> resolve_slope_design_cols(const Dataset& ds, const Design& d,
                                           const std::vector<std::string>& slope_cols) {
  if (slope_cols.empty())
    throw PreconditionError("random-slope model needs at least one slope column");
  std::vector<int> slope_idx;
  for (const auto& nm : slope_cols) {
    const int c = ds.find_col(nm);
    if (c < 0 || ds.role(c) != ColumnRole::Level1)
      throw SchemaError("random-slope column is not an individual-level covariate: " + nm);
    // Position within the design matrix (intercept first, then level-1
    // columns in dataset order).
    const auto it = std::find(d.names.begin(), d.names.end(), nm);
    slope_idx.push_back(static_cast<int>(it - d.names.begin()));
  }
  return slope_idx;
}

}  // namespace

FitResult fit_lmm_rs(const Dataset& ds,
                     const std::vector<std::string>& slope_cols) {
  return fit_lmm_rs_started(
      ds, std::vector<double>(1 + slope_cols.size(), 0.1), slope_cols);
}

FitResult fit_lmm_rs_started(const Dataset& ds,
                             const std::vector<double>& start_ratios,
                             const std::vector<std::string>& slope_cols) {
  const Design d = build_design(ds);
  const std::vector<int> slope_idx =
      resolve_slope_design_cols(ds, d, slope_cols);
  const int q = 1 + static_cast<int>(slope_cols.size());
  if (static_cast<int>(start_ratios.size()) != q)
    throw PreconditionError("need one start ratio per random effect");
  for (double r : start_ratios)
    if (!(r > 0.0)) throw PreconditionError("start ratios must be positive");
  const RsProfile prof(d, ds.cluster_rows(), slope_idx);

  const auto crit = [&](const Eigen::VectorXd& u) {
    return prof.at(ratios_from_log(u)).criterion;
  };
  Eigen::VectorXd start(q);
  for (int i = 0; i < q; ++i) start(i) = std::log(start_ratios[i]);
  const NmOut nm = nelder_mead(crit, start, 1.0, 1e-6, 2000);

  const Eigen::VectorXd psi = ratios_from_log(nm.x);
  const ProfilePoint pt = prof.at(psi);
  if (!pt.ok) throw FitError("random-slope profile is degenerate");

  FitResult fr;
  fr.converged = nm.converged;
  fill_common(fr, d, pt);
  fr.tau2.resize(q);
  for (int i = 0; i < q; ++i) fr.tau2[i] = psi(i) * fr.sigma2_e;
  return fr;
}

double reml_criterion_ri(const Dataset& ds, double theta) {
  const Design d = build_design(ds);
  const RiProfile prof(d, ds.cluster_rows());
  return prof.at(std::clamp(theta, 1e-8, 1e6)).criterion;
}

double reml_criterion_rs(const Dataset& ds, const std::vector<double>& ratios,
                         const std::vector<std::string>& slope_cols) {
  const Design d = build_design(ds);
  const std::vector<int> slope_idx =
      resolve_slope_design_cols(ds, d, slope_cols);
  if (ratios.size() != 1 + slope_cols.size())
    throw PreconditionError("need one variance ratio per random effect");
  const RsProfile prof(d, ds.cluster_rows(), slope_idx);
  Eigen::VectorXd psi(static_cast<int>(ratios.size()));
  for (std::size_t i = 0; i < ratios.size(); ++i)
    psi(static_cast<int>(i)) = std::clamp(ratios[i], 1e-8, 1e6);
  return prof.at(psi).criterion;
}

WaldTest wald(const FitResult& fr, const std::string& coef) {
  const int i = fr.coef_index(coef);
  WaldTest w;
  w.estimate = fr.estimates[i];
  w.std_error = fr.std_errors[i];
  w.df = fr.complete_df[i];
  if (!(w.std_error > 0.0))
    throw FitError("nonpositive standard error for coefficient " + coef);
  if (!(w.df >= 1.0))
    throw FitError("reference df below 1 for coefficient " + coef);
  w.statistic = w.estimate / w.std_error;
  w.p_value = student_t_p_two_sided(w.statistic, w.df);
  return w;
}

PooledResult pool_rubin(const std::vector<FitResult>& fits, double alpha) {
  const int m = static_cast<int>(fits.size());
  if (m < 2) throw PreconditionError("pooling requires at least two fits");
  for (const auto& f : fits)
    if (f.coef_names != fits[0].coef_names)
      throw PreconditionError("pooling requires aligned coefficient names");

  PooledResult out;
  out.m = m;
  out.alpha = alpha;
  const int p = static_cast<int>(fits[0].coef_names.size());
  for (int i = 0; i < p; ++i) {
    PooledCoef pc;
    pc.name = fits[0].coef_names[i];
    std::vector<double> est(m);
    double w_sum = 0.0;
    for (int k = 0; k < m; ++k) {
      est[k] = fits[k].estimates[i];
      w_sum += fits[k].std_errors[i] * fits[k].std_errors[i];
    }
    pc.estimate = mean(est);
    pc.within = w_sum / m;
    pc.between = sample_variance(est);
    pc.total = pc.within + (1.0 + 1.0 / m) * pc.between;

    const double nu_com = fits[0].complete_df[i];
    double nu;
    const double gamma =
        pc.total > 0.0 ? (1.0 + 1.0 / m) * pc.between / pc.total : 0.0;
    const double nu_obs =
        (nu_com + 1.0) / (nu_com + 3.0) * nu_com * (1.0 - gamma);
    if (gamma > 0.0) {
      const double nu_m = (m - 1.0) / (gamma * gamma);
      nu = 1.0 / (1.0 / nu_m + 1.0 / nu_obs);
    } else {
      nu = nu_obs;
    }
    pc.df = std::max(nu, 1e-3);

    if (pc.total > 0.0) {
      pc.statistic = pc.estimate / std::sqrt(pc.total);
      pc.p_value = student_t_p_two_sided(pc.statistic, pc.df);
    } else {
      pc.statistic = 0.0;
      pc.p_value = pc.estimate == 0.0 ? 1.0 : 0.0;
    }
    pc.reject = pc.p_value < alpha;
    out.coefs.push_back(std::move(pc));
  }
  return out;
}

std::vector<CoefficientMetrics> evaluate_metrics(
    const std::vector<PooledResult>& pooled,
    const std::vector<std::pair<std::string, double>>& truth) {
  if (pooled.empty())
    throw PreconditionError("metrics need at least one replication");
  const int R = static_cast<int>(pooled.size());
  std::vector<CoefficientMetrics> out;
  for (const auto& [name, tv] : truth) {
    CoefficientMetrics cm;
    cm.name = name;
    cm.true_value = tv;
    cm.n_reps = R;
    double rejects = 0.0, est_sum = 0.0;
    for (const auto& pr : pooled) {
      const PooledCoef& pc = pr.coef(name);
      rejects += pc.reject ? 1.0 : 0.0;
      est_sum += pc.estimate;
    }
    cm.rejection_rate = rejects / R;
    cm.bias = est_sum / R - tv;
    cm.relative_bias = tv != 0.0 ? cm.bias / tv : cm.bias;
    cm.mc_se = std::sqrt(cm.rejection_rate * (1.0 - cm.rejection_rate) / R);
    out.push_back(std::move(cm));
  }
  return out;
}

}  // namespace mlmi

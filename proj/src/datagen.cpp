#include "mlmi/datagen.hpp"

#include <cmath>

#include "mlmi/rng.hpp"

namespace mlmi {

namespace {
// Stream tags so covariate and outcome draws never interleave.
constexpr std::uint64_t kCovariateStream = 1;
constexpr std::uint64_t kOutcomeStream = 2;
}  // namespace

std::string to_string(OutcomeModel m) {
  return m == OutcomeModel::RandomIntercept ? "ri" : "rs";
}

OutcomeModel outcome_model_from_string(std::string_view s) {
  if (s == "ri") return OutcomeModel::RandomIntercept;
  if (s == "rs") return OutcomeModel::RandomSlope;
  throw ConfigError("unknown outcome model '" + std::string(s) +
                    "' (expected ri or rs)");
}

void GenConfig::validate() const {
  if (n_clusters < 1) throw ConfigError("n_clusters must be positive");
  if (total_n < 1) throw ConfigError("total_n must be positive");
  if (total_n % n_clusters != 0)
    throw ConfigError("total_n (" + std::to_string(total_n) +
                      ") must be divisible by n_clusters (" +
                      std::to_string(n_clusters) + ")");
  if (n_level1 < 0 || n_level2 < 0)
    throw ConfigError("covariate counts must be non-negative");
  if (!(icc_lo >= 0.0 && icc_hi < 1.0 && icc_lo <= icc_hi))
    throw ConfigError("ICC range must satisfy 0 <= lo <= hi < 1");
  if (static_cast<int>(coefs.beta_level1.size()) != n_level1 ||
      static_cast<int>(coefs.beta_level2.size()) != n_level2)
    throw ConfigError("coefficient vectors must match covariate counts");
  if (coefs.sd_residual <= 0.0) throw ConfigError("sd_residual must be positive");
  if (model == OutcomeModel::RandomSlope && n_level1 < 2)
    throw ConfigError("random-slope model needs at least two level-1 covariates");
}

std::vector<std::vector<double>> gen_raw_covariates(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, {kCovariateStream}));
  const int n_vars = cfg.n_level1 + cfg.n_level2;
  const int J = cfg.n_clusters;
  const int per = cfg.cluster_size();
  std::vector<std::vector<double>> vars(n_vars);
  for (int v = 0; v < n_vars; ++v) {
    const double rho = rng.uniform(cfg.icc_lo, cfg.icc_hi);
    const double sd_between = std::sqrt(rho);
    const double sd_within = std::sqrt(1.0 - rho);
    auto& col = vars[v];
    col.reserve(cfg.total_n);
    for (int j = 0; j < J; ++j) {
      const double b = rng.normal(0.0, sd_between);
      for (int i = 0; i < per; ++i) col.push_back(b + rng.normal(0.0, sd_within));
    }
  }
  return vars;
}

Dataset gen_covariates(const GenConfig& cfg) {
  auto raw = gen_raw_covariates(cfg);
  const int per = cfg.cluster_size();

  std::vector<int> ids;
  ids.reserve(cfg.total_n);
  for (int j = 1; j <= cfg.n_clusters; ++j)
    for (int i = 0; i < per; ++i) ids.push_back(j);

  std::vector<Column> cols;
  cols.reserve(raw.size());
  for (int v = 0; v < cfg.n_level1; ++v)
    cols.emplace_back("X" + std::to_string(v + 1), ColumnRole::Level1,
                      std::move(raw[v]));
  for (int v = 0; v < cfg.n_level2; ++v) {
    // Aggregate the raw draws to their cluster mean so the variable is
    // constant within each cluster.
    auto& src = raw[cfg.n_level1 + v];
    std::vector<double> agg(cfg.total_n);
    for (int j = 0; j < cfg.n_clusters; ++j) {
      double s = 0.0;
      for (int i = 0; i < per; ++i) s += src[j * per + i];
      const double m = s / per;
      for (int i = 0; i < per; ++i) agg[j * per + i] = m;
    }
    cols.emplace_back("L" + std::to_string(v + 1), ColumnRole::Level2,
                      std::move(agg));
  }
  return Dataset(std::move(ids), std::move(cols));
}

Dataset gen_outcome(const Dataset& covariates, const GenConfig& cfg) {
  cfg.validate();
  if (covariates.find_col("Y") >= 0)
    throw SchemaError("covariate frame already has an outcome column");
  std::vector<int> xcols(cfg.n_level1), lcols(cfg.n_level2);
  for (int v = 0; v < cfg.n_level1; ++v)
    xcols[v] = covariates.col("X" + std::to_string(v + 1));
  for (int v = 0; v < cfg.n_level2; ++v)
    lcols[v] = covariates.col("L" + std::to_string(v + 1));

  Rng rng(derive_seed(cfg.seed, {kOutcomeStream}));
  const int J = covariates.n_clusters();
  const bool slopes = cfg.model == OutcomeModel::RandomSlope;
  std::vector<double> u0(J), u1(J, 0.0), u2(J, 0.0);
  for (int j = 0; j < J; ++j) {
    u0[j] = rng.normal(0.0, cfg.coefs.sd_random_intercept);
    if (slopes) {
      u1[j] = rng.normal(0.0, cfg.coefs.sd_random_slope1);
      u2[j] = rng.normal(0.0, cfg.coefs.sd_random_slope2);
    }
  }

  const int n = covariates.n_rows();
  std::vector<double> y(n);
  for (int r = 0; r < n; ++r) {
    const int j = covariates.cluster_index()[r];
    double mu = cfg.coefs.intercept + u0[j];
    for (int v = 0; v < cfg.n_level1; ++v)
      mu += cfg.coefs.beta_level1[v] * covariates.value(r, xcols[v]);
    for (int v = 0; v < cfg.n_level2; ++v)
      mu += cfg.coefs.beta_level2[v] * covariates.value(r, lcols[v]);
    if (slopes) {
      mu += u1[j] * covariates.value(r, xcols[0]);
      mu += u2[j] * covariates.value(r, xcols[1]);
    }
    y[r] = mu + rng.normal(0.0, cfg.coefs.sd_residual);
  }

  Dataset out = covariates;
  out.add_column(Column("Y", ColumnRole::Outcome, std::move(y)));
  return out;
}

Dataset gen_dataset(const GenConfig& cfg) {
  return gen_outcome(gen_covariates(cfg), cfg);
}

std::vector<std::pair<std::string, double>> true_coefficients(const GenConfig& cfg) {
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("intercept", cfg.coefs.intercept);
  for (int v = 0; v < cfg.n_level1; ++v)
    out.emplace_back("X" + std::to_string(v + 1), cfg.coefs.beta_level1[v]);
  for (int v = 0; v < cfg.n_level2; ++v)
    out.emplace_back("L" + std::to_string(v + 1), cfg.coefs.beta_level2[v]);
  return out;
}

}  // namespace mlmi

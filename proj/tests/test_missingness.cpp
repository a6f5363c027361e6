#include "mlmi/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "mlmi/datagen.hpp"
#include "mlmi/stats.hpp"

using mlmi::AmputeSpec;
using mlmi::Dataset;
using mlmi::GenConfig;
using mlmi::Mechanism;
using mlmi::Rng;

namespace {

Dataset demo_data(std::uint64_t seed) {
  GenConfig cfg;
  cfg.seed = seed;
  return gen_dataset(cfg);
}

bool cluster_aligned(const Dataset& ds, int c) {
  for (const auto& rows : ds.cluster_rows()) {
    const bool first = ds.observed(rows[0], c);
    for (int r : rows)
      if (ds.observed(r, c) != first) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("spec validation and the zero-rate shortcut") {
  AmputeSpec spec;
  spec.rate = 1.0;
  CHECK_THROWS_AS(spec.validate(), mlmi::ConfigError);
  spec.rate = -0.1;
  CHECK_THROWS_AS(spec.validate(), mlmi::ConfigError);

  const Dataset ds = demo_data(1);
  spec = AmputeSpec{};
  spec.rate = 0.0;
  for (auto mech : {Mechanism::MCAR, Mechanism::MAR}) {
    spec.mechanism = mech;
    const Dataset out = ampute(ds, spec);
    CHECK(out.complete());
  }
}

TEST_CASE("amputation refuses columns that already have holes") {
  Dataset ds = demo_data(2);
  ds.mask_cell(0, ds.col("X2"));
  AmputeSpec spec;
  CHECK_THROWS_AS(induce_mcar(ds, spec), mlmi::PreconditionError);
  spec.mechanism = Mechanism::MAR;
  CHECK_THROWS_AS(induce_mar(ds, spec), mlmi::PreconditionError);
}

TEST_CASE("mcar hits every covariate near the nominal rate and spares Y") {
  const Dataset ds = demo_data(3);
  AmputeSpec spec;
  spec.rate = 0.3;
  spec.seed = 100;
  const Dataset out = induce_mcar(ds, spec);
  CHECK(out.missing_count(out.col("Y")) == 0);
  for (int v = 1; v <= 6; ++v) {
    const double frac =
        out.missing_count(out.col("X" + std::to_string(v))) / 1000.0;
    CHECK(frac == doctest::Approx(0.3).epsilon(1).scale(0.06));
  }
  // level-2 columns lose whole clusters
  for (int v = 1; v <= 6; ++v) {
    const int c = out.col("L" + std::to_string(v));
    CHECK(cluster_aligned(out, c));
    CHECK(out.missing_count(c) % 40 == 0);
  }
  // masked payloads are unreadable, the rest are untouched
  for (int c = 0; c < out.n_cols(); ++c)
    for (int r = 0; r < out.n_rows(); ++r)
      if (out.observed(r, c)) CHECK(out.value(r, c) == ds.value(r, c));
}

TEST_CASE("mcar level-2 cluster fraction is calibrated across seeds") {
  const Dataset ds = demo_data(4);
  AmputeSpec spec;
  spec.rate = 0.3;
  int masked = 0, total = 0;
  for (int s = 0; s < 60; ++s) {
    spec.seed = 500 + s;
    const Dataset out = induce_mcar(ds, spec);
    for (int v = 1; v <= 6; ++v) {
      masked += out.missing_count(out.col("L" + std::to_string(v))) / 40;
      total += 25;
    }
  }
  CHECK(static_cast<double>(masked) / total ==
        doctest::Approx(0.3).epsilon(1).scale(0.02));
}

TEST_CASE("mar masks fixed counts tied to the anchor") {
  const Dataset ds = demo_data(5);
  AmputeSpec spec;
  spec.mechanism = Mechanism::MAR;
  spec.rate = 0.3;
  spec.seed = 11;
  const Dataset out = induce_mar(ds, spec);
  // non-anchor level-1 targets: exactly round(0.3 * 1000) cells
  for (int v = 2; v <= 6; ++v)
    CHECK(out.missing_count(out.col("X" + std::to_string(v))) == 300);
  // level-2 targets: exactly round(0.3 * 25) clusters
  for (int v = 1; v <= 6; ++v) {
    const int c = out.col("L" + std::to_string(v));
    CHECK(cluster_aligned(out, c));
    CHECK(out.missing_count(c) == 8 * 40);
  }
  // anchor is Bernoulli-masked, so only approximately calibrated
  const double anchor_frac = out.missing_count(out.col("X1")) / 1000.0;
  CHECK(anchor_frac == doctest::Approx(0.3).epsilon(1).scale(0.07));
  CHECK(out.missing_count(out.col("Y")) == 0);
}

TEST_CASE("mar selection is anchor-dependent but uniform under equal weights") {
  const Dataset ds = demo_data(6);
  const int n = ds.n_rows();
  const int anchor = ds.col("X1");

  // anchor bins recomputed here, independently of the implementation
  auto bin_of = [&](const Dataset& d, int r, double lo, double hi) {
    const int b = static_cast<int>(std::floor((d.value(r, anchor) - lo) /
                                              (hi - lo) * 6));
    return std::clamp(b, 0, 5);
  };

  AmputeSpec spec;
  spec.mechanism = Mechanism::MAR;
  spec.rate = 0.3;
  spec.target_columns = {"X2", "X3", "X4", "X5", "X6"};  // keep the anchor intact

  int dependent = 0;
  double equal_p_min = 1.0;
  for (int s = 0; s < 10; ++s) {
    spec.seed = 50 + s;
    spec.equal_bin_weights = false;
    const Dataset skewed = induce_mar(ds, spec);
    spec.equal_bin_weights = true;
    const Dataset uniform = induce_mar(ds, spec);

    double lo = 1e300, hi = -1e300;
    for (int r = 0; r < n; ++r) {
      lo = std::min(lo, ds.value(r, anchor));
      hi = std::max(hi, ds.value(r, anchor));
    }
    std::vector<double> bin_n(6, 0.0);
    for (int r = 0; r < n; ++r) bin_n[bin_of(ds, r, lo, hi)] += 1.0;

    for (const auto& name : spec.target_columns) {
      std::vector<double> miss_skew(6, 0.0), miss_unif(6, 0.0), expected(6, 0.0);
      const int c = ds.col(name);
      for (int r = 0; r < n; ++r) {
        const int b = bin_of(ds, r, lo, hi);
        if (!skewed.observed(r, c)) miss_skew[b] += 1.0;
        if (!uniform.observed(r, c)) miss_unif[b] += 1.0;
      }
      for (int b = 0; b < 6; ++b) expected[b] = 300.0 * bin_n[b] / n;
      if (mlmi::chi_squared_gof_p(miss_skew, expected) < 1e-4) ++dependent;
      equal_p_min =
          std::min(equal_p_min, mlmi::chi_squared_gof_p(miss_unif, expected));
    }
  }
  // random bin weights skew selection for most columns...
  CHECK(dependent >= 35);  // of 50 column draws
  // ...while equal weights reduce MAR to uniform sampling
  CHECK(equal_p_min > 1e-4);
}

TEST_CASE("rows with a missing anchor stay eligible via the average weight") {
  const Dataset ds = demo_data(7);
  AmputeSpec spec;
  spec.mechanism = Mechanism::MAR;
  spec.rate = 0.4;
  spec.seed = 21;
  const Dataset out = induce_mar(ds, spec);
  const int anchor = out.col("X1");
  const int c = out.col("X3");
  int both = 0;
  for (int r = 0; r < out.n_rows(); ++r)
    if (!out.observed(r, anchor) && !out.observed(r, c)) ++both;
  // at 40% rates roughly 16% of rows lose both; zero would mean exclusion
  CHECK(both > 50);
}

TEST_CASE("cell-wise level-2 amputation breaks cluster alignment") {
  const Dataset ds = demo_data(8);
  AmputeSpec spec;
  spec.rate = 0.3;
  spec.seed = 31;
  spec.level2_cellwise = true;
  const Dataset out = induce_mcar(ds, spec);
  bool any_misaligned = false;
  for (int v = 1; v <= 6; ++v)
    any_misaligned = any_misaligned || !cluster_aligned(out, out.col("L" + std::to_string(v)));
  CHECK(any_misaligned);
}

TEST_CASE("amputation is reproducible per seed") {
  const Dataset ds = demo_data(9);
  AmputeSpec spec;
  spec.mechanism = Mechanism::MAR;
  spec.rate = 0.3;
  spec.seed = 41;
  const Dataset a = induce_mar(ds, spec);
  const Dataset b = induce_mar(ds, spec);
  spec.seed = 42;
  const Dataset c = induce_mar(ds, spec);
  bool same = true, diff = false;
  for (int col = 0; col < a.n_cols(); ++col)
    for (int r = 0; r < a.n_rows(); ++r) {
      same = same && a.observed(r, col) == b.observed(r, col);
      diff = diff || a.observed(r, col) != c.observed(r, col);
    }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("weighted sampling without replacement matches exact probabilities") {
  const std::vector<double> w{1.0, 2.0, 7.0};
  Rng rng(77);
  const int n_draws = 40000;

  SUBCASE("single draw follows the weights") {
    std::vector<double> counts(3, 0.0);
    for (int i = 0; i < n_draws; ++i) {
      const auto pick = mlmi::weighted_sample_without_replacement(w, 1, rng);
      REQUIRE(pick.size() == 1);
      counts[pick[0]] += 1.0;
    }
    const std::vector<double> expected{0.1 * n_draws, 0.2 * n_draws, 0.7 * n_draws};
    CHECK(mlmi::chi_squared_gof_p(counts, expected) > 1e-4);
  }

  SUBCASE("pair probabilities match sequential sampling") {
    // P({i,j}) from drawing twice without replacement:
    // P({0,1}) = .1*(2/9) + .2*(1/8), P({0,2}) = .1*(7/9) + .7*(1/3),
    // P({1,2}) = .2*(7/8) + .7*(2/3)
    std::map<std::pair<int, int>, double> counts;
    for (int i = 0; i < n_draws; ++i) {
      const auto pick = mlmi::weighted_sample_without_replacement(w, 2, rng);
      REQUIRE(pick.size() == 2);
      counts[{pick[0], pick[1]}] += 1.0;
    }
    const std::vector<double> expected{
        (0.1 * 2 / 9 + 0.2 * 1 / 8) * n_draws,
        (0.1 * 7 / 9 + 0.7 * 1 / 3) * n_draws,
        (0.2 * 7 / 8 + 0.7 * 2 / 3) * n_draws};
    const std::vector<double> observed{counts[{0, 1}], counts[{0, 2}],
                                       counts[{1, 2}]};
    CHECK(mlmi::chi_squared_gof_p(observed, expected) > 1e-4);
  }

  SUBCASE("degenerate requests") {
    CHECK(mlmi::weighted_sample_without_replacement(w, 0, rng).empty());
    CHECK(mlmi::weighted_sample_without_replacement(w, 3, rng) ==
          std::vector<int>{0, 1, 2});
    CHECK_THROWS_AS(mlmi::weighted_sample_without_replacement(w, 4, rng),
                    mlmi::PreconditionError);
    CHECK_THROWS_AS(
        mlmi::weighted_sample_without_replacement({1.0, 0.0}, 1, rng),
        mlmi::PreconditionError);
  }
}

TEST_CASE("anchor washout raises after bounded retries") {
  // single-row frame: each attempt masks the anchor with p = rate
  Dataset tiny({1}, {mlmi::Column("X1", mlmi::ColumnRole::Level1, {0.5}),
                     mlmi::Column("X2", mlmi::ColumnRole::Level1, {1.5})});
  AmputeSpec spec;
  spec.mechanism = Mechanism::MAR;
  spec.rate = 0.99;
  int threw = 0, ok = 0;
  for (int s = 0; s < 80; ++s) {
    spec.seed = s;
    try {
      const Dataset out = induce_mar(tiny, spec);
      ++ok;
      CHECK(out.missing_count(0) == 0);  // survived attempts keep the anchor
    } catch (const mlmi::SamplingError&) {
      ++threw;
    }
  }
  // P(all 10 attempts fail) = 0.99^10 ~ 0.9: both outcomes must appear
  CHECK(threw > 0);
  CHECK(ok > 0);
}

TEST_CASE("missing profile summarises per-column fractions") {
  Dataset ds = demo_data(10);
  ds.mask_cell(0, 0);
  ds.mask_cell(1, 0);
  const auto prof = missing_profile(ds);
  CHECK(prof.per_column[0].first == "X1");
  CHECK(prof.per_column[0].second == doctest::Approx(0.002));
  CHECK(prof.overall == doctest::Approx(2.0 / (1000.0 * 13)));
}

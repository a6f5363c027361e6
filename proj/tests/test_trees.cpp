#include "mlmi/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "mlmi/errors.hpp"

using mlmi::BoostParams;
using mlmi::FeatureMatrix;
using mlmi::ForestParams;
using mlmi::RegressionTree;
using mlmi::Rng;
using mlmi::TreeParams;

namespace {

struct RefSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // half the SSE decrease, matching the library's scale
};

// Exhaustive reference split search, written for clarity not speed. Gains
// use the sum-of-squares identity (SL^2/nL + SR^2/nR - S^2/n) / 2 so that
// mathematically tied candidates stay exactly tied in floating point and
// the documented tie-break (lowest feature, lowest threshold) decides.
RefSplit ref_best_split(const FeatureMatrix& X, const std::vector<double>& y,
                        const std::vector<int>& rows, int min_leaf) {
  RefSplit best;
  double total = 0.0;
  for (int r : rows) total += y[r];
  const double parent_score = total * total / rows.size();
  for (int f = 0; f < static_cast<int>(X.size()); ++f) {
    std::vector<double> vals;
    for (int r : rows) vals.push_back(X[f][r]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      const double thr = mlmi::split_threshold(vals[i], vals[i + 1]);
      std::vector<int> left, right;
      for (int r : rows) (X[f][r] <= thr ? left : right).push_back(r);
      if (static_cast<int>(left.size()) < min_leaf ||
          static_cast<int>(right.size()) < min_leaf)
        continue;
      double sl = 0.0;
      for (int r : left) sl += y[r];
      const double sr = total - sl;
      const double gain = 0.5 * (sl * sl / left.size() +
                                 sr * sr / right.size() - parent_score);
      if (gain <= 0.0) continue;
      if (gain > best.gain || (gain == best.gain &&
                               (f < best.feature ||
                                (f == best.feature && thr < best.threshold)))) {
        best = {f, thr, gain};
      }
    }
  }
  return best;
}

// Reference grower: recursive, exhaustive, predictions recorded per row.
void ref_grow(const FeatureMatrix& X, const std::vector<double>& y,
              const std::vector<int>& rows, int min_leaf, int max_depth,
              int depth, std::vector<double>& out) {
  const RefSplit split =
      (static_cast<int>(rows.size()) >= 2 * min_leaf &&
       (max_depth == 0 || depth < max_depth))
          ? ref_best_split(X, y, rows, min_leaf)
          : RefSplit{};
  if (split.feature < 0) {
    double m = 0.0;
    for (int r : rows) m += y[r];
    m /= rows.size();
    for (int r : rows) out[r] = m;
    return;
  }
  std::vector<int> left, right;
  for (int r : rows)
    (X[split.feature][r] <= split.threshold ? left : right).push_back(r);
  ref_grow(X, y, left, min_leaf, max_depth, depth + 1, out);
  ref_grow(X, y, right, min_leaf, max_depth, depth + 1, out);
}

FeatureMatrix random_features(Rng& rng, int p, int n, bool integer) {
  FeatureMatrix X(p, std::vector<double>(n));
  for (auto& col : X)
    for (auto& v : col)
      v = integer ? static_cast<double>(rng.below(8)) : rng.uniform(-2.0, 2.0);
  return X;
}

std::vector<double> random_response(Rng& rng, int n, bool integer) {
  std::vector<double> y(n);
  for (auto& v : y)
    v = integer ? static_cast<double>(rng.below(5)) : rng.normal();
  return y;
}

std::vector<int> all_rows(int n) {
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

TEST_CASE("hand-checked split on a four-point dataset") {
  // y steps from 0 to 1 between x=1 and x=2: the only zero-error cut is 1.5
  const FeatureMatrix X{{0, 1, 2, 3}};
  const std::vector<double> y{0, 0, 1, 1};
  TreeParams params;
  params.min_leaf = 1;
  params.mtry = 1;
  Rng rng(1);
  const RegressionTree tree = fit_tree(X, y, all_rows(4), params, rng);
  REQUIRE(tree.nodes().size() >= 3);
  CHECK(tree.nodes()[0].feature == 0);
  CHECK(tree.nodes()[0].threshold == doctest::Approx(1.5));
  CHECK(tree.predict_row(X, 0) == doctest::Approx(0.0));
  CHECK(tree.predict_row(X, 3) == doctest::Approx(1.0));
}

TEST_CASE("grown trees match the exhaustive reference exactly") {
  Rng meta(2024);
  for (int it = 0; it < 40; ++it) {
    const int n = 10 + static_cast<int>(meta.below(50));
    const int p = 1 + static_cast<int>(meta.below(4));
    const bool integer = it % 2 == 0;  // integer data makes ties exact
    FeatureMatrix X = random_features(meta, p, n, integer);
    std::vector<double> y = random_response(meta, n, integer);

    TreeParams params;
    params.min_leaf = 1 + static_cast<int>(meta.below(3));
    params.max_depth = static_cast<int>(meta.below(5));  // 0 = unbounded
    params.mtry = p;                                     // no feature sampling
    Rng rng(1);
    const RegressionTree tree = fit_tree(X, y, all_rows(n), params, rng);

    std::vector<double> ref_pred(n, 0.0);
    ref_grow(X, y, all_rows(n), params.min_leaf, params.max_depth, 0, ref_pred);

    const RefSplit root = ref_best_split(X, y, all_rows(n), params.min_leaf);
    if ((params.max_depth == 0 || params.max_depth > 0) && root.feature >= 0 &&
        n >= 2 * params.min_leaf) {
      CHECK(tree.nodes()[0].feature == root.feature);
      CHECK(tree.nodes()[0].threshold == root.threshold);
    }
    for (int r = 0; r < n; ++r)
      CHECK(tree.predict_row(X, r) == doctest::Approx(ref_pred[r]).epsilon(1e-12));
  }
}

TEST_CASE("structural invariants hold") {
  Rng meta(77);
  const int n = 200;
  const FeatureMatrix X = random_features(meta, 5, n, false);
  const std::vector<double> y = random_response(meta, n, false);
  TreeParams params;
  params.min_leaf = 7;
  params.max_depth = 4;
  Rng rng(3);
  const RegressionTree tree = fit_tree(X, y, all_rows(n), params, rng);

  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  int leaf_rows = 0;
  for (const auto& nd : tree.nodes()) {
    if (nd.feature >= 0) continue;
    CHECK(nd.n_rows >= params.min_leaf);
    CHECK(nd.value >= *ymin);
    CHECK(nd.value <= *ymax);
    leaf_rows += nd.n_rows;
  }
  CHECK(leaf_rows == n);
  CHECK(tree.depth() <= params.max_depth);
  for (int r = 0; r < n; ++r) {
    const double pred = tree.predict_row(X, r);
    CHECK(pred >= *ymin);
    CHECK(pred <= *ymax);
  }
}

TEST_CASE("degenerate inputs produce leaves, not crashes") {
  TreeParams params;
  params.min_leaf = 1;
  Rng rng(4);

  SUBCASE("single row") {
    const FeatureMatrix X{{2.5}};
    const RegressionTree tree = fit_tree(X, {7.0}, {0}, params, rng);
    CHECK(tree.nodes().size() == 1);
    CHECK(tree.predict_row(X, 0) == doctest::Approx(7.0));
  }
  SUBCASE("constant response") {
    const FeatureMatrix X{{1, 2, 3, 4, 5}};
    const RegressionTree tree = fit_tree(X, {3, 3, 3, 3, 3}, all_rows(5), params, rng);
    CHECK(tree.nodes().size() == 1);
  }
  SUBCASE("constant feature") {
    const FeatureMatrix X{{1, 1, 1, 1, 1}};
    const RegressionTree tree = fit_tree(X, {1, 2, 3, 4, 5}, all_rows(5), params, rng);
    CHECK(tree.nodes().size() == 1);
    CHECK(tree.predict_row(X, 0) == doctest::Approx(3.0));
  }
  SUBCASE("empty row list is rejected") {
    const FeatureMatrix X{{1.0}};
    CHECK_THROWS_AS(fit_tree(X, {1.0}, {}, params, rng), mlmi::PreconditionError);
  }
}

TEST_CASE("row subsets restrict training") {
  Rng meta(5);
  const FeatureMatrix X = random_features(meta, 2, 100, false);
  std::vector<double> y = random_response(meta, 100, false);
  // poison the excluded rows; they must not influence the fit
  FeatureMatrix X2 = X;
  std::vector<double> y2 = y;
  std::vector<int> rows;
  for (int r = 0; r < 100; r += 2) rows.push_back(r);
  for (int r = 1; r < 100; r += 2) {
    y2[r] = 1e6;
    X2[0][r] = -1e6;
  }
  TreeParams params;
  params.min_leaf = 2;
  Rng r1(6), r2(6);
  const RegressionTree a = fit_tree(X, y, rows, params, r1);
  const RegressionTree b = fit_tree(X2, y2, rows, params, r2);
  for (int r : rows) CHECK(a.predict_row(X, r) == b.predict_row(X2, r));
}

TEST_CASE("training row order does not change the fit") {
  Rng meta(6);
  const int n = 80;
  const FeatureMatrix X = random_features(meta, 3, n, true);
  const std::vector<double> y = random_response(meta, n, true);
  std::vector<int> rows = all_rows(n);
  std::vector<int> shuffled = rows;
  for (int i = n - 1; i > 0; --i)
    std::swap(shuffled[i], shuffled[meta.below(i + 1)]);
  TreeParams params;
  params.min_leaf = 3;
  params.mtry = 3;
  Rng r1(7), r2(7);
  const RegressionTree a = fit_tree(X, y, rows, params, r1);
  const RegressionTree b = fit_tree(X, y, shuffled, params, r2);
  for (int r = 0; r < n; ++r)
    CHECK(a.predict_row(X, r) == b.predict_row(X, r));
}

TEST_CASE("mtry feature sampling draws fresh candidates per node") {
  Rng meta(8);
  const int n = 300;
  const FeatureMatrix X = random_features(meta, 6, n, false);
  // all six features carry signal
  std::vector<double> y(n, 0.0);
  for (int r = 0; r < n; ++r)
    for (int f = 0; f < 6; ++f) y[r] += X[f][r];
  TreeParams params;
  params.min_leaf = 5;
  params.mtry = 1;  // one random candidate per node
  Rng rng(9);
  const RegressionTree tree = fit_tree(X, y, all_rows(n), params, rng);
  std::set<int> used;
  for (const auto& nd : tree.nodes())
    if (nd.feature >= 0) used.insert(nd.feature);
  // with one candidate per node the tree must touch several features
  CHECK(used.size() >= 3);

  Rng rng2(9);
  const RegressionTree again = fit_tree(X, y, all_rows(n), params, rng2);
  CHECK(again.nodes().size() == tree.nodes().size());
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    CHECK(again.nodes()[i].feature == tree.nodes()[i].feature);
    CHECK(again.nodes()[i].threshold == tree.nodes()[i].threshold);
  }
}

TEST_CASE("threshold midpoints never land on the upper value") {
  const double a = 1.0;
  const double b = std::nextafter(a, 2.0);
  const double thr = mlmi::split_threshold(a, b);
  CHECK(thr < b);
  CHECK(thr >= a);
  CHECK(mlmi::split_threshold(2.0, 4.0) == doctest::Approx(3.0));
}

TEST_CASE("forests average their trees and honour the subsample size") {
  Rng meta(10);
  const int n = 400;
  const FeatureMatrix X = random_features(meta, 4, n, false);
  std::vector<double> y(n);
  for (int r = 0; r < n; ++r) y[r] = 2.0 * X[0][r] + meta.normal();

  ForestParams params;
  params.num_trees = 25;
  params.sample_fraction = 0.632;
  params.tree.min_leaf = 5;
  params.tree.mtry = 2;
  Rng rng(11);
  const mlmi::Forest forest = fit_forest(X, y, all_rows(n), params, rng);
  REQUIRE(forest.trees.size() == 25);

  const int expect_rows = static_cast<int>(std::floor(0.632 * n));
  bool trees_differ = false;
  for (const auto& t : forest.trees) {
    CHECK(t.nodes()[0].n_rows == expect_rows);
    trees_differ = trees_differ ||
                   t.nodes()[0].threshold != forest.trees[0].nodes()[0].threshold;
  }
  CHECK(trees_differ);

  for (int r = 0; r < 20; ++r) {
    double s = 0.0;
    for (const auto& t : forest.trees) s += t.predict_row(X, r);
    CHECK(predict_row(forest, X, r) ==
          doctest::Approx(s / forest.trees.size()).epsilon(1e-12));
  }

  Rng rng2(11);
  const mlmi::Forest forest2 = fit_forest(X, y, all_rows(n), params, rng2);
  for (int r = 0; r < n; ++r)
    CHECK(predict_row(forest, X, r) == predict_row(forest2, X, r));

  // the ensemble tracks the signal far better than chance
  double err = 0.0, var = 0.0;
  for (int r = 0; r < n; ++r) {
    const double mu = 2.0 * X[0][r];
    err += (predict_row(forest, X, r) - mu) * (predict_row(forest, X, r) - mu);
    var += mu * mu;
  }
  CHECK(err < 0.35 * var);
}

TEST_CASE("with-replacement row sampling resamples rows") {
  Rng meta(12);
  const int n = 200;
  const FeatureMatrix X = random_features(meta, 3, n, false);
  std::vector<double> y(n);
  for (int r = 0; r < n; ++r) y[r] = X[1][r] - X[2][r] + 0.3 * meta.normal();

  ForestParams params;
  params.num_trees = 8;
  params.sample_fraction = 1.0;
  params.tree.min_leaf = 5;
  params.tree.mtry = 3;

  // Without replacement a full-fraction forest sees every row in every tree,
  // so all trees coincide; bootstrap draws must break that.
  Rng rng_a(21);
  const mlmi::Forest plain = fit_forest(X, y, all_rows(n), params, rng_a);
  bool plain_differ = false;
  for (const auto& t : plain.trees)
    plain_differ = plain_differ ||
                   t.nodes()[0].threshold != plain.trees[0].nodes()[0].threshold;
  CHECK_FALSE(plain_differ);

  params.replace = true;
  Rng rng_b(21);
  const mlmi::Forest boot = fit_forest(X, y, all_rows(n), params, rng_b);
  REQUIRE(boot.trees.size() == 8);
  bool boot_differ = false;
  for (const auto& t : boot.trees) {
    CHECK(t.nodes()[0].n_rows == n);  // draw count, not unique rows
    boot_differ = boot_differ ||
                  t.nodes()[0].threshold != boot.trees[0].nodes()[0].threshold;
  }
  CHECK(boot_differ);

  Rng rng_c(21);
  const mlmi::Forest again = fit_forest(X, y, all_rows(n), params, rng_c);
  for (int r = 0; r < n; ++r)
    CHECK(predict_row(boot, X, r) == predict_row(again, X, r));
}

TEST_CASE("boosting reduces training error round by round") {
  Rng meta(12);
  for (int it = 0; it < 20; ++it) {
    const int n = 60 + static_cast<int>(meta.below(100));
    const int p = 2 + static_cast<int>(meta.below(3));
    const FeatureMatrix X = random_features(meta, p, n, false);
    std::vector<double> y(n);
    for (int r = 0; r < n; ++r)
      y[r] = X[0][r] - 0.5 * X[1][r] + 0.3 * meta.normal();

    BoostParams params;
    params.n_rounds = 30;
    Rng rng(100 + it);
    const mlmi::BoostedModel model = fit_boosted(X, y, all_rows(n), params, rng);
    REQUIRE(model.trees.size() == 30);

    std::vector<double> pred(n, model.base_score);
    double prev = 1e300;
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
      for (int r = 0; r < n; ++r)
        pred[r] += params.eta * model.trees[t].predict_row(X, r);
      double mse = 0.0;
      for (int r = 0; r < n; ++r) mse += (pred[r] - y[r]) * (pred[r] - y[r]);
      CHECK(mse <= prev * (1.0 + 1e-12) + 1e-12);
      prev = mse;
    }
    // full-model prediction equals base + eta * sum of trees
    for (int r = 0; r < 5; ++r)
      CHECK(predict_row(model, X, r) == doctest::Approx(pred[r]).epsilon(1e-12));
  }
}

TEST_CASE("boosting knobs behave") {
  Rng meta(13);
  const int n = 150;
  const FeatureMatrix X = random_features(meta, 3, n, false);
  std::vector<double> y(n);
  for (int r = 0; r < n; ++r) y[r] = X[0][r] + 0.1 * meta.normal();

  SUBCASE("huge gamma suppresses every split") {
    BoostParams params;
    params.gamma = 1e9;
    params.n_rounds = 5;
    Rng rng(14);
    const auto model = fit_boosted(X, y, all_rows(n), params, rng);
    for (const auto& t : model.trees) CHECK(t.nodes().size() == 1);
    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= n;
    CHECK(predict_row(model, X, 0) == doctest::Approx(ybar).epsilon(1e-9));
  }
  SUBCASE("depth cap is respected") {
    BoostParams params;
    params.max_depth = 2;
    params.n_rounds = 10;
    Rng rng(15);
    const auto model = fit_boosted(X, y, all_rows(n), params, rng);
    for (const auto& t : model.trees) CHECK(t.depth() <= 2);
  }
  SUBCASE("stronger regularisation shrinks leaf values") {
    BoostParams weak, strong;
    weak.n_rounds = strong.n_rounds = 1;
    weak.lambda = 0.0;
    strong.lambda = 100.0;
    Rng r1(16), r2(16);
    const auto mw = fit_boosted(X, y, all_rows(n), weak, r1);
    const auto ms = fit_boosted(X, y, all_rows(n), strong, r2);
    auto max_leaf = [](const mlmi::BoostedModel& m) {
      double v = 0.0;
      for (const auto& nd : m.trees[0].nodes())
        if (nd.feature < 0) v = std::max(v, std::fabs(nd.value));
      return v;
    };
    CHECK(max_leaf(ms) < max_leaf(mw));
  }
  SUBCASE("subsampled rounds still converge on the signal") {
    BoostParams params;
    params.subsample = 0.5;
    params.n_rounds = 40;
    Rng rng(17);
    const auto model = fit_boosted(X, y, all_rows(n), params, rng);
    double err = 0.0, var = 0.0;
    for (int r = 0; r < n; ++r) {
      const double d = predict_row(model, X, r) - X[0][r];
      err += d * d;
      var += X[0][r] * X[0][r];
    }
    CHECK(err < 0.2 * var);
  }
}

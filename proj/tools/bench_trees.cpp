// Timing harness for the tree engine under imputation-shaped workloads.
// Not part of the test suite; run manually when touching the hot path.

#include <chrono>
#include <cstdio>
#include <numeric>
#include <vector>

#include "mlmi/rng.hpp"
#include "mlmi/trees.hpp"

using namespace mlmi;
using Clock = std::chrono::steady_clock;

int main() {
  Rng rng(1);
  const int n = 1000, p = 12;
  FeatureMatrix X(p, std::vector<double>(n));
  for (auto& col : X)
    for (auto& v : col) v = rng.normal();
  std::vector<double> y(n);
  for (int r = 0; r < n; ++r)
    y[r] = X[0][r] + 0.5 * X[1][r] + 0.3 * X[2][r] + rng.normal();

  std::vector<int> rows(900);  // ~10% of rows unobserved
  std::iota(rows.begin(), rows.end(), 0);

  {
    ForestParams params;
    params.num_trees = 50;
    params.tree.min_leaf = 5;
    const auto t0 = Clock::now();
    int reps = 10;
    double sink = 0.0;
    for (int i = 0; i < reps; ++i) {
      Rng frng(100 + i);
      const Forest f = fit_forest(X, y, rows, params, frng);
      sink += predict_row(f, X, 0);
    }
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    std::printf("forest: %7.2f ms/fit  %6.3f ms/tree   (sink %.3f)\n",
                ms / reps, ms / reps / params.num_trees, sink);
  }
  {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    BoostParams params;
    params.n_rounds = 50;
    const auto t0 = Clock::now();
    int reps = 10;
    double sink = 0.0;
    for (int i = 0; i < reps; ++i) {
      Rng brng(200 + i);
      const BoostedModel m = fit_boosted(X, y, all, params, brng);
      sink += predict_row(m, X, 0);
    }
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    std::printf("boost:  %7.2f ms/fit  %6.3f ms/tree   (sink %.3f)\n",
                ms / reps, ms / reps / params.n_rounds, sink);
  }
  {
    // full-column prediction cost (50 trees, 1000 rows)
    ForestParams params;
    params.num_trees = 50;
    Rng frng(1);
    const Forest f = fit_forest(X, y, rows, params, frng);
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    const auto t0 = Clock::now();
    double sink = 0.0;
    for (int i = 0; i < 100; ++i) {
      const auto pred = predict(f, X, all);
      sink += pred[0];
    }
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    std::printf("forest predict 1000 rows: %6.3f ms (sink %.3f)\n", ms / 100,
                sink);
  }
  return 0;
}

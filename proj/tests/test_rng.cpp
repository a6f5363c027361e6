#include "mlmi/rng.hpp"

#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "mlmi/stats.hpp"

using mlmi::Rng;

TEST_CASE("generator is deterministic per seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next();
    all_equal = all_equal && (va == b.next());
    any_diff = any_diff || (va != c.next());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform lies in [0,1) with the right moments") {
  Rng rng(7);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    s += u;
    ss += u * u;
  }
  const double m = s / n;
  const double var = ss / n - m * m;
  CHECK(m == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("below produces unbiased bounded integers") {
  Rng rng(11);
  const int bound = 10;
  std::vector<double> counts(bound, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(bound);
    REQUIRE(v < static_cast<std::uint64_t>(bound));
    counts[v] += 1.0;
  }
  const std::vector<double> expected(bound, n / static_cast<double>(bound));
  CHECK(mlmi::chi_squared_gof_p(counts, expected) > 1e-4);
}

TEST_CASE("normal deviates have standard moments") {
  Rng rng(99);
  const int n = 200000;
  double s = 0.0, ss = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
    s4 += z * z * z * z;
  }
  CHECK(s / n == doctest::Approx(0.0).epsilon(1).scale(0.02));
  CHECK(ss / n == doctest::Approx(1.0).epsilon(0.02));
  // Excess kurtosis of a normal is 0, i.e. fourth moment 3.
  CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("gamma matches its mean and variance") {
  Rng rng(5);
  const int n = 100000;
  for (const auto& [shape, scale] : {std::pair{3.0, 2.0}, {0.5, 1.0}, {1.0, 4.0}}) {
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.gamma(shape, scale);
      REQUIRE(x > 0.0);
      s += x;
      ss += x * x;
    }
    const double m = s / n;
    CHECK(m == doctest::Approx(shape * scale).epsilon(0.03));
    CHECK(ss / n - m * m == doctest::Approx(shape * scale * scale).epsilon(0.08));
  }
}

TEST_CASE("inverse gamma matches its mean") {
  Rng rng(6);
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += rng.inverse_gamma(3.0, 4.0);
  // mean = rate / (shape - 1) = 2
  CHECK(s / n == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("tiny-shape gamma draws stay positive and finite") {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.gamma(1e-3, 1e3);
    REQUIRE(std::isfinite(x));
    REQUIRE(x >= 0.0);
  }
}

TEST_CASE("derived seeds separate streams") {
  const auto s1 = mlmi::derive_seed(123, {1, 2});
  CHECK(s1 == mlmi::derive_seed(123, {1, 2}));
  std::set<std::uint64_t> seen;
  seen.insert(s1);
  seen.insert(mlmi::derive_seed(123, {2, 1}));
  seen.insert(mlmi::derive_seed(123, {1}));
  seen.insert(mlmi::derive_seed(123, {1, 2, 3}));
  seen.insert(mlmi::derive_seed(124, {1, 2}));
  seen.insert(mlmi::derive_seed(123, {0}));
  seen.insert(mlmi::derive_seed(123, {}));
  CHECK(seen.size() == 7);
}

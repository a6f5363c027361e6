#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlmi/dataset.hpp"
#include "mlmi/rng.hpp"

namespace mlmi {

enum class Mechanism { MCAR, MAR };

std::string to_string(Mechanism m);
Mechanism mechanism_from_string(std::string_view s);

struct AmputeSpec {
  Mechanism mechanism = Mechanism::MCAR;
  double rate = 0.3;  // in [0, 1); 0 is a no-op
  // Columns to receive missing values; empty means every level-1 and level-2
  // covariate column (the outcome stays complete).
  std::vector<std::string> target_columns;
  std::string anchor_column = "X1";  // MAR conditioning variable
  int n_bins = 6;
  // Treat level-2 targets cell-wise (per row) instead of cluster-wise.
  bool level2_cellwise = false;
  // Test hook: give every bin the same weight, collapsing MAR onto uniform
  // fixed-count sampling.
  bool equal_bin_weights = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// Under MCAR each target cell is masked independently with probability
// `rate`; level-2 columns are masked per cluster so cluster-constancy is
// preserved.
Dataset induce_mcar(const Dataset& ds, const AmputeSpec& spec);

// Under MAR the anchor column is first masked MCAR at `rate`. Every other
// target column then receives exactly round(rate * n) missing cells (or
// round(rate * n_clusters) missing clusters at level 2), drawn without
// replacement with probabilities tied to the anchor: observed anchor values
// are cut into n_bins equal-width bins, each bin gets a U(0,1) weight per
// target column, and a row's selection weight is its anchor-bin weight (rows
// with a missing anchor get the average bin weight; a cluster uses its modal
// observed anchor bin).
Dataset induce_mar(const Dataset& ds, const AmputeSpec& spec);

// Dispatches on spec.mechanism.
Dataset ampute(const Dataset& ds, const AmputeSpec& spec);

struct MissingProfile {
  std::vector<std::pair<std::string, double>> per_column;  // missing fraction
  double overall = 0.0;
};

MissingProfile missing_profile(const Dataset& ds);

// Weighted sampling of k distinct indices from 0..weights.size()-1 with
// selection probability proportional to the weights (all must be positive).
// Exposed for direct distribution tests.
std::vector<int> weighted_sample_without_replacement(
    const std::vector<double>& weights, int k, Rng& rng);

}  // namespace mlmi

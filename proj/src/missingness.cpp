#include "mlmi/missingness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

namespace mlmi {

namespace {

constexpr int kAnchorRetries = 10;

std::vector<int> resolve_targets(const Dataset& ds, const AmputeSpec& spec) {
  std::vector<int> targets;
  if (spec.target_columns.empty()) {
    for (int c = 0; c < ds.n_cols(); ++c) {
      const ColumnRole role = ds.role(c);
      if (role == ColumnRole::Level1 || role == ColumnRole::Level2)
        targets.push_back(c);
    }
  } else {
    for (const auto& name : spec.target_columns) targets.push_back(ds.col(name));
  }
  for (int c : targets)
    if (ds.missing_count(c) > 0)
      throw PreconditionError("amputation target '" + ds.name(c) +
                              "' already has missing cells");
  return targets;
}

bool cluster_level(const Dataset& ds, int c, const AmputeSpec& spec) {
  return ds.role(c) == ColumnRole::Level2 && !spec.level2_cellwise;
}

// Equal-width bin of x over [lo, hi]; degenerate ranges collapse to bin 0.
int bin_of(double x, double lo, double hi, int n_bins) {
  if (!(hi > lo)) return 0;
  const int b = static_cast<int>(std::floor((x - lo) / (hi - lo) * n_bins));
  return std::clamp(b, 0, n_bins - 1);
}

struct AnchorBins {
  std::vector<int> row_bin;  // -1 where the anchor is missing
  double lo = 0.0, hi = 0.0;
};

AnchorBins compute_anchor_bins(const Dataset& ds, int anchor, int n_bins) {
  AnchorBins out;
  out.lo = std::numeric_limits<double>::infinity();
  out.hi = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < ds.n_rows(); ++r) {
    if (!ds.observed(r, anchor)) continue;
    out.lo = std::min(out.lo, ds.value(r, anchor));
    out.hi = std::max(out.hi, ds.value(r, anchor));
  }
  out.row_bin.assign(ds.n_rows(), -1);
  for (int r = 0; r < ds.n_rows(); ++r)
    if (ds.observed(r, anchor))
      out.row_bin[r] = bin_of(ds.value(r, anchor), out.lo, out.hi, n_bins);
  return out;
}

}  // namespace

std::string to_string(Mechanism m) { return m == Mechanism::MCAR ? "MCAR" : "MAR"; }

Mechanism mechanism_from_string(std::string_view s) {
  std::string up(s);
  for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "MCAR") return Mechanism::MCAR;
  if (up == "MAR") return Mechanism::MAR;
  throw ConfigError("unknown mechanism '" + std::string(s) +
                    "' (expected MCAR or MAR)");
}

void AmputeSpec::validate() const {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ConfigError("missingness rate must lie in [0, 1)");
  if (n_bins < 1) throw ConfigError("n_bins must be positive");
  if (mechanism == Mechanism::MAR && anchor_column.empty())
    throw ConfigError("MAR requires an anchor column");
}

std::vector<int> weighted_sample_without_replacement(
    const std::vector<double>& weights, int k, Rng& rng) {
  const int n = static_cast<int>(weights.size());
  if (k < 0 || k > n)
    throw PreconditionError("cannot sample " + std::to_string(k) + " of " +
                            std::to_string(n) + " items");
  if (k == 0) return {};
  for (double w : weights)
    if (!(w > 0.0)) throw PreconditionError("sampling weights must be positive");

  // Efraimidis–Spirakis: the k largest keys log(u)/w form a weighted sample
  // without replacement.
  std::vector<std::pair<double, int>> keys(n);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    while (u == 0.0) u = rng.uniform();
    keys[i] = {std::log(u) / weights[i], i};
  }
  std::nth_element(keys.begin(), keys.begin() + (k - 1), keys.end(),
                   [](const auto& a, const auto& b) {
                     return a.first > b.first ||
                            (a.first == b.first && a.second < b.second);
                   });
  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) out[i] = keys[i].second;
  std::sort(out.begin(), out.end());
  return out;
}

Dataset induce_mcar(const Dataset& ds, const AmputeSpec& spec) {
  spec.validate();
  const auto targets = resolve_targets(ds, spec);
  Dataset out = ds;
  if (spec.rate == 0.0) return out;
  Rng rng(spec.seed);
  for (int c : targets) {
    if (cluster_level(ds, c, spec)) {
      for (int j = 0; j < ds.n_clusters(); ++j)
        if (rng.uniform() < spec.rate)
          for (int r : ds.cluster_rows()[j]) out.mask_cell(r, c);
    } else {
      for (int r = 0; r < ds.n_rows(); ++r)
        if (rng.uniform() < spec.rate) out.mask_cell(r, c);
    }
  }
  return out;
}

Dataset induce_mar(const Dataset& ds, const AmputeSpec& spec) {
  spec.validate();
  const auto targets = resolve_targets(ds, spec);
  const int anchor = ds.col(spec.anchor_column);
  if (ds.missing_count(anchor) > 0)
    throw PreconditionError("anchor column '" + spec.anchor_column +
                            "' already has missing cells");
  Dataset out = ds;
  if (spec.rate == 0.0) return out;
  Rng rng(spec.seed);

  // The anchor itself (when targeted) is masked MCAR; everything downstream
  // conditions on what remains observed.
  const bool anchor_targeted =
      std::find(targets.begin(), targets.end(), anchor) != targets.end();
  if (anchor_targeted) {
    const int n = ds.n_rows();
    std::vector<std::uint8_t> drop(n);
    bool any_left = false;
    for (int attempt = 0; attempt < kAnchorRetries && !any_left; ++attempt) {
      for (int r = 0; r < n; ++r) {
        drop[r] = rng.uniform() < spec.rate;
        if (!drop[r]) any_left = true;
      }
    }
    if (!any_left)
      throw SamplingError("anchor column lost every value in " +
                          std::to_string(kAnchorRetries) + " attempts");
    for (int r = 0; r < n; ++r)
      if (drop[r]) out.mask_cell(r, anchor);
  }

  const AnchorBins bins = compute_anchor_bins(out, anchor, spec.n_bins);

  for (int c : targets) {
    if (c == anchor) continue;
    // Fresh bin weights per column.
    std::vector<double> bin_weight(spec.n_bins, 1.0);
    if (!spec.equal_bin_weights)
      for (int b = 0; b < spec.n_bins; ++b) bin_weight[b] = rng.uniform();
    for (double& w : bin_weight)
      if (w == 0.0) w = std::numeric_limits<double>::min();
    const double avg_weight =
        std::accumulate(bin_weight.begin(), bin_weight.end(), 0.0) /
        static_cast<double>(spec.n_bins);

    if (cluster_level(ds, c, spec)) {
      const int J = ds.n_clusters();
      std::vector<double> w(J, avg_weight);
      for (int j = 0; j < J; ++j) {
        // Modal observed anchor bin of the cluster; ties resolve to the
        // lowest bin, clusters with no observed anchor keep the average.
        std::vector<int> count(spec.n_bins, 0);
        int best = -1;
        for (int r : ds.cluster_rows()[j])
          if (bins.row_bin[r] >= 0) ++count[bins.row_bin[r]];
        for (int b = 0; b < spec.n_bins; ++b)
          if (count[b] > 0 && (best < 0 || count[b] > count[best])) best = b;
        if (best >= 0) w[j] = bin_weight[best];
      }
      const int k = static_cast<int>(std::llround(spec.rate * J));
      for (int j : weighted_sample_without_replacement(w, k, rng))
        for (int r : ds.cluster_rows()[j]) out.mask_cell(r, c);
    } else {
      const int n = ds.n_rows();
      std::vector<double> w(n, avg_weight);
      for (int r = 0; r < n; ++r)
        if (bins.row_bin[r] >= 0) w[r] = bin_weight[bins.row_bin[r]];
      const int k = static_cast<int>(std::llround(spec.rate * n));
      for (int r : weighted_sample_without_replacement(w, k, rng))
        out.mask_cell(r, c);
    }
  }
  return out;
}

Dataset ampute(const Dataset& ds, const AmputeSpec& spec) {
  return spec.mechanism == Mechanism::MCAR ? induce_mcar(ds, spec)
                                           : induce_mar(ds, spec);
}

MissingProfile missing_profile(const Dataset& ds) {
  MissingProfile p;
  long total = 0;
  for (int c = 0; c < ds.n_cols(); ++c) {
    const int k = ds.missing_count(c);
    total += k;
    p.per_column.emplace_back(ds.name(c),
                              static_cast<double>(k) / ds.n_rows());
  }
  p.overall = ds.n_cols() == 0
                  ? 0.0
                  : static_cast<double>(total) /
                        (static_cast<double>(ds.n_rows()) * ds.n_cols());
  return p;
}

}  // namespace mlmi

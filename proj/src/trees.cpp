#include "mlmi/trees.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "mlmi/errors.hpp"

namespace mlmi {

namespace {

// Squared-error loss throughout: every row carries unit curvature, so the
// second-order sums reduce to row counts and only the gradient is stored.
struct GrowSpec {
  double lambda = 0.0;
  double gamma = 0.0;
  int min_leaf = 1;
  int max_depth = 0;
  int mtry = 0;  // resolved by the caller, 1..p
};

// Scratch shared by all trees of one ensemble fit. Sorted row lists are kept
// per feature and partitioned at each split (ping-pong between two buffers),
// so a tree never sorts: one global presort per ensemble is filtered per
// tree.
struct Workspace {
  std::vector<std::int32_t> local_of_row;  // global row -> local index, -1 outside
  std::vector<double> fv;                  // local feature values, stride n
  std::vector<double> g;                   // local gradients
  std::vector<std::int32_t> ord_a, ord_b;  // per-feature sorted locals, stride n
  std::vector<std::uint8_t> side;          // split membership per local row
  std::vector<int> feat_perm;              // feature draw scratch
  std::vector<int> row_perm;               // subsample draw scratch
  std::vector<int> sample;                 // current tree's training rows

  void ensure(int n_total, int n, int p) {
    if (static_cast<int>(local_of_row.size()) < n_total)
      local_of_row.assign(n_total, -1);
    const std::size_t pn = static_cast<std::size_t>(p) * n;
    if (fv.size() < pn) {
      fv.resize(pn);
      ord_a.resize(pn);
      ord_b.resize(pn);
    }
    if (static_cast<int>(g.size()) < n) {
      g.resize(n);
      side.resize(n);
    }
    if (static_cast<int>(feat_perm.size()) < p) feat_perm.resize(p);
  }
};

// Global presort: for each feature, the fitting rows ordered by value (ties
// keep the given row order). Built once per ensemble.
using Presort = std::vector<std::vector<std::int32_t>>;

Presort build_presort(const FeatureMatrix& X, const std::vector<int>& rows) {
  Presort ps(X.size());
  for (std::size_t f = 0; f < X.size(); ++f) {
    auto& ord = ps[f];
    ord.assign(rows.begin(), rows.end());
    const double* v = X[f].data();
    std::stable_sort(ord.begin(), ord.end(),
                     [v](std::int32_t a, std::int32_t b) { return v[a] < v[b]; });
  }
  return ps;
}

struct NodeTask {
  int node;
  int lo, hi;
  int depth;
  double G;
  std::uint8_t flip;  // which buffer currently holds this node's segments
};

int resolve_mtry(int requested, int p) {
  if (requested <= 0) {
    const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(p))));
    return std::clamp(m, 1, p);
  }
  return std::min(requested, p);
}

// Grows one tree over ws.sample (global rows). g is indexed by global row.
// Uses the presort when given, otherwise sorts locally.
std::vector<TreeNode> grow(const FeatureMatrix& X, const double* g,
                           const GrowSpec& spec, Rng& rng,
                           const Presort* presort, Workspace& ws) {
  const int p = static_cast<int>(X.size());
  const int n = static_cast<int>(ws.sample.size());
  const auto& rows = ws.sample;

  for (int i = 0; i < n; ++i) ws.local_of_row[rows[i]] = i;
  double G0 = 0.0;
  for (int i = 0; i < n; ++i) {
    ws.g[i] = g[rows[i]];
    G0 += ws.g[i];
  }
  for (int f = 0; f < p; ++f) {
    double* fvf = &ws.fv[static_cast<std::size_t>(f) * n];
    const double* col = X[f].data();
    for (int i = 0; i < n; ++i) fvf[i] = col[rows[i]];
    std::int32_t* ord = &ws.ord_a[static_cast<std::size_t>(f) * n];
    if (presort) {
      int k = 0;
      for (std::int32_t r : (*presort)[f]) {
        const std::int32_t li = ws.local_of_row[r];
        if (li >= 0) ord[k++] = li;
      }
    } else {
      std::iota(ord, ord + n, 0);
      std::stable_sort(ord, ord + n, [fvf](std::int32_t a, std::int32_t b) {
        return fvf[a] < fvf[b];
      });
    }
  }
  for (int i = 0; i < n; ++i) ws.local_of_row[rows[i]] = -1;

  const auto score = [&spec](double G, double cnt) {
    return G * G / (cnt + spec.lambda);
  };

  std::vector<TreeNode> nodes;
  nodes.reserve(64);
  std::vector<NodeTask> stack;
  nodes.push_back({});
  stack.push_back({0, 0, n, 0, G0, 0});

  while (!stack.empty()) {
    const NodeTask task = stack.back();
    stack.pop_back();
    const int count = task.hi - task.lo;
    {
      TreeNode& self = nodes[task.node];
      self.n_rows = count;
      self.value = -task.G / (count + spec.lambda);
    }
    const bool depth_ok = spec.max_depth == 0 || task.depth < spec.max_depth;
    if (!depth_ok || count < 2 * spec.min_leaf) continue;

    std::int32_t* cur = (task.flip ? ws.ord_b : ws.ord_a).data();
    std::int32_t* nxt = (task.flip ? ws.ord_a : ws.ord_b).data();

    int n_cand = spec.mtry;
    int* cand = ws.feat_perm.data();
    std::iota(cand, cand + p, 0);
    if (spec.mtry < p) {
      for (int i = 0; i < n_cand; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(p - i)));
        std::swap(cand[i], cand[j]);
      }
    } else {
      n_cand = p;
    }

    double best_gain = 0.0;
    int best_f = -1, best_cnt = 0;
    double best_thr = 0.0;
    const double parent_score = score(task.G, count);
    for (int ci = 0; ci < n_cand; ++ci) {
      const int f = cand[ci];
      const double* fvf = &ws.fv[static_cast<std::size_t>(f) * n];
      const std::int32_t* ord = cur + static_cast<std::size_t>(f) * n;
      double GL = 0.0;
      for (int pos = task.lo; pos + 1 < task.hi; ++pos) {
        const std::int32_t i = ord[pos];
        GL += ws.g[i];
        const double v = fvf[i];
        const double vn = fvf[ord[pos + 1]];
        if (!(vn > v)) continue;
        const int cnt_l = pos - task.lo + 1;
        if (cnt_l < spec.min_leaf || count - cnt_l < spec.min_leaf) continue;
        const double gain =
            0.5 * (score(GL, cnt_l) + score(task.G - GL, count - cnt_l) -
                   parent_score) -
            spec.gamma;
        if (gain <= 0.0) continue;
        const double thr = split_threshold(v, vn);
        if (gain > best_gain ||
            (gain == best_gain &&
             (f < best_f || (f == best_f && thr < best_thr)))) {
          best_gain = gain;
          best_f = f;
          best_thr = thr;
          best_cnt = cnt_l;
        }
      }
    }
    if (best_f < 0) continue;

    // Membership comes straight from the winning feature's scan prefix, so
    // the partition is exact even at threshold-rounding edges.
    double GL = 0.0;
    {
      const std::int32_t* ord = cur + static_cast<std::size_t>(best_f) * n;
      for (int pos = task.lo; pos < task.hi; ++pos) {
        const std::int32_t i = ord[pos];
        const bool right = pos - task.lo >= best_cnt;
        ws.side[i] = right;
        if (!right) GL += ws.g[i];
      }
    }
    for (int f = 0; f < p; ++f) {
      const std::int32_t* src = cur + static_cast<std::size_t>(f) * n;
      std::int32_t* dst = nxt + static_cast<std::size_t>(f) * n;
      int a = task.lo, b = task.lo + best_cnt;
      for (int pos = task.lo; pos < task.hi; ++pos) {
        const std::int32_t i = src[pos];
        dst[ws.side[i] ? b++ : a++] = i;
      }
    }

    const int left = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes.push_back({});
    TreeNode& me = nodes[task.node];
    me.feature = best_f;
    me.threshold = best_thr;
    me.left = left;
    me.right = left + 1;
    const std::uint8_t child_flip = task.flip ^ 1;
    stack.push_back({left + 1, task.lo + best_cnt, task.hi, task.depth + 1,
                     task.G - GL, child_flip});
    stack.push_back({left, task.lo, task.lo + best_cnt, task.depth + 1, GL,
                     child_flip});
  }
  return nodes;
}

void check_inputs(const FeatureMatrix& X, const std::vector<double>& y,
                  const std::vector<int>& rows) {
  if (X.empty()) throw PreconditionError("tree fit needs at least one feature");
  if (rows.empty()) throw PreconditionError("tree fit needs at least one row");
  const std::size_t n_total = X[0].size();
  for (const auto& col : X)
    if (col.size() != n_total)
      throw PreconditionError("feature columns have unequal lengths");
  if (y.size() != n_total)
    throw PreconditionError("response length does not match features");
  for (int r : rows)
    if (r < 0 || static_cast<std::size_t>(r) >= n_total)
      throw PreconditionError("row index out of range");
}

// Draws k of n local positions without replacement and returns them sorted.
void sample_positions(int n, int k, Rng& rng, std::vector<int>& perm,
                      std::vector<int>& out) {
  perm.resize(n);
  std::iota(perm.begin(), perm.end(), 0);
  out.resize(k);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(perm[i], perm[j]);
    out[i] = perm[i];
  }
  std::sort(out.begin(), out.end());
}

// Row-major gather of the requested rows; makes batched tree walks cache
// friendly (one row's features share a cache line or two).
std::vector<double> gather_rows(const FeatureMatrix& X,
                                const std::vector<int>& rows) {
  const std::size_t p = X.size();
  std::vector<double> flat(rows.size() * p);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t f = 0; f < p; ++f) flat[i * p + f] = X[f][rows[i]];
  return flat;
}

double walk(const std::vector<TreeNode>& nodes, const double* feat) {
  int i = 0;
  for (;;) {
    const TreeNode& nd = nodes[i];
    if (nd.feature < 0) return nd.value;
    i = feat[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
}

}  // namespace

double split_threshold(double lo, double hi) {
  const double mid = lo + 0.5 * (hi - lo);
  return mid < hi ? mid : lo;
}

double RegressionTree::predict_row(const FeatureMatrix& X, int row) const {
  int i = 0;
  for (;;) {
    const TreeNode& nd = nodes_[i];
    if (nd.feature < 0) return nd.value;
    i = X[nd.feature][row] <= nd.threshold ? nd.left : nd.right;
  }
}

int RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int d = 0;
  while (!stack.empty()) {
    auto [i, dep] = stack.back();
    stack.pop_back();
    d = std::max(d, dep);
    if (nodes_[i].feature >= 0) {
      stack.push_back({nodes_[i].left, dep + 1});
      stack.push_back({nodes_[i].right, dep + 1});
    }
  }
  return d;
}

RegressionTree fit_tree(const FeatureMatrix& X, const std::vector<double>& y,
                        const std::vector<int>& rows, const TreeParams& params,
                        Rng& rng) {
  check_inputs(X, y, rows);
  if (params.min_leaf < 1) throw PreconditionError("min_leaf must be >= 1");
  const int p = static_cast<int>(X.size());
  GrowSpec spec;
  spec.min_leaf = params.min_leaf;
  spec.max_depth = params.max_depth;
  spec.mtry = resolve_mtry(params.mtry, p);

  const std::size_t n_total = X[0].size();
  std::vector<double> g(n_total, 0.0);
  for (int r : rows) g[r] = -y[r];
  Workspace ws;
  ws.ensure(static_cast<int>(n_total), static_cast<int>(rows.size()), p);
  ws.sample = rows;
  return RegressionTree(grow(X, g.data(), spec, rng, nullptr, ws));
}

Forest fit_forest(const FeatureMatrix& X, const std::vector<double>& y,
                  const std::vector<int>& rows, const ForestParams& params,
                  Rng& rng) {
  check_inputs(X, y, rows);
  if (params.num_trees < 1) throw PreconditionError("num_trees must be >= 1");
  if (!(params.sample_fraction > 0.0 && params.sample_fraction <= 1.0))
    throw PreconditionError("sample_fraction must lie in (0, 1]");
  const int p = static_cast<int>(X.size());
  const int n = static_cast<int>(rows.size());
  const std::size_t n_total = X[0].size();

  GrowSpec spec;
  spec.min_leaf = params.tree.min_leaf;
  spec.max_depth = params.tree.max_depth;
  spec.mtry = resolve_mtry(params.tree.mtry, p);

  std::vector<double> g(n_total, 0.0);
  for (int r : rows) g[r] = -y[r];
  const Presort presort = params.replace ? Presort{} : build_presort(X, rows);
  const int n_sub =
      std::max(1, static_cast<int>(std::floor(params.sample_fraction * n)));

  Forest model;
  model.params = params;
  model.trees.reserve(params.num_trees);
  Workspace ws;
  ws.ensure(static_cast<int>(n_total), n, p);
  const std::uint64_t base = rng.next();
  std::vector<int> picked;
  for (int t = 0; t < params.num_trees; ++t) {
    Rng tree_rng(derive_seed(base, {static_cast<std::uint64_t>(t)}));
    ws.sample.clear();
    if (params.replace) {
      // Duplicate rows defeat the shared presort; such trees sort locally.
      for (int i = 0; i < n_sub; ++i)
        ws.sample.push_back(rows[tree_rng.below(static_cast<std::uint64_t>(n))]);
      model.trees.emplace_back(grow(X, g.data(), spec, tree_rng, nullptr, ws));
      continue;
    }
    if (n_sub == n) {
      ws.sample = rows;
    } else {
      sample_positions(n, n_sub, tree_rng, ws.row_perm, picked);
      for (int i : picked) ws.sample.push_back(rows[i]);
    }
    model.trees.emplace_back(grow(X, g.data(), spec, tree_rng, &presort, ws));
  }
  return model;
}

BoostedModel fit_boosted(const FeatureMatrix& X, const std::vector<double>& y,
                         const std::vector<int>& rows, const BoostParams& params,
                         Rng& rng) {
  check_inputs(X, y, rows);
  if (params.n_rounds < 1) throw PreconditionError("n_rounds must be >= 1");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0))
    throw PreconditionError("subsample must lie in (0, 1]");
  if (params.lambda < 0.0) throw PreconditionError("lambda must be >= 0");
  const int p = static_cast<int>(X.size());
  const int n = static_cast<int>(rows.size());
  const std::size_t n_total = X[0].size();

  GrowSpec spec;
  spec.lambda = params.lambda;
  spec.gamma = params.gamma;
  spec.min_leaf = params.min_leaf;
  spec.max_depth = params.max_depth;
  spec.mtry = p;  // boosting considers every feature at every node

  BoostedModel model;
  model.eta = params.eta;
  double base_score = 0.0;
  for (int r : rows) base_score += y[r];
  base_score /= n;
  model.base_score = base_score;
  model.trees.reserve(params.n_rounds);

  std::vector<double> fitted(n, base_score);
  std::vector<double> g(n_total, 0.0);
  const Presort presort = build_presort(X, rows);
  const int n_sub = std::max(1, static_cast<int>(std::floor(params.subsample * n)));
  Workspace ws;
  ws.ensure(static_cast<int>(n_total), n, p);
  const std::uint64_t base = rng.next();
  std::vector<int> picked;
  const std::vector<double> row_feat = gather_rows(X, rows);
  for (int t = 0; t < params.n_rounds; ++t) {
    Rng round_rng(derive_seed(base, {static_cast<std::uint64_t>(t)}));
    for (int i = 0; i < n; ++i) g[rows[i]] = fitted[i] - y[rows[i]];
    ws.sample.clear();
    if (n_sub == n) {
      ws.sample = rows;
    } else {
      sample_positions(n, n_sub, round_rng, ws.row_perm, picked);
      for (int i : picked) ws.sample.push_back(rows[i]);
    }
    RegressionTree tree(grow(X, g.data(), spec, round_rng, &presort, ws));
    for (int i = 0; i < n; ++i)
      fitted[i] += params.eta * walk(tree.nodes(), &row_feat[i * p]);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double predict_row(const Forest& model, const FeatureMatrix& X, int row) {
  double s = 0.0;
  for (const auto& t : model.trees) s += t.predict_row(X, row);
  return s / static_cast<double>(model.trees.size());
}

double predict_row(const BoostedModel& model, const FeatureMatrix& X, int row) {
  double s = model.base_score;
  for (const auto& t : model.trees) s += model.eta * t.predict_row(X, row);
  return s;
}

std::vector<double> predict(const RegressionTree& model, const FeatureMatrix& X,
                            const std::vector<int>& rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[i] = model.predict_row(X, rows[i]);
  return out;
}

std::vector<double> predict(const Forest& model, const FeatureMatrix& X,
                            const std::vector<int>& rows) {
  const std::size_t p = X.size();
  const std::vector<double> flat = gather_rows(X, rows);
  std::vector<double> out(rows.size(), 0.0);
  for (const auto& t : model.trees) {
    const auto& nodes = t.nodes();
    for (std::size_t i = 0; i < rows.size(); ++i)
      out[i] += walk(nodes, &flat[i * p]);
  }
  const double inv = 1.0 / static_cast<double>(model.trees.size());
  for (auto& v : out) v *= inv;
  return out;
}

std::vector<double> predict(const BoostedModel& model, const FeatureMatrix& X,
                            const std::vector<int>& rows) {
  const std::size_t p = X.size();
  const std::vector<double> flat = gather_rows(X, rows);
  std::vector<double> out(rows.size(), model.base_score);
  for (const auto& t : model.trees) {
    const auto& nodes = t.nodes();
    for (std::size_t i = 0; i < rows.size(); ++i)
      out[i] += model.eta * walk(nodes, &flat[i * p]);
  }
  return out;
}

}  // namespace mlmi

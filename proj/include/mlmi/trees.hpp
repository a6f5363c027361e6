#pragma once

#include <cstdint>
#include <vector>

#include "mlmi/rng.hpp"

namespace mlmi {

// Column-major design: features[f][row]. All fitting functions address rows
// through an explicit index list so callers never have to copy submatrices.
using FeatureMatrix = std::vector<std::vector<double>>;

struct TreeParams {
  int max_depth = 0;  // 0 = grow until pure or below size limits
  int min_leaf = 5;   // minimum rows in each child
  int mtry = 0;       // features tried per node; 0 = round(sqrt(p)), >=p = all
};

struct ForestParams {
  TreeParams tree;
  int num_trees = 300;
  double sample_fraction = 0.632;  // per-tree subsample fraction
  bool replace = false;            // true: sample rows with replacement
};

struct BoostParams {
  int n_rounds = 100;
  double eta = 0.3;
  double lambda = 1.0;  // L2 penalty on leaf values
  double gamma = 0.0;   // minimum gain to accept a split
  int max_depth = 6;
  int min_leaf = 1;
  double subsample = 1.0;  // per-round row fraction, without replacement
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf prediction (unscaled)
  int n_rows = 0;      // training rows that reached the node
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict_row(const FeatureMatrix& X, int row) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  bool empty() const { return nodes_.empty(); }
  int depth() const;

 private:
  std::vector<TreeNode> nodes_;
};

// Midpoint between consecutive distinct sorted values; falls back to the
// lower value if rounding would reach the upper one (rows equal to the
// threshold route left).
double split_threshold(double lo, double hi);

// Least-squares tree on y over the given rows: variance-reduction splits,
// strict improvement required, ties broken toward the lowest feature index
// and then the lowest threshold. rng feeds the per-node feature draws (not
// consumed when mtry covers all features).
RegressionTree fit_tree(const FeatureMatrix& X, const std::vector<double>& y,
                        const std::vector<int>& rows, const TreeParams& params,
                        Rng& rng);

struct Forest {
  std::vector<RegressionTree> trees;
  ForestParams params;
};

Forest fit_forest(const FeatureMatrix& X, const std::vector<double>& y,
                  const std::vector<int>& rows, const ForestParams& params,
                  Rng& rng);

struct BoostedModel {
  double base_score = 0.0;
  double eta = 0.3;
  std::vector<RegressionTree> trees;
};

// Second-order gradient boosting for squared error: per round a depth-capped
// tree is fit to the current residual gradients with leaf values
// -G/(H+lambda); eta scales every tree's contribution at prediction time.
BoostedModel fit_boosted(const FeatureMatrix& X, const std::vector<double>& y,
                         const std::vector<int>& rows, const BoostParams& params,
                         Rng& rng);

double predict_row(const Forest& model, const FeatureMatrix& X, int row);
double predict_row(const BoostedModel& model, const FeatureMatrix& X, int row);

std::vector<double> predict(const RegressionTree& model, const FeatureMatrix& X,
                            const std::vector<int>& rows);
std::vector<double> predict(const Forest& model, const FeatureMatrix& X,
                            const std::vector<int>& rows);
std::vector<double> predict(const BoostedModel& model, const FeatureMatrix& X,
                            const std::vector<int>& rows);

}  // namespace mlmi

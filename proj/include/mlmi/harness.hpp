#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mlmi/analysis.hpp"
#include "mlmi/config.hpp"
#include "mlmi/datagen.hpp"
#include "mlmi/imputers.hpp"
#include "mlmi/missingness.hpp"

namespace mlmi {

// One cell of the factorial study: cluster count x outcome model x
// missingness mechanism x missing-data rate, plus the execution knobs.
struct SimDesign {
  int n_clusters = 25;  // 25 or 50
  OutcomeModel model = OutcomeModel::RandomIntercept;
  Mechanism mechanism = Mechanism::MCAR;
  double rate = 0.3;  // 0.10 / 0.30 / 0.50; 0 runs the complete-data diagnostic
  std::vector<Method> methods = all_methods();
  int replications = 200;
  std::uint64_t base_seed = 0;

  int total_n = 1000;
  ImputeParams imputation;  // m and engine knobs; its seed field is unused
  int threads = 1;

  void validate() const;
  // Stable cell identifier, e.g. "cl25_ri_mcar_r30".
  std::string cell_name() const;
  // Root of the replication's seed stream; every random choice inside the
  // replication derives from it, so results depend only on the design and
  // base_seed, never on scheduling.
  std::uint64_t replication_seed(int rep_index) const;
  // The three derived streams of one replication. Reproducing a replication
  // outside the harness (e.g. through the file-based pipeline) means feeding
  // exactly these seeds to generate, ampute, and the method run.
  std::uint64_t gen_seed(int rep_index) const;
  std::uint64_t ampute_seed(int rep_index) const;
  std::uint64_t method_seed(int rep_index, Method method) const;
  GenConfig gen_config(std::uint64_t seed) const;
};

// What one method produced within one replication.
struct MethodOutcome {
  bool ok = false;
  std::string error;  // reason code when !ok
  int n_fits = 0;     // converged fits that entered pooling
  PooledResult pooled;
};

struct ReplicationResult {
  int rep_index = 0;
  std::vector<std::pair<Method, MethodOutcome>> per_method;  // design order
  const MethodOutcome& outcome(Method m) const;
};

// Generate -> ampute -> impute/fit/pool once per method. Method-level
// problems are recorded in the outcome, not thrown.
ReplicationResult run_replication(const SimDesign& design, int rep_index);

struct ResultsRow {
  int n_clusters = 0;
  std::string model;
  std::string mechanism;
  double rate = 0.0;
  std::string method;
  std::string coefficient;
  double true_value = 0.0;
  double rejection_rate = 0.0;
  double bias = 0.0;
  double relative_bias = 0.0;
  double mc_se = 0.0;
  int n_converged = 0;
};

struct ResultsTable {
  std::vector<ResultsRow> rows;
};

inline constexpr const char* kResultsHeader =
    "n_clusters,model,mechanism,rate,method,coefficient,true_value,"
    "rejection_rate,bias,relative_bias,mc_se,n_converged";

void write_results_csv(const ResultsTable& table, const std::string& path);
ResultsTable read_results_csv(const std::string& path);

struct DesignOutcome {
  ResultsTable table;
  // Replications that produced no pooled result, per method, with reasons.
  std::vector<std::pair<Method, int>> n_failed;
  std::map<std::string, int> failure_reasons;
  double wall_seconds = 0.0;
};

// Runs every replication (up to design.threads workers), aggregates into the
// long-format table. More than 20% failed replications for any method aborts
// with a diagnostic.
DesignOutcome run_design(const SimDesign& design);

// Study-level configuration: one value list per factor, crossed into cells.
struct StudyConfig {
  std::string profile = "desk";  // "desk" or "paper"
  std::vector<int> n_clusters{25};
  std::vector<OutcomeModel> models{OutcomeModel::RandomIntercept};
  std::vector<Mechanism> mechanisms{Mechanism::MCAR};
  std::vector<double> rates{0.3};
  std::vector<Method> methods = all_methods();
  int replications = -1;  // -1: profile default
  int num_trees = -1;     // -1: profile default
  int n_rounds = -1;      // -1: profile default
  int total_n = 1000;
  int m = 5;
  std::uint64_t base_seed = 0;
  int threads = 1;
  std::string out_dir = "results";

  void validate() const;
  // Profile defaults applied to every -1 field (desk: 200 replications,
  // 50 trees, 50 rounds; paper: 1000 replications, 300 trees, 100 rounds).
  StudyConfig resolved() const;
  ImputeParams imputation() const;      // call on a resolved config
  std::vector<SimDesign> expand() const;  // canonical cell order
};

// Flat key=value parsing; unknown keys are errors. Documented keys:
// profile, n_clusters, model, mechanism, rate, methods, replications,
// num_trees, n_rounds, total_n, m, seed, threads, out.
StudyConfig study_from_key_values(const KeyValueFile& kv);
StudyConfig study_from_file(const std::string& path);

struct StudyOutcome {
  ResultsTable merged;
  std::vector<std::string> cell_files;
  double wall_seconds = 0.0;
};

// Runs every cell, writes cell_<name>.csv per cell plus results.csv and
// manifest.txt under cfg.out_dir, and returns the merged table.
StudyOutcome run_study(const StudyConfig& cfg);

// Pivot tables mirroring the report groupings: rejection rates of the
// true-zero coefficients, rejection rates (power) of the active ones, bias
// of the true-zero ones, relative bias of the active ones.
void write_summaries(const ResultsTable& table, const std::string& out_dir);

}  // namespace mlmi

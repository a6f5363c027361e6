// Command-line front end: generate | ampute | impute | analyze | simulate |
// summarize, chained through CSV files so every stage of the study can be
// reproduced or inspected in isolation.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mlmi/analysis.hpp"
#include "mlmi/config.hpp"
#include "mlmi/datagen.hpp"
#include "mlmi/dataset.hpp"
#include "mlmi/errors.hpp"
#include "mlmi/harness.hpp"
#include "mlmi/imputers.hpp"
#include "mlmi/missingness.hpp"
#include "mlmi/rng.hpp"

namespace {

using namespace mlmi;

struct GenerateArgs {
  std::string out;
  std::uint64_t seed = 0;
  int clusters = 25;
  int n = 1000;
  std::string model = "ri";
  double icc_lo = 0.1;
  double icc_hi = 0.5;
};

struct AmputeArgs {
  std::string in;
  std::string out;
  std::string mechanism = "mcar";
  double rate = 0.3;
  std::uint64_t seed = 0;
  std::string anchor = "X1";
  int bins = 6;
  std::vector<std::string> columns;
  bool cellwise = false;
};

struct ImputeArgs {
  std::string in;
  std::string out;
  std::string method;
  int m = 5;
  std::uint64_t seed = 0;
  int trees = -1;
  int rounds = -1;
  int sweeps = -1;
  int pmm_k = -1;
  bool no_outcome = false;
};

struct AnalyzeArgs {
  std::string in;
  std::string out;
  std::string model = "ri";
  double alpha = 0.05;
};

struct SimulateArgs {
  std::string config;
  std::string out;
  std::string profile;
  std::vector<std::string> methods;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  int print_seeds = -1;
};

struct SummarizeArgs {
  std::string in;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  GenConfig cfg;
  cfg.n_clusters = a.clusters;
  cfg.total_n = a.n;
  cfg.model = outcome_model_from_string(a.model);
  cfg.icc_lo = a.icc_lo;
  cfg.icc_hi = a.icc_hi;
  cfg.seed = a.seed;
  cfg.validate();
  write_csv(gen_dataset(cfg), a.out);
  std::cout << "wrote " << a.out << " (" << cfg.total_n << " rows, "
            << cfg.n_clusters << " clusters)\n";
  return 0;
}

int cmd_ampute(const AmputeArgs& a) {
  AmputeSpec spec;
  spec.mechanism = mechanism_from_string(a.mechanism);
  spec.rate = a.rate;
  spec.seed = a.seed;
  spec.anchor_column = a.anchor;
  spec.n_bins = a.bins;
  spec.target_columns = a.columns;
  spec.level2_cellwise = a.cellwise;
  const Dataset ds = read_csv(a.in);
  const Dataset amputed = ampute(ds, spec);
  write_csv(amputed, a.out);
  const MissingProfile prof = missing_profile(amputed);
  std::cout << "wrote " << a.out << " (overall missing fraction "
            << format_double(prof.overall) << ")\n";
  return 0;
}

int cmd_impute(const ImputeArgs& a) {
  const Method method = method_from_string(a.method);
  ImputeParams params;
  params.m = a.m;
  params.seed = a.seed;
  if (a.trees > 0) params.forest.num_trees = a.trees;
  if (a.rounds > 0) params.boost.n_rounds = a.rounds;
  if (a.sweeps > 0) {
    params.rf_maxiter = a.sweeps;
    params.boost_maxit = a.sweeps;
    params.ce_maxit = a.sweeps;
  }
  if (a.pmm_k >= 0) {
    params.rf_pmm_k = a.pmm_k;
    params.boost_pmm_k = a.pmm_k;
    params.ce_pmm_k = a.pmm_k;
  }
  params.use_outcome = !a.no_outcome;
  const Dataset ds = read_csv(a.in);
  Rng rng(params.seed);
  const ImputationSet set = run_method(method, ds, params, rng);
  save_imputation_set(set, a.out);
  std::cout << "wrote " << set.completed.size() << " completed datasets to "
            << a.out << " (engine " << set.engine << ")\n";
  return 0;
}

int cmd_analyze(const AnalyzeArgs& a) {
  const OutcomeModel model = outcome_model_from_string(a.model);
  const ImputationSet set = load_imputation_set(a.in);
  std::vector<FitResult> fits;
  for (const Dataset& completed : set.completed) {
    FitResult fr = model == OutcomeModel::RandomIntercept
                       ? fit_lmm_ri(completed)
                       : fit_lmm_rs(completed);
    if (fr.converged) fits.push_back(std::move(fr));
  }
  if (fits.size() < 2)
    throw FitError("only " + std::to_string(fits.size()) + " of " +
                   std::to_string(set.completed.size()) +
                   " fits converged; pooling needs at least 2");
  const PooledResult pooled = pool_rubin(fits, a.alpha);

  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw IoError("cannot open '" + a.out + "' for writing");
  out << "coefficient,estimate,within,between,total,df,statistic,p_value,"
         "reject\n";
  for (const PooledCoef& c : pooled.coefs) {
    out << c.name << ',' << format_double(c.estimate) << ','
        << format_double(c.within) << ',' << format_double(c.between) << ','
        << format_double(c.total) << ',' << format_double(c.df) << ','
        << format_double(c.statistic) << ',' << format_double(c.p_value) << ','
        << (c.reject ? 1 : 0) << '\n';
  }
  std::cout << "wrote " << a.out << " (pooled over " << fits.size()
            << " fits)\n";
  return 0;
}

int cmd_simulate(const SimulateArgs& a) {
  StudyConfig cfg = study_from_file(a.config);
  if (!a.profile.empty()) {
    cfg.profile = a.profile;
    // A profile given on the command line re-resolves the three knobs it
    // governs unless the config pinned them explicitly.
    const KeyValueFile kv = read_key_value_file(a.config);
    if (!kv.has("replications")) cfg.replications = -1;
    if (!kv.has("num_trees")) cfg.num_trees = -1;
    if (!kv.has("n_rounds")) cfg.n_rounds = -1;
  }
  if (!a.methods.empty()) {
    cfg.methods.clear();
    for (const auto& name : a.methods)
      cfg.methods.push_back(method_from_string(name));
  }
  if (a.seed_set) cfg.base_seed = a.seed;
  if (a.threads > 0) cfg.threads = a.threads;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.print_seeds >= 0) {
    // Expose the derived seed streams so one replication can be reproduced
    // through the file-based generate/ampute/impute chain.
    cfg.validate();
    for (const SimDesign& d : cfg.resolved().expand()) {
      std::cout << "cell=" << d.cell_name() << " rep=" << a.print_seeds
                << " gen=" << d.gen_seed(a.print_seeds)
                << " ampute=" << d.ampute_seed(a.print_seeds);
      for (Method m : d.methods)
        std::cout << " method." << to_string(m) << "="
                  << d.method_seed(a.print_seeds, m);
      std::cout << "\n";
    }
    return 0;
  }
  const StudyOutcome outcome = run_study(cfg);
  std::cout << "wrote " << outcome.cell_files.size() << " cell tables + "
            << cfg.out_dir << "/results.csv in "
            << format_double(outcome.wall_seconds) << " s\n";
  return 0;
}

int cmd_summarize(const SummarizeArgs& a) {
  const ResultsTable table = read_results_csv(a.in);
  write_summaries(table, a.out);
  std::cout << "wrote summary pivots to " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level missing-data simulation laboratory"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* sg = app.add_subcommand(
      "generate", "Generate a complete two-level dataset as CSV");
  sg->add_option("--out", gen.out, "Output CSV path")->required();
  sg->add_option("--seed", gen.seed, "RNG seed");
  sg->add_option("--clusters", gen.clusters, "Number of clusters (25 or 50)");
  sg->add_option("--n", gen.n, "Total rows (balanced across clusters)");
  sg->add_option("--model", gen.model, "Outcome model: ri or rs");
  sg->add_option("--icc-lo", gen.icc_lo, "Lower intra-cluster correlation");
  sg->add_option("--icc-hi", gen.icc_hi, "Upper intra-cluster correlation");

  AmputeArgs amp;
  auto* sa =
      app.add_subcommand("ampute", "Mask cells of a complete dataset CSV");
  sa->add_option("--in", amp.in, "Input CSV")->required();
  sa->add_option("--out", amp.out, "Output CSV")->required();
  sa->add_option("--mechanism", amp.mechanism, "mcar or mar");
  sa->add_option("--rate", amp.rate, "Target missing rate in (0,1)");
  sa->add_option("--seed", amp.seed, "RNG seed");
  sa->add_option("--anchor", amp.anchor, "Conditioning column (mar)");
  sa->add_option("--bins", amp.bins, "Anchor bins (mar)");
  sa->add_option("--columns", amp.columns,
                 "Target columns (default: all covariates)")
      ->delimiter(',');
  sa->add_flag("--cellwise", amp.cellwise,
               "Mask level-2 columns per row instead of per cluster");

  ImputeArgs imp;
  auto* si = app.add_subcommand(
      "impute", "Multiply impute an incomplete CSV into a directory");
  si->add_option("--in", imp.in, "Input CSV with NA cells")->required();
  si->add_option("--out", imp.out, "Output directory")->required();
  si->add_option("--method", imp.method,
                 "ce_2level, rf, rf_pmm, rf_dummies, rf_pmm_dummies, boost, "
                 "or boost_dummies")
      ->required();
  si->add_option("--m", imp.m, "Completed datasets to draw");
  si->add_option("--seed", imp.seed, "RNG seed");
  si->add_option("--trees", imp.trees, "Trees per forest");
  si->add_option("--rounds", imp.rounds, "Boosting rounds");
  si->add_option("--sweeps", imp.sweeps, "Chained-equation sweeps");
  si->add_option("--pmm-k", imp.pmm_k, "Matching donor-pool size");
  si->add_flag("--no-outcome", imp.no_outcome,
               "Exclude the outcome from the imputation models");

  AnalyzeArgs ana;
  auto* sn = app.add_subcommand(
      "analyze", "Fit the mixed model on each completion and pool");
  sn->add_option("--in", ana.in, "Imputation-set directory")->required();
  sn->add_option("--out", ana.out, "Pooled-results CSV")->required();
  sn->add_option("--model", ana.model, "ri or rs");
  sn->add_option("--alpha", ana.alpha, "Test level");

  SimulateArgs sim;
  auto* ss = app.add_subcommand(
      "simulate", "Run a factorial study from a key=value config file");
  ss->add_option("--config", sim.config, "Config file")->required();
  ss->add_option("--out", sim.out, "Output directory (overrides config)");
  ss->add_option("--profile", sim.profile, "desk or paper (overrides config)");
  ss->add_option("--methods", sim.methods, "Method subset (overrides config)")
      ->delimiter(',');
  auto* seed_opt =
      ss->add_option("--seed", sim.seed, "Base seed (overrides config)");
  ss->add_option("--threads", sim.threads, "Worker threads (overrides config)");
  ss->add_option("--print-seeds", sim.print_seeds,
                 "Print each cell's derived seeds for this replication index "
                 "and exit");

  SummarizeArgs sum;
  auto* su = app.add_subcommand(
      "summarize", "Pivot a results table into report-style summaries");
  su->add_option("--in", sum.in, "results.csv path")->required();
  su->add_option("--out", sum.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  sim.seed_set = seed_opt->count() > 0;

  try {
    if (sg->parsed()) return cmd_generate(gen);
    if (sa->parsed()) return cmd_ampute(amp);
    if (si->parsed()) return cmd_impute(imp);
    if (sn->parsed()) return cmd_analyze(ana);
    if (ss->parsed()) return cmd_simulate(sim);
    if (su->parsed()) return cmd_summarize(sum);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

#include "mlmi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "mlmi/errors.hpp"

namespace mlmi {

namespace {

// Distinct stream tags inside one replication.
constexpr std::uint64_t kGenStream = 1;
constexpr std::uint64_t kAmputeStream = 2;
constexpr std::uint64_t kMethodStream = 3;

bool valid_rate(double rate) {
  return rate == 0.0 || rate == 0.10 || rate == 0.30 || rate == 0.50;
}

std::string reason_code(const std::exception& ex) {
  std::string s = ex.what();
  if (const auto nl = s.find('\n'); nl != std::string::npos) s.resize(nl);
  if (s.size() > 120) s.resize(120);
  return s;
}

std::string rate_suffix(double rate) {
  return "r" + std::to_string(static_cast<int>(std::lround(rate * 100)));
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void append_metrics_rows(ResultsTable& table, const SimDesign& design,
                         Method method,
                         const std::vector<CoefficientMetrics>& metrics,
                         int n_converged) {
  for (const CoefficientMetrics& cm : metrics) {
    ResultsRow row;
    row.n_clusters = design.n_clusters;
    row.model = to_string(design.model);
    row.mechanism = lower(to_string(design.mechanism));
    row.rate = design.rate;
    row.method = to_string(method);
    row.coefficient = cm.name;
    row.true_value = cm.true_value;
    row.rejection_rate = cm.rejection_rate;
    row.bias = cm.bias;
    row.relative_bias = cm.relative_bias;
    row.mc_se = cm.mc_se;
    row.n_converged = n_converged;
    table.rows.push_back(std::move(row));
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

// Pivot helper: one wide CSV per metric/coefficient-group combination.
void write_pivot(const ResultsTable& table, const std::string& path,
                 const std::vector<std::string>& coefs,
                 double ResultsRow::*field) {
  // Group rows by (cell, method) keeping first-encounter order.
  std::vector<std::string> keys;
  std::map<std::string, std::map<std::string, double>> cells;
  for (const ResultsRow& row : table.rows) {
    std::ostringstream pre;
    pre << row.n_clusters << ',' << row.model << ',' << row.mechanism << ','
        << format_double(row.rate) << ',' << row.method;
    const std::string key = pre.str();
    if (!cells.count(key)) keys.push_back(key);
    cells[key][row.coefficient] = row.*field;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "n_clusters,model,mechanism,rate,method";
  for (const std::string& c : coefs) out << ',' << c;
  out << '\n';
  for (const std::string& key : keys) {
    out << key;
    for (const std::string& c : coefs) {
      const auto& row = cells[key];
      const auto it = row.find(c);
      out << ',';
      if (it != row.end()) out << format_double(it->second);
    }
    out << '\n';
  }
}

std::string version_string() { return "0.1.0"; }

}  // namespace

void SimDesign::validate() const {
  if (n_clusters != 25 && n_clusters != 50)
    throw ConfigError("n_clusters must be 25 or 50");
  if (!valid_rate(rate))
    throw ConfigError("rate must be one of 0, 0.10, 0.30, 0.50");
  if (methods.empty()) throw ConfigError("methods must not be empty");
  std::set<Method> seen(methods.begin(), methods.end());
  if (seen.size() != methods.size())
    throw ConfigError("methods must not repeat");
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (total_n % n_clusters != 0)
    throw ConfigError("total_n must be divisible by n_clusters");
  imputation.validate();
}

std::string SimDesign::cell_name() const {
  return "cl" + std::to_string(n_clusters) + "_" + to_string(model) + "_" +
         lower(to_string(mechanism)) + "_" + rate_suffix(rate);
}

std::uint64_t SimDesign::replication_seed(int rep_index) const {
  return derive_seed(base_seed,
                     {static_cast<std::uint64_t>(n_clusters),
                      static_cast<std::uint64_t>(model),
                      static_cast<std::uint64_t>(mechanism),
                      static_cast<std::uint64_t>(std::lround(rate * 1000)),
                      static_cast<std::uint64_t>(rep_index)});
}

std::uint64_t SimDesign::gen_seed(int rep_index) const {
  return derive_seed(replication_seed(rep_index), {kGenStream});
}

std::uint64_t SimDesign::ampute_seed(int rep_index) const {
  return derive_seed(replication_seed(rep_index), {kAmputeStream});
}

std::uint64_t SimDesign::method_seed(int rep_index, Method method) const {
  return derive_seed(replication_seed(rep_index),
                     {kMethodStream, static_cast<std::uint64_t>(method)});
}

GenConfig SimDesign::gen_config(std::uint64_t seed) const {
  GenConfig cfg;
  cfg.n_clusters = n_clusters;
  cfg.total_n = total_n;
  cfg.model = model;
  cfg.seed = seed;
  return cfg;
}

const MethodOutcome& ReplicationResult::outcome(Method m) const {
  for (const auto& [method, mo] : per_method)
    if (method == m) return mo;
  throw PreconditionError("method not part of this replication: " + to_string(m));
}

ReplicationResult run_replication(const SimDesign& design, int rep_index) {
  design.validate();
  if (rep_index < 0 || rep_index >= design.replications)
    throw PreconditionError("replication index out of range");
  const Dataset full = gen_dataset(design.gen_config(design.gen_seed(rep_index)));
  Dataset holes;
  if (design.rate == 0.0) {
    holes = full;
  } else {
    AmputeSpec spec;
    spec.mechanism = design.mechanism;
    spec.rate = design.rate;
    spec.seed = design.ampute_seed(rep_index);
    holes = ampute(full, spec);
  }

  ReplicationResult out;
  out.rep_index = rep_index;
  for (Method method : design.methods) {
    MethodOutcome mo;
    try {
      // Keyed by the method itself so one method's stream is unaffected by
      // which other methods run alongside it.
      Rng rng(design.method_seed(rep_index, method));
      const ImputationSet set = run_method(method, holes, design.imputation, rng);
      std::vector<FitResult> fits;
      int failed_fits = 0;
      for (const Dataset& comp : set.completed) {
        try {
          FitResult fr = design.model == OutcomeModel::RandomIntercept
                             ? fit_lmm_ri(comp)
                             : fit_lmm_rs(comp);
          if (fr.converged)
            fits.push_back(std::move(fr));
          else
            ++failed_fits;
        } catch (const std::exception&) {
          ++failed_fits;
        }
      }
      if (fits.size() < 2) {
        mo.error = "too_few_converged_fits(" + std::to_string(fits.size()) +
                   "/" + std::to_string(set.completed.size()) + ")";
      } else {
        mo.pooled = pool_rubin(fits, 0.05);
        mo.n_fits = static_cast<int>(fits.size());
        mo.ok = true;
      }
    } catch (const std::exception& ex) {
      mo.error = reason_code(ex);
    }
    out.per_method.emplace_back(method, std::move(mo));
  }
  return out;
}

DesignOutcome run_design(const SimDesign& design) {
  design.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int reps = design.replications;

  std::vector<ReplicationResult> slots(reps);
  const int workers = std::min(design.threads, reps);
  if (workers <= 1) {
    for (int i = 0; i < reps; ++i) slots[i] = run_replication(design, i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < reps; i = next.fetch_add(1))
          slots[i] = run_replication(design, i);
      });
    for (std::thread& t : pool) t.join();
  }

  const auto truth = true_coefficients(design.gen_config(0));
  DesignOutcome out;
  for (Method method : design.methods) {
    std::vector<PooledResult> pooled;
    std::map<std::string, int> reasons;
    for (const ReplicationResult& rep : slots) {
      const MethodOutcome& mo = rep.outcome(method);
      if (mo.ok)
        pooled.push_back(mo.pooled);
      else
        ++reasons[mo.error];
    }
    const int failed = reps - static_cast<int>(pooled.size());
    out.n_failed.emplace_back(method, failed);
    for (const auto& [why, count] : reasons)
      out.failure_reasons[to_string(method) + ": " + why] += count;
    if (failed * 5 > reps) {
      std::ostringstream msg;
      msg << "method " << to_string(method) << " failed " << failed << "/"
          << reps << " replications (> 20%) in cell " << design.cell_name();
      for (const auto& [why, count] : reasons)
        msg << "\n  " << count << "x " << why;
      throw FitError(msg.str());
    }
    const std::vector<CoefficientMetrics> metrics = evaluate_metrics(pooled, truth);
    append_metrics_rows(out.table, design, method, metrics,
                        static_cast<int>(pooled.size()));
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void write_results_csv(const ResultsTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << kResultsHeader << '\n';
  for (const ResultsRow& r : table.rows) {
    out << r.n_clusters << ',' << r.model << ',' << r.mechanism << ','
        << format_double(r.rate) << ',' << r.method << ',' << r.coefficient
        << ',' << format_double(r.true_value) << ','
        << format_double(r.rejection_rate) << ',' << format_double(r.bias)
        << ',' << format_double(r.relative_bias) << ','
        << format_double(r.mc_se) << ',' << r.n_converged << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

ResultsTable read_results_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader)
    throw SchemaError(path + ": unexpected results header");
  ResultsTable table;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 12)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected 12 fields");
    ResultsRow r;
    r.n_clusters = parse_int_value("n_clusters", f[0]);
    r.model = f[1];
    r.mechanism = f[2];
    r.rate = parse_double_value("rate", f[3]);
    r.method = f[4];
    r.coefficient = f[5];
    r.true_value = parse_double_value("true_value", f[6]);
    r.rejection_rate = parse_double_value("rejection_rate", f[7]);
    r.bias = parse_double_value("bias", f[8]);
    r.relative_bias = parse_double_value("relative_bias", f[9]);
    r.mc_se = parse_double_value("mc_se", f[10]);
    r.n_converged = parse_int_value("n_converged", f[11]);
    table.rows.push_back(std::move(r));
  }
  return table;
}

void StudyConfig::validate() const {
  if (profile != "desk" && profile != "paper")
    throw ConfigError("profile must be desk or paper");
  if (n_clusters.empty() || models.empty() || mechanisms.empty() ||
      rates.empty() || methods.empty())
    throw ConfigError("every factor list needs at least one value");
  for (int j : n_clusters)
    if (j != 25 && j != 50) throw ConfigError("n_clusters must be 25 or 50");
  for (double r : rates)
    if (!valid_rate(r)) throw ConfigError("rate must be one of 0, 0.10, 0.30, 0.50");
  if (total_n < 1) throw ConfigError("total_n must be positive");
  if (m < 2) throw ConfigError("m must be at least 2");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

StudyConfig StudyConfig::resolved() const {
  StudyConfig r = *this;
  const bool paper = profile == "paper";
  if (r.replications < 0) r.replications = paper ? 1000 : 200;
  if (r.num_trees < 0) r.num_trees = paper ? 300 : 50;
  if (r.n_rounds < 0) r.n_rounds = paper ? 100 : 50;
  return r;
}

ImputeParams StudyConfig::imputation() const {
  ImputeParams p;
  p.m = m;
  if (num_trees > 0) p.forest.num_trees = num_trees;
  if (n_rounds > 0) p.boost.n_rounds = n_rounds;
  return p;
}

std::vector<SimDesign> StudyConfig::expand() const {
  validate();
  const StudyConfig cfg = resolved();
  std::vector<SimDesign> designs;
  for (int j : cfg.n_clusters)
    for (OutcomeModel model : cfg.models)
      for (Mechanism mech : cfg.mechanisms)
        for (double rate : cfg.rates) {
          SimDesign d;
          d.n_clusters = j;
          d.model = model;
          d.mechanism = mech;
          d.rate = rate;
          d.methods = cfg.methods;
          d.replications = cfg.replications;
          d.base_seed = cfg.base_seed;
          d.total_n = cfg.total_n;
          d.imputation = cfg.imputation();
          d.threads = cfg.threads;
          d.validate();
          designs.push_back(std::move(d));
        }
  return designs;
}

StudyConfig study_from_key_values(const KeyValueFile& kv) {
  StudyConfig cfg;
  for (const std::string& key : kv.order) {
    const std::string& value = kv.get(key);
    if (key == "profile") {
      cfg.profile = value;
    } else if (key == "n_clusters") {
      cfg.n_clusters.clear();
      for (const std::string& item : split_list(key, value))
        cfg.n_clusters.push_back(parse_int_value(key, item));
    } else if (key == "model") {
      cfg.models.clear();
      for (const std::string& item : split_list(key, value))
        cfg.models.push_back(outcome_model_from_string(item));
    } else if (key == "mechanism") {
      cfg.mechanisms.clear();
      for (const std::string& item : split_list(key, value))
        cfg.mechanisms.push_back(mechanism_from_string(item));
    } else if (key == "rate") {
      cfg.rates.clear();
      for (const std::string& item : split_list(key, value))
        cfg.rates.push_back(parse_double_value(key, item));
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const std::string& item : split_list(key, value))
        cfg.methods.push_back(method_from_string(item));
    } else if (key == "replications") {
      cfg.replications = parse_int_value(key, value);
    } else if (key == "num_trees") {
      cfg.num_trees = parse_int_value(key, value);
    } else if (key == "n_rounds") {
      cfg.n_rounds = parse_int_value(key, value);
    } else if (key == "total_n") {
      cfg.total_n = parse_int_value(key, value);
    } else if (key == "m") {
      cfg.m = parse_int_value(key, value);
    } else if (key == "seed") {
      try {
        cfg.base_seed = std::stoull(value);
      } catch (const std::exception&) {
        throw ConfigError("seed: not an unsigned integer: " + value);
      }
    } else if (key == "threads") {
      cfg.threads = parse_int_value(key, value);
    } else if (key == "out") {
      cfg.out_dir = value;
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

StudyConfig study_from_file(const std::string& path) {
  return study_from_key_values(read_key_value_file(path));
}

StudyOutcome run_study(const StudyConfig& raw) {
  raw.validate();
  const StudyConfig cfg = raw.resolved();
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create directory: " + cfg.out_dir);

  StudyOutcome out;
  std::vector<std::pair<std::string, std::string>> manifest;
  manifest.emplace_back("version", version_string());
  manifest.emplace_back("profile", cfg.profile);
  manifest.emplace_back("seed", std::to_string(cfg.base_seed));
  manifest.emplace_back("replications", std::to_string(cfg.replications));
  manifest.emplace_back("total_n", std::to_string(cfg.total_n));
  manifest.emplace_back("m", std::to_string(cfg.m));
  manifest.emplace_back("num_trees", std::to_string(cfg.num_trees));
  manifest.emplace_back("n_rounds", std::to_string(cfg.n_rounds));
  manifest.emplace_back("threads", std::to_string(cfg.threads));
  {
    std::string ms;
    for (Method m : cfg.methods) ms += (ms.empty() ? "" : ",") + to_string(m);
    manifest.emplace_back("methods", ms);
  }

  for (const SimDesign& design : cfg.expand()) {
    const DesignOutcome cell = run_design(design);
    const std::string file =
        (std::filesystem::path(cfg.out_dir) / ("cell_" + design.cell_name() + ".csv"))
            .string();
    write_results_csv(cell.table, file);
    out.cell_files.push_back(file);
    out.merged.rows.insert(out.merged.rows.end(), cell.table.rows.begin(),
                           cell.table.rows.end());
    manifest.emplace_back("wall_seconds." + design.cell_name(),
                          format_double(cell.wall_seconds));
    for (const auto& [method, failed] : cell.n_failed)
      if (failed > 0)
        manifest.emplace_back(
            "failed." + design.cell_name() + "." + to_string(method),
            std::to_string(failed));
  }

  write_results_csv(out.merged,
                    (std::filesystem::path(cfg.out_dir) / "results.csv").string());
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.emplace_back("wall_seconds.total", format_double(out.wall_seconds));
  write_key_value_file(
      (std::filesystem::path(cfg.out_dir) / "manifest.txt").string(), manifest);
  return out;
}

void write_summaries(const ResultsTable& table, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory: " + out_dir);
  const std::vector<std::string> nulls{"X4", "X5", "X6", "L4", "L5", "L6"};
  const std::vector<std::string> actives{"intercept", "X1", "X2", "X3",
                                         "L1", "L2", "L3"};
  const auto path = [&](const char* f) {
    return (std::filesystem::path(out_dir) / f).string();
  };
  write_pivot(table, path("type1_error.csv"), nulls, &ResultsRow::rejection_rate);
  write_pivot(table, path("power.csv"), actives, &ResultsRow::rejection_rate);
  write_pivot(table, path("bias_null.csv"), nulls, &ResultsRow::bias);
  write_pivot(table, path("relative_bias.csv"), actives,
              &ResultsRow::relative_bias);
}

}  // namespace mlmi

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mlmi/errors.hpp"

namespace mlmi {

enum class ColumnRole { Level1, Level2, Outcome, ClusterDummy };

std::string to_string(ColumnRole role);
ColumnRole column_role_from_string(std::string_view s);

// One named variable with a per-cell observation mask. A masked cell keeps no
// meaningful payload; accessors refuse to read it.
struct Column {
  std::string name;
  ColumnRole role = ColumnRole::Level1;
  std::vector<double> values;
  std::vector<std::uint8_t> observed;  // 1 = observed, 0 = missing

  Column() = default;
  Column(std::string name_, ColumnRole role_, std::vector<double> values_);
  Column(std::string name_, ColumnRole role_, std::vector<double> values_,
         std::vector<std::uint8_t> observed_);
};

// Rectangular two-level data frame: a cluster label per row plus value
// columns. Rows of one cluster need not be contiguous; cluster bookkeeping
// (sorted labels, per-cluster row lists) is maintained internally.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<int> cluster_ids, std::vector<Column> columns);

  int n_rows() const { return static_cast<int>(cluster_ids_.size()); }
  int n_cols() const { return static_cast<int>(columns_.size()); }
  int n_clusters() const { return static_cast<int>(labels_.size()); }

  const std::vector<int>& cluster_ids() const { return cluster_ids_; }
  // Distinct labels in ascending order.
  const std::vector<int>& cluster_labels() const { return labels_; }
  // Per-row position of the row's label within cluster_labels().
  const std::vector<int>& cluster_index() const { return cluster_of_row_; }
  // Row indices per cluster, ordered as cluster_labels().
  const std::vector<std::vector<int>>& cluster_rows() const { return rows_of_; }

  const Column& column(int c) const { return columns_.at(c); }
  const std::string& name(int c) const { return columns_.at(c).name; }
  ColumnRole role(int c) const { return columns_.at(c).role; }
  void set_role(int c, ColumnRole role) { columns_.at(c).role = role; }

  // Column lookup by name; col() throws SchemaError, find_col() returns -1.
  int col(std::string_view name) const;
  int find_col(std::string_view name) const;

  bool observed(int r, int c) const { return columns_[c].observed[r] != 0; }

  // Value of an observed cell; reading a masked cell is a logic error.
  double value(int r, int c) const;

  // Mask-aware read used by imputation engines working on filled frames.
  double raw(int r, int c) const { return columns_[c].values[r]; }

  void set_cell(int r, int c, double v);
  void mask_cell(int r, int c);
  // Writes a provisional value into a masked cell without clearing the
  // missingness mask, so engines can keep "originally missing" queryable
  // while chaining over filled frames.
  void fill_cell(int r, int c, double v);

  void add_column(Column col);
  void drop_column(int c);

  int missing_count(int c) const;
  int total_missing() const;
  bool complete() const { return total_missing() == 0; }

  std::vector<int> columns_with_role(ColumnRole role) const;
  // Index of the single outcome column, -1 if absent. Throws SchemaError if
  // several columns claim the role.
  int outcome_col() const;

 private:
  void rebuild_cluster_cache();

  std::vector<int> cluster_ids_;
  std::vector<Column> columns_;
  std::vector<int> labels_;
  std::vector<int> cluster_of_row_;
  std::vector<std::vector<int>> rows_of_;
};

// Strict CSV reader. The header must consist of cluster_id followed by
// exactly the schema's columns (any order, no extras, no duplicates); cells
// are decimal numbers or the literal NA. cluster_id must be integral and
// never NA.
Dataset read_csv(const std::string& path,
                 const std::map<std::string, ColumnRole>& schema);

// Column roles implied by the canonical naming convention: X<k> level-1,
// L<k> level-2, Y outcome, cluster_<label> dummy. Any other name is a schema
// error.
std::map<std::string, ColumnRole> infer_schema(
    const std::vector<std::string>& names);

// read_csv with the schema inferred from the file's own header.
Dataset read_csv(const std::string& path);

// Canonical CSV writer: header, comma separation, LF line endings, NA for
// masked cells, shortest-exact round-trip formatting.
void write_csv(const Dataset& ds, const std::string& path);

// Returns a copy with one fully-observed 0/1 indicator column per cluster,
// named cluster_<label>, appended in ascending label order.
Dataset add_cluster_dummies(const Dataset& ds);

// Returns a copy where every level-2 column is replaced by its within-cluster
// mean, restoring cluster-constancy after row-wise imputation. All cells of
// the affected columns must be observed.
Dataset aggregate_level2(const Dataset& ds);

// Formats a double exactly (round-trips through parsing); used by all CSV
// writers.
std::string format_double(double v);

}  // namespace mlmi

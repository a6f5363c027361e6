#include "mlmi/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace mlmi {

namespace {

constexpr double kMaskedPayload = std::numeric_limits<double>::quiet_NaN();

std::string cell_context(const std::string& path, int line, const std::string& col) {
  std::ostringstream os;
  os << path << ":" << line << " column '" << col << "'";
  return os.str();
}

double parse_double_cell(const std::string& text, const std::string& where) {
  if (text.empty()) throw ParseError("empty cell at " + where);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size())
    throw ParseError("non-numeric cell '" + text + "' at " + where);
  if (errno == ERANGE && !std::isfinite(v))
    throw ParseError("out-of-range cell '" + text + "' at " + where);
  return v;
}

int parse_int_cell(const std::string& text, const std::string& where) {
  if (text.empty()) throw ParseError("empty cell at " + where);
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size() || errno == ERANGE ||
      v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ParseError("invalid integer cell '" + text + "' at " + where);
  return static_cast<int>(v);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::Level1: return "level1";
    case ColumnRole::Level2: return "level2";
    case ColumnRole::Outcome: return "outcome";
    case ColumnRole::ClusterDummy: return "cluster_dummy";
  }
  throw std::logic_error("unreachable column role");
}

ColumnRole column_role_from_string(std::string_view s) {
  if (s == "level1") return ColumnRole::Level1;
  if (s == "level2") return ColumnRole::Level2;
  if (s == "outcome") return ColumnRole::Outcome;
  if (s == "cluster_dummy") return ColumnRole::ClusterDummy;
  throw ParseError("unknown column role '" + std::string(s) + "'");
}

Column::Column(std::string name_, ColumnRole role_, std::vector<double> values_)
    : name(std::move(name_)),
      role(role_),
      values(std::move(values_)),
      observed(values.size(), 1) {}

Column::Column(std::string name_, ColumnRole role_, std::vector<double> values_,
               std::vector<std::uint8_t> observed_)
    : name(std::move(name_)),
      role(role_),
      values(std::move(values_)),
      observed(std::move(observed_)) {
  if (values.size() != observed.size())
    throw SchemaError("column '" + name + "': mask length mismatch");
}

Dataset::Dataset(std::vector<int> cluster_ids, std::vector<Column> columns)
    : cluster_ids_(std::move(cluster_ids)), columns_(std::move(columns)) {
  std::set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw SchemaError("column with empty name");
    if (c.name == "cluster_id")
      throw SchemaError("'cluster_id' is reserved for the cluster label");
    if (!seen.insert(c.name).second)
      throw SchemaError("duplicate column name '" + c.name + "'");
    if (c.values.size() != cluster_ids_.size())
      throw SchemaError("column '" + c.name + "': expected " +
                        std::to_string(cluster_ids_.size()) + " rows, got " +
                        std::to_string(c.values.size()));
  }
  rebuild_cluster_cache();
}

void Dataset::rebuild_cluster_cache() {
  labels_.assign(cluster_ids_.begin(), cluster_ids_.end());
  std::sort(labels_.begin(), labels_.end());
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  cluster_of_row_.resize(cluster_ids_.size());
  rows_of_.assign(labels_.size(), {});
  for (std::size_t r = 0; r < cluster_ids_.size(); ++r) {
    const auto it = std::lower_bound(labels_.begin(), labels_.end(), cluster_ids_[r]);
    const int j = static_cast<int>(it - labels_.begin());
    cluster_of_row_[r] = j;
    rows_of_[j].push_back(static_cast<int>(r));
  }
}

int Dataset::col(std::string_view name) const {
  const int c = find_col(name);
  if (c < 0) throw SchemaError("no column named '" + std::string(name) + "'");
  return c;
}

int Dataset::find_col(std::string_view name) const {
  for (std::size_t c = 0; c < columns_.size(); ++c)
    if (columns_[c].name == name) return static_cast<int>(c);
  return -1;
}

double Dataset::value(int r, int c) const {
  const Column& col = columns_.at(c);
  if (!col.observed.at(r))
    throw PreconditionError("read of missing cell (row " + std::to_string(r) +
                            ", column '" + col.name + "')");
  return col.values[r];
}

void Dataset::set_cell(int r, int c, double v) {
  Column& col = columns_.at(c);
  col.values.at(r) = v;
  col.observed[r] = 1;
}

void Dataset::mask_cell(int r, int c) {
  Column& col = columns_.at(c);
  col.values.at(r) = kMaskedPayload;
  col.observed[r] = 0;
}

void Dataset::fill_cell(int r, int c, double v) {
  Column& col = columns_.at(c);
  if (col.observed[r])
    throw PreconditionError("fill_cell target is already observed");
  col.values.at(r) = v;
}

void Dataset::add_column(Column col) {
  if (col.name == "cluster_id")
    throw SchemaError("'cluster_id' is reserved for the cluster label");
  if (find_col(col.name) >= 0)
    throw SchemaError("column '" + col.name + "' already exists");
  if (col.values.size() != cluster_ids_.size())
    throw SchemaError("column '" + col.name + "': row count mismatch");
  columns_.push_back(std::move(col));
}

void Dataset::drop_column(int c) {
  if (c < 0 || c >= n_cols()) throw SchemaError("drop of nonexistent column");
  columns_.erase(columns_.begin() + c);
}

int Dataset::missing_count(int c) const {
  const Column& col = columns_.at(c);
  int k = 0;
  for (auto o : col.observed) k += (o == 0);
  return k;
}

int Dataset::total_missing() const {
  int k = 0;
  for (int c = 0; c < n_cols(); ++c) k += missing_count(c);
  return k;
}

std::vector<int> Dataset::columns_with_role(ColumnRole role) const {
  std::vector<int> out;
  for (int c = 0; c < n_cols(); ++c)
    if (columns_[c].role == role) out.push_back(c);
  return out;
}

int Dataset::outcome_col() const {
  const auto cands = columns_with_role(ColumnRole::Outcome);
  if (cands.empty()) return -1;
  if (cands.size() > 1)
    throw SchemaError("multiple outcome columns ('" + name(cands[0]) + "', '" +
                      name(cands[1]) + "')");
  return cands[0];
}

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Dataset read_csv(const std::string& path,
                 const std::map<std::string, ColumnRole>& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();

  const auto names = split_csv_line(header);
  if (names.empty() || names[0] != "cluster_id")
    throw SchemaError(path + ": first header field must be cluster_id");

  std::set<std::string> seen;
  std::vector<ColumnRole> roles(names.size() > 0 ? names.size() - 1 : 0,
                                ColumnRole::Level1);
  for (std::size_t i = 1; i < names.size(); ++i) {
    if (!seen.insert(names[i]).second)
      throw SchemaError(path + ": duplicate column '" + names[i] + "'");
    const auto it = schema.find(names[i]);
    if (it == schema.end())
      throw SchemaError(path + ": column '" + names[i] +
                        "' not present in the expected schema");
    roles[i - 1] = it->second;
  }
  for (const auto& [name, role] : schema) {
    (void)role;
    if (!seen.count(name))
      throw SchemaError(path + ": expected column '" + name + "' is missing");
  }

  std::vector<int> ids;
  std::vector<Column> cols;
  cols.reserve(names.size() - 1);
  for (std::size_t i = 1; i < names.size(); ++i)
    cols.emplace_back(names[i], roles[i - 1], std::vector<double>{});

  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == EOF) break;  // trailing newline
    const auto cells = split_csv_line(line);
    if (cells.size() != names.size())
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(names.size()) + " fields, got " +
                       std::to_string(cells.size()));
    ids.push_back(parse_int_cell(cells[0], cell_context(path, lineno, "cluster_id")));
    for (std::size_t i = 1; i < cells.size(); ++i) {
      Column& col = cols[i - 1];
      if (cells[i] == "NA") {
        col.values.push_back(kMaskedPayload);
        col.observed.push_back(0);
      } else {
        col.values.push_back(
            parse_double_cell(cells[i], cell_context(path, lineno, col.name)));
        col.observed.push_back(1);
      }
    }
  }
  if (ids.empty()) throw ParseError(path + ": no data rows");
  return Dataset(std::move(ids), std::move(cols));
}

std::map<std::string, ColumnRole> infer_schema(
    const std::vector<std::string>& names) {
  const auto numbered = [](const std::string& s, char prefix) {
    if (s.size() < 2 || s[0] != prefix) return false;
    return std::all_of(s.begin() + 1, s.end(),
                       [](unsigned char ch) { return std::isdigit(ch); });
  };
  std::map<std::string, ColumnRole> schema;
  for (const auto& n : names) {
    if (n == "cluster_id") continue;
    if (n == "Y")
      schema.emplace(n, ColumnRole::Outcome);
    else if (numbered(n, 'X'))
      schema.emplace(n, ColumnRole::Level1);
    else if (numbered(n, 'L'))
      schema.emplace(n, ColumnRole::Level2);
    else if (n.rfind("cluster_", 0) == 0)
      schema.emplace(n, ColumnRole::ClusterDummy);
    else
      throw SchemaError("column '" + n +
                        "' does not follow the X<k>/L<k>/Y naming convention");
  }
  return schema;
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  in.close();
  return read_csv(path, infer_schema(split_csv_line(header)));
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "cluster_id";
  for (int c = 0; c < ds.n_cols(); ++c) out << ',' << ds.name(c);
  out << '\n';
  for (int r = 0; r < ds.n_rows(); ++r) {
    out << ds.cluster_ids()[r];
    for (int c = 0; c < ds.n_cols(); ++c) {
      out << ',';
      if (ds.observed(r, c))
        out << format_double(ds.value(r, c));
      else
        out << "NA";
    }
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

Dataset add_cluster_dummies(const Dataset& ds) {
  Dataset out = ds;
  const int n = ds.n_rows();
  for (std::size_t j = 0; j < ds.cluster_labels().size(); ++j) {
    const int label = ds.cluster_labels()[j];
    const std::string name = "cluster_" + std::to_string(label);
    if (out.find_col(name) >= 0)
      throw SchemaError("dummy column '" + name + "' collides with an existing column");
    std::vector<double> v(n, 0.0);
    for (int r : ds.cluster_rows()[j]) v[r] = 1.0;
    out.add_column(Column(name, ColumnRole::ClusterDummy, std::move(v)));
  }
  return out;
}

Dataset aggregate_level2(const Dataset& ds) {
  Dataset out = ds;
  for (int c : ds.columns_with_role(ColumnRole::Level2)) {
    if (ds.missing_count(c) > 0)
      throw PreconditionError("level-2 aggregation of column '" + ds.name(c) +
                              "' with missing cells");
    for (std::size_t j = 0; j < ds.cluster_rows().size(); ++j) {
      const auto& rows = ds.cluster_rows()[j];
      double s = 0.0;
      for (int r : rows) s += ds.value(r, c);
      const double m = s / static_cast<double>(rows.size());
      for (int r : rows) out.set_cell(r, c, m);
    }
  }
  return out;
}

}  // namespace mlmi

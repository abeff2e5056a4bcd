#include "gpsm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "gpsm/error.hpp"
#include "gpsm/format.hpp"

namespace gpsm {

namespace {

constexpr const char* kModule = "dataset";

}  // namespace

Dataset::Dataset(Eigen::MatrixXd covariates, std::vector<int> treatment,
                 Eigen::VectorXd outcome,
                 std::vector<std::string> covariate_names, int levels,
                 bool has_intercept, std::vector<std::string> level_labels)
    : covariates_(std::move(covariates)),
      treatment_(std::move(treatment)),
      outcome_(std::move(outcome)),
      covariate_names_(std::move(covariate_names)),
      level_labels_(std::move(level_labels)),
      levels_(levels),
      has_intercept_(has_intercept) {
  const Index n = outcome_.size();
  if (n < 1) throw data_error(kModule, "dataset must contain at least one unit");
  if (covariates_.rows() != n || static_cast<Index>(treatment_.size()) != n) {
    throw data_error(kModule, "covariates, treatment and outcome lengths differ");
  }
  if (covariates_.cols() < 1) throw data_error(kModule, "no covariate columns");
  if (covariate_names_.empty()) {
    for (Index k = 0; k < covariates_.cols(); ++k) {
      covariate_names_.push_back("X" + std::to_string(k));
    }
  }
  if (static_cast<Index>(covariate_names_.size()) != covariates_.cols()) {
    throw data_error(kModule, "covariate name count does not match columns");
  }
  if (levels_ < 1) throw data_error(kModule, "number of levels must be >= 1");
  if (level_labels_.empty()) {
    for (int w = 1; w <= levels_; ++w) level_labels_.push_back(std::to_string(w));
  }
  if (static_cast<int>(level_labels_.size()) != levels_) {
    throw data_error(kModule, "level label count does not match levels");
  }

  std::vector<Index> counts(levels_, 0);
  for (Index i = 0; i < n; ++i) {
    const int w = treatment_[i];
    if (w < 1 || w > levels_) {
      throw data_error(kModule, "row " + std::to_string(i + 1) +
                                    ": treatment level " + std::to_string(w) +
                                    " outside 1.." + std::to_string(levels_));
    }
    ++counts[w - 1];
    if (!std::isfinite(outcome_[i])) {
      throw data_error(kModule, "row " + std::to_string(i + 1) +
                                    ": non-finite outcome");
    }
    for (Index k = 0; k < covariates_.cols(); ++k) {
      if (!std::isfinite(covariates_(i, k))) {
        throw data_error(kModule, "row " + std::to_string(i + 1) +
                                      ", column '" + covariate_names_[k] +
                                      "': non-finite covariate");
      }
    }
  }
  for (int w = 1; w <= levels_; ++w) {
    if (counts[w - 1] == 0) {
      throw data_error(kModule, "treatment level " + std::to_string(w) + " ('" +
                                    level_labels_[w - 1] + "') has no units");
    }
  }
  if (has_intercept_ && (covariates_.col(0).array() != 1.0).any()) {
    throw data_error(kModule, "flagged intercept column is not identically 1");
  }
}

std::vector<Index> Dataset::arm_counts() const {
  std::vector<Index> counts(levels_, 0);
  for (int w : treatment_) ++counts[w - 1];
  return counts;
}

Eigen::MatrixXd Dataset::covariates_without_intercept() const {
  if (!has_intercept_) return covariates_;
  return covariates_.rightCols(covariates_.cols() - 1);
}

Dataset Dataset::with_intercept() const {
  if (has_intercept_) return *this;
  Eigen::MatrixXd x(size(), covariate_count() + 1);
  x.col(0).setOnes();
  x.rightCols(covariate_count()) = covariates_;
  std::vector<std::string> names{"(intercept)"};
  names.insert(names.end(), covariate_names_.begin(), covariate_names_.end());
  return Dataset(std::move(x), treatment_, outcome_, std::move(names), levels_,
                 true, level_labels_);
}

Dataset Dataset::with_outcome(Eigen::VectorXd outcome) const {
  return Dataset(covariates_, treatment_, std::move(outcome), covariate_names_,
                 levels_, has_intercept_, level_labels_);
}

Index UnitMask::count() const {
  return static_cast<Index>(std::count(retained.begin(), retained.end(), true));
}

std::vector<Index> retained_counts(const Dataset& d, const UnitMask& m) {
  if (static_cast<Index>(m.retained.size()) != d.size()) {
    throw data_error(kModule, "mask length " + std::to_string(m.retained.size()) +
                                  " does not match dataset size " +
                                  std::to_string(d.size()));
  }
  std::vector<Index> counts(d.levels(), 0);
  for (Index i = 0; i < d.size(); ++i) {
    if (m.retained[i]) ++counts[d.treatment()[i] - 1];
  }
  return counts;
}

Dataset take_rows(const Dataset& d, const std::vector<Index>& rows) {
  std::vector<Index> counts(d.levels(), 0);
  for (Index r : rows) {
    if (r < 0 || r >= d.size()) throw data_error(kModule, "row index out of range");
    ++counts[d.treatment()[r] - 1];
  }
  for (int w = 1; w <= d.levels(); ++w) {
    if (counts[w - 1] == 0) {
      throw data_error(kModule, "subset eliminates treatment level " +
                                    std::to_string(w) + " ('" +
                                    d.level_labels()[w - 1] + "')");
    }
  }
  const Index n = static_cast<Index>(rows.size());
  Eigen::MatrixXd x(n, d.covariate_count());
  std::vector<int> w(n);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    x.row(i) = d.covariates().row(rows[i]);
    w[i] = d.treatment()[rows[i]];
    y[i] = d.outcome()[rows[i]];
  }
  return Dataset(std::move(x), std::move(w), std::move(y), d.covariate_names(),
                 d.levels(), d.has_intercept(), d.level_labels());
}

Dataset apply_mask(const Dataset& d, const UnitMask& m) {
  retained_counts(d, m);  // length check
  std::vector<Index> rows;
  rows.reserve(d.size());
  for (Index i = 0; i < d.size(); ++i) {
    if (m.retained[i]) rows.push_back(i);
  }
  return take_rows(d, rows);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row,
                  const std::string& column) {
  const std::string cell = trim(raw);
  const std::string where =
      "row " + std::to_string(row) + ", column '" + column + "'";
  if (cell.empty()) throw data_error(kModule, where + ": missing value");
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw data_error(kModule, where + ": non-numeric value '" + cell + "'");
  }
  if (!std::isfinite(v)) {
    throw data_error(kModule, where + ": non-finite value '" + cell + "'");
  }
  return v;
}

}  // namespace

Dataset read_csv(std::istream& in, const CsvSchema& schema,
                 const std::string& source) {
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    have_header = true;
    break;
  }
  if (!have_header) {
    throw data_error(kModule, source + ": empty file (no header row)");
  }
  const auto header = split_line(line, schema.delimiter);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[trim(header[c])] = c;

  auto find = [&](const std::string& name, const char* role) {
    auto it = col.find(name);
    if (it == col.end()) {
      throw config_error(kModule, source + ": " + role + " column '" + name +
                                      "' not found in header");
    }
    return it->second;
  };
  if (schema.treatment_column.empty() || schema.outcome_column.empty()) {
    throw config_error(kModule, "schema must name treatment and outcome columns");
  }
  const std::size_t tcol = find(schema.treatment_column, "treatment");
  const std::size_t ycol = find(schema.outcome_column, "outcome");
  std::vector<std::size_t> xcols;
  std::vector<std::string> xnames;
  if (schema.covariate_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != tcol && c != ycol) {
        xcols.push_back(c);
        xnames.push_back(trim(header[c]));
      }
    }
  } else {
    for (const auto& name : schema.covariate_columns) {
      xcols.push_back(find(name, "covariate"));
      xnames.push_back(name);
    }
  }
  if (xcols.empty()) throw config_error(kModule, "no covariate columns selected");

  std::vector<std::vector<double>> xrows;
  std::vector<int> w;
  std::vector<double> y;
  std::vector<std::string> labels;
  std::unordered_map<std::string, int> code;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, schema.delimiter);
    if (cells.size() != header.size()) {
      throw data_error(kModule, source + ": row " + std::to_string(row) +
                                    " has " + std::to_string(cells.size()) +
                                    " cells, header has " +
                                    std::to_string(header.size()));
    }
    const std::string label = trim(cells[tcol]);
    if (label.empty()) {
      throw data_error(kModule, "row " + std::to_string(row) + ", column '" +
                                    schema.treatment_column + "': missing value");
    }
    auto [it, inserted] = code.emplace(label, static_cast<int>(labels.size()) + 1);
    if (inserted) labels.push_back(label);
    w.push_back(it->second);
    y.push_back(parse_cell(cells[ycol], row, schema.outcome_column));
    std::vector<double> xr;
    xr.reserve(xcols.size());
    for (std::size_t k = 0; k < xcols.size(); ++k) {
      xr.push_back(parse_cell(cells[xcols[k]], row, xnames[k]));
    }
    xrows.push_back(std::move(xr));
  }
  if (y.empty()) throw data_error(kModule, source + ": no data rows");

  const Index n = static_cast<Index>(y.size());
  Eigen::MatrixXd x(n, static_cast<Index>(xcols.size()));
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < x.cols(); ++k) x(i, k) = xrows[i][k];
  }
  const int levels = static_cast<int>(labels.size());
  return Dataset(std::move(x), std::move(w),
                 Eigen::Map<Eigen::VectorXd>(y.data(), n), std::move(xnames),
                 levels, false, std::move(labels));
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw config_error(kModule, "cannot open '" + path + "'");
  return read_csv(in, schema, path);
}

void write_csv(const Dataset& d, std::ostream& out,
               const std::string& treatment_column,
               const std::string& outcome_column, char delimiter) {
  const Index first = d.has_intercept() ? 1 : 0;
  for (Index k = first; k < d.covariate_count(); ++k) {
    out << d.covariate_names()[k] << delimiter;
  }
  out << treatment_column << delimiter << outcome_column << '\n';
  for (Index i = 0; i < d.size(); ++i) {
    for (Index k = first; k < d.covariate_count(); ++k) {
      out << format_double(d.covariates()(i, k)) << delimiter;
    }
    out << d.level_labels()[d.treatment()[i] - 1] << delimiter
        << format_double(d.outcome()[i]) << '\n';
  }
}

void save_csv(const Dataset& d, const std::string& path,
              const std::string& treatment_column,
              const std::string& outcome_column, char delimiter) {
  std::ofstream out(path);
  if (!out) throw config_error(kModule, "cannot write '" + path + "'");
  write_csv(d, out, treatment_column, outcome_column, delimiter);
}

}  // namespace gpsm

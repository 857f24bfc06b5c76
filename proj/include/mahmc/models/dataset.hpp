// Loader for the breast cancer (WDBC) design matrix.
#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mahmc {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Eigen::MatrixXd features;  // rows x (raw features + intercept)
  Eigen::VectorXd targets;   // 0/1
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Centres each column and divides by its population standard deviation.
/// Constant columns are only centred.
inline void standardize_columns(Eigen::MatrixXd& x) {
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).sum() / n;
    x.col(c).array() -= mean;
    const double sd = std::sqrt(x.col(c).squaredNorm() / n);
    if (sd > 0.0) x.col(c) /= sd;
  }
}

/// Reads `features` numeric columns plus a trailing 0/1 target column. The
/// first line is a header and must have the same number of columns. Returns
/// standardized features with a column of ones appended.
inline Dataset load_wdbc(const std::string& path, int expected_rows = 569, int features = 30) {
  std::ifstream in(path);
  if (!in) throw DataError("load_wdbc: cannot open " + path);

  const std::size_t columns = static_cast<std::size_t>(features) + 1;
  std::string line;
  if (!std::getline(in, line)) throw DataError("load_wdbc: empty file " + path);
  if (const auto header = detail::split_csv(line); header.size() != columns) {
    std::ostringstream msg;
    msg << "load_wdbc: header has " << header.size() << " columns, expected " << columns;
    throw DataError(msg.str());
  }

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != columns) {
      std::ostringstream msg;
      msg << "load_wdbc: line " << line_no << " has " << cells.size() << " columns, expected "
          << columns;
      throw DataError(msg.str());
    }
    std::vector<double> row(columns);
    for (std::size_t c = 0; c < columns; ++c) {
      const std::string_view cell = detail::trim(cells[c]);
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), row[c]);
      if (ec != std::errc() || end != cell.data() + cell.size() || cell.empty()) {
        std::ostringstream msg;
        msg << "load_wdbc: non-numeric cell '" << cell << "' at line " << line_no << ", column "
            << c + 1;
        throw DataError(msg.str());
      }
    }
    if (row.back() != 0.0 && row.back() != 1.0) {
      std::ostringstream msg;
      msg << "load_wdbc: target must be 0 or 1 at line " << line_no;
      throw DataError(msg.str());
    }
    rows.push_back(std::move(row));
  }
  if (static_cast<int>(rows.size()) != expected_rows) {
    std::ostringstream msg;
    msg << "load_wdbc: found " << rows.size() << " records, expected " << expected_rows;
    throw DataError(msg.str());
  }

  Dataset data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  data.features.resize(n, features + 1);
  data.targets.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int c = 0; c < features; ++c) data.features(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    data.targets[r] = rows[static_cast<std::size_t>(r)].back();
  }
  Eigen::MatrixXd raw = data.features.leftCols(features);
  standardize_columns(raw);
  data.features.leftCols(features) = raw;
  data.features.col(features).setOnes();
  return data;
}

}  // namespace mahmc

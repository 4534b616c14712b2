#ifndef MREST_DATA_HPP
#define MREST_DATA_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "mrest/error.hpp"

namespace mrest {

/// Observed units (y_i, d_i, x_i) with treatment levels coded 0..Q-1.
///
/// Immutable after construction; the constructor validates shapes, level
/// range and finiteness and throws InvalidArgument otherwise.
class Dataset {
 public:
  Dataset(Eigen::VectorXd outcomes, std::vector<int> treatments, Eigen::MatrixXd covariates,
          int q_levels)
      : outcomes_(std::move(outcomes)),
        treatments_(std::move(treatments)),
        covariates_(std::move(covariates)),
        q_levels_(q_levels) {
    const auto n = static_cast<std::size_t>(outcomes_.size());
    if (n == 0) throw InvalidArgument("dataset must contain at least one unit");
    if (treatments_.size() != n || static_cast<std::size_t>(covariates_.rows()) != n)
      throw InvalidArgument("outcomes, treatments and covariates must have the same row count");
    if (q_levels_ < 2) throw InvalidArgument("number of treatment levels must be at least 2");
    for (std::size_t i = 0; i < n; ++i) {
      if (treatments_[i] < 0 || treatments_[i] >= q_levels_)
        throw InvalidArgument("treatment of unit " + std::to_string(i) + " is outside 0.." +
                              std::to_string(q_levels_ - 1));
    }
    if (!outcomes_.allFinite()) throw InvalidArgument("non-finite outcome");
    if (!covariates_.allFinite()) throw InvalidArgument("non-finite covariate");
  }

  std::size_t size() const { return treatments_.size(); }
  int q_levels() const { return q_levels_; }
  Eigen::Index num_covariates() const { return covariates_.cols(); }

  const Eigen::VectorXd& outcomes() const { return outcomes_; }
  const std::vector<int>& treatments() const { return treatments_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }

  double outcome(std::size_t i) const { return outcomes_(static_cast<Eigen::Index>(i)); }
  int treatment(std::size_t i) const { return treatments_[i]; }
  Eigen::VectorXd covariate_row(std::size_t i) const {
    return covariates_.row(static_cast<Eigen::Index>(i)).transpose();
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.q_levels_ == b.q_levels_ && a.treatments_ == b.treatments_ &&
           a.outcomes_.size() == b.outcomes_.size() && a.outcomes_ == b.outcomes_ &&
           a.covariates_.rows() == b.covariates_.rows() &&
           a.covariates_.cols() == b.covariates_.cols() && a.covariates_ == b.covariates_;
  }

 private:
  Eigen::VectorXd outcomes_;
  std::vector<int> treatments_;
  Eigen::MatrixXd covariates_;
  int q_levels_;
};

/// Units receiving one treatment level, in ascending index order.
struct TreatmentGroup {
  int level = 0;
  std::vector<std::size_t> members;

  std::size_t size() const { return members.size(); }
  bool empty() const { return members.empty(); }
};

inline TreatmentGroup treatment_group(const Dataset& ds, int level) {
  if (level < 0 || level >= ds.q_levels())
    throw InvalidArgument("treatment level " + std::to_string(level) + " is outside 0.." +
                          std::to_string(ds.q_levels() - 1));
  TreatmentGroup g{level, {}};
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.treatment(i) == level) g.members.push_back(i);
  return g;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_real(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v, std::chars_format::general);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parses a `y,d,x1,...,xp` CSV. Columns may appear in any order; every
/// covariate index from 1 to p must be present. Q defaults to 1 + max(d).
inline Dataset load_csv(std::istream& in, std::optional<int> q_override = std::nullopt,
                        const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty())
    throw ParseError(source + ": empty file (missing header)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = detail::split_commas(line);
  int y_col = -1;
  int d_col = -1;
  std::map<int, int> x_cols;  // covariate number (1-based) -> column
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = header[c];
    const int col = static_cast<int>(c);
    auto dup = [&] { throw ParseError(source + ": duplicate column '" + std::string(name) + "'"); };
    if (name == "y") {
      if (y_col >= 0) dup();
      y_col = col;
    } else if (name == "d") {
      if (d_col >= 0) dup();
      d_col = col;
    } else if (name.size() > 1 && name[0] == 'x') {
      int idx = 0;
      const auto* end = name.data() + name.size();
      const auto [ptr, ec] = std::from_chars(name.data() + 1, end, idx);
      if (ec != std::errc{} || ptr != end || idx < 1)
        throw ParseError(source + ": unrecognised column '" + std::string(name) + "'");
      if (!x_cols.emplace(idx, col).second) dup();
    } else {
      throw ParseError(source + ": unrecognised column '" + std::string(name) + "'");
    }
  }
  if (y_col < 0) throw ParseError(source + ": missing column 'y'");
  if (d_col < 0) throw ParseError(source + ": missing column 'd'");
  const int p = static_cast<int>(x_cols.size());
  for (int j = 1; j <= p; ++j)
    if (!x_cols.count(j)) throw ParseError(source + ": missing column 'x" + std::to_string(j) + "'");

  std::vector<double> ys;
  std::vector<int> ds;
  std::vector<double> xs;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size())
      throw ParseError(source + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    auto real_at = [&](int col) {
      const auto v = detail::parse_real(cells[static_cast<std::size_t>(col)]);
      if (!v)
        throw ParseError(source + ": row " + std::to_string(row) + ", column '" +
                         std::string(header[static_cast<std::size_t>(col)]) +
                         "': cannot parse '" + std::string(cells[static_cast<std::size_t>(col)]) +
                         "' as a finite number");
      return *v;
    };
    ys.push_back(real_at(y_col));
    const double d = real_at(d_col);
    if (d < 0.0 || d != std::floor(d) || d > 1e6)
      throw ParseError(source + ": row " + std::to_string(row) +
                       ", column 'd': treatment must be a non-negative integer, got '" +
                       std::string(cells[static_cast<std::size_t>(d_col)]) + "'");
    ds.push_back(static_cast<int>(d));
    for (int j = 1; j <= p; ++j) xs.push_back(real_at(x_cols.at(j)));
  }
  if (ys.empty()) throw ParseError(source + ": no data rows");

  const int max_d = *std::max_element(ds.begin(), ds.end());
  int q = max_d + 1;
  if (q_override) {
    if (*q_override < q)
      throw ParseError(source + ": --q " + std::to_string(*q_override) +
                       " is smaller than 1 + max(d) = " + std::to_string(q));
    q = *q_override;
  }
  if (q < 2) throw ParseError(source + ": at least two treatment levels are required");

  const auto n = static_cast<Eigen::Index>(ys.size());
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = xs[static_cast<std::size_t>(i * p + j)];
  return Dataset(std::move(y), std::move(ds), std::move(x), q);
}

inline Dataset load_csv(const std::string& path, std::optional<int> q_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return load_csv(in, q_override, path);
}

/// Writes shortest round-trip decimal representations, so re-parsing the
/// output reproduces the dataset exactly.
inline void write_csv(std::ostream& out, const Dataset& ds) {
  out << "y,d";
  for (Eigen::Index j = 0; j < ds.num_covariates(); ++j) out << ",x" << (j + 1);
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << detail::format_real(ds.outcome(i)) << ',' << ds.treatment(i);
    for (Eigen::Index j = 0; j < ds.num_covariates(); ++j)
      out << ',' << detail::format_real(ds.covariates()(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  write_csv(out, ds);
  if (!out) throw Error("error while writing '" + path + "'");
}

}  // namespace mrest

#endif  // MREST_DATA_HPP

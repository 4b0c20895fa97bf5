#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "datko/family.hpp"

namespace datko {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? comma : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

double parse_number(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || end != field.data() + field.size() || !std::isfinite(v)) {
    throw std::runtime_error("tabulated CSV line " + std::to_string(line_no) + ": bad number '" +
                             std::string(field) + "'");
  }
  return v;
}

}  // namespace

TabulatedFamily::TabulatedFamily(std::vector<Row> rows) {
  if (rows.empty()) throw std::invalid_argument("tabulated family: no rows");
  dimension_ = static_cast<int>(rows.front().value.rows());
  for (const auto& r : rows) {
    if (r.value.rows() != dimension_ || r.value.cols() != dimension_ || dimension_ < 1) {
      throw std::invalid_argument("tabulated family: every row must hold a square matrix of one size");
    }
    if (!(r.t >= r.s) || !(r.s >= 0.0)) {
      throw std::invalid_argument("tabulated family: rows must satisfy t >= s >= 0");
    }
  }

  const double s0 = rows.front().s;
  const bool anchored =
      std::all_of(rows.begin(), rows.end(), [&](const Row& r) { return r.s == s0; });
  if (anchored) {
    layout_ = Layout::kAnchored;
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    for (const auto& r : rows) {
      if (!nodes_.empty() && !(r.t > nodes_.back())) {
        throw std::invalid_argument("tabulated family: duplicate t in anchored table");
      }
      nodes_.push_back(r.t);
      values_.push_back(r.value);
    }
    if (nodes_.size() < 2) throw std::invalid_argument("tabulated family: need at least two rows");
    return;
  }

  layout_ = Layout::kPairGrid;
  for (const auto& r : rows) nodes_.push_back(r.t);
  std::sort(nodes_.begin(), nodes_.end());
  nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
  const std::size_t m = nodes_.size();
  if (m < 2) throw std::invalid_argument("tabulated family: need at least two nodes");
  values_.assign(m * (m + 1) / 2, Eigen::MatrixXd());
  auto index_of = [&](double v) -> std::size_t {
    const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), v);
    if (it == nodes_.end() || *it != v) {
      throw std::invalid_argument("tabulated family: s value " + std::to_string(v) +
                                  " is not one of the t nodes");
    }
    return static_cast<std::size_t>(it - nodes_.begin());
  };
  for (auto& r : rows) {
    const std::size_t i = index_of(r.t);
    const std::size_t j = index_of(r.s);
    values_[i * (i + 1) / 2 + j] = std::move(r.value);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      if (values_[i * (i + 1) / 2 + j].size() == 0) {
        throw std::invalid_argument("tabulated family: missing pair (t = " + std::to_string(nodes_[i]) +
                                    ", s = " + std::to_string(nodes_[j]) + ")");
      }
    }
    const auto& diag = values_[i * (i + 1) / 2 + i];
    if ((diag - Eigen::MatrixXd::Identity(dimension_, dimension_)).cwiseAbs().maxCoeff() > 1e-9) {
      throw std::invalid_argument("tabulated family: U(t,t) must be the identity");
    }
  }
}

TabulatedFamily TabulatedFamily::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tabulated CSV '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("tabulated CSV '" + path + "' is empty");
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "t" || header[1] != "s") {
    throw std::runtime_error("tabulated CSV header must start with 't,s'");
  }
  const std::size_t entries = header.size() - 2;
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(entries))));
  if (n * n != entries) {
    throw std::runtime_error("tabulated CSV must carry n*n propagator entries per row");
  }
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("tabulated CSV line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields");
    }
    Row row{parse_number(fields[0], line_no), parse_number(fields[1], line_no),
            Eigen::MatrixXd(n, n)};
    for (std::size_t k = 0; k < entries; ++k) {
      row.value(static_cast<Eigen::Index>(k / n), static_cast<Eigen::Index>(k % n)) =
          parse_number(fields[k + 2], line_no);
    }
    rows.push_back(std::move(row));
  }
  return TabulatedFamily(std::move(rows));
}

std::size_t TabulatedFamily::cell(double t) const {
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - nodes_.begin() - 1, 0));
  return std::min(i, nodes_.size() - 2);
}

Eigen::MatrixXd TabulatedFamily::fundamental(double t) const {
  const std::size_t i = cell(t);
  const double w = (t - nodes_[i]) / (nodes_[i + 1] - nodes_[i]);
  return (1.0 - w) * values_[i] + w * values_[i + 1];
}

const Eigen::MatrixXd& TabulatedFamily::pair(std::size_t i, std::size_t j) const {
  return values_[i * (i + 1) / 2 + j];
}

Eigen::MatrixXd TabulatedFamily::propagator(double t, double s) const {
  if (t < t_min() || s < t_min() || t > t_max() || s > t_max()) {
    throw DomainError("tabulated family evaluated outside [" + std::to_string(t_min()) + ", " +
                      std::to_string(t_max()) + "]");
  }
  if (t == s) return Eigen::MatrixXd::Identity(dimension_, dimension_);

  if (layout_ == Layout::kAnchored) {
    const Eigen::MatrixXd psi_s = fundamental(s);
    const Eigen::MatrixXd psi_t = fundamental(t);
    Eigen::MatrixXd u = psi_s.transpose().fullPivLu().solve(psi_t.transpose()).transpose();
    if (!u.allFinite() || !psi_s.fullPivLu().isInvertible()) {
      throw DomainError("tabulated fundamental matrix is singular at s = " + std::to_string(s));
    }
    return u;
  }

  if (t < s) throw DomainError("pair-grid tabulated family is not reversible");
  const std::size_t i = cell(t);
  const std::size_t j = cell(s);
  const double wi = nodes_[i + 1] - nodes_[i];
  if (i == j) {
    // lower triangle of the diagonal cell: (i,i), (i+1,i), (i+1,i+1)
    const double u = (t - nodes_[i]) / wi;
    const double v = (s - nodes_[i]) / wi;
    return (1.0 - u) * pair(i, i) + (u - v) * pair(i + 1, i) + v * pair(i + 1, i + 1);
  }
  const double u = (t - nodes_[i]) / wi;
  const double v = (s - nodes_[j]) / (nodes_[j + 1] - nodes_[j]);
  return (1.0 - u) * (1.0 - v) * pair(i, j) + u * (1.0 - v) * pair(i + 1, j) +
         (1.0 - u) * v * pair(i, j + 1) + u * v * pair(i + 1, j + 1);
}

}  // namespace datko

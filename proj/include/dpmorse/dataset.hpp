// Copyright 2026 The dpmorse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpmorse/error.hpp"
#include "dpmorse/random.hpp"

namespace dpmorse {

/// Where the per-feature rescaling bounds came from. Bounds computed from the
/// data are not differentially private; reports only claim DP for `user`.
enum class BoundsSource { none, user, data, generator };

inline const char* to_string(BoundsSource s) {
  switch (s) {
    case BoundsSource::none: return "none";
    case BoundsSource::user: return "user";
    case BoundsSource::data: return "data";
    case BoundsSource::generator: return "generator";
  }
  return "none";
}

struct FeatureBounds {
  double lo = -1.0;
  double hi = 1.0;
};

/// N x D real matrix plus optional integer ground truth.
struct Dataset {
  Eigen::MatrixXd rows;
  std::optional<std::vector<int>> labels;
  std::vector<std::string> feature_names;

  BoundsSource bounds_source = BoundsSource::none;
  std::vector<FeatureBounds> bounds;  // empty unless rescaled
  std::size_t clipped_values = 0;

  Eigen::Index size() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }

  bool in_unit_box() const {
    return rows.size() > 0 && rows.allFinite() && rows.maxCoeff() <= 1.0 &&
           rows.minCoeff() >= -1.0;
  }

  void validate() const {
    if (rows.rows() < 1 || rows.cols() < 1) {
      throw DataError("dataset must have at least one row and one column");
    }
    if (labels && static_cast<Eigen::Index>(labels->size()) != rows.rows()) {
      throw DataError("label vector length does not match row count");
    }
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                        s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

inline std::optional<double> parse_real(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

/// Maps arbitrary label strings onto 0..C-1. Numeric labels are ordered
/// numerically, anything else lexicographically.
inline std::vector<int> factorize_labels(const std::vector<std::string>& raw) {
  bool all_numeric = std::all_of(raw.begin(), raw.end(),
                                 [](const std::string& s) { return parse_real(s).has_value(); });
  std::vector<std::string> uniq(raw);
  if (all_numeric) {
    std::sort(uniq.begin(), uniq.end(), [](const std::string& a, const std::string& b) {
      return *parse_real(a) < *parse_real(b);
    });
    uniq.erase(std::unique(uniq.begin(), uniq.end(),
                           [](const std::string& a, const std::string& b) {
                             return *parse_real(a) == *parse_real(b);
                           }),
               uniq.end());
  } else {
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  }
  std::vector<int> out;
  out.reserve(raw.size());
  for (const auto& s : raw) {
    auto it = all_numeric
                  ? std::find_if(uniq.begin(), uniq.end(),
                                 [&](const std::string& u) { return *parse_real(u) == *parse_real(s); })
                  : std::lower_bound(uniq.begin(), uniq.end(), s);
    out.push_back(static_cast<int>(it - uniq.begin()));
  }
  return out;
}

}  // namespace detail

/// Parses CSV text. Rows are numbered from 1 in error messages, counting data
/// rows only (the header is not a row).
inline Dataset parse_csv(std::istream& in, bool has_header,
                         const std::optional<std::string>& label_column = std::nullopt) {
  std::string line;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  if (has_header) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!detail::trim(line).empty()) break;
    }
    if (detail::trim(line).empty()) throw DataError("empty CSV file");
    for (auto c : detail::split_commas(line)) header.emplace_back(c);
  }

  std::optional<std::size_t> label_idx;
  if (label_column) {
    if (has_header) {
      auto it = std::find(header.begin(), header.end(), *label_column);
      if (it == header.end()) throw DataError("label column '" + *label_column + "' not in header");
      label_idx = static_cast<std::size_t>(it - header.begin());
    } else {
      auto idx = detail::parse_real(*label_column);
      if (!idx || *idx < 0 || *idx != std::floor(*idx)) {
        throw DataError("without a header the label column must be a 0-based column index");
      }
      label_idx = static_cast<std::size_t>(*idx);
    }
  }

  std::vector<std::vector<double>> values;
  std::vector<std::string> raw_labels;
  std::size_t arity = has_header ? header.size() : 0;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++row_no;
    auto cells = detail::split_commas(line);
    if (arity == 0) arity = cells.size();
    if (cells.size() != arity) {
      throw DataError("ragged CSV: row " + std::to_string(row_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " + std::to_string(arity));
    }
    std::vector<double> row;
    row.reserve(arity);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (label_idx && c == *label_idx) {
        raw_labels.emplace_back(cells[c]);
        continue;
      }
      auto v = detail::parse_real(cells[c]);
      if (!v) {
        throw DataError("parse error at row " + std::to_string(row_no) + ", column " +
                        std::to_string(c + 1) + ": '" + std::string(cells[c]) + "'");
      }
      row.push_back(*v);
    }
    values.push_back(std::move(row));
  }
  if (values.empty()) throw DataError("empty CSV file");
  if (label_idx && *label_idx >= arity) throw DataError("label column index out of range");
  if (values.front().empty()) throw DataError("CSV has no feature columns");

  Dataset d;
  d.rows.resize(static_cast<Eigen::Index>(values.size()),
                static_cast<Eigen::Index>(values.front().size()));
  for (std::size_t r = 0; r < values.size(); ++r) {
    for (std::size_t c = 0; c < values[r].size(); ++c) {
      d.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r][c];
    }
  }
  if (label_idx) d.labels = detail::factorize_labels(raw_labels);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!label_idx || c != *label_idx) d.feature_names.push_back(header[c]);
  }
  d.validate();
  return d;
}

inline Dataset load_csv(const std::string& path, bool has_header,
                        const std::optional<std::string>& label_column = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, has_header, label_column);
}

/// Affine per-feature map sending [lo, hi] to [-1, 1]. With no bounds given
/// they are taken from the data, which is recorded as BoundsSource::data.
/// Values outside user bounds are clipped to the box; constant features map to 0.
inline Dataset rescale_unit_box(const Dataset& d,
                                const std::optional<std::vector<FeatureBounds>>& bounds = std::nullopt) {
  d.validate();
  if (!d.rows.allFinite()) throw DataError("dataset contains non-finite values");
  const Eigen::Index dim = d.dim();
  std::vector<FeatureBounds> b;
  Dataset out = d;
  if (bounds) {
    if (static_cast<Eigen::Index>(bounds->size()) != dim) {
      throw std::invalid_argument("bounds count does not match feature count");
    }
    for (const auto& fb : *bounds) {
      if (!(fb.lo < fb.hi) || !std::isfinite(fb.lo) || !std::isfinite(fb.hi)) {
        throw std::invalid_argument("rescale bounds need finite lo < hi");
      }
    }
    b = *bounds;
    out.bounds_source = BoundsSource::user;
  } else {
    for (Eigen::Index j = 0; j < dim; ++j) {
      b.push_back({d.rows.col(j).minCoeff(), d.rows.col(j).maxCoeff()});
    }
    out.bounds_source = BoundsSource::data;
  }
  out.clipped_values = 0;
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double lo = b[static_cast<std::size_t>(j)].lo;
    const double hi = b[static_cast<std::size_t>(j)].hi;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      double y = hi > lo ? 2.0 * (d.rows(i, j) - lo) / (hi - lo) - 1.0 : 0.0;
      if (y > 1.0 || y < -1.0) {
        ++out.clipped_values;
        y = std::clamp(y, -1.0, 1.0);
      }
      out.rows(i, j) = y;
    }
  }
  out.bounds = std::move(b);
  return out;
}

/// Undo rescale_unit_box (clipped values are not recovered).
inline Eigen::MatrixXd inverse_rescale(const Eigen::MatrixXd& unit,
                                       const std::vector<FeatureBounds>& bounds) {
  if (static_cast<Eigen::Index>(bounds.size()) != unit.cols()) {
    throw std::invalid_argument("bounds count does not match feature count");
  }
  Eigen::MatrixXd out(unit.rows(), unit.cols());
  for (Eigen::Index j = 0; j < unit.cols(); ++j) {
    const auto& fb = bounds[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
      out(i, j) = fb.lo + (unit(i, j) + 1.0) * (fb.hi - fb.lo) / 2.0;
    }
  }
  return out;
}

namespace detail {

// Fixed, data-independent bounds padded by three noise std-devs, then clip.
inline Dataset finish_generated(Eigen::MatrixXd raw, std::vector<int> labels,
                                std::vector<FeatureBounds> bounds) {
  Dataset d;
  d.rows = std::move(raw);
  d.labels = std::move(labels);
  Dataset out = rescale_unit_box(d, bounds);
  out.bounds_source = BoundsSource::generator;
  return out;
}

}  // namespace detail

/// Two interleaving half circles (the classic "moons" scene), already mapped
/// into [-1, 1]^2. The first ceil(n/2) rows are moon 0.
inline Dataset make_two_moons(int n, double noise, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_two_moons needs n >= 2");
  if (!(noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");
  RandomStream rng(seed);
  const int n_outer = n - n / 2;
  const int n_inner = n / 2;
  Eigen::MatrixXd raw(n, 2);
  std::vector<int> labels(static_cast<std::size_t>(n));
  auto angle = [](int i, int count) {
    return count == 1 ? 0.0 : std::numbers::pi * i / (count - 1);
  };
  for (int i = 0; i < n_outer; ++i) {
    const double t = angle(i, n_outer);
    raw(i, 0) = std::cos(t);
    raw(i, 1) = std::sin(t);
    labels[static_cast<std::size_t>(i)] = 0;
  }
  for (int i = 0; i < n_inner; ++i) {
    const double t = angle(i, n_inner);
    raw(n_outer + i, 0) = 1.0 - std::cos(t);
    raw(n_outer + i, 1) = 0.5 - std::sin(t);
    labels[static_cast<std::size_t>(n_outer + i)] = 1;
  }
  if (noise > 0.0) {
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      for (Eigen::Index j = 0; j < 2; ++j) raw(i, j) += noise * rng.normal();
    }
  }
  const double pad = 3.0 * noise;
  return detail::finish_generated(std::move(raw), std::move(labels),
                                  {{-1.0 - pad, 2.0 + pad}, {-0.5 - pad, 1.0 + pad}});
}

/// Three half circles: the two moons plus a third upper arc centered at
/// (2, 1), so each arc interleaves with its neighbor. Three clusters.
inline Dataset make_three_arcs(int n, double noise, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("make_three_arcs needs n >= 3");
  if (!(noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");
  RandomStream rng(seed);
  Eigen::MatrixXd raw(n, 2);
  std::vector<int> labels(static_cast<std::size_t>(n));
  int row = 0;
  for (int arc = 0; arc < 3; ++arc) {
    const int count = n / 3 + (arc < n % 3 ? 1 : 0);
    for (int i = 0; i < count; ++i, ++row) {
      const double t = count == 1 ? 0.0 : std::numbers::pi * i / (count - 1);
      if (arc == 1) {
        raw(row, 0) = 1.0 - std::cos(t);
        raw(row, 1) = 0.5 - std::sin(t);
      } else {
        raw(row, 0) = arc + std::cos(t);
        raw(row, 1) = 0.5 * arc + std::sin(t);
      }
      labels[static_cast<std::size_t>(row)] = arc;
    }
  }
  if (noise > 0.0) {
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      for (Eigen::Index j = 0; j < 2; ++j) raw(i, j) += noise * rng.normal();
    }
  }
  const double pad = 3.0 * noise;
  return detail::finish_generated(std::move(raw), std::move(labels),
                                  {{-1.0 - pad, 3.0 + pad}, {-0.5 - pad, 2.0 + pad}});
}

/// Isotropic Gaussian blobs inside the unit box; rows are labeled by source
/// blob. Every center needs a 3 sigma margin to the box boundary.
inline Dataset make_blobs(const std::vector<Eigen::VectorXd>& centers, double sigma, int n_per,
                          std::uint64_t seed) {
  if (centers.empty()) throw std::invalid_argument("make_blobs needs at least one center");
  if (n_per < 1) throw std::invalid_argument("make_blobs needs n_per >= 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  const Eigen::Index dim = centers.front().size();
  if (dim < 1) throw std::invalid_argument("centers must have dimension >= 1");
  for (const auto& c : centers) {
    if (c.size() != dim) throw std::invalid_argument("centers differ in dimension");
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (!(c(j) - 3.0 * sigma > -1.0 && c(j) + 3.0 * sigma < 1.0)) {
        throw std::invalid_argument("blob center violates the 3-sigma margin to [-1,1]");
      }
    }
  }
  RandomStream rng(seed);
  const auto total = static_cast<Eigen::Index>(centers.size()) * n_per;
  Dataset d;
  d.rows.resize(total, dim);
  d.labels = std::vector<int>(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (int i = 0; i < n_per; ++i, ++row) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        const double v = sigma > 0.0 ? centers[c](j) + sigma * rng.normal() : centers[c](j);
        d.rows(row, j) = std::clamp(v, -1.0, 1.0);
      }
      (*d.labels)[static_cast<std::size_t>(row)] = static_cast<int>(c);
    }
  }
  d.bounds_source = BoundsSource::generator;
  d.bounds.assign(static_cast<std::size_t>(dim), FeatureBounds{-1.0, 1.0});
  return d;
}

}  // namespace dpmorse

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

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace dpmorse {

/// Co-occurrence counts of two labelings. Rows follow the sorted distinct
/// labels of `a`, columns those of `b`.
struct Contingency {
  std::vector<std::vector<std::int64_t>> table;
  std::vector<std::int64_t> row_sums;
  std::vector<std::int64_t> col_sums;
  std::int64_t total = 0;
};

template <typename LabelA, typename LabelB>
Contingency contingency(const std::vector<LabelA>& a, const std::vector<LabelB>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("contingency: label vectors differ in length");
  if (a.empty()) throw std::invalid_argument("contingency: empty labelings");
  std::map<LabelA, std::size_t> ra;
  std::map<LabelB, std::size_t> cb;
  for (const auto& x : a) ra.emplace(x, 0);
  for (const auto& x : b) cb.emplace(x, 0);
  std::size_t i = 0;
  for (auto& [k, v] : ra) v = i++;
  i = 0;
  for (auto& [k, v] : cb) v = i++;

  Contingency c;
  c.table.assign(ra.size(), std::vector<std::int64_t>(cb.size(), 0));
  c.row_sums.assign(ra.size(), 0);
  c.col_sums.assign(cb.size(), 0);
  for (std::size_t n = 0; n < a.size(); ++n) {
    const std::size_t r = ra[a[n]];
    const std::size_t col = cb[b[n]];
    ++c.table[r][col];
    ++c.row_sums[r];
    ++c.col_sums[col];
  }
  c.total = static_cast<std::int64_t>(a.size());
  return c;
}

struct AriResult {
  double value = 0.0;
  bool degenerate = false;  // zero denominator, value forced to 0
};

namespace detail {
__extension__ using Int128 = __int128;
inline Int128 pairs_of(std::int64_t n) { return static_cast<Int128>(n) * (n - 1) / 2; }
}  // namespace detail

/// Adjusted Rand index (Hubert and Arabie). A zero denominator, which only
/// happens when both labelings are all singletons or both a single cluster,
/// yields 0 with `degenerate` set. Pair counts are combined in exact integer
/// arithmetic, so rational results such as -1/2 come out exact.
template <typename LabelA, typename LabelB>
AriResult adjusted_rand_index_detail(const std::vector<LabelA>& a, const std::vector<LabelB>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("adjusted_rand_index needs at least two points");
  const Contingency c = contingency(a, b);
  detail::Int128 index = 0;
  for (const auto& row : c.table) {
    for (auto n : row) index += detail::pairs_of(n);
  }
  detail::Int128 sa = 0;
  detail::Int128 sb = 0;
  for (auto n : c.row_sums) sa += detail::pairs_of(n);
  for (auto n : c.col_sums) sb += detail::pairs_of(n);
  const detail::Int128 total = detail::pairs_of(c.total);
  // ARI = (index - sa sb / T) / ((sa + sb) / 2 - sa sb / T), scaled by 2T.
  const detail::Int128 num = 2 * index * total - 2 * sa * sb;
  const detail::Int128 den = (sa + sb) * total - 2 * sa * sb;
  AriResult res;
  if (den == 0) {
    res.degenerate = true;
    return res;
  }
  res.value = static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
  return res;
}

template <typename LabelA, typename LabelB>
double adjusted_rand_index(const std::vector<LabelA>& a, const std::vector<LabelB>& b) {
  return adjusted_rand_index_detail(a, b).value;
}

}  // namespace dpmorse

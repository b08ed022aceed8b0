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
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dpmorse/dataset.hpp"
#include "dpmorse/landscape.hpp"
#include "dpmorse/tev.hpp"

namespace dpmorse {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Edge {
  Eigen::Index a = 0;
  Eigen::Index b = 0;
  double weight = kInf;
};

/// Sub-cluster graph; absent pairs have infinite weight.
struct AdjacencyGraph {
  Eigen::Index n = 0;
  std::vector<Edge> edges;  // a < b, one per pair, sorted by (a, b)

  double weight(Eigen::Index a, Eigen::Index b) const {
    if (a > b) std::swap(a, b);
    for (const auto& e : edges) {
      if (e.a == a && e.b == b) return e.weight;
    }
    return kInf;
  }
};

inline AdjacencyGraph build_graph(Eigen::Index n, const std::vector<Edge>& weighted) {
  if (n < 0) throw std::invalid_argument("vertex count must be >= 0");
  AdjacencyGraph g;
  g.n = n;
  for (Edge e : weighted) {
    if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n) {
      throw std::out_of_range("edge index out of range");
    }
    if (e.a == e.b) throw std::invalid_argument("self-loop edge");
    if (e.a > e.b) std::swap(e.a, e.b);
    auto it = std::find_if(g.edges.begin(), g.edges.end(),
                           [&](const Edge& x) { return x.a == e.a && x.b == e.b; });
    if (it == g.edges.end()) {
      g.edges.push_back(e);
    } else {
      it->weight = std::min(it->weight, e.weight);
    }
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const Edge& x, const Edge& y) {
    return std::pair(x.a, x.b) < std::pair(y.a, y.b);
  });
  return g;
}

/// Edge weight is the barrier f(t) = -ln p(t); duplicates keep the minimum.
inline AdjacencyGraph build_graph(Eigen::Index n, const std::vector<TransitionRecord>& tevs) {
  std::vector<Edge> edges;
  edges.reserve(tevs.size());
  for (const auto& r : tevs) edges.push_back({r.a, r.b, r.f_value});
  return build_graph(n, edges);
}

/// TEV edges plus one edge per absorbed center, weighted by f at that center.
inline AdjacencyGraph build_graph(Eigen::Index n, const std::vector<TransitionRecord>& tevs,
                                  const std::vector<CenterLink>& links) {
  std::vector<Edge> edges;
  edges.reserve(tevs.size() + links.size());
  for (const auto& r : tevs) edges.push_back({r.a, r.b, r.f_value});
  for (const auto& l : links) edges.push_back({l.from, l.to, l.f_value});
  return build_graph(n, edges);
}

struct MergeEvent {
  int step = 0;
  Eigen::Index cluster_a = 0;  // cluster ids: leaves are 0..n-1,
  Eigen::Index cluster_b = 0;  // merge s creates id n + s
  double weight = 0.0;
};

struct Dendrogram {
  Eigen::Index n_leaves = 0;
  std::vector<MergeEvent> merges;
};

struct MergeResult {
  std::vector<int> labels;  // vertex -> cluster, numbered by smallest member
  Dendrogram dendrogram;
  Eigen::Index clusters = 0;
  bool disconnected = false;  // stopped early on infinite distances
};

namespace detail {

inline std::vector<int> compact_labels(std::vector<Eigen::Index> root_of) {
  std::vector<int> out(root_of.size(), -1);
  std::vector<Eigen::Index> seen;
  for (std::size_t v = 0; v < root_of.size(); ++v) {
    auto it = std::find(seen.begin(), seen.end(), root_of[v]);
    if (it == seen.end()) {
      seen.push_back(root_of[v]);
      out[v] = static_cast<int>(seen.size() - 1);
    } else {
      out[v] = static_cast<int>(it - seen.begin());
    }
  }
  return out;
}

}  // namespace detail

/// Agglomerates the closest pair of clusters with min-linkage until `target`
/// clusters remain or only infinite distances are left. Ties go to the
/// lexicographically smallest (cluster_a, cluster_b).
inline MergeResult merge_to_k(const AdjacencyGraph& g, Eigen::Index target) {
  if (target < 1 || target > std::max<Eigen::Index>(g.n, 1)) {
    throw std::invalid_argument("target cluster count must lie in [1, n]");
  }
  const Eigen::Index n = g.n;
  const Eigen::Index max_ids = 2 * n;
  // dist over cluster ids; rows of retired clusters are ignored.
  std::vector<std::vector<double>> dist(static_cast<std::size_t>(max_ids),
                                        std::vector<double>(static_cast<std::size_t>(max_ids), kInf));
  for (const auto& e : g.edges) {
    dist[static_cast<std::size_t>(e.a)][static_cast<std::size_t>(e.b)] = e.weight;
    dist[static_cast<std::size_t>(e.b)][static_cast<std::size_t>(e.a)] = e.weight;
  }
  std::vector<Eigen::Index> active(static_cast<std::size_t>(n));
  std::iota(active.begin(), active.end(), Eigen::Index{0});
  std::vector<Eigen::Index> cluster_of(static_cast<std::size_t>(n));
  std::iota(cluster_of.begin(), cluster_of.end(), Eigen::Index{0});

  MergeResult res;
  res.dendrogram.n_leaves = n;
  Eigen::Index next_id = n;
  for (Eigen::Index step = 0; step < n - target; ++step) {
    double best = kInf;
    Eigen::Index ba = -1;
    Eigen::Index bb = -1;
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const Eigen::Index a = std::min(active[i], active[j]);
        const Eigen::Index b = std::max(active[i], active[j]);
        const double d = dist[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        if (d < best || (d == best && d < kInf && std::pair(a, b) < std::pair(ba, bb))) {
          best = d;
          ba = a;
          bb = b;
        }
      }
    }
    if (!(best < kInf)) {
      res.disconnected = true;
      break;
    }
    const Eigen::Index c = next_id++;
    for (Eigen::Index other : active) {
      if (other == ba || other == bb) continue;
      const double d = std::min(dist[static_cast<std::size_t>(ba)][static_cast<std::size_t>(other)],
                                dist[static_cast<std::size_t>(bb)][static_cast<std::size_t>(other)]);
      dist[static_cast<std::size_t>(c)][static_cast<std::size_t>(other)] = d;
      dist[static_cast<std::size_t>(other)][static_cast<std::size_t>(c)] = d;
    }
    std::erase(active, ba);
    std::erase(active, bb);
    active.push_back(c);
    for (auto& cl : cluster_of) {
      if (cl == ba || cl == bb) cl = c;
    }
    res.dendrogram.merges.push_back({static_cast<int>(step), ba, bb, best});
  }
  res.labels = detail::compact_labels(cluster_of);
  res.clusters = static_cast<Eigen::Index>(active.size());
  return res;
}

/// Merges until one cluster remains or the graph falls apart.
inline Dendrogram full_dendrogram(const AdjacencyGraph& g) {
  if (g.n == 0) return Dendrogram{};
  return merge_to_k(g, 1).dendrogram;
}

/// Replays the first n - target merges of a dendrogram (fewer if it has
/// fewer) and returns the vertex labels.
inline std::vector<int> cut_dendrogram(const Dendrogram& d, Eigen::Index target) {
  const Eigen::Index n = d.n_leaves;
  if (target < 1 || target > std::max<Eigen::Index>(n, 1)) {
    throw std::invalid_argument("target cluster count must lie in [1, n]");
  }
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(2 * n));
  std::iota(parent.begin(), parent.end(), Eigen::Index{0});
  std::function<Eigen::Index(Eigen::Index)> find = [&](Eigen::Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  const auto replay = std::min<std::size_t>(d.merges.size(), static_cast<std::size_t>(n - target));
  for (std::size_t s = 0; s < replay; ++s) {
    const auto& m = d.merges[s];
    const Eigen::Index id = n + static_cast<Eigen::Index>(s);
    parent[static_cast<std::size_t>(find(m.cluster_a))] = id;
    parent[static_cast<std::size_t>(find(m.cluster_b))] = id;
  }
  std::vector<Eigen::Index> root(static_cast<std::size_t>(n));
  for (Eigen::Index v = 0; v < n; ++v) root[static_cast<std::size_t>(v)] = find(v);
  return detail::compact_labels(root);
}

/// Indented text tree, one line per node, roots in order of creation.
inline std::string render_dendrogram(const Dendrogram& d) {
  const Eigen::Index n = d.n_leaves;
  const auto total = static_cast<std::size_t>(n) + d.merges.size();
  std::vector<bool> has_parent(total, false);
  for (const auto& m : d.merges) {
    has_parent[static_cast<std::size_t>(m.cluster_a)] = true;
    has_parent[static_cast<std::size_t>(m.cluster_b)] = true;
  }
  std::ostringstream os;
  std::function<void(Eigen::Index, int)> emit = [&](Eigen::Index id, int depth) {
    os << std::string(static_cast<std::size_t>(2 * depth), ' ');
    if (id < n) {
      os << "leaf " << id << '\n';
      return;
    }
    const auto& m = d.merges[static_cast<std::size_t>(id - n)];
    os << "node " << id << " (weight " << m.weight << ")\n";
    emit(m.cluster_a, depth + 1);
    emit(m.cluster_b, depth + 1);
  };
  for (auto id = static_cast<Eigen::Index>(total) - 1; id >= 0; --id) {
    if (!has_parent[static_cast<std::size_t>(id)]) emit(id, 0);
  }
  return os.str();
}

struct DatasetLabels {
  std::vector<int> labels;
  std::vector<int> subcluster;  // raw basin center per row
  int nonconverged = 0;
  int low_confidence = 0;
  int boundary = 0;
};

/// Labels every row by the basin its flow ends in, mapped through
/// `labels_map` (sub-cluster -> merged cluster).
inline DatasetLabels label_dataset(const Landscape& land, const std::vector<int>& labels_map,
                                   const Dataset& data, double match_tol = 0.25,
                                   const FlowOptions& flow = {}) {
  if (static_cast<Eigen::Index>(labels_map.size()) != land.components()) {
    throw std::invalid_argument("labels_map must cover every sub-cluster");
  }
  const auto& centers = land.model().means();
  DatasetLabels out;
  out.labels.reserve(static_cast<std::size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const BasinAssignment b = assign_basin(land, data.rows.row(i).transpose(), centers, match_tol, flow);
    out.subcluster.push_back(static_cast<int>(b.center));
    out.labels.push_back(labels_map[static_cast<std::size_t>(b.center)]);
    out.nonconverged += b.converged ? 0 : 1;
    out.low_confidence += b.low_confidence ? 1 : 0;
    out.boundary += b.boundary ? 1 : 0;
  }
  return out;
}

}  // namespace dpmorse

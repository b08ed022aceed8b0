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

// End-to-end runs: fit K0 sub-clusters, find TEVs, merge to K, label rows by
// basin, score. Reports are JSON with a fixed field order and no clock or
// host data, so a config and seed determine the report bytes.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "dpmorse/dataset.hpp"
#include "dpmorse/error.hpp"
#include "dpmorse/fit.hpp"
#include "dpmorse/landscape.hpp"
#include "dpmorse/merge.hpp"
#include "dpmorse/metrics.hpp"
#include "dpmorse/privacy.hpp"
#include "dpmorse/random.hpp"
#include "dpmorse/serialize.hpp"
#include "dpmorse/tev.hpp"

namespace dpmorse {

inline constexpr int kReportSchemaVersion = 1;

enum class Method { dpmog_hard, dplloyd_mog, em_soft, em_hard };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::dpmog_hard: return "dpmog_hard";
    case Method::dplloyd_mog: return "dplloyd_mog";
    case Method::em_soft: return "em_soft";
    case Method::em_hard: return "em_hard";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::dpmog_hard, Method::dplloyd_mog, Method::em_soft, Method::em_hard}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + s + "' (dpmog_hard, dplloyd_mog, em_soft, em_hard)");
}

inline bool is_private(Method m) { return m == Method::dpmog_hard || m == Method::dplloyd_mog; }

struct RunConfig {
  // Data: a CSV path, or a generator when the path is empty.
  std::string data;
  bool header = true;
  std::string label_column;  // header name, or 0-based index without header
  std::string bounds;        // "lo:hi,lo:hi,..." per feature; empty = from data
  std::string generator = "two_moons";  // two_moons | three_arcs | blobs
  int n = 400;
  double noise = 0.05;
  std::uint64_t data_seed = 1000;

  Method method = Method::dpmog_hard;
  bool morse = true;
  int k0 = 6;
  int k = 2;
  double epsilon = 1.0;
  double delta = 1e-5;
  int tau1 = 10;
  int tau2 = 5;
  int m = 20;
  double eps_perturb = 0.05;
  int repeats = 1;
  std::uint64_t seed = 0;
  int threads = 1;  // 0 = hardware concurrency; never changes the report

  void validate() const {
    if (k0 < 1) throw ConfigError("k0 must be >= 1");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (k > k0) throw ConfigError("k must not exceed k0");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (tau1 < 1) throw ConfigError("tau1 must be >= 1");
    if (tau2 < 0) throw ConfigError("tau2 must be >= 0");
    if (m < 1) throw ConfigError("m must be >= 1");
    if (!(eps_perturb > 0.0) || !std::isfinite(eps_perturb)) throw ConfigError("perturb must be > 0");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (is_private(method)) {
      if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be > 0");
      if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    }
    if (data.empty()) {
      if (generator != "two_moons" && generator != "three_arcs" && generator != "blobs") {
        throw ConfigError("unknown generator '" + generator + "' (two_moons, three_arcs, blobs)");
      }
      if (n < 3) throw ConfigError("n must be >= 3");
      if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise must be >= 0");
    }
  }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !(in >> std::ws).eof()) throw ConfigError("bad value for '" + key + "': '" + value + "'");
  return out;
}

inline bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw ConfigError("bad value for '" + key + "': '" + value + "' (on/off)");
}

}  // namespace detail

/// Sets one config key from its text value. Keys match the CLI flag names.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "data") cfg.data = value;
  else if (key == "header") cfg.header = detail::parse_flag(key, value);
  else if (key == "label_column") cfg.label_column = value;
  else if (key == "bounds") cfg.bounds = value;
  else if (key == "generator") cfg.generator = value;
  else if (key == "n") cfg.n = parse_number<int>(key, value);
  else if (key == "noise") cfg.noise = parse_number<double>(key, value);
  else if (key == "data_seed") cfg.data_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "method") cfg.method = parse_method(value);
  else if (key == "morse") cfg.morse = detail::parse_flag(key, value);
  else if (key == "k0") cfg.k0 = parse_number<int>(key, value);
  else if (key == "k") cfg.k = parse_number<int>(key, value);
  else if (key == "epsilon") cfg.epsilon = parse_number<double>(key, value);
  else if (key == "delta") cfg.delta = parse_number<double>(key, value);
  else if (key == "tau1") cfg.tau1 = parse_number<int>(key, value);
  else if (key == "tau2") cfg.tau2 = parse_number<int>(key, value);
  else if (key == "m") cfg.m = parse_number<int>(key, value);
  else if (key == "perturb") cfg.eps_perturb = parse_number<double>(key, value);
  else if (key == "repeats") cfg.repeats = parse_number<int>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "threads") cfg.threads = parse_number<int>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Flat `key = value` lines; `#` starts a comment; blank lines are skipped.
/// Later lines override earlier ones.
inline void parse_config(std::istream& in, RunConfig& cfg) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string value(detail::trim(body.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    apply_setting(cfg, key, value);
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  RunConfig cfg;
  parse_config(in, cfg);
  return cfg;
}

/// Every setting, defaults included, in a fixed order.
inline Json to_json(const RunConfig& c) {
  Json out;
  if (c.data.empty()) {
    out["generator"] = c.generator;
    out["n"] = c.n;
    out["noise"] = c.noise;
    out["data_seed"] = c.data_seed;
  } else {
    out["data"] = c.data;
    out["header"] = c.header;
    out["label_column"] = c.label_column;
    out["bounds"] = c.bounds;
  }
  out["method"] = to_string(c.method);
  out["morse"] = c.morse;
  out["k0"] = c.k0;
  out["k"] = c.k;
  if (is_private(c.method)) {
    out["epsilon"] = c.epsilon;
    out["delta"] = c.delta;
  }
  out["tau1"] = c.tau1;
  out["tau2"] = c.tau2;
  out["m"] = c.m;
  out["perturb"] = c.eps_perturb;
  out["repeats"] = c.repeats;
  out["seed"] = c.seed;
  return out;
}

inline std::vector<FeatureBounds> parse_bounds(const std::string& text) {
  std::vector<FeatureBounds> out;
  for (auto cell : detail::split_commas(text)) {
    const auto colon = cell.find(':');
    if (colon == std::string_view::npos) throw ConfigError("bounds entries look like lo:hi");
    const std::string lo(detail::trim(cell.substr(0, colon)));
    const std::string hi(detail::trim(cell.substr(colon + 1)));
    out.push_back({detail::parse_number<double>("bounds", lo), detail::parse_number<double>("bounds", hi)});
  }
  return out;
}

/// The three-blob scene used by the `blobs` generator: centers on a triangle
/// well inside the unit box, n split evenly.
inline Dataset make_default_blobs(int n, double noise, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> centers{Eigen::Vector2d(-0.5, -0.4), Eigen::Vector2d(0.5, -0.4),
                                       Eigen::Vector2d(0.0, 0.5)};
  return make_blobs(centers, noise, std::max(1, n / 3), seed);
}

/// The configured dataset, mapped into [-1, 1]^D.
inline Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data.empty()) {
    if (cfg.generator == "two_moons") return make_two_moons(cfg.n, cfg.noise, cfg.data_seed);
    if (cfg.generator == "three_arcs") return make_three_arcs(cfg.n, cfg.noise, cfg.data_seed);
    if (cfg.generator == "blobs") return make_default_blobs(cfg.n, cfg.noise, cfg.data_seed);
    throw ConfigError("unknown generator '" + cfg.generator + "'");
  }
  std::optional<std::string> label;
  if (!cfg.label_column.empty()) label = cfg.label_column;
  const Dataset raw = load_csv(cfg.data, cfg.header, label);
  std::optional<std::vector<FeatureBounds>> bounds;
  if (!cfg.bounds.empty()) bounds = parse_bounds(cfg.bounds);
  try {
    return rescale_unit_box(raw, bounds);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

/// Fits K0 components with the configured method. All randomness comes from
/// `seed`: the private fits draw from RandomStream(seed).fork(0), the EM
/// baselines seed their restarts from `seed`.
inline FitResult fit_subclusters(const RunConfig& cfg, const Dataset& data, std::uint64_t seed) {
  const RandomStream master(seed);
  switch (cfg.method) {
    case Method::dpmog_hard: {
      RandomStream rng = master.fork(0);
      const PrivacySpec spec{cfg.epsilon, cfg.delta, cfg.tau1, Mechanism::gaussian_mog_hard};
      return fit_dpmog_hard(data, cfg.k0, spec, std::nullopt, rng);
    }
    case Method::dplloyd_mog: {
      RandomStream rng = master.fork(0);
      const PrivacySpec spec{cfg.epsilon, cfg.delta, cfg.tau1, Mechanism::lloyd_mixed};
      return fit_dplloyd_mog(data, cfg.k0, spec, rng);
    }
    case Method::em_soft: return fit_em(data, cfg.k0, cfg.tau1, false, seed);
    case Method::em_hard: return fit_em(data, cfg.k0, cfg.tau1, true, seed);
  }
  throw ConfigError("unknown method");
}

/// Raw sub-cluster of every row: the component of largest responsibility.
inline std::vector<int> subcluster_labels(const MixtureModel& model, const Dataset& data) {
  return detail::hard_assign(model, data.rows);
}

inline TevOptions tev_options(const RunConfig& cfg) {
  TevOptions opt;
  opt.m = cfg.m;
  opt.tau2 = cfg.tau2;
  opt.eps_perturb = cfg.eps_perturb;
  return opt;
}

/// Morse labeling of the rows with K clusters that each hold at least one
/// row. Clusters made only of empty sub-clusters (components whose basins
/// hold no rows) are not counted, so the dendrogram is cut at the first level
/// giving K nonempty clusters.
struct MorseLabeling {
  MergeResult merge;
  Dendrogram dendrogram;
  DatasetLabels rows;
  Eigen::Index cut_clusters = 0;     // dendrogram level used
  Eigen::Index nonempty_clusters = 0;
};

inline Eigen::Index count_distinct(const std::vector<int>& labels) {
  return static_cast<Eigen::Index>(std::set<int>(labels.begin(), labels.end()).size());
}

inline MorseLabeling morse_label(const Landscape& land, const AdjacencyGraph& graph, Eigen::Index k,
                                 const Dataset& data, const TevOptions& opt) {
  MorseLabeling out;
  out.merge = merge_to_k(graph, k);
  out.dendrogram = full_dendrogram(graph);
  out.rows = label_dataset(land, out.merge.labels, data, opt.match_tol, opt.flow);
  out.cut_clusters = out.merge.clusters;
  out.nonempty_clusters = count_distinct(out.rows.labels);
  for (Eigen::Index level = out.merge.clusters + 1; out.nonempty_clusters < k && level <= graph.n; ++level) {
    const std::vector<int> cut = cut_dendrogram(out.dendrogram, level);
    for (std::size_t i = 0; i < out.rows.labels.size(); ++i) {
      out.rows.labels[i] = cut[static_cast<std::size_t>(out.rows.subcluster[i])];
    }
    out.cut_clusters = level;
    out.nonempty_clusters = count_distinct(out.rows.labels);
  }
  return out;
}

struct RepeatResult {
  int repeat = 0;
  std::uint64_t seed = 0;
  std::optional<double> ari_subclusters;
  std::optional<double> ari_merged;
  Json detail;  // model, TEVs, dendrogram, diagnostics
};

namespace detail {

inline Json ari_json(const std::optional<double>& v) { return v ? real_json(*v) : Json(nullptr); }

inline Json model_summary(const FitResult& fit) {
  Json out;
  out["method"] = fit.trace.method;
  if (fit.trace.spec && fit.trace.noise) out["privacy"] = to_json(*fit.trace.spec, *fit.trace.noise);
  int clamped = 0;
  int repaired = 0;
  for (const auto& it : fit.trace.iterations) {
    clamped += it.repair.clamped_counts;
    repaired += it.repair.repaired_covariances;
  }
  out["clamped_counts"] = clamped;
  out["repaired_covariances"] = repaired;
  if (std::isfinite(fit.trace.final_log_likelihood)) out["final_log_likelihood"] = fit.trace.final_log_likelihood;
  out["model"] = to_json(fit.model);
  return out;
}

}  // namespace detail

inline RepeatResult run_repeat(const RunConfig& cfg, const Dataset& data, int repeat) {
  RepeatResult out;
  out.repeat = repeat;
  out.seed = cfg.seed + static_cast<std::uint64_t>(repeat);
  const FitResult fit = fit_subclusters(cfg, data, out.seed);
  const std::vector<int> sub = subcluster_labels(fit.model, data);
  if (data.labels) out.ari_subclusters = adjusted_rand_index(*data.labels, sub);

  Json d;
  d["repeat"] = repeat;
  d["seed"] = out.seed;
  d["fit"] = detail::model_summary(fit);
  if (!cfg.morse) {
    out.ari_merged = out.ari_subclusters;
  } else {
    const Landscape land(fit.model);
    const TevOptions opt = tev_options(cfg);
    const TevSearch tevs = find_all_tevs(land, opt);
    const std::vector<CenterLink> links = absorbed_centers(land, opt.flow);
    const AdjacencyGraph graph = build_graph(cfg.k0, tevs.records, links);
    const MorseLabeling lab = morse_label(land, graph, cfg.k, data, opt);
    if (data.labels) out.ari_merged = adjusted_rand_index(*data.labels, lab.rows.labels);

    d["tev_count"] = tevs.records.size();
    d["tevs"] = to_json(tevs.records);
    Json jl = Json::array();
    for (const auto& l : links) jl.push_back({{"from", l.from}, {"to", l.to}, {"f_value", real_json(l.f_value)}});
    d["absorbed_centers"] = std::move(jl);
    d["extra_modes"] = tevs.modes.size() - static_cast<std::size_t>(cfg.k0);
    d["clusters"] = lab.merge.clusters;
    d["disconnected"] = lab.merge.disconnected;
    d["cut_clusters"] = lab.cut_clusters;
    d["nonempty_clusters"] = lab.nonempty_clusters;
    d["dendrogram"] = to_json(lab.dendrogram);
    d["labeling"] = {{"nonconverged", lab.rows.nonconverged},
                     {"low_confidence", lab.rows.low_confidence},
                     {"boundary", lab.rows.boundary}};
  }
  d["ari_subclusters"] = detail::ari_json(out.ari_subclusters);
  d["ari_merged"] = detail::ari_json(out.ari_merged);
  out.detail = std::move(d);
  return out;
}

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one value
};

inline Aggregate aggregate(const std::vector<double>& v) {
  Aggregate a;
  if (v.empty()) return a;
  for (double x : v) a.mean += x;
  a.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return a;
}

struct RunReport {
  RunConfig config;
  std::vector<RepeatResult> repeats;  // ordered by repeat index
  std::optional<Aggregate> ari_subclusters;
  std::optional<Aggregate> ari_merged;
  Json json;
};

inline Json dataset_json(const RunConfig& cfg, const Dataset& data) {
  Json out = to_json(data);
  out["source"] = cfg.data.empty() ? "generator:" + cfg.generator : cfg.data;
  // Data-derived bounds depend on every row, so no DP claim covers them.
  out["dp_claim"] = is_private(cfg.method) && data.bounds_source != BoundsSource::data;
  return out;
}

/// Runs every repeat (in parallel when cfg.threads allows) and assembles the
/// report in repeat order.
inline RunReport run_pipeline(const RunConfig& cfg, const Dataset& data) {
  cfg.validate();
  if (data.size() < cfg.k0) throw DataError("dataset has fewer rows than k0");
  RunReport rep;
  rep.config = cfg;
  rep.repeats.resize(static_cast<std::size_t>(cfg.repeats));
  unsigned workers = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                      : static_cast<unsigned>(cfg.threads);
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cfg.repeats));
  if (workers <= 1) {
    for (int r = 0; r < cfg.repeats; ++r) rep.repeats[static_cast<std::size_t>(r)] = run_repeat(cfg, data, r);
  } else {
    for (int start = 0; start < cfg.repeats; start += static_cast<int>(workers)) {
      std::vector<std::future<RepeatResult>> batch;
      const int stop = std::min(cfg.repeats, start + static_cast<int>(workers));
      for (int r = start; r < stop; ++r) {
        batch.push_back(std::async(std::launch::async, [&cfg, &data, r] { return run_repeat(cfg, data, r); }));
      }
      for (int r = start; r < stop; ++r) rep.repeats[static_cast<std::size_t>(r)] = batch[static_cast<std::size_t>(r - start)].get();
    }
  }

  Json repeats = Json::array();
  std::vector<double> sub;
  std::vector<double> merged;
  for (const auto& r : rep.repeats) {
    repeats.push_back(r.detail);
    if (r.ari_subclusters) sub.push_back(*r.ari_subclusters);
    if (r.ari_merged) merged.push_back(*r.ari_merged);
  }
  if (sub.size() == rep.repeats.size()) rep.ari_subclusters = aggregate(sub);
  if (merged.size() == rep.repeats.size()) rep.ari_merged = aggregate(merged);

  Json& j = rep.json;
  j["schema_version"] = kReportSchemaVersion;
  j["config"] = to_json(cfg);
  j["dataset"] = dataset_json(cfg, data);
  j["repeats"] = std::move(repeats);
  Json agg;
  auto put = [&agg](const char* key, const std::optional<Aggregate>& a) {
    agg[key] = a ? Json{{"mean", real_json(a->mean)}, {"std", real_json(a->std)}} : Json(nullptr);
  };
  put("ari_subclusters", rep.ari_subclusters);
  put("ari_merged", rep.ari_merged);
  j["aggregate"] = std::move(agg);
  return rep;
}

inline RunReport run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  return run_pipeline(cfg, load_dataset(cfg));
}

/// Report text: two-space indented JSON with a trailing newline.
inline std::string report_text(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Sweeps

struct SweepKey {
  double epsilon = 0.0;
  int k0 = 0;
  Method method = Method::dpmog_hard;
  bool morse = true;

  auto tie() const { return std::tuple(epsilon, k0, static_cast<int>(method), morse); }
  bool operator<(const SweepKey& o) const { return tie() < o.tie(); }
  bool operator==(const SweepKey& o) const { return tie() == o.tie(); }
};

inline SweepKey key_of(const RunConfig& c) { return {c.epsilon, c.k0, c.method, c.morse}; }

struct SweepCell {
  SweepKey key;
  std::optional<RunReport> report;
  std::string error;  // set when the cell failed
};

struct SweepResult {
  std::vector<SweepCell> cells;  // sorted by key
  Json json;
  std::string csv;
};

/// Cartesian product of the listed values over a base config.
inline std::vector<RunConfig> expand_grid(const RunConfig& base, const std::vector<double>& epsilons,
                                          const std::vector<int>& k0s, const std::vector<Method>& methods,
                                          const std::vector<bool>& morses) {
  std::vector<RunConfig> out;
  for (double e : epsilons) {
    for (int k0 : k0s) {
      for (Method m : methods) {
        for (bool mo : morses) {
          RunConfig c = base;
          c.epsilon = e;
          c.k0 = k0;
          c.method = m;
          c.morse = mo;
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

namespace detail {

inline std::string csv_real(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return "";
  return Json(*v).dump();
}

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// Runs every config. A failing cell records its error and the sweep goes on.
/// Cells are keyed by (epsilon, K0, method, morse); a repeated key is a
/// config error. Datasets are loaded once per distinct data config.
inline SweepResult sweep(const std::vector<RunConfig>& grid) {
  if (grid.empty()) throw ConfigError("sweep needs a nonempty grid");
  std::vector<RunConfig> sorted = grid;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RunConfig& a, const RunConfig& b) { return key_of(a) < key_of(b); });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (key_of(sorted[i]) == key_of(sorted[i - 1])) throw ConfigError("sweep grid repeats a cell key");
  }
  SweepResult out;
  std::map<std::string, Dataset> datasets;
  for (const auto& cfg : sorted) {
    SweepCell cell;
    cell.key = key_of(cfg);
    try {
      cfg.validate();
      const std::string data_key = cfg.data + '\n' + cfg.label_column + '\n' + cfg.bounds + '\n' +
                                   (cfg.header ? "h" : "-") + cfg.generator + '\n' + std::to_string(cfg.n) +
                                   '\n' + Json(cfg.noise).dump() + '\n' + std::to_string(cfg.data_seed);
      auto it = datasets.find(data_key);
      if (it == datasets.end()) it = datasets.emplace(data_key, load_dataset(cfg)).first;
      cell.report = run_pipeline(cfg, it->second);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    out.cells.push_back(std::move(cell));
  }

  Json cells = Json::array();
  std::ostringstream csv;
  csv << "epsilon,k0,method,morse,status,ari_merged_mean,ari_merged_std,ari_subclusters_mean,"
         "ari_subclusters_std,error\n";
  for (const auto& c : out.cells) {
    Json jc;
    jc["epsilon"] = c.key.epsilon;
    jc["k0"] = c.key.k0;
    jc["method"] = to_string(c.key.method);
    jc["morse"] = c.key.morse;
    jc["status"] = c.report ? "ok" : "failed";
    std::optional<double> mm, ms, sm, ss;
    if (c.report) {
      if (c.report->ari_merged) {
        mm = c.report->ari_merged->mean;
        ms = c.report->ari_merged->std;
      }
      if (c.report->ari_subclusters) {
        sm = c.report->ari_subclusters->mean;
        ss = c.report->ari_subclusters->std;
      }
      jc["report"] = c.report->json;
    } else {
      jc["error"] = c.error;
    }
    cells.push_back(std::move(jc));
    csv << Json(c.key.epsilon).dump() << ',' << c.key.k0 << ',' << to_string(c.key.method) << ','
        << (c.key.morse ? "on" : "off") << ',' << (c.report ? "ok" : "failed") << ',' << detail::csv_real(mm)
        << ',' << detail::csv_real(ms) << ',' << detail::csv_real(sm) << ',' << detail::csv_real(ss) << ','
        << (c.report ? "" : detail::csv_quote(c.error)) << '\n';
  }
  out.json["schema_version"] = kReportSchemaVersion;
  out.json["cells"] = std::move(cells);
  out.csv = csv.str();
  return out;
}

}  // namespace dpmorse

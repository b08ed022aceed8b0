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

// JSON forms of the library's values. Objects keep the field order written
// here, so equal values always serialize to equal bytes. Non-finite reals
// become null.
//
//   model:      {components, dim, weights:[K], means:[[D]...],
//                covariances:[[D*D row-major]...]}
//   privacy:    {epsilon, delta, tau, mechanism, r, sigma, rho}
//   tev:        {a, b, t:[D], f_value, p_value}
//   critical:   {location:[D], index, f_value, p_value, gradient_norm}
//   dendrogram: {n_leaves, merges:[{step, a, b, weight}]}

#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "dpmorse/dataset.hpp"
#include "dpmorse/error.hpp"
#include "dpmorse/fit.hpp"
#include "dpmorse/landscape.hpp"
#include "dpmorse/merge.hpp"
#include "dpmorse/mixture.hpp"
#include "dpmorse/privacy.hpp"
#include "dpmorse/tev.hpp"

namespace dpmorse {

using Json = nlohmann::ordered_json;

inline Json real_json(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(real_json(v(i)));
  return out;
}

inline Json matrix_row_major_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(real_json(m(i, j)));
  }
  return out;
}

inline Json to_json(const MixtureModel& model) {
  Json out;
  out["components"] = model.components();
  out["dim"] = model.dim();
  Json w = Json::array();
  Json mu = Json::array();
  Json cov = Json::array();
  for (Eigen::Index k = 0; k < model.components(); ++k) {
    w.push_back(real_json(model.weight(k)));
    mu.push_back(vector_json(model.mean(k)));
    cov.push_back(matrix_row_major_json(model.covariance(k)));
  }
  out["weights"] = std::move(w);
  out["means"] = std::move(mu);
  out["covariances"] = std::move(cov);
  return out;
}

namespace detail {

inline double json_real(const Json& j, const char* what) {
  if (!j.is_number()) throw DataError(std::string(what) + " must be a number");
  return j.get<double>();
}

}  // namespace detail

/// Inverse of to_json(MixtureModel); throws DataError on malformed input.
inline MixtureModel model_from_json(const Json& j) {
  if (!j.is_object()) throw DataError("model JSON must be an object");
  for (const char* key : {"weights", "means", "covariances"}) {
    if (!j.contains(key) || !j[key].is_array()) {
      throw DataError(std::string("model JSON: missing array '") + key + "'");
    }
  }
  const auto& jw = j["weights"];
  const auto& jm = j["means"];
  const auto& jc = j["covariances"];
  if (jw.empty() || jm.size() != jw.size() || jc.size() != jw.size()) {
    throw DataError("model JSON: weights, means and covariances must have equal nonzero length");
  }
  if (!jm[0].is_array() || jm[0].empty()) throw DataError("model JSON: means must be nonempty arrays");
  const auto dim = static_cast<Eigen::Index>(jm[0].size());
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  for (std::size_t k = 0; k < jw.size(); ++k) {
    weights.push_back(detail::json_real(jw[k], "weight"));
    if (!jm[k].is_array() || static_cast<Eigen::Index>(jm[k].size()) != dim) {
      throw DataError("model JSON: every mean needs " + std::to_string(dim) + " entries");
    }
    Eigen::VectorXd mu(dim);
    for (Eigen::Index i = 0; i < dim; ++i) mu(i) = detail::json_real(jm[k][static_cast<std::size_t>(i)], "mean");
    if (!jc[k].is_array() || static_cast<Eigen::Index>(jc[k].size()) != dim * dim) {
      throw DataError("model JSON: every covariance needs " + std::to_string(dim * dim) + " entries");
    }
    Eigen::MatrixXd c(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
      for (Eigen::Index s = 0; s < dim; ++s) {
        c(r, s) = detail::json_real(jc[k][static_cast<std::size_t>(r * dim + s)], "covariance");
      }
    }
    means.push_back(std::move(mu));
    covs.push_back(std::move(c));
  }
  try {
    return MixtureModel(std::move(weights), std::move(means), std::move(covs));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
}

inline Json to_json(const PrivacySpec& spec, const NoiseScale& noise) {
  Json out;
  out["epsilon"] = real_json(spec.epsilon);
  out["delta"] = real_json(spec.delta);
  out["tau"] = spec.tau;
  out["mechanism"] = to_string(spec.mechanism);
  out["r"] = noise.r;
  out["sigma"] = real_json(noise.sigma);
  out["rho"] = real_json(noise.rho);
  return out;
}

inline Json to_json(const TransitionRecord& r) {
  Json out;
  out["a"] = r.a;
  out["b"] = r.b;
  out["t"] = vector_json(r.t);
  out["f_value"] = real_json(r.f_value);
  out["p_value"] = real_json(r.p_value);
  return out;
}

inline Json to_json(const std::vector<TransitionRecord>& records) {
  Json out = Json::array();
  for (const auto& r : records) out.push_back(to_json(r));
  return out;
}

inline std::vector<TransitionRecord> tev_records_from_json(const Json& j) {
  if (!j.is_array()) throw DataError("TEV JSON must be an array");
  std::vector<TransitionRecord> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("a") || !e.contains("b") || !e.contains("f_value")) {
      throw DataError("TEV JSON entries need a, b and f_value");
    }
    TransitionRecord r;
    r.a = e["a"].get<Eigen::Index>();
    r.b = e["b"].get<Eigen::Index>();
    r.f_value = e["f_value"].is_null() ? kInf : e["f_value"].get<double>();
    if (e.contains("p_value") && e["p_value"].is_number()) r.p_value = e["p_value"].get<double>();
    if (e.contains("t") && e["t"].is_array()) {
      r.t.resize(static_cast<Eigen::Index>(e["t"].size()));
      for (std::size_t i = 0; i < e["t"].size(); ++i) {
        r.t(static_cast<Eigen::Index>(i)) = detail::json_real(e["t"][i], "TEV coordinate");
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline Json to_json(const CriticalPoint& cp) {
  Json out;
  out["location"] = vector_json(cp.location);
  out["index"] = cp.index;
  out["f_value"] = real_json(cp.f_value);
  out["p_value"] = real_json(cp.p_value);
  out["gradient_norm"] = real_json(cp.gradient_norm);
  return out;
}

inline Json to_json(const Dendrogram& d) {
  Json out;
  out["n_leaves"] = d.n_leaves;
  Json merges = Json::array();
  for (const auto& m : d.merges) {
    Json e;
    e["step"] = m.step;
    e["a"] = m.cluster_a;
    e["b"] = m.cluster_b;
    e["weight"] = real_json(m.weight);
    merges.push_back(std::move(e));
  }
  out["merges"] = std::move(merges);
  return out;
}

inline Dendrogram dendrogram_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("n_leaves") || !j.contains("merges") || !j["merges"].is_array()) {
    throw DataError("dendrogram JSON needs n_leaves and merges");
  }
  Dendrogram d;
  d.n_leaves = j["n_leaves"].get<Eigen::Index>();
  for (const auto& m : j["merges"]) {
    d.merges.push_back({m.at("step").get<int>(), m.at("a").get<Eigen::Index>(), m.at("b").get<Eigen::Index>(),
                        m.at("weight").is_null() ? kInf : m.at("weight").get<double>()});
  }
  return d;
}

inline Json to_json(const FitTrace& t) {
  Json out;
  out["method"] = t.method;
  out["seed"] = t.seed;
  if (t.method == "em_hard" || t.method == "em_soft") out["restart"] = t.restart;
  if (t.spec && t.noise) out["privacy"] = to_json(*t.spec, *t.noise);
  out["noise_overridden"] = t.noise_overridden;
  out["noise_draws"] = {{"gaussian", t.noise_log.gaussian_draws}, {"laplace", t.noise_log.laplace_draws}};
  Json iters = Json::array();
  for (const auto& it : t.iterations) {
    Json e;
    e["cluster_sizes"] = it.cluster_sizes;
    e["clamped_counts"] = it.repair.clamped_counts;
    e["repaired_covariances"] = it.repair.repaired_covariances;
    e["nonfinite_components"] = it.repair.nonfinite_components;
    if (std::isfinite(it.log_likelihood)) e["log_likelihood"] = it.log_likelihood;
    iters.push_back(std::move(e));
  }
  out["iterations"] = std::move(iters);
  if (std::isfinite(t.final_log_likelihood)) out["final_log_likelihood"] = t.final_log_likelihood;
  return out;
}

inline Json to_json(const Dataset& d) {
  Json out;
  out["rows"] = d.size();
  out["dim"] = d.dim();
  out["labeled"] = d.labels.has_value();
  out["bounds_source"] = to_string(d.bounds_source);
  out["clipped_values"] = d.clipped_values;
  return out;
}

}  // namespace dpmorse

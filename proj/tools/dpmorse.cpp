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

// dpmorse command line: fit, tev, merge, run, sweep, score.
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dpmorse/dpmorse.hpp"

namespace {

using dpmorse::Json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// Run-config flags shared by the subcommands; values stay as text until
// applied on top of the optional --config file.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  bool no_header = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "flat key = value config file");
    const std::vector<std::pair<std::string, std::string>> keys{
        {"data", "CSV dataset path (replaces the generator)"},
        {"label_column", "ground-truth column (header name, or 0-based index)"},
        {"bounds", "public feature bounds lo:hi,lo:hi,... for rescaling"},
        {"generator", "two_moons | three_arcs | blobs"},
        {"n", "generated rows"},
        {"noise", "generator noise"},
        {"data_seed", "generator seed"},
        {"method", "dpmog_hard | dplloyd_mog | em_soft | em_hard"},
        {"morse", "on | off"},
        {"k0", "sub-cluster count"},
        {"k", "final cluster count"},
        {"epsilon", "privacy budget"},
        {"delta", "privacy slack"},
        {"tau1", "fit iterations"},
        {"tau2", "string iterations"},
        {"m", "string samples"},
        {"perturb", "validation perturbation"},
        {"repeats", "repetitions"},
        {"seed", "master seed"},
        {"threads", "worker threads for repeats (0 = all cores)"},
    };
    for (const auto& [key, help] : keys) {
      std::string flag = "--" + key;
      for (auto& ch : flag) {
        if (ch == '_') ch = '-';
      }
      app->add_option_function<std::string>(
          flag, [this, key = key](const std::string& v) { values[key] = v; }, help);
    }
    app->add_flag("--no-header", no_header, "CSV has no header row");
  }

  dpmorse::RunConfig build() const {
    dpmorse::RunConfig cfg;
    if (!config_path.empty()) cfg = dpmorse::load_config(config_path);
    if (no_header) cfg.header = false;
    for (const auto& [key, value] : values) dpmorse::apply_setting(cfg, key, value);
    cfg.validate();
    return cfg;
  }
};

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dpmorse::ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw dpmorse::ConfigError("failed writing '" + path + "'");
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dpmorse::DataError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw dpmorse::DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

Json header(const char* command) {
  Json j;
  j["schema_version"] = dpmorse::kReportSchemaVersion;
  j["command"] = command;
  return j;
}

// A model file is either a bare model object or any report holding one under
// "model" (the fit command's output).
dpmorse::MixtureModel read_model(const std::string& path) {
  const Json j = read_json(path);
  if (j.contains("model")) return dpmorse::model_from_json(j["model"]);
  return dpmorse::model_from_json(j);
}

int cmd_fit(const ConfigFlags& flags, const std::string& out) {
  const dpmorse::RunConfig cfg = flags.build();
  const dpmorse::Dataset data = dpmorse::load_dataset(cfg);
  const dpmorse::FitResult fit = dpmorse::fit_subclusters(cfg, data, cfg.seed);
  Json j = header("fit");
  j["config"] = dpmorse::to_json(cfg);
  j["dataset"] = dpmorse::dataset_json(cfg, data);
  j["model"] = dpmorse::to_json(fit.model);
  j["trace"] = dpmorse::to_json(fit.trace);
  emit(dpmorse::report_text(j), out);
  return kExitOk;
}

int cmd_tev(const ConfigFlags& flags, const std::string& model_path, const std::string& out) {
  const dpmorse::RunConfig cfg = flags.build();
  dpmorse::MixtureModel model = model_path.empty()
                                    ? dpmorse::fit_subclusters(cfg, dpmorse::load_dataset(cfg), cfg.seed).model
                                    : read_model(model_path);
  if (model.components() < 2) throw dpmorse::ConfigError("TEV search needs at least two components");
  const dpmorse::Landscape land(model);
  const dpmorse::TevOptions opt = dpmorse::tev_options(cfg);
  const dpmorse::TevSearch search = dpmorse::find_all_tevs(land, opt);
  const auto links = dpmorse::absorbed_centers(land, opt.flow);
  Json j = header("tev");
  j["components"] = model.components();
  j["model"] = dpmorse::to_json(model);
  j["tevs"] = dpmorse::to_json(search.records);
  Json jl = Json::array();
  for (const auto& l : links) {
    jl.push_back({{"from", l.from}, {"to", l.to}, {"f_value", dpmorse::real_json(l.f_value)}});
  }
  j["absorbed_centers"] = std::move(jl);
  Json modes = Json::array();
  for (const auto& m : search.modes) modes.push_back(dpmorse::vector_json(m));
  j["modes"] = std::move(modes);
  Json pairs = Json::array();
  for (const auto& p : search.pairs) {
    Json e;
    e["k"] = p.k;
    e["l"] = p.l;
    e["found"] = p.record.has_value();
    if (!p.record) e["diagnostic"] = p.diagnostic;
    pairs.push_back(std::move(e));
  }
  j["pairs"] = std::move(pairs);
  emit(dpmorse::report_text(j), out);
  return kExitOk;
}

int cmd_merge(const ConfigFlags& flags, const std::string& tev_path, const std::string& out) {
  if (tev_path.empty()) throw dpmorse::ConfigError("merge needs --tevs (output of the tev command)");
  const dpmorse::RunConfig cfg = flags.build();
  const Json in = read_json(tev_path);
  if (!in.contains("components") || !in.contains("tevs")) {
    throw dpmorse::DataError("'" + tev_path + "' lacks components or tevs");
  }
  const auto n = in["components"].get<Eigen::Index>();
  if (cfg.k > n) throw dpmorse::ConfigError("k exceeds the number of sub-clusters");
  std::vector<dpmorse::Edge> edges;
  for (const auto& r : dpmorse::tev_records_from_json(in["tevs"])) edges.push_back({r.a, r.b, r.f_value});
  if (in.contains("absorbed_centers")) {
    for (const auto& l : in["absorbed_centers"]) {
      edges.push_back({l.at("from").get<Eigen::Index>(), l.at("to").get<Eigen::Index>(),
                       l.at("f_value").is_null() ? dpmorse::kInf : l.at("f_value").get<double>()});
    }
  }
  dpmorse::AdjacencyGraph graph;
  try {
    graph = dpmorse::build_graph(n, edges);
  } catch (const std::logic_error& e) {
    throw dpmorse::DataError(std::string("bad TEV graph: ") + e.what());
  }
  const dpmorse::MergeResult merged = dpmorse::merge_to_k(graph, cfg.k);
  const dpmorse::Dendrogram full = dpmorse::full_dendrogram(graph);
  Json j = header("merge");
  j["k"] = cfg.k;
  j["clusters"] = merged.clusters;
  j["disconnected"] = merged.disconnected;
  j["labels"] = merged.labels;
  j["dendrogram"] = dpmorse::to_json(full);
  j["dendrogram_text"] = dpmorse::render_dendrogram(full);
  emit(dpmorse::report_text(j), out);
  return kExitOk;
}

int cmd_run(const ConfigFlags& flags, const std::string& out) {
  const dpmorse::RunReport rep = dpmorse::run_pipeline(flags.build());
  emit(dpmorse::report_text(rep.json), out);
  return kExitOk;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what, T (*parse)(const std::string&)) {
  std::vector<T> out;
  for (auto cell : dpmorse::detail::split_commas(text)) {
    const std::string s(dpmorse::detail::trim(cell));
    if (s.empty()) throw dpmorse::ConfigError(std::string("empty entry in --") + what);
    out.push_back(parse(s));
  }
  return out;
}

struct SweepFlags {
  std::string epsilons;
  std::string k0s;
  std::string methods;
  std::string morses;
  std::string csv;
};

int cmd_sweep(const ConfigFlags& flags, const SweepFlags& sf, const std::string& out) {
  const dpmorse::RunConfig base = flags.build();
  auto eps = sf.epsilons.empty() ? std::vector<double>{base.epsilon}
                                 : parse_list<double>(sf.epsilons, "epsilons", [](const std::string& s) {
                                     return dpmorse::detail::parse_number<double>("epsilons", s);
                                   });
  auto k0s = sf.k0s.empty() ? std::vector<int>{base.k0}
                            : parse_list<int>(sf.k0s, "k0s", [](const std::string& s) {
                                return dpmorse::detail::parse_number<int>("k0s", s);
                              });
  auto methods = sf.methods.empty() ? std::vector<dpmorse::Method>{base.method}
                                    : parse_list<dpmorse::Method>(sf.methods, "methods", dpmorse::parse_method);
  std::vector<bool> morses{base.morse};
  if (!sf.morses.empty()) {
    morses.clear();
    for (bool b : parse_list<int>(sf.morses, "morses",
                                  [](const std::string& s) { return dpmorse::detail::parse_flag("morses", s) ? 1 : 0; })) {
      morses.push_back(b);
    }
  }
  const dpmorse::SweepResult res = dpmorse::sweep(dpmorse::expand_grid(base, eps, k0s, methods, morses));
  emit(dpmorse::report_text(res.json), out);
  if (!sf.csv.empty()) emit(res.csv, sf.csv);
  return kExitOk;
}

int cmd_score(const ConfigFlags& flags, const std::string& labels_path, const std::string& out) {
  if (labels_path.empty()) throw dpmorse::ConfigError("score needs --labels (one integer label per row)");
  const dpmorse::RunConfig cfg = flags.build();
  const dpmorse::Dataset data = dpmorse::load_dataset(cfg);
  if (!data.labels) throw dpmorse::DataError("dataset has no ground-truth labels");
  std::ifstream in(labels_path);
  if (!in) throw dpmorse::DataError("cannot open '" + labels_path + "'");
  std::vector<long long> pred;
  std::string line;
  while (std::getline(in, line)) {
    const std::string s(dpmorse::detail::trim(line));
    if (s.empty()) continue;
    try {
      pred.push_back(dpmorse::detail::parse_number<long long>("labels", s));
    } catch (const dpmorse::ConfigError&) {
      throw dpmorse::DataError("label line " + std::to_string(pred.size() + 1) + " is not an integer: '" + s + "'");
    }
  }
  if (pred.size() != static_cast<std::size_t>(data.size())) {
    throw dpmorse::DataError("label count " + std::to_string(pred.size()) + " does not match " +
                             std::to_string(data.size()) + " rows");
  }
  const dpmorse::AriResult ari = dpmorse::adjusted_rand_index_detail(*data.labels, pred);
  const dpmorse::Contingency c = dpmorse::contingency(*data.labels, pred);
  Json j = header("score");
  j["rows"] = data.size();
  j["ari"] = dpmorse::real_json(ari.value);
  j["degenerate"] = ari.degenerate;
  j["contingency"] = c.table;
  emit(dpmorse::report_text(j), out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private clustering with Morse-theoretic merging"};
  app.require_subcommand(1);
  std::string out;

  ConfigFlags fit_flags, tev_flags, merge_flags, run_flags, sweep_flags, score_flags;
  std::string model_path, tev_path, labels_path;
  SweepFlags sf;

  auto* fit = app.add_subcommand("fit", "fit K0 sub-clusters and write the model");
  fit_flags.attach(fit);
  fit->add_option("--out", out, "output file (default stdout)");

  auto* tev = app.add_subcommand("tev", "find TEVs of a model (fits one when --model is absent)");
  tev_flags.attach(tev);
  tev->add_option("--model", model_path, "model JSON or fit report");
  tev->add_option("--out", out, "output file (default stdout)");

  auto* merge = app.add_subcommand("merge", "merge sub-clusters to K along TEV barriers");
  merge_flags.attach(merge);
  merge->add_option("--tevs", tev_path, "output of the tev command");
  merge->add_option("--out", out, "output file (default stdout)");

  auto* run = app.add_subcommand("run", "full pipeline with repeats and ARI");
  run_flags.attach(run);
  run->add_option("--out", out, "report file (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "grid of runs keyed by (epsilon, K0, method, morse)");
  sweep_flags.attach(sweep);
  sweep->add_option("--epsilons", sf.epsilons, "comma list, e.g. 10,5,2,1");
  sweep->add_option("--k0s", sf.k0s, "comma list, e.g. 6,10,15,20");
  sweep->add_option("--methods", sf.methods, "comma list of methods");
  sweep->add_option("--morses", sf.morses, "comma list of on/off");
  sweep->add_option("--csv", sf.csv, "also write the summary table here");
  sweep->add_option("--out", out, "JSON file (default stdout)");

  auto* score = app.add_subcommand("score", "ARI of a label file against the dataset's ground truth");
  score_flags.attach(score);
  score->add_option("--labels", labels_path, "one integer label per row");
  score->add_option("--out", out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  } catch (const dpmorse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_flags, out);
    if (tev->parsed()) return cmd_tev(tev_flags, model_path, out);
    if (merge->parsed()) return cmd_merge(merge_flags, tev_path, out);
    if (run->parsed()) return cmd_run(run_flags, out);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, sf, out);
    if (score->parsed()) return cmd_score(score_flags, labels_path, out);
  } catch (const dpmorse::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const dpmorse::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::logic_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}

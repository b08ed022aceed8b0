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


// Walks through the pipeline on two moons: fit six sub-clusters, find the
// transition points between their basins, merge down to two clusters.

#include <cstdio>

#include "dpmorse/dpmorse.hpp"

int main(int argc, char** argv) {
  using namespace dpmorse;
  const bool private_fit = argc > 1 && std::string(argv[1]) == "--private";
  const Dataset data = make_two_moons(400, 0.05, 1000);

  FitResult fit;
  if (private_fit) {
    RandomStream rng(0);
    fit = fit_dpmog_hard(data, 6, {1.0, 1e-5, 10, Mechanism::gaussian_mog_hard}, std::nullopt, rng);
    std::printf("DPMoG-hard fit, epsilon = 1, sigma = %.3f\n", fit.trace.noise->sigma);
  } else {
    fit = fit_em(data, 6, 10, true, 0);
    std::printf("hard-EM fit (no privacy)\n");
  }
  for (Eigen::Index k = 0; k < fit.model.components(); ++k) {
    std::printf("  component %ld: weight %.3f, mean (%+.3f, %+.3f)\n", static_cast<long>(k), fit.model.weight(k),
                fit.model.mean(k)(0), fit.model.mean(k)(1));
  }
  const std::vector<int> sub = detail::hard_assign(fit.model, data.rows);
  std::printf("ARI of the 6 sub-clusters against the moons: %.4f\n", adjusted_rand_index(*data.labels, sub));

  const Landscape land(fit.model);
  const TevSearch tevs = find_all_tevs(land);
  std::printf("\n%zu transition points:\n", tevs.records.size());
  for (const auto& r : tevs.records) {
    std::printf("  %ld -- %ld at (%+.3f, %+.3f), barrier -ln p = %.4f\n", static_cast<long>(r.a),
                static_cast<long>(r.b), r.t(0), r.t(1), r.f_value);
  }

  const AdjacencyGraph graph = build_graph(fit.model.components(), tevs.records, absorbed_centers(land));
  const MorseLabeling lab = morse_label(land, graph, 2, data, TevOptions{});
  std::printf("\ndendrogram:\n%s", render_dendrogram(lab.dendrogram).c_str());
  std::printf("\nmerged to %ld clusters, ARI against the moons: %.4f\n", static_cast<long>(lab.nonempty_clusters),
              adjusted_rand_index(*data.labels, lab.rows.labels));
  return 0;
}

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


// Prints the calibrated noise scale of both private fits over a range of
// budgets, with the zCDP rho each one spends.

#include <cstdio>

#include "dpmorse/privacy.hpp"

int main() {
  using namespace dpmorse;
  const double delta = 1e-5;
  const int tau = 10;
  std::printf("delta = %g, tau = %d\n\n", delta, tau);
  std::printf("%8s %4s %14s %14s %12s\n", "epsilon", "D", "sigma(hardEM)", "sigma(Lloyd)", "rho");
  for (double eps : {10.0, 5.0, 2.0, 1.0, 0.5}) {
    for (std::int64_t dim : {2, 8}) {
      const NoiseScale em = calibrate_sigma({eps, delta, tau, Mechanism::gaussian_mog_hard}, dim);
      const NoiseScale ll = calibrate_sigma({eps, delta, tau, Mechanism::lloyd_mixed}, dim);
      std::printf("%8g %4ld %14.3f %14.3f %12.6f\n", eps, static_cast<long>(dim), em.sigma, ll.sigma, em.rho);
    }
  }
  std::printf("\nA cluster of N rows has its mean perturbed by roughly sigma / N per coordinate.\n");
  return 0;
}

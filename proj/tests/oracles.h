/* Copyright 2026 The PotQ Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef POTQ_TESTS_ORACLES_H_
#define POTQ_TESTS_ORACLES_H_

#include <cmath>
#include <cstdlib>
#include <limits>

namespace potq::testing {

// Independent oracle: the exponent in [fsr - max_code, fsr] closest to
// log2|x|. On an exact half-way tie the exponent farther from zero wins.
inline int brute_force_pot_code(double x, int bits, int fsr) {
  const int max_code = (1 << (bits - 1)) - 1;
  const double l = std::log2(std::fabs(x));
  int best_e = fsr;
  double best_d = std::numeric_limits<double>::infinity();
  for (int e = fsr - max_code; e <= fsr; ++e) {
    const double d = std::fabs(l - e);
    if (d < best_d || (d == best_d && std::abs(e) > std::abs(best_e))) {
      best_d = d;
      best_e = e;
    }
  }
  return fsr - best_e;
}

}  // namespace potq::testing

#endif  // POTQ_TESTS_ORACLES_H_

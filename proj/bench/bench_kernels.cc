// bench_kernels.cc

// Copyright 2026 SDVAD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.


// Times the serial reference kernels against their OpenMP versions and
// checks that both produce the same numbers.
//
// Usage: bench_kernels [frames] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>

#include <omp.h>

#include "sdvad/kernels.h"
#include "sdvad/speaker.h"

namespace {

template <typename F>
double BestSeconds(int repeats, F f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void Report(const char *name, double serial, double parallel, double max_diff) {
  std::printf("%-14s serial %9.4f s  parallel %9.4f s  speedup %5.2fx  max|diff| %.3g\n", name,
              serial, parallel, serial / parallel, max_diff);
}

}  // namespace

int main(int argc, char **argv) {
  using namespace sdvad;
  const Eigen::Index frames = argc > 1 ? std::atol(argv[1]) : 20000;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;
  std::printf("threads %d, frames %ld, repeats %d\n", omp_get_max_threads(),
              static_cast<long>(frames), repeats);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  MelBank bank(36, 8000, 200);
  Matrix windows(frames, 200);
  for (Eigen::Index i = 0; i < windows.size(); ++i) windows.data()[i] = 0.1 * gauss(rng);
  Matrix a, b;
  const double ts = BestSeconds(repeats, [&] { a = kernels::LogMelSerial(bank, windows); });
  const double tp = BestSeconds(repeats, [&] { b = kernels::LogMelParallel(bank, windows); });
  Report("logmel", ts, tp, (a - b).cwiseAbs().maxCoeff());

  DiagGmm gmm;
  const int c = 64, f = 20;
  gmm.weights = Vector::Constant(c, 1.0 / c);
  gmm.means.resize(c, f);
  gmm.vars.resize(c, f);
  for (int i = 0; i < c; ++i)
    for (int d = 0; d < f; ++d) {
      gmm.means(i, d) = gauss(rng);
      gmm.vars(i, d) = 0.5 + std::abs(gauss(rng));
    }
  Matrix x(frames, f);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gauss(rng);

  kernels::GmmAccumulator ga(c, f), gb(c, f);
  const double gs = BestSeconds(repeats, [&] { ga = kernels::GmmAccumulateSerial(gmm, x); });
  const double gp = BestSeconds(repeats, [&] { gb = kernels::GmmAccumulateParallel(gmm, x); });
  Report("gmm-accumulate", gs, gp, (ga.second - gb.second).cwiseAbs().maxCoeff());

  BwStats sa, sb;
  const double bs = BestSeconds(repeats, [&] { sa = kernels::BwStatsSerial(gmm, x); });
  const double bp = BestSeconds(repeats, [&] { sb = kernels::BwStatsParallel(gmm, x); });
  Report("bw-stats", bs, bp, (sa.first - sb.first).cwiseAbs().maxCoeff());
  return 0;
}

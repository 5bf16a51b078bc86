// Copyright 2026 The rimseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "acceptance/common.hpp"
#include "rimseg/metrics.hpp"
#include "rimseg/objective.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace rimseg::acceptance {

int metric_oracles(const Options&) {
  const Stopwatch clock;
  std::mt19937_64 rng(4242);
  std::size_t asa_bad = 0, br_bad = 0;
  double worst_asa = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t w = 1 + rng() % 8, h = 1 + rng() % 8;
    // Alternate i.i.d. and blocky maps so boundaries are both dense and sparse.
    const LabelMap s = trial % 2 ? testing::random_blocky_labels(rng, w, h)
                                 : testing::random_labels(rng, w, h, 1 + rng() % 6);
    const LabelMap g = trial % 3 ? testing::random_blocky_labels(rng, w, h)
                                 : testing::random_labels(rng, w, h, 1 + rng() % 6);
    const double err = std::abs(asa(s, g) - testing::brute_asa(s, g));
    worst_asa = std::max(worst_asa, err);
    if (!(err <= 1e-12)) ++asa_bad;

    const auto counts = br_counts(extract_boundary(s), extract_boundary(g), 1);
    const auto [tp, all] = testing::brute_br(s, g, 1);
    if (counts.true_positives != tp || counts.ground_truth != all) ++br_bad;
  }
  const double seconds = clock.wall();
  return verdict(2, asa_bad == 0 && br_bad == 0 && seconds < 10.0,
                 "200 pairs: ASA mismatches " + std::to_string(asa_bad) + " (max |diff| " +
                     fmt("%.1e", worst_asa) + "), BR count mismatches " + std::to_string(br_bad) +
                     "; " + fmt("%.3f", seconds) + " s (need < 10 s)");
}

int closed_forms(const Options&) {
  const Stopwatch clock;
  std::mt19937_64 rng(99);
  double worst = 0.0;
  std::string worst_case = "none";
  auto track = [&](double got, double want, const std::string& what) {
    const double err = std::abs(got - want);
    if (!(err <= worst)) {
      worst = std::isnan(err) ? INFINITY : err;
      worst_case = what;
    }
  };

  for (std::size_t n : {2u, 3u, 8u, 50u, 100u}) {
    for (double lambda : {0.0, 0.5, 1.0, 2.0, 3.0}) {
      const Tensor<double> p = Tensor<double>::full({6, 7, n}, 1.0 / static_cast<double>(n));
      track(clustering_loss(p, lambda).item(), (1.0 - lambda) * std::log(static_cast<double>(n)),
            "uniform N=" + std::to_string(n));
    }
    for (std::size_t hot = 0; hot < n; hot += std::max<std::size_t>(1, n / 4)) {
      Tensor<double> p = Tensor<double>::zeros({1, 1, n});
      p.mutable_data()[hot] = 1.0;
      track(clustering_loss(p, 2.0).item(), 0.0, "one-hot N=" + std::to_string(n));
    }
  }

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 2 + rng() % 10, w = 2 + rng() % 10, n = 2 + rng() % 10;
    const Tensor<double> image = testing::random_tensor({h, w, 3}, rng, -2.0, 2.0);
    const auto weights = compute_edge_weights(image, 8.0);
    const Tensor<double> raw = testing::random_tensor({n}, rng, 0.1, 1.0);
    const std::vector<double> row(raw.data().begin(), raw.data().end());
    double total = 0.0;
    for (double v : row) total += v;
    std::vector<double> values;
    for (std::size_t i = 0; i < h * w; ++i) {
      for (double v : row) values.push_back(v / total);
    }
    const Tensor<double> p({h, w, n}, std::move(values));
    track(smoothness_loss(p, weights).item(), 0.0, "constant P");
    track(recons_loss(image, image.detach()).item(), 0.0, "identical images");
  }

  const double seconds = clock.wall();
  return verdict(3, worst <= 1e-12 && seconds < 1.0,
                 "max |error| " + fmt("%.1e", worst) + " (" + worst_case + ", need <= 1e-12); " +
                     fmt("%.3f", seconds) + " s (need < 1 s)");
}

}  // namespace rimseg::acceptance

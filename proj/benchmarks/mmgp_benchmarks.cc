// Copyright 2026 The MMGP Authors. All Rights Reserved.
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

#include <complex>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "mmgp/acoustic_sim.h"
#include "mmgp/hyperopt.h"
#include "mmgp/kernels.h"
#include "mmgp/mmgp_model.h"
#include "mmgp/rtf_features.h"

namespace mmgp {
namespace {

// Random unit-modulus aRTFs with 2-D label positions.
struct Synthetic {
  std::vector<AggregatedRtf> labelled, unlabelled, test;
  Eigen::MatrixXd positions;
  std::vector<double> eps;
};

Synthetic MakeSynthetic(int n_l, int n_u, int n_t, int num_nodes, int dim) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> phase(-3.14159, 3.14159), pos(0.0, 2.0);
  auto sample = [&] {
    AggregatedRtf a;
    for (int m = 0; m < num_nodes; ++m) {
      RtfVector v;
      v.node_index = m;
      v.values.resize(dim);
      v.bin_frequencies = Eigen::VectorXd::LinSpaced(dim, 200.0, 2500.0);
      for (int d = 0; d < dim; ++d) v.values[d] = std::polar(1.0, phase(rng));
      a.per_node.push_back(std::move(v));
    }
    a.position = Vec3(pos(rng), pos(rng), 1.5);
    return a;
  };
  Synthetic s;
  for (int i = 0; i < n_l; ++i) s.labelled.push_back(sample());
  for (int i = 0; i < n_u; ++i) s.unlabelled.push_back(sample());
  for (int i = 0; i < n_t; ++i) s.test.push_back(sample());
  s.positions.resize(n_l, 2);
  for (int i = 0; i < n_l; ++i) s.positions.row(i) = s.labelled[i].position->head<2>();
  s.eps.assign(num_nodes, 2.0 * dim);
  return s;
}

Hyperparameters Hp(const Synthetic& s) {
  Hyperparameters hp;
  hp.eps = s.eps;
  hp.sigma2 = {1e-2};
  return hp;
}

void BM_FusedCovariance(benchmark::State& state) {
  const auto n_u = static_cast<int>(state.range(0));
  const Synthetic s = MakeSynthetic(16, n_u, 0, 3, 295);
  std::vector<AggregatedRtf> training = s.labelled;
  training.insert(training.end(), s.unlabelled.begin(), s.unlabelled.end());
  for (auto _ : state) {
    benchmark::DoNotOptimize(MmgpCovariance(s.labelled, s.labelled, training, s.eps));
  }
}
BENCHMARK(BM_FusedCovariance)->Arg(40)->Arg(160)->Arg(640);

void BM_LogLikelihoodAndGradient(benchmark::State& state) {
  const Synthetic s = MakeSynthetic(16, 40, 0, 3, 295);
  const MmgpCovarianceFamily family(s.labelled, s.unlabelled);
  Hyperparameters hp = Hp(s);
  hp.jitter = 1e-9;
  for (auto _ : state) {
    double total = LogLikelihood(hp, family, s.positions);
    for (int m = 0; m < 3; ++m) total += GradEps(hp, m, family, s.positions);
    benchmark::DoNotOptimize(total);
  }
}
BENCHMARK(BM_LogLikelihoodAndGradient);

// One streaming step: the rank-1 plus Woodbury update against a full refit
// on the enlarged training set.
void BM_RecursiveUpdate(benchmark::State& state) {
  const Synthetic s = MakeSynthetic(16, 40, 1, 3, 295);
  const MmgpModel base = MmgpModel::Fit(s.labelled, s.unlabelled, s.positions, Hp(s));
  for (auto _ : state) {
    state.PauseTiming();
    MmgpModel model = base;
    state.ResumeTiming();
    benchmark::DoNotOptimize(model.PredictRecursive(s.test[0]));
  }
}
BENCHMARK(BM_RecursiveUpdate);

void BM_BatchRefit(benchmark::State& state) {
  const Synthetic s = MakeSynthetic(16, 40, 1, 3, 295);
  std::vector<AggregatedRtf> absorbed = s.unlabelled;
  absorbed.push_back(s.test[0]);
  for (auto _ : state) {
    const MmgpModel model = MmgpModel::Fit(s.labelled, absorbed, s.positions, Hp(s));
    benchmark::DoNotOptimize(model.Predict(s.test[0]));
  }
}
BENCHMARK(BM_BatchRefit);

void BM_SimulateRir(benchmark::State& state) {
  SceneConfig scene;
  scene.room_dims = Vec3(4.0, 5.0, 3.0);
  scene.t60 = static_cast<double>(state.range(0)) / 1000.0;
  scene.nodes = {{Vec3(0.6, 0.8, 1.2), Vec3(0.8, 0.8, 1.2)}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(SimulateRir(scene, Vec3(2.0, 2.5, 1.5), scene.nodes[0][0]));
  }
}
BENCHMARK(BM_SimulateRir)->Arg(150)->Arg(300)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_ExtractRtf(benchmark::State& state) {
  SceneConfig scene;
  scene.room_dims = Vec3(4.0, 5.0, 3.0);
  scene.t60 = 0.3;
  scene.snr_db = 20.0;
  scene.nodes = {{Vec3(0.6, 0.8, 1.2), Vec3(0.8, 0.8, 1.2)}};
  const MeasurementRecord rec =
      RenderMeasurement(scene, Vec3(2.0, 2.5, 1.5), WhiteNoise(32000, 3), 4);
  const SpectralConfig spectral;
  for (auto _ : state) {
    benchmark::DoNotOptimize(EstimateRtf(rec, 0, spectral, scene.sample_rate));
  }
}
BENCHMARK(BM_ExtractRtf)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace mmgp

BENCHMARK_MAIN();

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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mmgp/acoustic_sim.h"
#include "mmgp/baselines.h"
#include "mmgp/error.h"
#include "mmgp/kernels.h"
#include "mmgp/mmgp_model.h"
#include "test_support.h"

namespace mmgp {
namespace {

using testing::Concat;
using testing::RandomInstance;
using testing::RefCondition;
using testing::RelErr;

Hyperparameters Hp(std::vector<double> eps, double sigma2) {
  Hyperparameters hp;
  hp.eps = std::move(eps);
  hp.sigma2 = {sigma2};
  hp.jitter = 1e-9;
  return hp;
}

AggregatedRtf OnlyNode(const AggregatedRtf& a, int m) {
  AggregatedRtf out;
  out.per_node = {a.per_node[m]};
  out.per_node[0].node_index = 0;
  out.position = a.position;
  return out;
}

std::vector<AggregatedRtf> OnlyNode(const std::vector<AggregatedRtf>& v, int m) {
  std::vector<AggregatedRtf> out;
  for (const auto& a : v) out.push_back(OnlyNode(a, m));
  return out;
}

TEST(MeanOfNodes, AveragesSeparateSingleNodeModels) {
  std::mt19937_64 rng(1);
  const auto inst = RandomInstance(rng, 9, 7, 5, 3, 4);
  const MeanOfNodes mon = MeanOfNodes::Fit(inst.labelled, inst.unlabelled,
                                           inst.positions, Hp(inst.eps, 0.02));
  ASSERT_EQ(mon.node_models().size(), 3u);
  for (const auto& t : inst.test) {
    Eigen::VectorXd want = Eigen::VectorXd::Zero(2);
    for (int m = 0; m < 3; ++m) {
      const MmgpModel single =
          MmgpModel::Fit(OnlyNode(inst.labelled, m), OnlyNode(inst.unlabelled, m),
                         inst.positions, Hp({inst.eps[m]}, 0.02));
      want += single.Predict(OnlyNode(t, m)).estimate / 3.0;
    }
    EXPECT_LE(RelErr(mon.Predict(t), want), 1e-12);
    EXPECT_LE(RelErr(MeanOfNodesEstimate(inst.labelled, inst.unlabelled,
                                         inst.positions, Hp(inst.eps, 0.02), t),
                     want),
              1e-12);
  }
}

TEST(MeanOfNodes, PerNodeHyperparameters) {
  std::mt19937_64 rng(2);
  const auto inst = RandomInstance(rng, 8, 4, 3, 2, 4);
  const std::vector<Hyperparameters> hps = {Hp({inst.eps[0]}, 0.01),
                                            Hp({inst.eps[1]}, 0.3)};
  const MeanOfNodes mon =
      MeanOfNodes::FitPerNode(inst.labelled, inst.unlabelled, inst.positions, hps);
  for (const auto& t : inst.test) {
    Eigen::VectorXd want = Eigen::VectorXd::Zero(2);
    for (int m = 0; m < 2; ++m) {
      want += MmgpModel::Fit(OnlyNode(inst.labelled, m), OnlyNode(inst.unlabelled, m),
                             inst.positions, hps[m])
                  .Predict(OnlyNode(t, m))
                  .estimate /
              2.0;
    }
    EXPECT_LE(RelErr(mon.Predict(t), want), 1e-12);
  }
  EXPECT_THROW(MeanOfNodes::FitPerNode(inst.labelled, inst.unlabelled,
                                       inst.positions, std::span(hps).first(1)),
               Error);
}

TEST(MeanOfNodes, SingleNodeEqualsMmgp) {
  std::mt19937_64 rng(3);
  const auto inst = RandomInstance(rng, 8, 6, 4, 1, 5);
  const Hyperparameters hp = Hp(inst.eps, 0.05);
  const MeanOfNodes mon =
      MeanOfNodes::Fit(inst.labelled, inst.unlabelled, inst.positions, hp);
  const MmgpModel model =
      MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions, hp);
  for (const auto& t : inst.test) {
    EXPECT_LE(RelErr(mon.Predict(t), model.Predict(t).estimate), 1e-12);
  }
}

TEST(MeanOfNodes, IdenticalNodesEqualOneNode) {
  std::mt19937_64 rng(4);
  auto inst = RandomInstance(rng, 7, 5, 3, 3, 4);
  for (auto* set : {&inst.labelled, &inst.unlabelled, &inst.test}) {
    for (auto& a : *set) {
      for (int m = 1; m < 3; ++m) {
        a.per_node[m] = a.per_node[0];
        a.per_node[m].node_index = m;
      }
    }
  }
  const double e = inst.eps[0];
  const MeanOfNodes mon = MeanOfNodes::Fit(inst.labelled, inst.unlabelled,
                                           inst.positions, Hp({e, e, e}, 0.05));
  const MmgpModel one = MmgpModel::Fit(OnlyNode(inst.labelled, 0),
                                       OnlyNode(inst.unlabelled, 0),
                                       inst.positions, Hp({e}, 0.05));
  for (const auto& t : inst.test) {
    EXPECT_LE(RelErr(mon.Predict(t), one.Predict(OnlyNode(t, 0)).estimate), 1e-12);
  }
}

// Joins all nodes into one long vector.
AggregatedRtf Flatten(const AggregatedRtf& a) {
  AggregatedRtf out;
  RtfVector v;
  Eigen::Index total = 0;
  for (const auto& n : a.per_node) total += n.size();
  v.values.resize(total);
  v.bin_frequencies.resize(total);
  Eigen::Index at = 0;
  for (const auto& n : a.per_node) {
    v.values.segment(at, n.size()) = n.values;
    v.bin_frequencies.segment(at, n.size()) = n.bin_frequencies;
    at += n.size();
  }
  out.per_node = {v};
  out.position = a.position;
  return out;
}

TEST(KernelProduct, EqualScalesGiveConcatenatedGaussianKernel) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = RandomInstance(rng, 6, 0, 4, 3, 4, 2.0);
    const double e = inst.eps[0];
    const Eigen::MatrixXd gram =
        KernelProductGp::Gram(inst.labelled, inst.test, std::vector<double>{e, e, e});
    for (std::size_t i = 0; i < inst.labelled.size(); ++i) {
      for (std::size_t j = 0; j < inst.test.size(); ++j) {
        const double want = testing::RefKernel(Flatten(inst.labelled[i]).per_node[0],
                                               Flatten(inst.test[j]).per_node[0], e);
        EXPECT_NEAR(gram(i, j), want, 1e-12 * std::max(1.0, want));
      }
    }
  }
}

TEST(KernelProduct, PredictionMatchesConditioningOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = RandomInstance(rng, 9, 0, 3, 2, 4, 2.0);
    const Hyperparameters hp = Hp(inst.eps, 0.03);
    const KernelProductGp gp = KernelProductGp::Fit(inst.labelled, inst.positions, hp);
    const Eigen::MatrixXd k_ll =
        KernelProductGp::Gram(inst.labelled, inst.labelled, inst.eps);
    for (const auto& t : inst.test) {
      const Eigen::VectorXd k_lt =
          KernelProductGp::Gram(inst.labelled, std::span(&t, 1), inst.eps).col(0);
      const auto ref = RefCondition(k_ll, k_lt, 1.0, inst.positions, {0.03 + 1e-9});
      const Prediction p = gp.Predict(t);
      EXPECT_LE(RelErr(p.estimate, ref.mean), 1e-8);
      for (int c = 0; c < 2; ++c) {
        EXPECT_NEAR(p.variance[c], std::clamp(ref.variance[c], 0.0, 1.0), 1e-8);
      }
      EXPECT_LE(RelErr(KernelProductEstimate(inst.labelled, inst.positions, hp, t),
                       p.estimate),
                1e-12);
    }
  }
}

TEST(KernelProduct, RejectsBadInput) {
  std::mt19937_64 rng(7);
  const auto inst = RandomInstance(rng, 4, 0, 1, 2, 3);
  EXPECT_THROW(KernelProductGp::Fit(inst.labelled, inst.positions.topRows(2),
                                    Hp(inst.eps, 0.1)),
               Error);
  EXPECT_THROW(KernelProductGp::Fit(inst.labelled, inst.positions, Hp({1.0}, 0.1)),
               Error);
  EXPECT_THROW(KernelProductGp{}.Predict(inst.test[0]), Error);
}

// Anechoic room with noise-free microphones spread around the search area.
SceneConfig FreeField() {
  SceneConfig scene;
  scene.room_dims = Vec3(6.0, 6.0, 3.0);
  scene.t60 = 0.0;
  scene.nodes = {{Vec3(0.5, 0.5, 1.0), Vec3(0.7, 0.5, 1.0)},
                 {Vec3(5.5, 0.8, 1.2), Vec3(5.5, 1.0, 1.2)},
                 {Vec3(3.0, 5.5, 0.8), Vec3(3.2, 5.5, 0.8)}};
  return scene;
}

SrpConfig GridFor(const SceneConfig& scene) {
  SrpConfig cfg;
  cfg.grid_min = Vec3(2.0, 2.0, 1.5);
  cfg.grid_max = Vec3(4.0, 4.0, 1.5);
  cfg.resolution = 0.25;
  cfg.mic_positions = scene.microphones();
  cfg.sample_rate = scene.sample_rate;
  cfg.sound_speed = scene.sound_speed;
  return cfg;
}

TEST(SrpPhat, RecoversSourceOnGridInFreeField) {
  const SceneConfig scene = FreeField();
  const SrpConfig cfg = GridFor(scene);
  const auto signal = WhiteNoise(16000, 11);
  for (const Vec3& src : {Vec3(2.5, 3.0, 1.5), Vec3(3.75, 2.25, 1.5), Vec3(2.0, 4.0, 1.5)}) {
    const MeasurementRecord rec = RenderMeasurement(scene, src, signal, 3);
    EXPECT_LE((SrpPhat(rec, cfg) - src).norm(), 1e-9) << src.transpose();
  }
}

TEST(SrpPhat, GainInvariant) {
  const SceneConfig scene = FreeField();
  const SrpConfig cfg = GridFor(scene);
  MeasurementRecord rec =
      RenderMeasurement(scene, Vec3(3.0, 3.0, 1.5), WhiteNoise(8000, 12), 4);
  const Eigen::VectorXd a = SrpPhatMap(rec, cfg);
  for (auto& ch : rec.channels) {
    for (double& v : ch) v *= 7.5;
  }
  const Eigen::VectorXd b = SrpPhatMap(rec, cfg);
  EXPECT_LE(RelErr(b, a), 1e-9);
}

TEST(SrpPhat, MirrorTieGoesToLowerIndex) {
  // All microphones on the line y = 2, so y = 1.5 and y = 2.5 are mirror
  // images with identical steered power.
  SrpConfig cfg;
  cfg.mic_positions = {Vec3(1.0, 2.0, 1.0), Vec3(1.3, 2.0, 1.0), Vec3(3.0, 2.0, 1.0),
                       Vec3(3.2, 2.0, 1.0)};
  cfg.grid_min = Vec3(2.0, 1.5, 1.0);
  cfg.grid_max = Vec3(2.0, 2.5, 1.0);
  cfg.resolution = 1.0;
  MeasurementRecord rec;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  rec.channels.assign(4, std::vector<double>(8192));
  for (auto& ch : rec.channels) {
    for (double& v : ch) v = n01(rng);
  }
  const Eigen::VectorXd map = SrpPhatMap(rec, cfg);
  ASSERT_EQ(map.size(), 2);
  EXPECT_EQ(map[0], map[1]);
  EXPECT_EQ(SrpPhat(rec, cfg), Vec3(2.0, 1.5, 1.0));
}

TEST(SrpPhat, SinglePointGridAndErrors) {
  const SceneConfig scene = FreeField();
  SrpConfig cfg = GridFor(scene);
  cfg.grid_max = cfg.grid_min;
  MeasurementRecord rec =
      RenderMeasurement(scene, Vec3(3.0, 3.0, 1.5), WhiteNoise(4096, 1), 1);
  EXPECT_EQ(SrpPhat(rec, cfg), cfg.grid_min);

  MeasurementRecord silent = rec;
  for (auto& ch : silent.channels) std::fill(ch.begin(), ch.end(), 0.0);
  EXPECT_THROW(SrpPhat(silent, cfg), Error);
  MeasurementRecord short_mics = rec;
  short_mics.channels.pop_back();
  EXPECT_THROW(SrpPhatMap(short_mics, cfg), Error);
  cfg.resolution = 0.0;
  EXPECT_THROW(SrpGrid(cfg), Error);
}

TEST(SrpGrid, XFastestOrderAndCount) {
  SrpConfig cfg;
  cfg.mic_positions = {Vec3::Zero(), Vec3::UnitX()};
  cfg.grid_min = Vec3(0.0, 0.0, 0.0);
  cfg.grid_max = Vec3(0.2, 0.1, 0.0);
  cfg.resolution = 0.1;
  const auto grid = SrpGrid(cfg);
  ASSERT_EQ(grid.size(), 6u);
  EXPECT_TRUE(grid[1].isApprox(Vec3(0.1, 0.0, 0.0)));
  EXPECT_TRUE(grid[3].isApprox(Vec3(0.0, 0.1, 0.0)));
  EXPECT_TRUE(grid[5].isApprox(Vec3(0.2, 0.1, 0.0)));
}

}  // namespace
}  // namespace mmgp

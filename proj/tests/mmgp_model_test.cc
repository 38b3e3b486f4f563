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
#include <filesystem>
#include <fstream>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>
#include <unistd.h>

#include "mmgp/error.h"
#include "mmgp/kernels.h"
#include "mmgp/mmgp_model.h"
#include "test_support.h"

namespace mmgp {
namespace {

using testing::Concat;
using testing::RandomInstance;
using testing::RefCondition;
using testing::RefFusedCovariance;
using testing::RefFusedMatrix;
using testing::RelErr;

Hyperparameters Hp(const std::vector<double>& eps, double sigma2,
                   double jitter = 0.0) {
  Hyperparameters hp;
  hp.eps = eps;
  hp.sigma2 = {sigma2};
  hp.jitter = jitter;
  return hp;
}

TEST(Fit, GammaMatchesIndependentInverse) {
  std::mt19937_64 rng(1);
  const auto inst = RandomInstance(rng, 8, 10, 0, 3, 6);
  const MmgpModel model =
      MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions, Hp(inst.eps, 0.05));
  const Eigen::MatrixXd sigma = RefFusedMatrix(
      inst.labelled, inst.labelled, Concat(inst.labelled, inst.unlabelled), inst.eps);
  Eigen::MatrixXd a = sigma;
  a.diagonal().array() += 0.05;
  EXPECT_LE(RelErr(model.gamma(), a.fullPivLu().inverse()), 1e-10);
  EXPECT_EQ(model.gamma(), model.gamma().transpose());
  EXPECT_LE(model.InverseResidual(), 1e-8);
}

TEST(Fit, SingleLabelPredictsItsPosition) {
  std::mt19937_64 rng(2);
  const auto inst = RandomInstance(rng, 1, 5, 4, 2, 5);
  const MmgpModel model =
      MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions, Hp(inst.eps, 0.1));
  for (const auto& t : inst.test) {
    const Prediction p = model.Predict(t);
    EXPECT_EQ(p.estimate[0], inst.positions(0, 0));
    EXPECT_EQ(p.estimate[1], inst.positions(0, 1));
  }
}

TEST(Fit, HugeNoiseGivesLabelMean) {
  std::mt19937_64 rng(3);
  const auto inst = RandomInstance(rng, 6, 5, 3, 2, 5);
  const MmgpModel model =
      MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions, Hp(inst.eps, 1e14));
  const Eigen::VectorXd mean = inst.positions.colwise().mean();
  for (const auto& t : inst.test) {
    EXPECT_LE((model.Predict(t).estimate - mean).norm(), 1e-9);
  }
}

TEST(Fit, ErrorsAndAutoJitter) {
  std::mt19937_64 rng(4);
  const auto inst = RandomInstance(rng, 4, 2, 1, 2, 3);
  Hyperparameters hp = Hp(inst.eps, 0.01);
  hp.jitter.reset();
  const MmgpModel model = MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions, hp);
  EXPECT_NEAR(model.jitter(), 1e-8 * model.sigma_l().trace() / 4, 1e-20);
  EXPECT_THROW(MmgpModel::Fit({}, inst.unlabelled, inst.positions, hp), Error);
  EXPECT_THROW(MmgpModel::Fit(inst.labelled, inst.unlabelled,
                              inst.positions.topRows(3), hp),
               Error);
  Eigen::MatrixXd bad = inst.positions;
  bad(0, 0) = std::nan("");
  EXPECT_THROW(MmgpModel::Fit(inst.labelled, inst.unlabelled, bad, hp), Error);
  EXPECT_THROW(MmgpModel().Predict(inst.test[0]), Error);
  const auto three = RandomInstance(rng, 1, 0, 1, 3, 3);
  EXPECT_THROW(model.Predict(three.test[0]), Error);
}

TEST(Fit, SingularCovarianceReportsEigenvalue) {
  std::mt19937_64 rng(5);
  auto inst = RandomInstance(rng, 3, 0, 0, 1, 3);
  inst.labelled[1] = inst.labelled[0];
  try {
    MmgpModel::Fit(inst.labelled, {}, inst.positions, Hp(inst.eps, 0.0, 0.0));
    FAIL() << "expected a conditioning failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumerical);
    EXPECT_NE(std::string(e.what()).find("eigenvalue"), std::string::npos);
  }
}

TEST(Predict, MatchesJointGaussianConditioning) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> nodes(1, 4), count(2, 10);
  std::uniform_real_distribution<double> log_noise(-6.0, 0.0);
  for (int trial = 0; trial < 60; ++trial) {
    const auto inst = RandomInstance(rng, count(rng), count(rng), 3, nodes(rng), 5);
    const double noise = std::pow(10.0, log_noise(rng));
    const MmgpModel model = MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions,
                                           Hp(inst.eps, noise, 1e-9));
    const auto train = Concat(inst.labelled, inst.unlabelled);
    const Eigen::MatrixXd k_ll = RefFusedMatrix(inst.labelled, inst.labelled, train, inst.eps);
    for (const auto& t : inst.test) {
      const Eigen::VectorXd k_lt = RefFusedMatrix(inst.labelled, {t}, train, inst.eps);
      const double k_tt = RefFusedCovariance(t, t, train, inst.eps);
      const auto want = RefCondition(k_ll, k_lt, k_tt, inst.positions, {noise + 1e-9});
      const Prediction p = model.Predict(t);
      EXPECT_LE((p.estimate - want.mean).norm(), 1e-8 * want.mean.norm()) << trial;
      EXPECT_NEAR(p.prior_variance, k_tt, 1e-12 * k_tt);
      for (int c = 0; c < 2; ++c) {
        EXPECT_NEAR(p.variance[c], std::max(0.0, want.variance[c]), 1e-8 * k_tt);
        EXPECT_GE(p.variance[c], 0.0);
        EXPECT_LE(p.variance[c], p.prior_variance);
      }
    }
  }
}

TEST(Predict, ZeroNoiseInterpolatesLabels) {
  std::mt19937_64 rng(7);
  const auto inst = RandomInstance(rng, 5, 10, 0, 2, 8);
  const MmgpModel model = MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions,
                                         Hp(inst.eps, 0.0, 0.0));
  for (int j = 0; j < 5; ++j) {
    const Prediction p = model.Predict(inst.labelled[j]);
    EXPECT_LE((p.estimate - inst.positions.row(j).transpose()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Predict, CoordinatePermutationAndOffset) {
  std::mt19937_64 rng(8);
  const auto inst = RandomInstance(rng, 7, 6, 4, 3, 5);
  Eigen::MatrixXd three(7, 3);
  three << inst.positions, inst.positions.col(0) * 0.5 + inst.positions.col(1);
  Eigen::MatrixXd swapped(7, 3);
  swapped << three.col(2), three.col(0), three.col(1);
  const auto hp = Hp(inst.eps, 0.02, 1e-9);
  const MmgpModel a = MmgpModel::Fit(inst.labelled, inst.unlabelled, three, hp);
  const MmgpModel b = MmgpModel::Fit(inst.labelled, inst.unlabelled, swapped, hp);
  const MmgpModel c = MmgpModel::Fit(inst.labelled, inst.unlabelled,
                                     (three.array() + 4.25).matrix(), hp);
  for (const auto& t : inst.test) {
    const Eigen::VectorXd pa = a.Predict(t).estimate;
    const Eigen::VectorXd pb = b.Predict(t).estimate;
    EXPECT_NEAR(pb[0], pa[2], 1e-12);
    EXPECT_NEAR(pb[1], pa[0], 1e-12);
    EXPECT_NEAR(pb[2], pa[1], 1e-12);
    EXPECT_LE((c.Predict(t).estimate - pa).cwiseAbs().maxCoeff() - 4.25, 1e-10);
    EXPECT_GE((c.Predict(t).estimate - pa).cwiseAbs().minCoeff() - 4.25, -1e-10);
  }
}

TEST(Predict, PerCoordinateNoise) {
  std::mt19937_64 rng(9);
  const auto inst = RandomInstance(rng, 6, 6, 2, 2, 5);
  Hyperparameters hp = Hp(inst.eps, 0.0, 1e-9);
  hp.sigma2 = {0.01, 0.3};
  const MmgpModel model = MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions, hp);
  const auto train = Concat(inst.labelled, inst.unlabelled);
  const Eigen::MatrixXd k_ll = RefFusedMatrix(inst.labelled, inst.labelled, train, inst.eps);
  for (const auto& t : inst.test) {
    const Eigen::VectorXd k_lt = RefFusedMatrix(inst.labelled, {t}, train, inst.eps);
    const auto want = RefCondition(k_ll, k_lt, RefFusedCovariance(t, t, train, inst.eps),
                                   inst.positions, {0.01 + 1e-9, 0.3 + 1e-9});
    EXPECT_LE((model.Predict(t).estimate - want.mean).norm(), 1e-8 * want.mean.norm());
  }
  hp.sigma2 = {0.1, 0.2, 0.3};
  EXPECT_THROW(MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions, hp), Error);
}

TEST(Recursive, MatchesBatchRefitOnStreams) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> nodes(1, 3), nl(2, 12), nu(0, 20), nt(1, 10);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = RandomInstance(rng, nl(rng), nu(rng), nt(rng), nodes(rng), 4);
    const auto hp = Hp(inst.eps, 0.01, 1e-9);
    MmgpModel model = MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions, hp);
    std::vector<AggregatedRtf> absorbed = inst.unlabelled;
    for (const auto& t : inst.test) {
      const Prediction p = model.PredictRecursive(t);
      absorbed.push_back(t);
      const MmgpModel batch = MmgpModel::Fit(inst.labelled, absorbed, inst.positions, hp);
      const Prediction q = batch.Predict(t);
      EXPECT_LE((p.estimate - q.estimate).norm(), 1e-8 * q.estimate.norm());
      EXPECT_LE((p.variance - q.variance).cwiseAbs().maxCoeff(), 1e-8 * q.prior_variance);
      EXPECT_NEAR(p.prior_variance, q.prior_variance, 1e-10 * q.prior_variance);
      EXPECT_LE(model.InverseResidual(), 1e-8);
    }
    EXPECT_EQ(model.update_count(), inst.test.size());
    EXPECT_LE(RelErr(model.sigma_l(),
                     MmgpModel::Fit(inst.labelled, absorbed, inst.positions, hp).sigma_l()),
              1e-12);
  }
}

TEST(Recursive, UpdateOrderDoesNotMatter) {
  std::mt19937_64 rng(11);
  const auto inst = RandomInstance(rng, 6, 5, 3, 2, 4);
  const auto hp = Hp(inst.eps, 0.01, 1e-9);
  MmgpModel a = MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions, hp);
  MmgpModel b = a;
  a.UpdateRecursive(inst.test[0]);
  a.UpdateRecursive(inst.test[1]);
  b.UpdateRecursive(inst.test[1]);
  b.UpdateRecursive(inst.test[0]);
  const Prediction pa = a.Predict(inst.test[2]), pb = b.Predict(inst.test[2]);
  EXPECT_LE((pa.estimate - pb.estimate).norm(), 1e-10 * pa.estimate.norm());
  EXPECT_LE(RelErr(a.gamma(), b.gamma()), 1e-10);
}

TEST(Recursive, FarSampleLeavesPredictionsUnchanged) {
  std::mt19937_64 rng(12);
  const auto inst = RandomInstance(rng, 5, 4, 2, 2, 4);
  MmgpModel model = MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions,
                                   Hp(inst.eps, 0.01, 1e-9));
  const Prediction before = model.Predict(inst.test[0]);
  const Eigen::MatrixXd gamma = model.gamma();
  AggregatedRtf far = inst.test[1];
  for (auto& v : far.per_node) v.values.array() += 1e6;
  model.UpdateRecursive(far);
  EXPECT_EQ(model.gamma(), gamma);
  EXPECT_EQ(model.Predict(inst.test[0]).estimate, before.estimate);
  EXPECT_EQ(model.update_count(), 1u);
}

TEST(Recursive, RepeatedSampleKeepsAbsorbing) {
  std::mt19937_64 rng(13);
  const auto inst = RandomInstance(rng, 5, 4, 1, 2, 4);
  MmgpModel model = MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions,
                                   Hp(inst.eps, 0.01, 1e-9));
  const Prediction p1 = model.PredictRecursive(inst.test[0]);
  const Prediction p2 = model.PredictRecursive(inst.test[0]);
  EXPECT_EQ(model.update_count(), 2u);
  EXPECT_EQ(model.training_set().size(), 11u);
  EXPECT_GT(p2.prior_variance, p1.prior_variance);
}

TEST(Recursive, RefitAfterManyUpdates) {
  std::mt19937_64 rng(14);
  const auto inst = RandomInstance(rng, 6, 4, 10, 3, 4);
  MmgpModel model = MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions,
                                   Hp(inst.eps, 0.01, 1e-9));
  for (const auto& t : inst.test) model.UpdateRecursive(t);
  const MmgpModel refit = model.Refit();
  EXPECT_EQ(refit.update_count(), 10u);
  EXPECT_LE(RelErr(refit.gamma(), model.gamma()), 1e-9);
}

TEST(Persistence, SaveLoadRoundTrip) {
  std::mt19937_64 rng(15);
  const auto inst = RandomInstance(rng, 6, 4, 3, 2, 4);
  Hyperparameters hp = Hp(inst.eps, 0.0, 1e-7);
  hp.sigma2 = {0.02, 0.04};
  MmgpModel model = MmgpModel::Fit(inst.labelled, inst.unlabelled, inst.positions, hp);
  model.UpdateRecursive(inst.test[0]);
  model.set_source_hash("0123abcd");
  const auto path = std::filesystem::temp_directory_path() /
                    ("mmgp_model_" + std::to_string(::getpid()) + ".bin");
  model.Save(path);
  const MmgpModel back = MmgpModel::Load(path);
  EXPECT_EQ(back.source_hash(), "0123abcd");
  EXPECT_EQ(back.update_count(), 1u);
  EXPECT_EQ(back.hyperparameters().sigma2, hp.sigma2);
  EXPECT_EQ(back.gamma(1), model.gamma(1));
  for (const auto& t : inst.test) {
    EXPECT_EQ(back.Predict(t).estimate, model.Predict(t).estimate);
  }
  {
    std::ofstream out(path, std::ios::binary);
    out << "JUNKJUNK";
  }
  EXPECT_THROW(MmgpModel::Load(path), Error);
  std::filesystem::remove(path);
  EXPECT_THROW(MmgpModel::Load(path), Error);
}

}  // namespace
}  // namespace mmgp

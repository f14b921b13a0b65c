#include <doctest.h>

#include <cstdio>

#include "almt/ground_truth.hpp"

using namespace almt;

namespace {

double cond_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
}

}  // namespace

TEST_CASE("well-conditioned source block has the forced spectrum d_w/k") {
  const Dimensions dims{4, 4, 4, 4, 4, 2};
  const GroundTruthModel gt = make_ground_truth(dims, Conditioning::Well, 1.0,
                                                FeatureKind::Identity, FeatureKind::Identity,
                                                0.0, 11);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gt.b_w_source());
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  CHECK(smin * smin == doctest::Approx(2.0).epsilon(1e-9));  // d_w_source / k = 4 / 2
  CHECK(cond_number(gt.b_w_source()) <= 1.0 + 1e-6);
}

TEST_CASE("b_x columns are orthonormal to 1e-10") {
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
    const Dimensions dims{8, 8, 6, 6, 6, 3};
    const GroundTruthModel gt = make_ground_truth(dims, Conditioning::Well, 1.0,
                                                  FeatureKind::Identity, FeatureKind::Identity,
                                                  0.5, seed);
    const Eigen::MatrixXd gram = gt.b_x.transpose() * gt.b_x;
    CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("the synthetic bilinear recipe dimensions construct cleanly") {
  // d_X = d_psi_X = 200, d_W = 80, k = 4 with unit label noise.
  const Dimensions dims{200, 200, 80, 80, 80, 4};
  const GroundTruthModel gt = make_ground_truth(dims, Conditioning::Ill, 10.0,
                                                FeatureKind::Identity, FeatureKind::Identity,
                                                1.0, 7);
  CHECK(gt.b_x.rows() == 200);
  CHECK(gt.b_w.cols() == 80);
  CHECK(gt.noise_sigma == 1.0);
}

TEST_CASE("conditioning contract: ill(kappa) lands within 1%") {
  for (double kappa : {2.0, 8.0, 32.0}) {
    const Dimensions dims{10, 10, 12, 12, 12, 4};
    const GroundTruthModel gt = make_ground_truth(dims, Conditioning::Ill, kappa,
                                                  FeatureKind::Identity, FeatureKind::Identity,
                                                  0.0, 3);
    CHECK(cond_number(gt.b_w_source()) == doctest::Approx(kappa).epsilon(0.01));
  }
}

TEST_CASE("every b_w column magnitude sits inside [0.9, 1.1]") {
  const Dimensions dims{6, 6, 14, 10, 14, 3};
  const GroundTruthModel gt = make_ground_truth(dims, Conditioning::Ill, 6.0,
                                                FeatureKind::Identity, FeatureKind::Identity,
                                                0.0, 21);
  for (Eigen::Index j = 0; j < gt.b_w.cols(); ++j) {
    CHECK(gt.b_w.col(j).norm() >= 0.9);
    CHECK(gt.b_w.col(j).norm() <= 1.1);
  }
}

TEST_CASE("generator rejects bad parameters") {
  const Dimensions dims{4, 4, 4, 4, 4, 2};
  CHECK_THROWS_AS(make_ground_truth(dims, Conditioning::Ill, 0.5, FeatureKind::Identity,
                                    FeatureKind::Identity, 0.0, 1),
                  std::invalid_argument);
  Dimensions bad = dims;
  bad.k = 5;  // k > d_psi_w
  CHECK_THROWS_AS(make_ground_truth(bad, Conditioning::Well, 1.0, FeatureKind::Identity,
                                    FeatureKind::Identity, 0.0, 1),
                  std::invalid_argument);
}

TEST_CASE("noiseless sampling matches the model identity") {
  const Dimensions dims{8, 8, 6, 6, 6, 2};
  const GroundTruthModel gt = make_ground_truth(dims, Conditioning::Well, 1.0,
                                                FeatureKind::Identity, FeatureKind::Identity,
                                                0.0, 5);
  const TaskSpace space = TaskSpace::source_ball(dims);
  Rng rng(5, Stream::Sampling, 0);

  SUBCASE("zero task vector gives zero labels") {
    const TaskSample s = sample_task(gt, space, Eigen::VectorXd::Zero(6), 50, rng);
    CHECK(s.labels.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("labels equal the bilinear formula over many random tasks") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::VectorXd w = rng.ball(6);
      const TaskSample s = sample_task(gt, space, w, 10, rng);
      const Eigen::VectorXd expected = s.inputs * (gt.b_x * gt.task_coeff(w));
      worst = std::max(worst, (s.labels - expected).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("label variance matches the population value within 10%") {
  const Dimensions dims{10, 10, 8, 8, 8, 3};
  const GroundTruthModel gt = make_ground_truth(dims, Conditioning::Well, 1.0,
                                                FeatureKind::Identity, FeatureKind::Identity,
                                                1.0, 13);
  Rng rng(13, Stream::Sampling, 1);
  const Eigen::VectorXd w = rng.ball(8);
  const TaskSample s = sample_task(gt, TaskSpace::source_ball(dims), w, 10000, rng);
  const double mean = s.labels.mean();
  const double var = (s.labels.array() - mean).square().sum() / (s.labels.size() - 1);
  // Population variance computed directly from the hidden model.
  const double expected = gt.task_coeff(w).squaredNorm() + 1.0;
  CHECK(var == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("sampling rejects tasks outside the space") {
  const Dimensions dims{4, 4, 4, 4, 4, 2};
  const GroundTruthModel gt = make_ground_truth(dims, Conditioning::Well, 1.0,
                                                FeatureKind::Identity, FeatureKind::Identity,
                                                0.0, 2);
  Rng rng(0);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(4, 0.9);  // norm 1.8 > 1
  CHECK_THROWS_AS(sample_task(gt, TaskSpace::source_ball(dims), w, 5, rng),
                  std::invalid_argument);
}

TEST_CASE("identical seeds reproduce samples bit-exactly") {
  const Dimensions dims{6, 6, 5, 5, 5, 2};
  const GroundTruthModel gt = make_ground_truth(dims, Conditioning::Well, 1.0,
                                                FeatureKind::Identity, FeatureKind::Identity,
                                                0.7, 17);
  const Eigen::VectorXd w = Eigen::VectorXd::Unit(5, 1);
  Rng a(17, Stream::Sampling, 4), b(17, Stream::Sampling, 4);
  const TaskSample sa = sample_task(gt, TaskSpace::source_ball(dims), w, 64, a);
  const TaskSample sb = sample_task(gt, TaskSpace::source_ball(dims), w, 64, b);
  CHECK(sa.inputs == sb.inputs);
  CHECK(sa.labels == sb.labels);
}

TEST_CASE("fourier ground truth serializes and reloads bit-exactly") {
  const Dimensions dims{5, 24, 8, 8, 8, 3};
  const GroundTruthModel gt = make_ground_truth(dims, Conditioning::Ill, 4.0,
                                                FeatureKind::Fourier, FeatureKind::Identity,
                                                0.5, 23, 1.3);
  const std::string prefix = "test_truth_roundtrip";
  save_ground_truth(gt, prefix);
  const GroundTruthModel back = load_ground_truth(prefix);
  CHECK(back.b_x == gt.b_x);
  CHECK(back.b_w == gt.b_w);
  CHECK(back.psi_x.fourier_a == gt.psi_x.fourier_a);
  CHECK(back.psi_x.fourier_b == gt.psi_x.fourier_b);
  CHECK(back.noise_sigma == gt.noise_sigma);
  CHECK(back.seed == gt.seed);

  // Same stream, same generated data.
  Rng a(23, Stream::Sampling, 9), b(23, Stream::Sampling, 9);
  const Eigen::VectorXd w = Eigen::VectorXd::Unit(8, 0);
  const TaskSpace space = TaskSpace::source_ball(dims);
  CHECK(sample_task(gt, space, w, 16, a).labels == sample_task(back, space, w, 16, b).labels);
  std::remove((prefix + ".meta").c_str());
  std::remove((prefix + ".bin").c_str());
}

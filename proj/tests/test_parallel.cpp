#include <doctest.h>

#include <vector>

#include "almt/design.hpp"
#include "almt/features.hpp"
#include "almt/oracles.hpp"
#include "almt/parallel.hpp"

using namespace almt;

// The OpenMP kernels split work into per-item units with their own inputs, so
// the results must be bit-identical at any thread count.
TEST_CASE("kernels are thread-count independent") {
  Rng rng(1);
  const FeatureOperator op = FeatureOperator::random_fourier(24, 6, 1.0, rng);
  const Eigen::MatrixXd inputs = rng.gaussian(512, 6);

  const int k = 2, n = 12;
  Eigen::MatrixXd features(k, n);
  for (int i = 0; i < n; ++i) features.col(i) = rng.ball(k);
  const Eigen::MatrixXd target = Eigen::MatrixXd::Identity(k, k);

  std::vector<TaskData> tasks;
  for (int t = 0; t < 8; ++t)
    tasks.push_back({Eigen::VectorXd::Unit(8, t), rng.gaussian(200, 10), rng.gaussian_vec(200)});
  const Eigen::MatrixXd b = random_orthonormal(10, 3, rng);
  std::vector<Eigen::VectorXd> heads;
  for (int t = 0; t < 8; ++t) heads.push_back(rng.gaussian_vec(3));

  const int original = par::max_threads();
  Eigen::MatrixXd lift_1, lift_4;
  GridDesign grid_1, grid_4;
  JointLoss loss_1, loss_4;

  par::set_threads(1);
  lift_1 = op.apply_rows(inputs);
  grid_1 = grid_search_design(features, target, 3, 0.02);
  loss_1 = joint_loss_and_grad(tasks, b, heads);

  par::set_threads(4);
  lift_4 = op.apply_rows(inputs);
  grid_4 = grid_search_design(features, target, 3, 0.02);
  loss_4 = joint_loss_and_grad(tasks, b, heads);
  par::set_threads(original);

  CHECK(lift_1 == lift_4);
  CHECK(lift_1 == op.apply_rows_serial(inputs));
  CHECK(grid_1.objective == grid_4.objective);
  CHECK(grid_1.weights == grid_4.weights);
  CHECK(grid_1.objective == grid_search_design_serial(features, target, 3, 0.02).objective);
  CHECK(loss_1.loss == loss_4.loss);
  CHECK(loss_1.grad_b == loss_4.grad_b);
  for (std::size_t i = 0; i < loss_1.grad_w.size(); ++i)
    CHECK(loss_1.grad_w[i] == loss_4.grad_w[i]);
}

TEST_CASE("for_each_index covers the range exactly once") {
  std::vector<int> hits(1000, 0);
  par::for_each_index(1000, [&](std::ptrdiff_t i) { hits[static_cast<std::size_t>(i)] += 1; });
  for (int h : hits) CHECK(h == 1);
}

#include <doctest.h>

#include "almt/features.hpp"

using namespace almt;

TEST_CASE("identity returns its input") {
  const FeatureOperator op = FeatureOperator::identity(4);
  Eigen::VectorXd v(4);
  v << 1, -2, 3, 0.5;
  CHECK(op.apply(v) == v);
}

TEST_CASE("fourier with zero offset at zero input is all ones") {
  Rng rng(1);
  Eigen::MatrixXd a = rng.gaussian(7, 3);
  const FeatureOperator op = FeatureOperator::fourier(a, Eigen::VectorXd::Zero(7));
  const Eigen::VectorXd out = op.apply(Eigen::VectorXd::Zero(3));
  CHECK((out.array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("fourier outputs lie in [-1, 1]") {
  Rng rng(2);
  const FeatureOperator op = FeatureOperator::random_fourier(40, 5, 1.7, rng);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd out = op.apply(rng.gaussian_vec(5));
    CHECK(out.maxCoeff() <= 1.0);
    CHECK(out.minCoeff() >= -1.0);
  }
}

TEST_CASE("pendulum poly evaluates the declared monomial layout") {
  const FeatureOperator op = FeatureOperator::pendulum_poly();
  REQUIRE(op.input_dim == 6);
  REQUIRE(op.output_dim == 13);

  // c_x = c_y = 1 with zero damping/gravity/dummy: every wind monomial is 1,
  // the g and alpha slots are 0.
  Eigen::VectorXd w(6);
  w << 1, 1, 0, 0, 0, 0;
  const Eigen::VectorXd out = op.apply(w);
  Eigen::VectorXd expected(13);
  expected << 1, 1, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 0;
  CHECK((out - expected).cwiseAbs().maxCoeff() == 0.0);

  // Generic point, monomials evaluated by hand.
  Eigen::VectorXd v(6);
  v << 0.5, -2.0, 0.3, -0.7, 1.1, 1.0;
  const Eigen::VectorXd lifted = op.apply(v);
  CHECK(lifted(0) == 0.5);
  CHECK(lifted(1) == -2.0);
  CHECK(lifted(2) == 1.1);
  CHECK(lifted(3) == 0.3);
  CHECK(lifted(4) == -0.7);
  CHECK(lifted(5) == doctest::Approx(-1.0));        // cx*cy
  CHECK(lifted(6) == doctest::Approx(0.25));        // cx^2
  CHECK(lifted(7) == doctest::Approx(-0.5));        // cx^2*cy
  CHECK(lifted(8) == doctest::Approx(0.125));       // cx^3
  CHECK(lifted(9) == doctest::Approx(4.0));         // cy^2
  CHECK(lifted(10) == doctest::Approx(2.0));        // cy^2*cx
  CHECK(lifted(11) == doctest::Approx(-8.0));       // cy^3
  CHECK(lifted(12) == 1.0);                         // dummy
}

TEST_CASE("dimension mismatch is rejected") {
  const FeatureOperator op = FeatureOperator::identity(4);
  CHECK_THROWS_AS(op.apply(Eigen::VectorXd::Zero(3)), std::invalid_argument);
  const FeatureOperator pp = FeatureOperator::pendulum_poly();
  CHECK_THROWS_AS(pp.apply(Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

TEST_CASE("row-wise lift matches the serial reference bit-exactly") {
  Rng rng(5);
  const FeatureOperator op = FeatureOperator::random_fourier(16, 4, 1.0, rng);
  const Eigen::MatrixXd inputs = rng.gaussian(137, 4);
  CHECK(op.apply_rows(inputs) == op.apply_rows_serial(inputs));
}

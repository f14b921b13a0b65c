#include <doctest.h>

#include "almt/rng.hpp"

using namespace almt;

TEST_CASE("derived streams are deterministic and distinct") {
  CHECK(derive_seed(42, Stream::Truth, 0) == derive_seed(42, Stream::Truth, 0));
  CHECK(derive_seed(42, Stream::Truth, 0) != derive_seed(42, Stream::Sampling, 0));
  CHECK(derive_seed(42, Stream::Truth, 0) != derive_seed(42, Stream::Truth, 1));
  CHECK(derive_seed(42, Stream::Truth, 0) != derive_seed(43, Stream::Truth, 0));

  Rng a(42, Stream::Sampling, 7), b(42, Stream::Sampling, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("random_orthonormal has orthonormal columns") {
  Rng rng(3);
  const Eigen::MatrixXd q = random_orthonormal(20, 5, rng);
  const Eigen::MatrixXd gram = q.transpose() * q;
  CHECK((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ball draws stay inside the unit ball") {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) CHECK(rng.ball(6).norm() <= 1.0 + 1e-12);
}

#ifndef ALMT_FEATURES_HPP
#define ALMT_FEATURES_HPP

#include <Eigen/Dense>

#include "almt/rng.hpp"

namespace almt {

enum class FeatureKind { Identity, Fourier, PendulumPoly };

// Known feature lift for inputs or task parameters.
//   identity:      v -> v
//   fourier:       v -> cos(A v + B), entries in [-1, 1]
//   pendulum-poly: (c_x, c_y, a1, a2, g, dummy) -> 13 monomials, see
//                  pendulum_poly() for the exact layout.
struct FeatureOperator {
  FeatureKind kind = FeatureKind::Identity;
  int input_dim = 0;
  int output_dim = 0;
  Eigen::MatrixXd fourier_a;  // output_dim x input_dim
  Eigen::VectorXd fourier_b;  // output_dim

  static FeatureOperator identity(int dim);
  static FeatureOperator fourier(Eigen::MatrixXd a, Eigen::VectorXd b);
  static FeatureOperator random_fourier(int output_dim, int input_dim, double freq_scale,
                                        Rng& rng);
  static FeatureOperator pendulum_poly();

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

  // Row-wise lift of an n x input_dim matrix; rows are independent.
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& vs) const;
  // Single-threaded reference used by tests and the kernel benchmark.
  Eigen::MatrixXd apply_rows_serial(const Eigen::MatrixXd& vs) const;
};

}  // namespace almt

#endif

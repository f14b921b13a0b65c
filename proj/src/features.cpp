#include "almt/features.hpp"

#include <cmath>
#include <stdexcept>

namespace almt {

FeatureOperator FeatureOperator::identity(int dim) {
  FeatureOperator op;
  op.kind = FeatureKind::Identity;
  op.input_dim = dim;
  op.output_dim = dim;
  return op;
}

FeatureOperator FeatureOperator::fourier(Eigen::MatrixXd a, Eigen::VectorXd b) {
  if (a.rows() != b.size()) throw std::invalid_argument("fourier: A rows must match B size");
  FeatureOperator op;
  op.kind = FeatureKind::Fourier;
  op.input_dim = static_cast<int>(a.cols());
  op.output_dim = static_cast<int>(a.rows());
  op.fourier_a = std::move(a);
  op.fourier_b = std::move(b);
  return op;
}

FeatureOperator FeatureOperator::random_fourier(int output_dim, int input_dim,
                                                double freq_scale, Rng& rng) {
  Eigen::MatrixXd a = rng.gaussian(output_dim, input_dim) * freq_scale;
  Eigen::VectorXd b = rng.gaussian_vec(output_dim);
  return fourier(std::move(a), std::move(b));
}

FeatureOperator FeatureOperator::pendulum_poly() {
  FeatureOperator op;
  op.kind = FeatureKind::PendulumPoly;
  op.input_dim = 6;
  op.output_dim = 13;
  return op;
}

namespace {

// Layout of the pendulum task lift. Input w = (c_x, c_y, a1, a2, g, dummy);
// the wind monomials cover every c-dependence of the residual up to cubic.
Eigen::VectorXd pendulum_poly_apply(const Eigen::VectorXd& w) {
  const double cx = w(0), cy = w(1), a1 = w(2), a2 = w(3), g = w(4), dummy = w(5);
  Eigen::VectorXd out(13);
  out << cx, cy, g, a1, a2,
      cx * cy, cx * cx, cx * cx * cy, cx * cx * cx,
      cy * cy, cy * cy * cx, cy * cy * cy,
      dummy;
  return out;
}

}  // namespace

Eigen::VectorXd FeatureOperator::apply(const Eigen::VectorXd& v) const {
  if (v.size() != input_dim) throw std::invalid_argument("FeatureOperator: dimension mismatch");
  switch (kind) {
    case FeatureKind::Identity:
      return v;
    case FeatureKind::Fourier:
      return ((fourier_a * v + fourier_b).array().cos()).matrix();
    case FeatureKind::PendulumPoly:
      return pendulum_poly_apply(v);
  }
  throw std::logic_error("FeatureOperator: unknown kind");
}

Eigen::MatrixXd FeatureOperator::apply_rows_serial(const Eigen::MatrixXd& vs) const {
  if (vs.cols() != input_dim) throw std::invalid_argument("FeatureOperator: dimension mismatch");
  if (kind == FeatureKind::Identity) return vs;
  Eigen::MatrixXd out(vs.rows(), output_dim);
  for (Eigen::Index i = 0; i < vs.rows(); ++i)
    out.row(i) = apply(vs.row(i).transpose()).transpose();
  return out;
}

Eigen::MatrixXd FeatureOperator::apply_rows(const Eigen::MatrixXd& vs) const {
  if (vs.cols() != input_dim) throw std::invalid_argument("FeatureOperator: dimension mismatch");
  if (kind == FeatureKind::Identity) return vs;
  Eigen::MatrixXd out(vs.rows(), output_dim);
  const Eigen::Index n = vs.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i)
    out.row(i) = apply(vs.row(i).transpose()).transpose();
  return out;
}

}  // namespace almt

#include "almt/task_space.hpp"

#include <algorithm>
#include <cmath>

namespace almt {

void Dimensions::validate() const {
  if (d_x < 1 || d_psi_x < 1 || d_w < 1 || d_w_source < 1 || d_psi_w < 1 || k < 1)
    throw std::invalid_argument("Dimensions: all dims must be >= 1");
  if (k > std::min(d_psi_x, d_psi_w))
    throw std::invalid_argument("Dimensions: k must satisfy k <= min(d_psi_x, d_psi_w)");
  if (d_w_source > d_w)
    throw std::invalid_argument("Dimensions: d_w_source must be <= d_w");
  if (2 * d_w_source < d_w)
    throw std::invalid_argument("Dimensions: d_w_source must be >= d_w / 2");
}

bool TaskSpace::contains(const Eigen::VectorXd& w, double tol) const {
  if (w.size() != d_w) return false;
  for (int i = 0; i < d_w; ++i) {
    bool in_axis = i >= axis_begin && i < axis_begin + axis_count;
    if (!in_axis && std::abs(w(i)) > tol) return false;
  }
  if (kind == TaskSpaceKind::UnitBall) return w.norm() <= 1.0 + tol;
  // Discrete: exactly one coordinate equal to 1.
  int ones = 0;
  for (int i = axis_begin; i < axis_begin + axis_count; ++i) {
    if (std::abs(w(i) - 1.0) <= tol)
      ++ones;
    else if (std::abs(w(i)) > tol)
      return false;
  }
  return ones == 1;
}

TargetSpec TargetSpec::single(const Eigen::VectorXd& w0, int n_target, int dot_n_target) {
  TargetSpec spec;
  spec.targets = w0;
  spec.weights = Eigen::VectorXd::Ones(1);
  spec.spanning = w0.normalized();
  spec.n_target = n_target;
  spec.dot_n_target = dot_n_target;
  return spec;
}

void TargetSpec::validate() const {
  if (targets.cols() < 1) throw std::invalid_argument("TargetSpec: no target vectors");
  if (weights.size() != targets.cols())
    throw std::invalid_argument("TargetSpec: weights/targets size mismatch");
  if (std::abs(weights.sum() - 1.0) > 1e-9 || weights.minCoeff() < 0)
    throw std::invalid_argument("TargetSpec: weights must be a probability vector");
  if (spanning.rows() != targets.rows())
    throw std::invalid_argument("TargetSpec: spanning/targets dim mismatch");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(spanning);
  if (qr.rank() < spanning.cols())
    throw std::invalid_argument("TargetSpec: spanning set is rank deficient");
  if (n_target < 1 || dot_n_target < 1)
    throw std::invalid_argument("TargetSpec: sample counts must be >= 1");
}

}  // namespace almt

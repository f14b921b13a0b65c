#include "almt/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "almt/oracles.hpp"

namespace almt {

double sin_angle(const Eigen::MatrixXd& b_hat, const Eigen::MatrixXd& b_true) {
  if (b_hat.rows() != b_true.rows() || b_hat.cols() != b_true.cols())
    throw std::invalid_argument("sin_angle: shape mismatch");
  const Eigen::MatrixXd residual = b_hat - b_true * (b_true.transpose() * b_hat);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

double dis_similarity(const Eigen::MatrixXd& u, const Eigen::MatrixXd& u_hat) {
  if (u.cols() != u_hat.cols()) throw std::invalid_argument("dis_similarity: column mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < u.cols(); ++i)
    best = std::min(best, (u.col(i).transpose() * u_hat).norm());
  return best;
}

DesignTraceResult design_trace(const Eigen::MatrixXd& b_w,
                               const std::vector<std::pair<Eigen::VectorXd, double>>& counts,
                               const Eigen::MatrixXd& target_cov) {
  const Eigen::Index k = b_w.rows();
  Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [w, n] : counts) {
    const Eigen::VectorXd bw = b_w * w;
    moment.noalias() += n * bw * bw.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(moment);
  DesignTraceResult out;
  const double lmax = solver.eigenvalues().maxCoeff();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    if (solver.eigenvalues()(i) > 1e-12 * std::max(lmax, 1e-300)) ++rank;
  out.moment_rank = rank;
  if (rank < k) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const Eigen::MatrixXd pushed = b_w * target_cov * b_w.transpose();
  out.value = moment.ldlt().solve(pushed).trace();
  return out;
}

TaskSample sample_target_mixture(const GroundTruthModel& gt, const TargetSpec& target, int n,
                                 Rng& rng) {
  TaskSample sample;
  sample.w = Eigen::VectorXd::Zero(gt.dims.d_w);  // mixture draw; no single task vector
  sample.inputs = rng.gaussian(n, gt.dims.d_x);
  sample.labels.resize(n);

  const Eigen::Index m = target.targets.cols();
  std::vector<Eigen::VectorXd> dirs(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i)
    dirs[static_cast<std::size_t>(i)] = gt.b_x * gt.task_coeff(target.targets.col(i));

  const Eigen::MatrixXd lifted = gt.psi_x.apply_rows(sample.inputs);
  for (int r = 0; r < n; ++r) {
    // Inverse-CDF draw over the mixture weights.
    double u = rng.uniform(), acc = 0.0;
    Eigen::Index pick = m - 1;
    for (Eigen::Index i = 0; i < m; ++i) {
      acc += target.weights(i);
      if (u < acc) {
        pick = i;
        break;
      }
    }
    sample.labels(r) = lifted.row(r).dot(dirs[static_cast<std::size_t>(pick)]);
    if (gt.noise_sigma > 0) sample.labels(r) += gt.noise_sigma * rng.normal();
  }
  return sample;
}

long long long_term_task_count(
    const std::vector<std::pair<Eigen::VectorXd, long long>>& task_counts, double alpha,
    double eps) {
  const double threshold = std::pow(eps, -alpha);
  long long count = 0;
  for (const auto& [w, n] : task_counts)
    if (static_cast<double>(n) >= threshold) ++count;
  return count;
}

EvalResult excess_risk(const Eigen::MatrixXd& b_x_hat, const GroundTruthModel& gt,
                       const TargetSpec& target, int n_test, Rng& rng) {
  if (target.n_target < gt.dims.k)
    throw std::invalid_argument("excess_risk: n_target must be >= k");

  const TaskSample fit_data = sample_target_mixture(gt, target, target.n_target, rng);
  const Eigen::MatrixXd fit_features = gt.psi_x.apply_rows(fit_data.inputs);
  const Eigen::VectorXd w_avg = finetune_target(b_x_hat, fit_features, fit_data.labels);

  const TaskSample test_data = sample_target_mixture(gt, target, n_test, rng);
  const Eigen::MatrixXd test_features = gt.psi_x.apply_rows(test_data.inputs);
  const Eigen::VectorXd pred = test_features * (b_x_hat * w_avg);

  EvalResult out;
  out.test_mse = (pred - test_data.labels).squaredNorm() / static_cast<double>(n_test);
  out.er = std::max(0.0, out.test_mse - gt.noise_sigma * gt.noise_sigma);
  return out;
}

}  // namespace almt

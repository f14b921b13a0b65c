#ifndef ALMT_METRICS_HPP
#define ALMT_METRICS_HPP

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "almt/ground_truth.hpp"
#include "almt/task_space.hpp"

namespace almt {

struct MetricsSnapshot {
  double er = 0.0;
  double test_mse = 0.0;
  double sin_angle = 0.0;
  double dis_similarity = 0.0;
  double design_trace = 0.0;
  long long long_term_tasks = 0;
  long long cumulative_budget = 0;
};

// Largest principal-angle sine between the column spans of two
// orthonormal-column matrices: ||(I - B B^T) B_hat||_2.
double sin_angle(const Eigen::MatrixXd& b_hat, const Eigen::MatrixXd& b_true);

// Worst-case column projection: min_i ||u_i^T U_hat||_2.
double dis_similarity(const Eigen::MatrixXd& u, const Eigen::MatrixXd& u_hat);

// Tr((B (sum n_w w w^T) B^T)^{-1} B T B^T), the theory-side risk surrogate.
// A singular moment matrix yields value = +inf and the observed rank.
struct DesignTraceResult {
  double value = 0.0;
  Eigen::Index moment_rank = 0;
};
DesignTraceResult design_trace(const Eigen::MatrixXd& b_w,
                               const std::vector<std::pair<Eigen::VectorXd, double>>& counts,
                               const Eigen::MatrixXd& target_cov);

// Draws fresh mixed target data, fine-tunes the average head, and evaluates
// mean squared prediction error on fresh mixed test data.
// er = max(0, test_mse - sigma^2); test_mse is reported raw.
struct EvalResult {
  double er = 0.0;
  double test_mse = 0.0;
};
EvalResult excess_risk(const Eigen::MatrixXd& b_x_hat, const GroundTruthModel& gt,
                       const TargetSpec& target, int n_test, Rng& rng);

// Mixed draw from the target mixture: n samples, each with its task drawn
// from the mixture weights.
TaskSample sample_target_mixture(const GroundTruthModel& gt, const TargetSpec& target, int n,
                                 Rng& rng);

// Number of distinct tasks whose cumulative sample count reaches eps^{-alpha}.
long long long_term_task_count(
    const std::vector<std::pair<Eigen::VectorXd, long long>>& task_counts, double alpha,
    double eps);

}  // namespace almt

#endif

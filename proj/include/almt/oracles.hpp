#ifndef ALMT_ORACLES_HPP
#define ALMT_ORACLES_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "almt/rng.hpp"

namespace almt {

// Current estimates of the shared representation and the task maps.
// b_x_hat keeps orthonormal columns after every update.
struct ModelEstimate {
  Eigen::MatrixXd b_x_hat;           // d_psi_x x k
  Eigen::MatrixXd b_w_source_hat;    // k x d (source coordinates or psi space)
  Eigen::MatrixXd b_w_target_hat;    // k x d (target coordinates or psi space)
};

struct TrainConfig {
  int am_iters = 25;
  int gd_steps = 300;
  double gd_lr = 0.05;
  int batch = 0;  // 0 = full batch
  double ridge = 0.0;
  std::uint64_t seed = 0;
  double init_gap_tol = 1e-6;  // spectral-gap floor for the moment init
};

// One task's training data with inputs already lifted by psi_X.
struct TaskData {
  Eigen::VectorXd w;
  Eigen::MatrixXd features;  // n x d_psi_x
  Eigen::VectorXd labels;    // n
};

// Least-squares head for one task against a frozen representation:
// argmin_v ||features b_x_hat v - labels||^2 + ridge ||v||^2.
// Throws on a rank-deficient system when ridge == 0.
Eigen::VectorXd fit_task_head(const Eigen::MatrixXd& b_x_hat, const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& labels, double ridge = 0.0);

// sum_i heads[i] basis_col_i^T for an orthonormal basis (checked to 1e-8).
Eigen::MatrixXd assemble_bw(const std::vector<Eigen::VectorXd>& heads,
                            const Eigen::MatrixXd& basis);

// Pseudoinverse assembly for a general spanning set: the min-norm B with
// B spanning = heads (ridge-regularized when requested).
Eigen::MatrixXd fit_bw_spanning(const std::vector<Eigen::VectorXd>& heads,
                                const Eigen::MatrixXd& spanning, double ridge = 0.0);

// Alternating-minimization representation recovery. Initialization from the
// top-k eigenvectors of the label-weighted second-moment matrix
// (1/N) sum y^2 phi phi^T, falling back to a random orthonormal frame when
// the spectral gap is below cfg.init_gap_tol. Alternates exact per-task
// least-squares heads with a stacked least-squares update of b_x_hat followed
// by column re-orthonormalization.
Eigen::MatrixXd alt_min_representation(const std::vector<TaskData>& tasks, int k,
                                       const TrainConfig& cfg);

// Summed squared loss over all tasks with per-task heads, averaged over the
// total sample count, plus its analytic gradients.
struct JointLoss {
  double loss = 0.0;
  Eigen::MatrixXd grad_b;               // d x k
  std::vector<Eigen::VectorXd> grad_w;  // per-task k
};
JointLoss joint_loss_and_grad(const std::vector<TaskData>& tasks, const Eigen::MatrixXd& b,
                              const std::vector<Eigen::VectorXd>& heads);

// Plain gradient descent on the joint objective; final b_x_hat
// re-orthonormalized. Aborts (throws) when the loss exceeds 10x its initial
// value. init == nullptr starts from a random orthonormal frame.
ModelEstimate joint_erm(const std::vector<TaskData>& tasks, const ModelEstimate* init, int k,
                        const TrainConfig& cfg);

// Pooled least-squares head on target data against a frozen representation.
Eigen::VectorXd finetune_target(const Eigen::MatrixXd& b_x_hat,
                                const Eigen::MatrixXd& target_features,
                                const Eigen::VectorXd& target_labels, double ridge = 0.0);

}  // namespace almt

#endif

#ifndef ALMT_GROUND_TRUTH_HPP
#define ALMT_GROUND_TRUTH_HPP

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "almt/features.hpp"
#include "almt/rng.hpp"
#include "almt/task_space.hpp"

namespace almt {

enum class Conditioning { Well, Ill };

// Hidden data-generating model: y = (B_X^T psi_X(x))^T B_W psi_W(w) + noise.
// Immutable after construction; safe to share across threads.
struct GroundTruthModel {
  Dimensions dims;
  Eigen::MatrixXd b_x;  // d_psi_x x k, orthonormal columns
  Eigen::MatrixXd b_w;  // k x d_psi_w
  FeatureOperator psi_x;
  FeatureOperator psi_w;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  Eigen::MatrixXd b_w_source() const { return b_w.leftCols(dims.d_w_source); }
  // B_W psi_W(w): the k-dim coefficient vector of task w.
  Eigen::VectorXd task_coeff(const Eigen::VectorXd& w) const { return b_w * psi_w.apply(w); }
};

// Builds the hidden model. b_x is a QR orthonormalization of a Gaussian draw.
// b_w's source block is synthesized from an exact singular spectrum
// (well: all values sqrt(d_w_source/k); ill: geometric with ratio kappa) with
// every column norm made exactly 1 by a Givens row-equalization sweep on the
// right factor, so both the conditioning contract and the column-magnitude
// band hold at machine precision. Deterministic given seed.
GroundTruthModel make_ground_truth(const Dimensions& dims, Conditioning conditioning,
                                   double kappa, FeatureKind psi_x_kind, FeatureKind psi_w_kind,
                                   double sigma, std::uint64_t seed,
                                   double fourier_scale = 1.0);

// Labeled data for one task.
struct TaskSample {
  Eigen::VectorXd w;
  Eigen::MatrixXd inputs;  // n x d_x, iid N(0, I)
  Eigen::VectorXd labels;  // n
};

TaskSample sample_task(const GroundTruthModel& gt, const TaskSpace& space,
                       const Eigen::VectorXd& w, int n, Rng& rng);

// Flat text-header + binary-matrix pair (<prefix>.meta, <prefix>.bin) for
// bit-exact resume.
void save_ground_truth(const GroundTruthModel& gt, const std::string& prefix);
GroundTruthModel load_ground_truth(const std::string& prefix);

}  // namespace almt

#endif

#ifndef ALMT_TASK_SPACE_HPP
#define ALMT_TASK_SPACE_HPP

#include <stdexcept>

#include <Eigen/Dense>

namespace almt {

struct Dimensions {
  int d_x = 1;         // raw input dim
  int d_psi_x = 1;     // lifted input dim
  int d_w = 1;         // task parameter dim
  int d_w_source = 1;  // source subspace dim (first coordinates of w)
  int d_psi_w = 1;     // lifted task dim
  int k = 1;           // shared representation dim

  void validate() const;
};

enum class TaskSpaceKind { UnitBall, DiscreteOneHot };

// A task space over a contiguous coordinate range of R^{d_w}. Vectors must be
// zero outside [axis_begin, axis_begin + axis_count).
struct TaskSpace {
  TaskSpaceKind kind = TaskSpaceKind::UnitBall;
  int d_w = 1;
  int axis_begin = 0;
  int axis_count = 1;

  static TaskSpace source_ball(const Dimensions& dims) {
    return {TaskSpaceKind::UnitBall, dims.d_w, 0, dims.d_w_source};
  }
  static TaskSpace full_ball(int d_w) { return {TaskSpaceKind::UnitBall, d_w, 0, d_w}; }
  static TaskSpace one_hot(const Dimensions& dims) {
    return {TaskSpaceKind::DiscreteOneHot, dims.d_w, 0, dims.d_w_source};
  }

  bool contains(const Eigen::VectorXd& w, double tol = 1e-9) const;
};

// Target description: a finite weighted mixture of target vectors plus the
// spanning set used to learn the source->target relation from labeled
// known-environment data.
struct TargetSpec {
  Eigen::MatrixXd targets;   // d_w x m, mixture atoms
  Eigen::VectorXd weights;   // m, nonnegative, sums to 1
  Eigen::MatrixXd spanning;  // d_w x dim(W_target), full rank over the target subspace
  int n_target = 0;          // mixed fine-tune sample count
  int dot_n_target = 0;      // per known-environment sample count

  static TargetSpec single(const Eigen::VectorXd& w0, int n_target, int dot_n_target);

  void validate() const;
};

}  // namespace almt

#endif

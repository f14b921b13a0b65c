#ifndef ALMT_DESIGN_HPP
#define ALMT_DESIGN_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "almt/features.hpp"
#include "almt/task_space.hpp"

namespace almt {

// Eigenpairs of a PSD matrix surviving a clip threshold, descending order.
struct ClippedEig {
  Eigen::MatrixXd vectors;  // k x m, orthonormal columns
  Eigen::VectorXd values;   // m, all >= gamma
  double gamma = 0.0;

  int count() const { return static_cast<int>(values.size()); }
};

// Eigendecomposition with eigenvalues below gamma discarded. Throws on
// asymmetric input (asymmetry > 1e-8).
ClippedEig clip_target_covariance(const Eigen::MatrixXd& sigma_hat, double gamma);

// Default clip threshold 8 (k d_W)^{3/2} sqrt(d_X / n1).
double default_clip_threshold(int k, int d_w, int d_x, long long n1);

// Min-norm solutions of B w' = u_i sqrt(lambda_i) plus their projections onto
// the unit ball (applied only when a minimizer leaves the ball).
struct BallDesign {
  Eigen::MatrixXd w_prime;  // d x m
  Eigen::MatrixXd tasks;    // d x m, ||col|| <= 1
};

// Closed form w'_i = B^T (B B^T)^{-1} u_i sqrt(lambda_i). Throws if
// sigma_min(B) <= rank_tol_factor * sigma_max(B) (caller should re-explore).
BallDesign solve_ball_closed_form(const Eigen::MatrixXd& b_hat_source,
                                  const ClippedEig& clipped,
                                  double rank_tol_factor = 1e-8);

// g(q) = lambda_max((sum_i q_i f_i f_i^T)^{-1} A) for candidate feature
// columns f_i. Returns +inf when the moment matrix is singular.
double design_objective(const Eigen::MatrixXd& features, const Eigen::VectorXd& weights,
                        const Eigen::MatrixXd& target_mat);

// Frank-Wolfe on the simplex for the objective above: tie-averaged subgradient
// direction, grid line search (the objective never increases), and a pairwise
// exchange polish that clears stalls at nonsmooth optima. The second half of
// the iteration budget funds the polish. Throws if the uniform start is
// singular. objective_history, when given, receives the objective after the
// start and after every accepted step.
Eigen::VectorXd frank_wolfe_design(const Eigen::MatrixXd& features,
                                   const Eigen::MatrixXd& target_mat, int iters,
                                   std::vector<double>* objective_history = nullptr);

struct DesignProblem {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f_map;
  Eigen::MatrixXd target_mat;
  TaskSpace space;
};

Eigen::VectorXd frank_wolfe_design(const DesignProblem& problem,
                                   const std::vector<Eigen::VectorXd>& candidates, int iters);

// Discretization fallback: exhaustive search over supports of size
// <= max_support with a barycentric weight grid at the given resolution.
// Serial reference plus an OpenMP variant; both return identical results.
struct GridDesign {
  Eigen::VectorXd weights;
  double objective = 0.0;
};
GridDesign grid_search_design_serial(const Eigen::MatrixXd& features,
                                     const Eigen::MatrixXd& target_mat, int max_support,
                                     double resolution);
GridDesign grid_search_design(const Eigen::MatrixXd& features,
                              const Eigen::MatrixXd& target_mat, int max_support,
                              double resolution);

// Shrinking-ball search for w minimizing ||b_hat psi_W(w) - target_vec||
// when psi_W is not invertible. Radius starts at the space radius and halves
// each round; the best point seen is kept.
Eigen::VectorXd adaptive_source_search(const FeatureOperator& psi_w,
                                       const Eigen::MatrixXd& b_hat,
                                       const Eigen::VectorXd& target_vec,
                                       const TaskSpace& space, int rounds, int pool, Rng& rng);

// Total stage-3 budget ceil(m * beta3 * max_i ||w'_i||^2 / eps^2); zero when
// there are no columns.
long long budget_target_aware(const Eigen::MatrixXd& w_prime_cols, double eps_j, double beta3);

// A finite sampling design: support tasks, weights, and integer budgets.
struct SamplingPlan {
  Eigen::MatrixXd tasks;              // d_w x m columns
  Eigen::VectorXd weights;            // m, sums to 1
  long long total_budget = 0;
  std::vector<long long> per_task;    // ceil allocation, never under-samples

  static SamplingPlan uniform(const Eigen::MatrixXd& tasks, long long total_budget);
};

}  // namespace almt

#endif

#ifndef ALMT_PENDULUM_HPP
#define ALMT_PENDULUM_HPP

#include <functional>

#include <Eigen/Dense>

#include "almt/ground_truth.hpp"
#include "almt/learner.hpp"
#include "almt/rng.hpp"

namespace almt {

// One pendulum environment. The task parameter is
//   w = (c_x, c_y, alpha_1, alpha_2, g_mismatch, dummy)
// with external wind c, damping coefficients, a gravity estimation error
// (g_true = g_hat + w[4]), and a dummy bit that is 0 for sources and 1 for
// the observed target.
struct PendulumEnv {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(6);
  double mass = 1.0;
  double length = 1.0;
  double g_hat = 9.8;  // nominal gravity used by the model and controller
  double g_true = 9.8;
  double dt = 0.02;

  static PendulumEnv from_task(const Eigen::VectorXd& w, double mass = 1.0,
                               double length = 1.0, double g_nominal = 9.8,
                               double dt = 0.02);
};

struct PendulumState {
  double theta = 0.0;
  double theta_dot = 0.0;
  double norm() const { return std::sqrt(theta * theta + theta_dot * theta_dot); }
};

// Residual torque: cubic air drag of the pole tip against the wind, linear and
// quadratic damping, and the gravity-mismatch term.
//   R = c - (l th' cos th, -l th' sin th),  F = ||R||^2 R
//   f = cross2(l_vec, F) - a1 th' - a2 th'|th'| + m l (g - g_hat) sin th
// with l_vec = l (sin th, -cos th) and cross2(a, b) = a_x b_y - a_y b_x.
double residual_f(const PendulumState& state, const PendulumEnv& env);

using ResidualFn = std::function<double(const PendulumState&, const PendulumEnv&)>;

// RK4 step of m l^2 th'' = u + f + m l g_hat sin th with u held constant.
// residual overrides the true f (used by the integrator tests).
PendulumState step(const PendulumState& state, double u, const PendulumEnv& env,
                   const ResidualFn& residual = {});

// Random-excitation data collection: PD tracking of random setpoints plus
// Gaussian control noise, state resets every 100 steps. Inputs are (theta,
// theta_dot); labels are f(x, w) plus N(0, label_sigma^2) noise. residual
// overrides both the plant and the labels.
TaskSample collect_data(const PendulumEnv& env, int n, double label_sigma, Rng& rng,
                        const ResidualFn& residual = {});

// Rollout of u = -m l g_hat sin th - f_hat(th, th') - m l^2 (kp th + kd th')
// against the true dynamics from a fixed displaced start.
struct RolloutResult {
  double mean_error = 0.0;   // mean ||x|| over the horizon
  double final_error = 0.0;  // ||x|| at the end
  bool diverged = false;
};
RolloutResult control_rollout(const PendulumEnv& env_true,
                              const std::function<double(double, double)>& f_hat, double kp,
                              double kd, int horizon, PendulumState start = {1.0, 0.0},
                              const ResidualFn& residual = {});

// Labeled-data oracle for the learner. The observed dummy target vector maps
// to the hidden actual target environment.
class PendulumSampler final : public TaskSampler {
 public:
  PendulumSampler(Eigen::VectorXd actual_target, double label_sigma, double mass,
                  double length, double g_nominal, double dt)
      : actual_target_(std::move(actual_target)),
        label_sigma_(label_sigma),
        mass_(mass),
        length_(length),
        g_nominal_(g_nominal),
        dt_(dt) {}

  TaskSample sample(const TaskSpace& space, const Eigen::VectorXd& w, int n,
                    Rng& rng) const override;

  PendulumEnv env_for(const Eigen::VectorXd& w) const;
  double label_sigma() const { return label_sigma_; }

 private:
  Eigen::VectorXd actual_target_;
  double label_sigma_;
  double mass_, length_, g_nominal_, dt_;
};

}  // namespace almt

#endif

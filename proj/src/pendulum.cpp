#include "almt/pendulum.hpp"

#include <cmath>
#include <stdexcept>

namespace almt {

PendulumEnv PendulumEnv::from_task(const Eigen::VectorXd& w, double mass, double length,
                                   double g_nominal, double dt) {
  if (w.size() != 6) throw std::invalid_argument("PendulumEnv: task vector must be 6-dim");
  if (dt <= 0) throw std::invalid_argument("PendulumEnv: dt must be > 0");
  PendulumEnv env;
  env.w = w;
  env.mass = mass;
  env.length = length;
  env.g_hat = g_nominal;
  env.g_true = g_nominal + w(4);
  env.dt = dt;
  return env;
}

double residual_f(const PendulumState& state, const PendulumEnv& env) {
  const double l = env.length;
  const double sin_t = std::sin(state.theta), cos_t = std::cos(state.theta);
  const Eigen::Vector2d tip_vel(l * state.theta_dot * cos_t, -l * state.theta_dot * sin_t);
  const Eigen::Vector2d r = env.w.head<2>() - tip_vel;
  const Eigen::Vector2d force = r.squaredNorm() * r;
  const Eigen::Vector2d l_vec(l * sin_t, -l * cos_t);
  const double cross = l_vec.x() * force.y() - l_vec.y() * force.x();
  const double damping =
      env.w(2) * state.theta_dot + env.w(3) * state.theta_dot * std::abs(state.theta_dot);
  const double gravity = env.mass * l * (env.g_true - env.g_hat) * sin_t;
  return cross - damping + gravity;
}

namespace {

double acceleration(const PendulumState& state, double u, const PendulumEnv& env,
                    const ResidualFn& residual) {
  const double f = residual ? residual(state, env) : residual_f(state, env);
  return (u + f + env.mass * env.length * env.g_hat * std::sin(state.theta)) /
         (env.mass * env.length * env.length);
}

}  // namespace

PendulumState step(const PendulumState& state, double u, const PendulumEnv& env,
                   const ResidualFn& residual) {
  const double h = env.dt;
  auto deriv = [&](const PendulumState& s) {
    return PendulumState{s.theta_dot, acceleration(s, u, env, residual)};
  };
  const PendulumState k1 = deriv(state);
  const PendulumState k2 = deriv({state.theta + 0.5 * h * k1.theta, state.theta_dot + 0.5 * h * k1.theta_dot});
  const PendulumState k3 = deriv({state.theta + 0.5 * h * k2.theta, state.theta_dot + 0.5 * h * k2.theta_dot});
  const PendulumState k4 = deriv({state.theta + h * k3.theta, state.theta_dot + h * k3.theta_dot});
  PendulumState next;
  next.theta = state.theta + h / 6.0 * (k1.theta + 2 * k2.theta + 2 * k3.theta + k4.theta);
  next.theta_dot =
      state.theta_dot + h / 6.0 * (k1.theta_dot + 2 * k2.theta_dot + 2 * k3.theta_dot + k4.theta_dot);
  if (!std::isfinite(next.theta) || !std::isfinite(next.theta_dot))
    throw std::runtime_error("pendulum step: non-finite state");
  return next;
}

TaskSample collect_data(const PendulumEnv& env, int n, double label_sigma, Rng& rng,
                        const ResidualFn& residual) {
  TaskSample sample;
  sample.w = env.w;
  sample.inputs.resize(n, 2);
  sample.labels.resize(n);
  if (n == 0) return sample;

  const double kp = 4.0, kd = 2.0, control_noise = 2.0;
  PendulumState state{2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
  double setpoint = 0.0;
  const double ml = env.mass * env.length;
  const double ml2 = ml * env.length;
  for (int i = 0; i < n; ++i) {
    // Reset to decorrelate trajectories, and whenever the cubic drag pushes
    // the state toward its blow-up region.
    if (i % 100 == 0 || state.norm() > 4.0)
      state = {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
    if (i % 25 == 0) setpoint = 3.0 * rng.uniform() - 1.5;

    sample.inputs(i, 0) = state.theta;
    sample.inputs(i, 1) = state.theta_dot;
    const double f = residual ? residual(state, env) : residual_f(state, env);
    sample.labels(i) = f + label_sigma * rng.normal();

    const double u = -ml * env.g_hat * std::sin(state.theta) -
                     ml2 * (kp * (state.theta - setpoint) + kd * state.theta_dot) +
                     control_noise * rng.normal();
    state = step(state, u, env, residual);
  }
  return sample;
}

RolloutResult control_rollout(const PendulumEnv& env_true,
                              const std::function<double(double, double)>& f_hat, double kp,
                              double kd, int horizon, PendulumState start,
                              const ResidualFn& residual) {
  if (kp <= 0 || kd <= 0)
    throw std::invalid_argument("control_rollout: gains must be positive");
  const double ml = env_true.mass * env_true.length;
  const double ml2 = ml * env_true.length;
  PendulumState state = start;
  RolloutResult out;
  double sum = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const double compensation = f_hat ? f_hat(state.theta, state.theta_dot) : 0.0;
    const double u = -ml * env_true.g_hat * std::sin(state.theta) - compensation -
                     ml2 * (kp * state.theta + kd * state.theta_dot);
    try {
      state = step(state, u, env_true, residual);
    } catch (const std::runtime_error&) {
      out.diverged = true;
      break;
    }
    if (state.norm() > 1e3) {
      out.diverged = true;
      break;
    }
    sum += state.norm();
  }
  out.mean_error = out.diverged ? 1e6 : sum / horizon;
  out.final_error = out.diverged ? 1e6 : state.norm();
  return out;
}

PendulumEnv PendulumSampler::env_for(const Eigen::VectorXd& w) const {
  // Sources carry their physical parameters; the observed target (dummy = 1)
  // stands for the hidden actual target environment.
  const bool is_target = w.size() == 6 && std::abs(w(5) - 1.0) < 1e-9;
  return PendulumEnv::from_task(is_target ? actual_target_ : w, mass_, length_, g_nominal_,
                                dt_);
}

TaskSample PendulumSampler::sample(const TaskSpace& space, const Eigen::VectorXd& w, int n,
                                   Rng& rng) const {
  if (!space.contains(w)) throw std::invalid_argument("PendulumSampler: w outside task space");
  TaskSample sample = collect_data(env_for(w), n, label_sigma_, rng);
  sample.w = w;  // the learner sees the observed parameter, not the actual one
  return sample;
}

}  // namespace almt

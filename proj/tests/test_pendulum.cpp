#include <doctest.h>

#include <cmath>

#include "almt/oracles.hpp"
#include "almt/pendulum.hpp"

using namespace almt;

namespace {

PendulumEnv env_from(double cx, double cy, double a1, double a2, double g_mismatch) {
  Eigen::VectorXd w(6);
  w << cx, cy, a1, a2, g_mismatch, 0.0;
  return PendulumEnv::from_task(w);
}

double energy(const PendulumState& s, const PendulumEnv& env) {
  const double ml = env.mass * env.length;
  return 0.5 * ml * env.length * s.theta_dot * s.theta_dot +
         ml * env.g_hat * std::cos(s.theta);
}

}  // namespace

TEST_CASE("residual vanishes at rest with no wind and matched gravity") {
  const PendulumEnv env = env_from(0, 0, 0.5, 0.3, 0);
  CHECK(residual_f({0.0, 0.0}, env) == 0.0);
}

TEST_CASE("residual matches the hand expansion with zero wind") {
  // With c = 0, alpha2 = 0 and matched gravity the drag torque reduces to
  // -l^4 th'^3 cos(2 th), cubic in the angular rate.
  const PendulumEnv env = env_from(0, 0, 0.7, 0, 0);
  Rng rng(3);
  for (int i = 0; i < 5; ++i) {
    const PendulumState s{3.0 * rng.uniform() - 1.5, 4.0 * rng.uniform() - 2.0};
    const double l = env.length;
    const double expected = -std::pow(l, 4) * std::pow(s.theta_dot, 3) * std::cos(2 * s.theta) -
                            0.7 * s.theta_dot;
    CHECK(residual_f(s, env) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("damping contribution is linear in alpha_1") {
  const PendulumState s{0.4, 1.3};
  const double base = residual_f(s, env_from(0.2, -0.1, 0.0, 0.3, 0.1));
  const double with_a1 = residual_f(s, env_from(0.2, -0.1, 0.5, 0.3, 0.1));
  const double with_2a1 = residual_f(s, env_from(0.2, -0.1, 1.0, 0.3, 0.1));
  CHECK(with_2a1 - base == doctest::Approx(2.0 * (with_a1 - base)).epsilon(1e-12));
}

TEST_CASE("residual is odd under state negation when there is no wind") {
  const PendulumEnv env = env_from(0, 0, 0.4, 0.6, 0.8);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const double theta = 4.0 * rng.uniform() - 2.0;
    const double theta_dot = 4.0 * rng.uniform() - 2.0;
    CHECK(residual_f({-theta, -theta_dot}, env) ==
          doctest::Approx(-residual_f({theta, theta_dot}, env)).epsilon(1e-10));
  }
}

TEST_CASE("a torque-cancelling control holds the state fixed") {
  const PendulumEnv env = env_from(0.3, -0.2, 0.5, 0.1, 0.4);
  const PendulumState s{0.8, 0.0};
  // th_dot = 0, so cancelling f and gravity freezes the state.
  const double u = -residual_f(s, env) -
                   env.mass * env.length * env.g_hat * std::sin(s.theta);
  const PendulumState next = step(s, u, env);
  CHECK(std::abs(next.theta - s.theta) < 1e-9);
  CHECK(std::abs(next.theta_dot - s.theta_dot) < 1e-9);
}

TEST_CASE("the inverted equilibrium is stationary") {
  const PendulumEnv env = env_from(0, 0, 0, 0, 0);
  const PendulumState s{M_PI, 0.0};
  const PendulumState next = step(s, 0.0, env);
  CHECK(std::abs(next.theta - M_PI) < 1e-12);
  CHECK(std::abs(next.theta_dot) < 1e-12);
}

TEST_CASE("integrator conserves energy on the conservative pendulum") {
  PendulumEnv env = env_from(0, 0, 0, 0, 0);
  env.dt = 1e-3;
  const ResidualFn none = [](const PendulumState&, const PendulumEnv&) { return 0.0; };
  PendulumState s{0.7, 0.0};
  const double initial = energy(s, env);
  for (int i = 0; i < 1000; ++i) s = step(s, 0.0, env, none);  // one unit of time
  CHECK(std::abs(energy(s, env) - initial) <= 1e-6);
}

TEST_CASE("RK4 order via Richardson ratio") {
  // Smooth regime: alpha2 = 0 keeps the dynamics C-infinity; short horizon
  // and a small initial displacement stay clear of the drag blow-up.
  PendulumEnv env = env_from(0.4, 0.2, 0.5, 0.0, 0.3);
  auto integrate = [&](double dt, double total) {
    PendulumEnv stepped = env;
    stepped.dt = dt;
    PendulumState s{0.3, 0.2};
    const int steps = static_cast<int>(std::lround(total / dt));
    for (int i = 0; i < steps; ++i) s = step(s, 0.0, stepped);
    return s;
  };
  const double total = 0.16;
  const PendulumState ref = integrate(0.0005, total);
  const PendulumState coarse = integrate(0.02, total);
  const PendulumState fine = integrate(0.01, total);
  const double err_coarse = std::hypot(coarse.theta - ref.theta, coarse.theta_dot - ref.theta_dot);
  const double err_fine = std::hypot(fine.theta - ref.theta, fine.theta_dot - ref.theta_dot);
  const double ratio = err_coarse / err_fine;
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("data collection basics") {
  const PendulumEnv env = env_from(0.5, 0.1, 0.8, 0.2, 0.1);

  SUBCASE("n = 0 gives an empty sample") {
    Rng rng(7);
    const TaskSample s = collect_data(env, 0, 0.0, rng);
    CHECK(s.labels.size() == 0);
  }

  SUBCASE("zero residual and zero label noise give zero labels") {
    Rng rng(7);
    const ResidualFn none = [](const PendulumState&, const PendulumEnv&) { return 0.0; };
    const TaskSample s = collect_data(env, 300, 0.0, rng, none);
    CHECK(s.labels.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("labels are the residual at the visited state plus noise") {
    Rng rng(8);
    const TaskSample s = collect_data(env, 200, 0.0, rng);
    for (int i = 0; i < 200; ++i) {
      const PendulumState state{s.inputs(i, 0), s.inputs(i, 1)};
      CHECK(s.labels(i) == doctest::Approx(residual_f(state, env)).epsilon(1e-12));
    }
  }

  SUBCASE("excitation covers at least [-1, 1] in angle") {
    Rng rng(9);
    const TaskSample s = collect_data(env, 4000, 0.0, rng);
    CHECK(s.inputs.col(0).minCoeff() <= -1.0);
    CHECK(s.inputs.col(0).maxCoeff() >= 1.0);
  }
}

TEST_CASE("perfect model compensation dominates no compensation") {
  for (auto params : {std::array<double, 5>{0.8, 0.0, 0.5, 0.2, 0.3},
                      std::array<double, 5>{0.5, -0.4, 1.0, 0.5, -0.5},
                      std::array<double, 5>{-0.7, 0.3, 0.2, 0.0, 0.6}}) {
    const PendulumEnv env = env_from(params[0], params[1], params[2], params[3], params[4]);
    auto true_f = [&env](double theta, double theta_dot) {
      return residual_f({theta, theta_dot}, env);
    };
    const RolloutResult exact = control_rollout(env, true_f, 4.0, 4.0, 500);
    const RolloutResult none = control_rollout(env, nullptr, 4.0, 4.0, 500);
    CHECK(exact.mean_error <= none.mean_error);
  }
}

TEST_CASE("the PD loop regulates the residual-free plant") {
  const PendulumEnv env = env_from(0, 0, 0, 0, 0);
  const ResidualFn none = [](const PendulumState&, const PendulumEnv&) { return 0.0; };
  const RolloutResult result =
      control_rollout(env, nullptr, 4.0, 4.0, 600, {1.0, 0.0}, none);
  CHECK_FALSE(result.diverged);
  CHECK(result.final_error <= 0.01);
}

TEST_CASE("longer horizons do not hurt a stabilizing controller") {
  const PendulumEnv env = env_from(0.3, 0.1, 0.5, 0.2, 0.2);
  auto true_f = [&env](double theta, double theta_dot) {
    return residual_f({theta, theta_dot}, env);
  };
  double prev = control_rollout(env, true_f, 4.0, 4.0, 250).mean_error;
  for (int horizon : {500, 1000, 2000}) {
    const double mean = control_rollout(env, true_f, 4.0, 4.0, horizon).mean_error;
    CHECK(mean <= prev * (1.0 + 1e-9));
    prev = mean;
  }
}

TEST_CASE("bilinear residual fit beats the zero predictor") {
  // Fourier-60 input lift with the polynomial task lift, k = 8; the learned
  // model should carry real signal on held-out target data.
  const FeatureOperator psi_x = [&] {
    Rng rng(11);
    return FeatureOperator::random_fourier(60, 2, 1.0, rng);
  }();

  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    std::vector<TaskData> tasks;
    for (int t = 0; t < 10; ++t) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(6);
      w.head(5) = rng.ball(5);
      const PendulumEnv env = PendulumEnv::from_task(w);
      const TaskSample raw = collect_data(env, 500, std::sqrt(0.5), rng);
      tasks.push_back({w, psi_x.apply_rows(raw.inputs), raw.labels});
    }
    TrainConfig cfg;
    cfg.am_iters = 15;
    cfg.ridge = 1e-8;
    cfg.seed = seed;
    const Eigen::MatrixXd b_hat = alt_min_representation(tasks, 8, cfg);

    Eigen::VectorXd w_test = Eigen::VectorXd::Zero(6);
    w_test.head(5) = rng.ball(5);
    const PendulumEnv test_env = PendulumEnv::from_task(w_test);
    const TaskSample train = collect_data(test_env, 600, std::sqrt(0.5), rng);
    const TaskSample held = collect_data(test_env, 600, 0.0, rng);
    const Eigen::VectorXd head =
        finetune_target(b_hat, psi_x.apply_rows(train.inputs), train.labels, 1e-8);
    const Eigen::VectorXd pred = psi_x.apply_rows(held.inputs) * (b_hat * head);
    const double model_mse = (pred - held.labels).squaredNorm() / held.labels.size();
    const double zero_mse = held.labels.squaredNorm() / held.labels.size();
    ratios.push_back(model_mse / zero_mse);
  }
  std::sort(ratios.begin(), ratios.end());
  CHECK(ratios[1] < 1.0);  // median strictly better than predicting zero
}

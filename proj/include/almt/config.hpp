#ifndef ALMT_CONFIG_HPP
#define ALMT_CONFIG_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "almt/learner.hpp"
#include "almt/task_space.hpp"

namespace almt {

enum class Scenario { SyntheticBilinear, SyntheticFourier, Pendulum };
enum class Strategy { Passive, TargetAgnostic, TargetAware };

std::string to_string(Scenario s);
std::string to_string(Strategy s);

// How the target mixture is materialized. Symbolic targets (weakest source
// direction) are resolved against each seed's ground truth at run time.
struct TargetConfig {
  enum class Kind { WeakestSourceDirection, Axis, Explicit, PendulumDummy };
  Kind kind = Kind::WeakestSourceDirection;
  int axis = 0;
  Eigen::MatrixXd vectors;  // d_w x m for Kind::Explicit
  Eigen::VectorXd weights;
  Eigen::VectorXd pendulum_actual;  // hidden actual target, Kind::PendulumDummy
  int n_target = 2000;
  int dot_n_target = 500;
};

struct PendulumConfig {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.8;
  double dt = 0.02;
  double kp = 4.0;
  double kd = 4.0;
  int horizon = 500;
  double label_sigma = 0.7071067811865476;  // sqrt(0.5)
};

struct ExperimentConfig {
  Scenario scenario = Scenario::SyntheticBilinear;
  std::vector<Strategy> strategies;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";

  Dimensions dims;
  Conditioning conditioning = Conditioning::Well;
  double kappa = 1.0;
  double sigma = 0.0;
  double fourier_scale = 1.0;

  TargetConfig target;
  LearnerOptions learner;  // budgets, train, gamma, oracle assignment
  int n_test = 2000;
  PendulumConfig pendulum;
};

// Flat key-value format with [section] headers; '#' starts a comment.
// Unknown keys, missing required keys, duplicate strategies, and
// inconsistent dimensions are rejected with messages naming the keys.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
std::string serialize_config(const ExperimentConfig& config);

}  // namespace almt

#endif

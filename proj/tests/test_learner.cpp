#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "almt/experiment.hpp"
#include "almt/learner.hpp"

using namespace almt;

namespace {

ExperimentConfig small_config(double sigma, int d_w = 5, int k = 2, int d_psi_x = 10) {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::SyntheticBilinear;
  cfg.strategies = {Strategy::TargetAware};
  cfg.seeds = {1};
  cfg.dims = Dimensions{d_psi_x, d_psi_x, d_w, d_w, d_w, k};
  cfg.conditioning = Conditioning::Well;
  cfg.kappa = 1.0;
  cfg.sigma = sigma;
  cfg.target.kind = TargetConfig::Kind::WeakestSourceDirection;
  cfg.target.n_target = 400;
  cfg.target.dot_n_target = 200;
  cfg.learner.budgets.n0 = 600;
  cfg.learner.budgets.beta2 = 300;
  cfg.learner.budgets.epochs = 2;
  cfg.learner.gamma.mode = GammaPolicy::Mode::Fixed;
  cfg.learner.gamma.fixed_value = 1e-4;
  cfg.learner.train.am_iters = 20;
  cfg.learner.train.gd_steps = 150;
  cfg.learner.train.gd_lr = 0.2;
  cfg.n_test = 400;
  return cfg;
}

}  // namespace

TEST_CASE("warmup: uniform one-hot plan, exact recovery at sigma = 0") {
  ExperimentConfig cfg = small_config(0.0);
  RunSetup setup = make_run_setup(cfg, 3);
  const RunResult result = run_warmup(setup.env, setup.options);

  REQUIRE(result.trace.records.size() == 1);
  const EpochRecord& rec = result.trace.records[0];
  CHECK(rec.stage == "warmup");
  REQUIRE(rec.plan.weights.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(rec.plan.weights(i) == doctest::Approx(0.2));
  CHECK(result.trace.distinct_tasks() == 5);
  CHECK(rec.metrics.sin_angle <= 1e-6);
}

TEST_CASE("compute_q1 returns the top right singular directions") {
  const Dimensions dims{6, 6, 5, 5, 5, 2};

  SUBCASE("identity block maps to coordinate tasks") {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 5);
    b(0, 0) = 1.0;
    b(1, 1) = 1.0;
    bool degraded = true;
    const Eigen::MatrixXd tasks = compute_q1(b, dims, &degraded);
    CHECK_FALSE(degraded);
    REQUIRE(tasks.cols() == 2);
    CHECK(std::abs(tasks.col(0).cwiseAbs().maxCoeff() - 1.0) < 1e-12);
    CHECK((tasks.transpose() * tasks - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <
          1e-9);
  }

  SUBCASE("span matches an independent SVD and the columns are unit vectors") {
    Rng rng(17);
    const Eigen::MatrixXd b = rng.gaussian(2, 5);
    const Eigen::MatrixXd tasks = compute_q1(b, dims, nullptr);
    for (Eigen::Index i = 0; i < tasks.cols(); ++i)
      CHECK(tasks.col(i).norm() == doctest::Approx(1.0).epsilon(1e-9));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinV);
    // Principal angle between spans is ~0.
    const Eigen::MatrixXd v = svd.matrixV().leftCols(2);
    Eigen::JacobiSVD<Eigen::MatrixXd> overlap(v.transpose() * tasks.topRows(5));
    CHECK(overlap.singularValues().minCoeff() == doctest::Approx(1.0).epsilon(1e-8));
  }

  SUBCASE("rank deficiency sets the degraded flag") {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 5);
    b(0, 0) = 1.0;  // rank 1 < k = 2
    bool degraded = false;
    const Eigen::MatrixXd tasks = compute_q1(b, dims, &degraded);
    CHECK(degraded);
    CHECK(tasks.cols() == 1);
  }
}

TEST_CASE("save-task gate") {
  Rng rng(19);
  const Eigen::MatrixXd basis = random_orthonormal(6, 2, rng);
  CHECK_FALSE(save_task_gate(basis, basis, 0.8));  // identical: keep

  Eigen::MatrixXd q = random_orthonormal(6, 4, rng);
  CHECK(save_task_gate(q.leftCols(2), q.rightCols(2), 0.8));  // orthogonal: recompute

  // In-plane rotation by theta flips the gate at cos(theta) = threshold.
  for (double theta : {0.2, 0.9}) {
    Eigen::MatrixXd rotated = basis;
    rotated.col(0) = std::cos(theta) * basis.col(0) + std::sin(theta) * basis.col(1);
    rotated.col(1) = -std::sin(theta) * basis.col(0) + std::cos(theta) * basis.col(1);
    // Span is unchanged, so dis = 1: keep regardless of theta.
    CHECK_FALSE(save_task_gate(basis, rotated, 0.8));
  }
  // Rotation out of the span by theta: dis = cos(theta). The escape
  // direction must be orthogonal to the basis.
  Eigen::VectorXd out_dir = q.col(3);
  out_dir -= basis * (basis.transpose() * out_dir);
  out_dir.normalize();
  for (double theta : {0.2, 1.2}) {
    Eigen::MatrixXd moved = basis;
    moved.col(0) = std::cos(theta) * basis.col(0) + std::sin(theta) * out_dir;
    const bool recompute = save_task_gate(basis, moved, 0.8);
    CHECK(recompute == (std::cos(theta) <= 0.8));
  }
  CHECK_THROWS_AS(save_task_gate(basis * 2.0, basis, 0.8), std::invalid_argument);
}

TEST_CASE("noiseless target-aware run recovers the model end to end") {
  ExperimentConfig cfg = small_config(0.0, 10, 2, 20);
  cfg.learner.budgets.n0 = 1200;
  cfg.learner.budgets.beta2 = 500;
  RunSetup setup = make_run_setup(cfg, 5);
  const RunResult result = run_target_aware(setup.env, setup.options);
  const EpochRecord& last = result.trace.records.back();
  CHECK(last.metrics.sin_angle <= 1e-4);
  CHECK(last.metrics.er <= 1e-8);
}

TEST_CASE("single target yields one exploitation task per epoch") {
  ExperimentConfig cfg = small_config(0.5, 6, 2, 12);
  cfg.learner.budgets.epochs = 3;
  RunSetup setup = make_run_setup(cfg, 7);
  const RunResult result = run_target_aware(setup.env, setup.options);

  int exploit_epochs = 0;
  for (const EpochRecord& rec : result.trace.records) {
    if (rec.stage != "exploit" || rec.stage3_skipped) continue;
    ++exploit_epochs;
    CHECK(rec.plan.tasks.cols() == 1);  // k* = 1 for a single target
  }
  CHECK(exploit_epochs >= 2);
  // Long-term support: k exploration directions plus at most one new task
  // per epoch on top of the d_w_source warmup probes.
  CHECK(result.trace.distinct_tasks() <=
        cfg.dims.d_w_source + cfg.dims.k + cfg.learner.budgets.epochs);
}

TEST_CASE("stage-1 budgets follow the 2^(4/3) schedule") {
  StageBudgets budgets;
  budgets.beta2 = 700;
  for (int j = 1; j < 6; ++j) {
    const double ratio = static_cast<double>(budgets.n1_of_j(j + 1)) / budgets.n1_of_j(j);
    CHECK(ratio == doctest::Approx(std::pow(2.0, 4.0 / 3.0)).epsilon(0.01));
  }
  CHECK(budgets.eps_of_j(3) == doctest::Approx(0.125));
}

TEST_CASE("a target in the null space of the source map skips exploitation") {
  ExperimentConfig cfg = small_config(0.0, 6, 2, 12);
  cfg.learner.budgets.epochs = 1;
  cfg.learner.gamma.fixed_value = 1e-6;
  RunSetup setup = make_run_setup(cfg, 11);
  // Replace the target with a vector in the null space of B_W: its pushed
  // covariance is ~0 and every eigenvalue clips away.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(setup.gt->b_w, Eigen::ComputeFullV);
  Eigen::VectorXd null_dir = svd.matrixV().col(5);
  setup.env.target = TargetSpec::single(null_dir, 400, 200);

  const RunResult result = run_target_aware(setup.env, setup.options);
  bool found_skip = false;
  for (const EpochRecord& rec : result.trace.records)
    if (rec.stage == "exploit") {
      CHECK(rec.stage3_skipped);
      CHECK(rec.spent == 0);
      found_skip = true;
    }
  CHECK(found_skip);
}

TEST_CASE("agnostic and aware share the stage 0-1 estimate") {
  ExperimentConfig cfg = small_config(0.7, 6, 2, 12);
  cfg.learner.budgets.epochs = 1;
  // Huge fixed clip threshold: the aware run's stage 3 is always skipped, so
  // its estimate after epoch 1 is exactly the shared stages 0-1 output.
  cfg.learner.gamma.fixed_value = 1e9;

  RunSetup aware = make_run_setup(cfg, 13);
  const RunResult aware_result = run_target_aware(aware.env, aware.options);
  RunSetup agnostic = make_run_setup(cfg, 13);
  const RunResult agnostic_result = run_target_agnostic(agnostic.env, agnostic.options);

  CHECK(aware_result.estimate.b_x_hat == agnostic_result.estimate.b_x_hat);
}

TEST_CASE("agnostic run uses k exploration tasks after warmup") {
  ExperimentConfig cfg = small_config(0.5, 6, 2, 12);
  cfg.learner.budgets.epochs = 2;
  RunSetup setup = make_run_setup(cfg, 17);
  const RunResult result = run_target_agnostic(setup.env, setup.options);
  for (const EpochRecord& rec : result.trace.records)
    if (rec.stage == "explore") CHECK(rec.plan.tasks.cols() == cfg.dims.k);
  CHECK(result.trace.distinct_tasks() == cfg.dims.d_w_source + cfg.dims.k);
}

TEST_CASE("passive baseline splits the budget evenly and recovers in the limit") {
  ExperimentConfig cfg = small_config(0.0, 5, 2, 10);
  RunSetup setup = make_run_setup(cfg, 19);
  const RunResult result = run_passive(setup.env, setup.options, {1000, 4000});

  REQUIRE(result.trace.records.size() == 2);
  CHECK(result.trace.distinct_tasks() == 5);
  for (long long per : result.trace.records[0].plan.per_task) CHECK(per == 200);
  // Top-up to ceil(4000/5) = 800 per task.
  for (long long per : result.trace.records[1].plan.per_task) CHECK(per == 600);
  CHECK(result.trace.records.back().metrics.er <= 1e-8);
}

TEST_CASE("budget accounting and feasibility hold over the whole trace") {
  ExperimentConfig cfg = small_config(0.8, 6, 2, 12);
  cfg.learner.budgets.epochs = 3;
  RunSetup setup = make_run_setup(cfg, 23);
  const RunResult result = run_target_aware(setup.env, setup.options);

  long long spent = 0;
  for (const EpochRecord& rec : result.trace.records) {
    spent += rec.spent;
    // Ceil rounding never undershoots and overshoots by at most one sample
    // per support task.
    if (rec.plan.tasks.cols() > 0) {
      CHECK(rec.spent >= rec.plan.total_budget);
      CHECK(rec.spent <= rec.plan.total_budget + rec.plan.tasks.cols());
    }
    for (Eigen::Index i = 0; i < rec.plan.tasks.cols(); ++i)
      CHECK(rec.plan.tasks.col(i).norm() <= 1.0 + 1e-9);
  }
  CHECK(spent == result.trace.cumulative);

  long long per_task_total = 0;
  for (const auto& [w, n] : result.trace.task_counts) {
    per_task_total += n;
    CHECK(w.norm() <= 1.0 + 1e-9);
  }
  CHECK(per_task_total == result.trace.cumulative);
}

TEST_CASE("full runs are a pure function of config and seed") {
  ExperimentConfig cfg = small_config(0.6, 6, 2, 12);
  cfg.learner.budgets.epochs = 2;
  RunSetup a = make_run_setup(cfg, 29);
  RunSetup b = make_run_setup(cfg, 29);
  const RunResult ra = run_target_aware(a.env, a.options);
  const RunResult rb = run_target_aware(b.env, b.options);

  REQUIRE(ra.trace.records.size() == rb.trace.records.size());
  for (std::size_t i = 0; i < ra.trace.records.size(); ++i) {
    CHECK(ra.trace.records[i].metrics.test_mse == rb.trace.records[i].metrics.test_mse);
    CHECK(ra.trace.records[i].metrics.sin_angle == rb.trace.records[i].metrics.sin_angle);
    CHECK(ra.trace.records[i].spent == rb.trace.records[i].spent);
  }
  CHECK(ra.estimate.b_x_hat == rb.estimate.b_x_hat);
}

TEST_CASE("median excess risk is non-increasing across epochs") {
  ExperimentConfig cfg = small_config(0.5, 8, 2, 12);
  cfg.learner.budgets.n0 = 1500;
  cfg.learner.budgets.beta2 = 800;
  cfg.learner.budgets.epochs = 3;
  cfg.target.n_target = 1500;
  cfg.n_test = 1500;

  std::vector<std::vector<double>> per_epoch;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RunSetup setup = make_run_setup(cfg, seed);
    const RunResult result = run_target_aware(setup.env, setup.options);
    std::size_t e = 0;
    for (const EpochRecord& rec : result.trace.records) {
      if (!rec.epoch_end) continue;
      if (per_epoch.size() <= e) per_epoch.emplace_back();
      per_epoch[e].push_back(rec.metrics.er);
      ++e;
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  int inversions = 0;
  for (std::size_t e = 1; e < per_epoch.size(); ++e)
    if (median(per_epoch[e]) > median(per_epoch[e - 1])) ++inversions;
  CHECK(inversions <= 1);
}

TEST_CASE("nuclear norm of W' W'^T is controlled by the target covariance") {
  ExperimentConfig cfg = small_config(0.4, 8, 3, 14);
  cfg.learner.budgets.epochs = 3;
  RunSetup setup = make_run_setup(cfg, 31);
  const RunResult result = run_target_aware(setup.env, setup.options);

  int checked = 0;
  for (const EpochRecord& rec : result.trace.records) {
    if (rec.stage != "exploit" || rec.stage3_skipped) continue;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rec.b_w_source_hat.leftCols(cfg.dims.d_w_source));
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    // ||W' W'^T||_* = sum ||w'_i||^2 vs the clipped target covariance trace.
    const double lhs = rec.w_prime.squaredNorm();
    const double rhs = rec.sigma_hat.trace() / (smin * smin);
    CHECK(lhs <= rhs * (1.0 + 1e-9));
    ++checked;
  }
  CHECK(checked >= 2);
}

TEST_CASE("agnostic matches aware within 2x on a uniform-spread target") {
  // Well-conditioned model, target mixture spread across the representation:
  // the agnostic strategy's uniform exploration is competitive with the
  // target-aware one at comparable budgets.
  ExperimentConfig cfg = small_config(0.5, 8, 2, 12);
  cfg.learner.budgets.n0 = 1200;
  cfg.learner.budgets.beta2 = 700;
  cfg.learner.budgets.epochs = 3;
  cfg.target.kind = TargetConfig::Kind::Explicit;
  cfg.target.vectors = Eigen::MatrixXd::Identity(8, 4);
  cfg.target.weights = Eigen::VectorXd::Constant(4, 0.25);
  cfg.target.n_target = 1500;
  cfg.n_test = 1500;

  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RunSetup aware = make_run_setup(cfg, seed);
    const RunResult ra = run_target_aware(aware.env, aware.options);

    ExperimentConfig agn_cfg = cfg;
    agn_cfg.learner.budgets.agnostic_boost =
        static_cast<double>(ra.trace.cumulative) /
        (cfg.learner.budgets.n0 + cfg.learner.budgets.n1_of_j(1) + cfg.learner.budgets.n1_of_j(2) +
         cfg.learner.budgets.n1_of_j(3));
    RunSetup agnostic = make_run_setup(agn_cfg, seed);
    const RunResult rg = run_target_agnostic(agnostic.env, agnostic.options);
    ratios.push_back(rg.trace.records.back().metrics.er /
                     std::max(ra.trace.records.back().metrics.er, 1e-12));
  }
  std::sort(ratios.begin(), ratios.end());
  CHECK(0.5 * (ratios[4] + ratios[5]) <= 2.0);
}

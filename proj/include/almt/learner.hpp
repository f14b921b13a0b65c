#ifndef ALMT_LEARNER_HPP
#define ALMT_LEARNER_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "almt/design.hpp"
#include "almt/ground_truth.hpp"
#include "almt/metrics.hpp"
#include "almt/oracles.hpp"
#include "almt/task_space.hpp"

namespace almt {

// Labeled-data oracle the strategies sample through.
class TaskSampler {
 public:
  virtual ~TaskSampler() = default;
  virtual TaskSample sample(const TaskSpace& space, const Eigen::VectorXd& w, int n,
                            Rng& rng) const = 0;
};

class SyntheticSampler final : public TaskSampler {
 public:
  explicit SyntheticSampler(const GroundTruthModel& gt) : gt_(&gt) {}
  TaskSample sample(const TaskSpace& space, const Eigen::VectorXd& w, int n,
                    Rng& rng) const override {
    return sample_task(*gt_, space, w, n, rng);
  }

 private:
  const GroundTruthModel* gt_;
};

// Stage budget schedule: eps_j = 2^{-j}, n1 scales as eps_j^{-4/3} in formula
// mode, and stage-3 budgets follow the closed-form allocation (beta3 times the
// projection penalty) unless fixed.
struct StageBudgets {
  long long n0 = 1000;
  double beta1 = 1.0;
  double beta2 = 1.0;
  double beta3 = 8.0;
  int epochs = 4;
  long long budget_cap = 0;  // 0: run exactly `epochs`; else stop once spent >= cap
  double kappa_bar = 0.0;    // 0: default sqrt(d_w)
  double sigma_lower = 1.0;
  enum class N2Policy { Formula, Fixed };
  N2Policy n2_policy = N2Policy::Formula;
  long long n2_fixed = 0;
  double agnostic_boost = 1.0;  // scales n1 for the target-agnostic strategy

  double eps_of_j(int j) const;
  long long n1_of_j(int j) const;
};

// Eigenvalue clip threshold for the target covariance.
struct GammaPolicy {
  enum class Mode { Formula, Fixed };
  Mode mode = Mode::Formula;
  double fixed_value = 0.0;
  double value(int k, int d_w, int d_x, long long n1) const;
};

enum class Oracle { AltMin, JointErm };

struct LearnerOptions {
  StageBudgets budgets;
  TrainConfig train;
  GammaPolicy gamma;
  double save_task_threshold = 0.8;
  int adaptive_rounds = 5;
  int adaptive_pool = 50;
  int warmup_probes = 0;  // 0: one-hot axes; >0: that many random ball probes
  Oracle stage0_oracle = Oracle::AltMin;
  Oracle stage2_oracle = Oracle::AltMin;
  Oracle stage3_oracle = Oracle::JointErm;
  Oracle passive_oracle = Oracle::AltMin;
  double head_ridge = 0.0;
  std::uint64_t master_seed = 0;
};

// Everything a strategy needs about the problem instance.
struct LearnerEnv {
  const TaskSampler* sampler = nullptr;
  FeatureOperator psi_x;
  FeatureOperator psi_w;
  Dimensions dims;
  TaskSpace source_space;
  TaskSpace target_space;
  TargetSpec target;
  // Fills the model-quality metric fields for the current estimate; budget
  // and task-count fields are filled by the runner. The second argument is
  // the per-task cumulative sample count (for the design-trace diagnostic).
  std::function<MetricsSnapshot(const ModelEstimate&,
                                const std::vector<std::pair<Eigen::VectorXd, long long>>&,
                                Rng&)>
      snapshot;
};

struct EpochRecord {
  int j = 0;  // 0 = warmup
  double eps_j = 1.0;
  std::string stage;  // warmup | explore | exploit | passive
  SamplingPlan plan;
  long long spent = 0;
  MetricsSnapshot metrics;
  long long distinct_tasks = 0;
  bool stage3_skipped = false;
  bool epoch_end = false;  // row emitted to the results CSV
  // Epoch artifacts kept for diagnostics and property checks.
  Eigen::MatrixXd w_prime;
  Eigen::MatrixXd sigma_hat;
  Eigen::MatrixXd b_w_source_hat;
};

struct ExperimentTrace {
  std::vector<EpochRecord> records;
  std::vector<std::pair<Eigen::VectorXd, long long>> task_counts;
  long long cumulative = 0;

  void add_task_samples(const Eigen::VectorXd& w, long long n);
  long long distinct_tasks() const { return static_cast<long long>(task_counts.size()); }
};

long long long_term_task_count(const ExperimentTrace& trace, double alpha, double eps);

// Top-k right singular vectors of the source-block estimate, embedded as task
// vectors. degraded is set when fewer than k directions are available.
Eigen::MatrixXd compute_q1(const Eigen::MatrixXd& b_w_source_hat, const Dimensions& dims,
                           bool* degraded = nullptr);

// true  -> the basis rotated enough that the exploration set must be rebuilt
// false -> keep the previous tasks (saves task switches)
bool save_task_gate(const Eigen::MatrixXd& prev_tasks, const Eigen::MatrixXd& new_tasks,
                    double threshold);

struct RunResult {
  ModelEstimate estimate;
  ExperimentTrace trace;
};

// Stage 0 only: one-hot (or random-probe) coarse exploration, representation
// fit, and source-map assembly.
RunResult run_warmup(const LearnerEnv& env, const LearnerOptions& opt);

// Full strategies. Epoch-end records carry the evaluated metrics.
RunResult run_target_aware(const LearnerEnv& env, const LearnerOptions& opt);
RunResult run_target_agnostic(const LearnerEnv& env, const LearnerOptions& opt);
// Passive baseline: uniform budget over the one-hot source tasks, refit and
// evaluated at each checkpoint budget.
RunResult run_passive(const LearnerEnv& env, const LearnerOptions& opt,
                      const std::vector<long long>& checkpoints);

// Internal state machine; exposed so tests can drive single epochs.
class StrategyRunner {
 public:
  StrategyRunner(const LearnerEnv& env, const LearnerOptions& opt);

  void warmup();
  // Runs exploration (+ exploitation when target_aware) for epoch j.
  void run_epoch(int j, bool target_aware);
  void passive_checkpoint(int index, long long budget);

  const ModelEstimate& estimate() const { return estimate_; }
  ExperimentTrace& trace() { return trace_; }
  const ExperimentTrace& trace() const { return trace_; }
  const Eigen::MatrixXd& exploration_tasks() const { return q1_tasks_; }

 private:
  struct StoredTask {
    TaskData data;
    int kinds = 0;  // bitmask: 1 warmup, 2 explore, 4 exploit
  };

  int add_samples(const TaskSpace& space, const Eigen::VectorXd& w, long long n, int kind);
  std::vector<TaskData> gather(int kind_mask) const;
  void refit_source_map(const std::vector<int>& task_ids);
  void refit_target_map();
  void update_exploration_tasks(bool force);
  MetricsSnapshot evaluate();
  void record(int j, const std::string& stage, const SamplingPlan& plan, long long spent,
              bool epoch_end, bool skipped, const Eigen::MatrixXd& w_prime,
              const Eigen::MatrixXd& sigma_hat);
  Eigen::MatrixXd probe_tasks() const;

  const LearnerEnv* env_;
  LearnerOptions opt_;
  ModelEstimate estimate_;
  ExperimentTrace trace_;
  std::vector<StoredTask> store_;
  std::map<std::string, int> task_index_;
  Eigen::MatrixXd q1_tasks_;       // d_w x r
  Eigen::MatrixXd q1_basis_;       // SVD basis backing q1_tasks_ (gate input)
  std::uint64_t sample_counter_ = 0;
  std::uint64_t eval_counter_ = 0;
  std::uint64_t search_counter_ = 0;
};

}  // namespace almt

#endif

#include "almt/learner.hpp"

#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

namespace almt {

namespace {

std::string task_key(const Eigen::VectorXd& w) {
  return std::string(reinterpret_cast<const char*>(w.data()), w.size() * sizeof(double));
}

bool is_orthonormal(const Eigen::MatrixXd& m, double tol) {
  const Eigen::MatrixXd gram = m.transpose() * m;
  return (gram - Eigen::MatrixXd::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

double StageBudgets::eps_of_j(int j) const { return std::pow(2.0, -j); }

long long StageBudgets::n1_of_j(int j) const {
  return static_cast<long long>(std::ceil(beta2 * std::pow(2.0, 4.0 * j / 3.0)));
}

double GammaPolicy::value(int k, int d_w, int d_x, long long n1) const {
  if (mode == Mode::Fixed) return fixed_value;
  return default_clip_threshold(k, d_w, d_x, n1);
}

void ExperimentTrace::add_task_samples(const Eigen::VectorXd& w, long long n) {
  for (auto& [task, count] : task_counts) {
    if (task.size() == w.size() && task == w) {
      count += n;
      return;
    }
  }
  task_counts.emplace_back(w, n);
}

long long long_term_task_count(const ExperimentTrace& trace, double alpha, double eps) {
  return long_term_task_count(trace.task_counts, alpha, eps);
}

Eigen::MatrixXd compute_q1(const Eigen::MatrixXd& b_w_source_hat, const Dimensions& dims,
                           bool* degraded) {
  const int d_ws = dims.d_w_source;
  if (b_w_source_hat.cols() < d_ws)
    throw std::invalid_argument("compute_q1: source map narrower than d_w_source");
  const Eigen::MatrixXd block = b_w_source_hat.leftCols(d_ws);
  if (block.cwiseAbs().maxCoeff() == 0.0)
    throw std::invalid_argument("compute_q1: zero source estimate");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-10 * smax) ++rank;
  const int r = std::min(rank, dims.k);
  if (degraded) *degraded = r < dims.k;

  Eigen::MatrixXd tasks = Eigen::MatrixXd::Zero(dims.d_w, r);
  for (int i = 0; i < r; ++i) tasks.col(i).head(d_ws) = svd.matrixV().col(i);
  return tasks;
}

bool save_task_gate(const Eigen::MatrixXd& prev_tasks, const Eigen::MatrixXd& new_tasks,
                    double threshold) {
  if (!is_orthonormal(prev_tasks, 1e-8) || !is_orthonormal(new_tasks, 1e-8))
    throw std::invalid_argument("save_task_gate: task sets must be orthonormal");
  if (prev_tasks.cols() != new_tasks.cols()) return true;
  return dis_similarity(prev_tasks, new_tasks) <= threshold;
}

StrategyRunner::StrategyRunner(const LearnerEnv& env, const LearnerOptions& opt)
    : env_(&env), opt_(opt) {
  if (!env.sampler) throw std::invalid_argument("StrategyRunner: missing sampler");
  if (!env.snapshot) throw std::invalid_argument("StrategyRunner: missing snapshot hook");
}

int StrategyRunner::add_samples(const TaskSpace& space, const Eigen::VectorXd& w, long long n,
                                int kind) {
  Rng rng(opt_.master_seed, Stream::Sampling, sample_counter_++);
  TaskSample sample = env_->sampler->sample(space, w, static_cast<int>(n), rng);
  const Eigen::MatrixXd lifted = env_->psi_x.apply_rows(sample.inputs);

  const std::string key = task_key(w);
  auto it = task_index_.find(key);
  int id;
  if (it == task_index_.end()) {
    id = static_cast<int>(store_.size());
    task_index_.emplace(key, id);
    StoredTask task;
    task.data.w = w;
    task.data.features = lifted;
    task.data.labels = sample.labels;
    task.kinds = kind;
    store_.push_back(std::move(task));
  } else {
    id = it->second;
    StoredTask& task = store_[static_cast<std::size_t>(id)];
    const Eigen::Index old_n = task.data.labels.size();
    task.data.features.conservativeResize(old_n + n, Eigen::NoChange);
    task.data.features.bottomRows(n) = lifted;
    task.data.labels.conservativeResize(old_n + n);
    task.data.labels.tail(n) = sample.labels;
    task.kinds |= kind;
  }
  trace_.add_task_samples(w, n);
  trace_.cumulative += n;
  return id;
}

std::vector<TaskData> StrategyRunner::gather(int kind_mask) const {
  std::vector<TaskData> out;
  for (const auto& task : store_)
    if (task.kinds & kind_mask) out.push_back(task.data);
  return out;
}

Eigen::MatrixXd StrategyRunner::probe_tasks() const {
  const Dimensions& dims = env_->dims;
  if (opt_.warmup_probes > 0) {
    Rng rng(opt_.master_seed, Stream::Search, 0xab5e);
    Eigen::MatrixXd probes = Eigen::MatrixXd::Zero(dims.d_w, opt_.warmup_probes);
    for (int i = 0; i < opt_.warmup_probes; ++i)
      probes.col(i).segment(env_->source_space.axis_begin, env_->source_space.axis_count) =
          rng.ball(env_->source_space.axis_count);
    return probes;
  }
  Eigen::MatrixXd probes = Eigen::MatrixXd::Zero(dims.d_w, dims.d_w_source);
  for (int t = 0; t < dims.d_w_source; ++t) probes(env_->source_space.axis_begin + t, t) = 1.0;
  return probes;
}

void StrategyRunner::refit_source_map(const std::vector<int>& task_ids) {
  std::vector<Eigen::VectorXd> heads(task_ids.size());
  for (std::size_t i = 0; i < task_ids.size(); ++i) {
    const TaskData& data = store_[static_cast<std::size_t>(task_ids[i])].data;
    heads[i] = fit_task_head(estimate_.b_x_hat, data.features, data.labels, opt_.head_ridge);
  }
  Eigen::MatrixXd spanning(env_->psi_w.output_dim, static_cast<Eigen::Index>(task_ids.size()));
  for (std::size_t i = 0; i < task_ids.size(); ++i)
    spanning.col(static_cast<Eigen::Index>(i)) =
        env_->psi_w.apply(store_[static_cast<std::size_t>(task_ids[i])].data.w);
  estimate_.b_w_source_hat = is_orthonormal(spanning, 1e-8)
                                 ? assemble_bw(heads, spanning)
                                 : fit_bw_spanning(heads, spanning);
}

void StrategyRunner::refit_target_map() {
  const TargetSpec& target = env_->target;
  const Eigen::Index t = target.spanning.cols();
  std::vector<Eigen::VectorXd> heads(static_cast<std::size_t>(t));
  Eigen::MatrixXd spanning(env_->psi_w.output_dim, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    const Eigen::VectorXd w = target.spanning.col(i);
    Rng rng(opt_.master_seed, Stream::Sampling, sample_counter_++);
    // Known-environment target data is regenerated fresh each epoch; it is
    // metadata for the design step and not counted against the source budget.
    TaskSample sample =
        env_->sampler->sample(env_->target_space, w, target.dot_n_target, rng);
    const Eigen::MatrixXd lifted = env_->psi_x.apply_rows(sample.inputs);
    heads[static_cast<std::size_t>(i)] =
        fit_task_head(estimate_.b_x_hat, lifted, sample.labels, opt_.head_ridge);
    spanning.col(i) = env_->psi_w.apply(w);
  }
  estimate_.b_w_target_hat = is_orthonormal(spanning, 1e-8)
                                 ? assemble_bw(heads, spanning)
                                 : fit_bw_spanning(heads, spanning);
}

void StrategyRunner::update_exploration_tasks(bool force) {
  const Dimensions& dims = env_->dims;
  if (env_->psi_w.kind == FeatureKind::Identity) {
    bool degraded = false;
    Eigen::MatrixXd cand_tasks = compute_q1(estimate_.b_w_source_hat, dims, &degraded);
    Eigen::MatrixXd cand_basis = cand_tasks;  // unit, pairwise orthogonal columns
    if (!force && q1_basis_.size() > 0 &&
        !save_task_gate(q1_basis_, cand_basis, opt_.save_task_threshold))
      return;
    q1_tasks_ = cand_tasks;
    q1_basis_ = cand_basis;
    return;
  }

  // Nonlinear psi_W: principal directions live in psi space; realize each one
  // with the adaptive search.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(estimate_.b_w_source_hat,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-10 * smax && r < dims.k) ++r;
  Eigen::MatrixXd cand_basis = svd.matrixV().leftCols(r);
  if (!force && q1_basis_.size() > 0 &&
      !save_task_gate(q1_basis_, cand_basis, opt_.save_task_threshold))
    return;

  Eigen::MatrixXd tasks(dims.d_w, r);
  for (int i = 0; i < r; ++i) {
    Rng rng(opt_.master_seed, Stream::Search, search_counter_++);
    const Eigen::VectorXd direction = svd.matrixU().col(i) * svd.singularValues()(i);
    tasks.col(i) = adaptive_source_search(env_->psi_w, estimate_.b_w_source_hat, direction,
                                          env_->source_space, opt_.adaptive_rounds,
                                          opt_.adaptive_pool, rng);
  }
  q1_tasks_ = tasks;
  q1_basis_ = cand_basis;
}

MetricsSnapshot StrategyRunner::evaluate() {
  Rng rng(opt_.master_seed, Stream::Eval, eval_counter_++);
  MetricsSnapshot snap = env_->snapshot(estimate_, trace_.task_counts, rng);
  snap.cumulative_budget = trace_.cumulative;
  return snap;
}

void StrategyRunner::record(int j, const std::string& stage, const SamplingPlan& plan,
                            long long spent, bool epoch_end, bool skipped,
                            const Eigen::MatrixXd& w_prime, const Eigen::MatrixXd& sigma_hat) {
  EpochRecord rec;
  rec.j = j;
  rec.eps_j = opt_.budgets.eps_of_j(j);
  rec.stage = stage;
  rec.plan = plan;
  rec.spent = spent;
  rec.metrics = evaluate();
  rec.metrics.long_term_tasks = long_term_task_count(trace_, 1.0, rec.eps_j);
  rec.distinct_tasks = trace_.distinct_tasks();
  rec.stage3_skipped = skipped;
  rec.epoch_end = epoch_end;
  rec.w_prime = w_prime;
  rec.sigma_hat = sigma_hat;
  rec.b_w_source_hat = estimate_.b_w_source_hat;
  trace_.records.push_back(std::move(rec));
}

void StrategyRunner::warmup() {
  const Eigen::MatrixXd probes = probe_tasks();
  const long long n0 = opt_.budgets.n0;
  SamplingPlan plan = SamplingPlan::uniform(probes, n0);

  std::vector<int> ids;
  long long spent = 0;
  for (Eigen::Index i = 0; i < probes.cols(); ++i) {
    ids.push_back(add_samples(env_->source_space, probes.col(i),
                              plan.per_task[static_cast<std::size_t>(i)], 1));
    spent += plan.per_task[static_cast<std::size_t>(i)];
  }

  const std::vector<TaskData> tasks = gather(1);
  if (opt_.stage0_oracle == Oracle::AltMin) {
    estimate_.b_x_hat = alt_min_representation(tasks, env_->dims.k, opt_.train);
  } else {
    estimate_ = joint_erm(tasks, nullptr, env_->dims.k, opt_.train);
  }
  refit_source_map(ids);
  update_exploration_tasks(true);
  record(0, "warmup", plan, spent, true, false, {}, {});
}

void StrategyRunner::run_epoch(int j, bool target_aware) {
  const Dimensions& dims = env_->dims;
  const StageBudgets& budgets = opt_.budgets;
  const double eps = budgets.eps_of_j(j);

  update_exploration_tasks(false);
  long long n1 = budgets.n1_of_j(j);
  if (!target_aware)
    n1 = static_cast<long long>(std::ceil(static_cast<double>(n1) * budgets.agnostic_boost));

  SamplingPlan plan1 = SamplingPlan::uniform(q1_tasks_, n1);
  std::vector<int> explore_ids;
  long long spent1 = 0;
  for (Eigen::Index i = 0; i < q1_tasks_.cols(); ++i) {
    explore_ids.push_back(add_samples(env_->source_space, q1_tasks_.col(i),
                                      plan1.per_task[static_cast<std::size_t>(i)], 2));
    spent1 += plan1.per_task[static_cast<std::size_t>(i)];
  }

  // Only the current exploration tasks feed the stage-2 refit; tasks retired
  // by the save-task gate keep their data but drop out of training.
  std::vector<TaskData> explore_data;
  for (int id : explore_ids) explore_data.push_back(store_[static_cast<std::size_t>(id)].data);
  if (opt_.stage2_oracle == Oracle::AltMin) {
    estimate_.b_x_hat = alt_min_representation(explore_data, dims.k, opt_.train);
  } else {
    estimate_ = joint_erm(explore_data, &estimate_, dims.k, opt_.train);
  }
  refit_source_map(explore_ids);
  if (!target_aware) {
    record(j, "explore", plan1, spent1, true, false, {}, {});
    return;
  }
  refit_target_map();
  record(j, "explore", plan1, spent1, false, false, {}, {});

  // Exact finite-mixture target covariance in representation coordinates.
  const TargetSpec& target = env_->target;
  Eigen::MatrixXd sigma_hat = Eigen::MatrixXd::Zero(dims.k, dims.k);
  for (Eigen::Index i = 0; i < target.targets.cols(); ++i) {
    const Eigen::VectorXd coeff =
        estimate_.b_w_target_hat * env_->psi_w.apply(target.targets.col(i));
    sigma_hat.noalias() += target.weights(i) * coeff * coeff.transpose();
  }

  const double gamma = opt_.gamma.value(dims.k, dims.d_w, dims.d_x, budgets.n1_of_j(j));
  const ClippedEig clipped = clip_target_covariance(sigma_hat, gamma);
  if (clipped.count() == 0) {
    record(j, "exploit", SamplingPlan{}, 0, true, true, {}, sigma_hat);
    return;
  }

  Eigen::MatrixXd tasks;
  Eigen::MatrixXd w_prime;
  long long n2 = 0;
  if (env_->psi_w.kind == FeatureKind::Identity) {
    const BallDesign design =
        solve_ball_closed_form(estimate_.b_w_source_hat.leftCols(dims.d_w_source), clipped);
    tasks = Eigen::MatrixXd::Zero(dims.d_w, design.tasks.cols());
    tasks.topRows(dims.d_w_source) = design.tasks;
    w_prime = Eigen::MatrixXd::Zero(dims.d_w, design.w_prime.cols());
    w_prime.topRows(dims.d_w_source) = design.w_prime;
    n2 = budgets.n2_policy == StageBudgets::N2Policy::Formula
             ? budget_target_aware(design.w_prime, eps, budgets.beta3)
             : budgets.n2_fixed;
  } else {
    const int m = clipped.count();
    tasks.resize(dims.d_w, m);
    double max_ratio = 0.0;
    for (int i = 0; i < m; ++i) {
      Rng rng(opt_.master_seed, Stream::Search, search_counter_++);
      const Eigen::VectorXd direction =
          clipped.vectors.col(i) * std::sqrt(clipped.values(i));
      tasks.col(i) = adaptive_source_search(env_->psi_w, estimate_.b_w_source_hat, direction,
                                            env_->source_space, opt_.adaptive_rounds,
                                            opt_.adaptive_pool, rng);
      const double reach =
          (estimate_.b_w_source_hat * env_->psi_w.apply(tasks.col(i))).squaredNorm();
      max_ratio = std::max(max_ratio, clipped.values(i) / std::max(reach, 1e-12));
    }
    n2 = budgets.n2_policy == StageBudgets::N2Policy::Formula
             ? static_cast<long long>(std::ceil(m * budgets.beta3 * max_ratio / (eps * eps)))
             : budgets.n2_fixed;
  }

  SamplingPlan plan2 = SamplingPlan::uniform(tasks, n2);
  long long spent2 = 0;
  for (Eigen::Index i = 0; i < tasks.cols(); ++i) {
    add_samples(env_->source_space, tasks.col(i), plan2.per_task[static_cast<std::size_t>(i)],
                4);
    spent2 += plan2.per_task[static_cast<std::size_t>(i)];
  }

  std::set<int> joint_ids(explore_ids.begin(), explore_ids.end());
  for (std::size_t i = 0; i < store_.size(); ++i)
    if (store_[i].kinds & 4) joint_ids.insert(static_cast<int>(i));
  std::vector<TaskData> joint_data;
  for (int id : joint_ids) joint_data.push_back(store_[static_cast<std::size_t>(id)].data);
  if (opt_.stage3_oracle == Oracle::JointErm) {
    estimate_ = joint_erm(joint_data, &estimate_, dims.k, opt_.train);
  } else {
    estimate_.b_x_hat = alt_min_representation(joint_data, dims.k, opt_.train);
  }
  record(j, "exploit", plan2, spent2, true, false, w_prime, sigma_hat);
}

void StrategyRunner::passive_checkpoint(int index, long long budget) {
  const Eigen::MatrixXd probes = probe_tasks();
  const Eigen::Index d = probes.cols();
  const long long per_task = (budget + d - 1) / d;

  SamplingPlan plan;
  plan.tasks = probes;
  plan.weights = Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d));
  plan.total_budget = budget;
  long long spent = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const std::string key = task_key(probes.col(i));
    auto it = task_index_.find(key);
    const long long have =
        it == task_index_.end() ? 0 : store_[static_cast<std::size_t>(it->second)].data.labels.size();
    const long long need = per_task - have;
    plan.per_task.push_back(need > 0 ? need : 0);
    if (need > 0) {
      add_samples(env_->source_space, probes.col(i), need, 1);
      spent += need;
    }
  }

  const std::vector<TaskData> tasks = gather(1);
  if (opt_.passive_oracle == Oracle::AltMin) {
    estimate_.b_x_hat = alt_min_representation(tasks, env_->dims.k, opt_.train);
  } else {
    estimate_ = joint_erm(tasks, estimate_.b_x_hat.size() > 0 ? &estimate_ : nullptr,
                          env_->dims.k, opt_.train);
  }
  std::vector<int> ids;
  for (Eigen::Index i = 0; i < d; ++i) ids.push_back(task_index_.at(task_key(probes.col(i))));
  refit_source_map(ids);
  record(index, "passive", plan, spent, true, false, {}, {});
}

RunResult run_warmup(const LearnerEnv& env, const LearnerOptions& opt) {
  StrategyRunner runner(env, opt);
  runner.warmup();
  return {runner.estimate(), runner.trace()};
}

namespace {

bool keep_running(const StageBudgets& budgets, int j, long long cumulative) {
  if (j > 64) return false;
  if (budgets.budget_cap > 0) return cumulative < budgets.budget_cap;
  return j <= budgets.epochs;
}

}  // namespace

RunResult run_target_aware(const LearnerEnv& env, const LearnerOptions& opt) {
  StrategyRunner runner(env, opt);
  runner.warmup();
  for (int j = 1; keep_running(opt.budgets, j, runner.trace().cumulative); ++j)
    runner.run_epoch(j, true);
  return {runner.estimate(), runner.trace()};
}

RunResult run_target_agnostic(const LearnerEnv& env, const LearnerOptions& opt) {
  StrategyRunner runner(env, opt);
  runner.warmup();
  for (int j = 1; keep_running(opt.budgets, j, runner.trace().cumulative); ++j)
    runner.run_epoch(j, false);
  return {runner.estimate(), runner.trace()};
}

RunResult run_passive(const LearnerEnv& env, const LearnerOptions& opt,
                      const std::vector<long long>& checkpoints) {
  StrategyRunner runner(env, opt);
  for (std::size_t i = 0; i < checkpoints.size(); ++i)
    runner.passive_checkpoint(static_cast<int>(i), checkpoints[i]);
  return {runner.estimate(), runner.trace()};
}

}  // namespace almt

#ifndef ALMT_EXPERIMENT_HPP
#define ALMT_EXPERIMENT_HPP

#include <memory>
#include <string>
#include <vector>

#include "almt/config.hpp"

namespace almt {

// One (config, seed) problem instance: hidden model (synthetic scenarios),
// data oracle, learner environment, and options. Exposed for the demo tool
// and test drivers; run_experiment builds these internally.
struct RunSetup {
  std::unique_ptr<GroundTruthModel> gt;  // null for the pendulum scenario
  std::unique_ptr<TaskSampler> sampler;
  LearnerEnv env;
  LearnerOptions options;
};
RunSetup make_run_setup(const ExperimentConfig& config, std::uint64_t seed);

inline constexpr const char* kResultsSchema = "almt-results-v1";
inline constexpr const char* kSummarySchema = "almt-summary-v1";

struct ResultRow {
  std::string scenario;
  std::string strategy;
  std::uint64_t seed = 0;
  int epoch = 0;
  long long cumulative_budget = 0;
  double test_mse = 0.0;
  double er = 0.0;
  double sin_angle = 0.0;
  double dis_similarity = 0.0;
  double design_trace = 0.0;
  long long long_term_tasks = 0;
};

struct RunFailure {
  std::string strategy;
  std::uint64_t seed = 0;
  std::string message;
};

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  std::vector<RunFailure> failures;
  std::string results_path;
  std::string summary_path;
};

// Runs every (strategy, seed) pair, writes <out_dir>/results.csv and
// <out_dir>/summary.csv (and failures.csv when anything failed). Output is a
// pure function of (config, seeds); repeated runs are byte-identical.
ExperimentOutput run_experiment(const ExperimentConfig& config);

// Aggregation: per-strategy medians/quartiles per epoch plus the budget-ratio
// statistic (least budget at which the strategy's median test loss reaches the
// passive run's final median loss, over the passive budget).
struct SummaryRow {
  std::string strategy;
  int epoch = 0;
  double median_budget = 0.0;
  double median_test_mse = 0.0;
  double q25_test_mse = 0.0;
  double q75_test_mse = 0.0;
  double median_er = 0.0;
  double budget_ratio = 0.0;  // inf = never reaches passive loss; nan = no passive run
};

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

std::vector<ResultRow> read_results_csv(const std::string& path);
void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);

}  // namespace almt

#endif

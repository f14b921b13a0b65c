// Command-line front end: generate ground truth, run experiment sweeps,
// aggregate result CSVs, and a small pendulum control demo.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "almt/config.hpp"
#include "almt/experiment.hpp"
#include "almt/ground_truth.hpp"
#include "almt/pendulum.hpp"

namespace {

almt::ExperimentConfig load_config(const std::string& path, const std::string& out_override,
                                   const std::string& seeds_override,
                                   const std::string& strategy_override) {
  almt::ExperimentConfig cfg = almt::parse_config(path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (!seeds_override.empty()) {
    cfg.seeds.clear();
    std::stringstream ss(seeds_override);
    std::string item;
    while (std::getline(ss, item, ',')) cfg.seeds.push_back(std::stoull(item));
  }
  if (!strategy_override.empty()) {
    cfg.strategies.clear();
    std::stringstream ss(strategy_override);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "passive") cfg.strategies.push_back(almt::Strategy::Passive);
      else if (item == "target-agnostic") cfg.strategies.push_back(almt::Strategy::TargetAgnostic);
      else if (item == "target-aware") cfg.strategies.push_back(almt::Strategy::TargetAware);
      else throw std::invalid_argument("unknown strategy '" + item + "'");
    }
  }
  return cfg;
}

int cmd_gen_truth(const std::string& config_path, const std::string& out,
                  const std::string& seeds) {
  almt::ExperimentConfig cfg = load_config(config_path, "", seeds, "");
  if (cfg.scenario == almt::Scenario::Pendulum) {
    std::cerr << "gen-truth applies to synthetic scenarios only\n";
    return 1;
  }
  const almt::FeatureKind psi_x = cfg.scenario == almt::Scenario::SyntheticFourier
                                      ? almt::FeatureKind::Fourier
                                      : almt::FeatureKind::Identity;
  const almt::GroundTruthModel gt =
      almt::make_ground_truth(cfg.dims, cfg.conditioning, cfg.kappa, psi_x,
                              almt::FeatureKind::Identity, cfg.sigma, cfg.seeds.front(),
                              cfg.fourier_scale);
  almt::save_ground_truth(gt, out);
  std::cout << "wrote " << out << ".meta and " << out << ".bin (seed " << cfg.seeds.front()
            << ")\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out, const std::string& seeds,
            const std::string& strategy) {
  const almt::ExperimentConfig cfg = load_config(config_path, out, seeds, strategy);
  const almt::ExperimentOutput result = almt::run_experiment(cfg);
  std::cout << "wrote " << result.results_path << " (" << result.rows.size() << " rows)\n";
  std::cout << "wrote " << result.summary_path << "\n";
  for (const auto& failure : result.failures)
    std::cerr << "run failed: " << failure.strategy << " seed " << failure.seed << ": "
              << failure.message << "\n";
  return result.failures.empty() ? 0 : 2;
}

int cmd_summarize(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<almt::ResultRow> rows;
  for (const std::string& path : inputs) {
    const std::vector<almt::ResultRow> part = almt::read_results_csv(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const std::vector<almt::SummaryRow> summary = almt::summarize(rows);
  almt::write_summary_csv(out, summary);
  std::cout << "wrote " << out << " (" << summary.size() << " rows)\n";
  for (const auto& row : summary)
    if (row.epoch == 0)
      std::printf("%-16s budget_ratio=%.3g\n", row.strategy.c_str(), row.budget_ratio);
  return 0;
}

int cmd_pendulum_demo(const std::string& config_path, const std::string& out,
                      const std::string& seeds) {
  almt::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = load_config(config_path, out, seeds, "");
    if (cfg.scenario != almt::Scenario::Pendulum) {
      std::cerr << "pendulum-demo needs scenario = pendulum\n";
      return 1;
    }
  } else {
    cfg = almt::parse_config_text(
        "[experiment]\n"
        "scenario = pendulum\n"
        "strategies = target-aware\n"
        "seeds = 1\n"
        "[target]\n"
        "n_target = 1000\n"
        "dot_n_target = 400\n"
        "[budgets]\n"
        "n0 = 2000\n"
        "beta2 = 800\n"
        "epochs = 3\n"
        "gamma_mode = fixed\n"
        "gamma = 1e-4\n"
        "[train]\n"
        "gd_steps = 250\n"
        "gd_lr = 0.15\n"
        "head_ridge = 1e-8\n"
        "[eval]\n"
        "n_test = 2000\n");
    if (!out.empty()) cfg.out_dir = out;
    if (!seeds.empty()) cfg.seeds = {std::stoull(seeds)};
  }

  // Learn a residual model with the target-aware strategy, then compare the
  // model-based controller against the uncompensated baseline on the hidden
  // actual target environment.
  const std::uint64_t seed = cfg.seeds.front();
  almt::RunSetup setup = almt::make_run_setup(cfg, seed);
  const almt::RunResult learned = almt::run_target_aware(setup.env, setup.options);
  std::cout << "test losses per epoch:";
  for (const auto& rec : learned.trace.records)
    if (rec.epoch_end) std::printf(" %.4f", rec.metrics.test_mse);
  std::cout << "\n";

  const auto* sampler = dynamic_cast<const almt::PendulumSampler*>(setup.sampler.get());
  const almt::PendulumEnv target_env = sampler->env_for(cfg.target.pendulum_actual);
  almt::Rng head_rng(seed, almt::Stream::Eval, 0xdead);
  const almt::TaskSample fit = setup.sampler->sample(
      setup.env.target_space, setup.env.target.targets.col(0), cfg.target.n_target, head_rng);
  const Eigen::VectorXd head = almt::finetune_target(
      learned.estimate.b_x_hat, setup.env.psi_x.apply_rows(fit.inputs), fit.labels);
  const almt::FeatureOperator psi_x = setup.env.psi_x;
  const Eigen::VectorXd predictor = learned.estimate.b_x_hat * head;
  auto f_hat = [&psi_x, &predictor](double theta, double theta_dot) {
    Eigen::VectorXd x(2);
    x << theta, theta_dot;
    return psi_x.apply(x).dot(predictor);
  };

  const almt::RolloutResult with_model = almt::control_rollout(
      target_env, f_hat, cfg.pendulum.kp, cfg.pendulum.kd, cfg.pendulum.horizon);
  const almt::RolloutResult baseline = almt::control_rollout(
      target_env, nullptr, cfg.pendulum.kp, cfg.pendulum.kd, cfg.pendulum.horizon);
  std::printf("mean control error: learned f_hat %.5f vs baseline %.5f\n",
              with_model.mean_error, baseline.mean_error);
  return with_model.mean_error < baseline.mean_error ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"active multi-task representation learning experiments"};
  app.require_subcommand(1);

  std::string config_path, out, seeds, strategy;
  std::vector<std::string> inputs;

  CLI::App* gen = app.add_subcommand("gen-truth", "generate and save a ground-truth model");
  gen->add_option("--config", config_path, "experiment config file")->required();
  gen->add_option("--out", out, "output path prefix")->required();
  gen->add_option("--seeds", seeds, "seed override (first one is used)");

  CLI::App* run = app.add_subcommand("run", "run the configured experiment sweep");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--out", out, "output directory override");
  run->add_option("--seeds", seeds, "comma-separated seed override");
  run->add_option("--strategy", strategy, "comma-separated strategy override");

  CLI::App* sum = app.add_subcommand("summarize", "aggregate result CSVs");
  sum->add_option("inputs", inputs, "results.csv files")->required();
  sum->add_option("--out", out, "summary output path")->default_val("summary.csv");

  CLI::App* demo = app.add_subcommand("pendulum-demo", "small pendulum control demo");
  demo->add_option("--config", config_path, "pendulum config file");
  demo->add_option("--out", out, "output directory override");
  demo->add_option("--seeds", seeds, "seed override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_truth(config_path, out, seeds);
    if (run->parsed()) return cmd_run(config_path, out, seeds, strategy);
    if (sum->parsed()) return cmd_summarize(inputs, out.empty() ? "summary.csv" : out);
    if (demo->parsed()) return cmd_pendulum_demo(config_path, out, seeds);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

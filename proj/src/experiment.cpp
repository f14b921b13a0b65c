#include "almt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "almt/metrics.hpp"
#include "almt/pendulum.hpp"

namespace almt {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

TargetSpec resolve_target(const ExperimentConfig& cfg, const GroundTruthModel* gt) {
  const TargetConfig& tc = cfg.target;
  switch (tc.kind) {
    case TargetConfig::Kind::WeakestSourceDirection: {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(gt->b_w_source(), Eigen::ComputeThinV);
      Eigen::VectorXd w0 = Eigen::VectorXd::Zero(cfg.dims.d_w);
      w0.head(cfg.dims.d_w_source) = svd.matrixV().col(svd.matrixV().cols() - 1);
      for (Eigen::Index i = 0; i < w0.size(); ++i) {  // deterministic sign
        if (std::abs(w0(i)) > 1e-12) {
          if (w0(i) < 0) w0 = -w0;
          break;
        }
      }
      return TargetSpec::single(w0, tc.n_target, tc.dot_n_target);
    }
    case TargetConfig::Kind::Axis: {
      if (tc.axis < 0 || tc.axis >= cfg.dims.d_w)
        throw std::invalid_argument("target.axis out of range");
      Eigen::VectorXd w0 = Eigen::VectorXd::Zero(cfg.dims.d_w);
      w0(tc.axis) = 1.0;
      return TargetSpec::single(w0, tc.n_target, tc.dot_n_target);
    }
    case TargetConfig::Kind::Explicit: {
      TargetSpec spec;
      spec.targets = tc.vectors;
      spec.weights = tc.weights;
      // Orthonormal spanning set of the target subspace.
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(tc.vectors);
      const Eigen::Index rank = qr.rank();
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tc.vectors.rows(), rank);
      spec.spanning = q;
      spec.n_target = tc.n_target;
      spec.dot_n_target = tc.dot_n_target;
      spec.validate();
      return spec;
    }
    case TargetConfig::Kind::PendulumDummy: {
      Eigen::VectorXd w0 = Eigen::VectorXd::Zero(6);
      w0(5) = 1.0;  // the learner only observes the dummy coordinate
      return TargetSpec::single(w0, tc.n_target, tc.dot_n_target);
    }
  }
  throw std::logic_error("resolve_target: unknown kind");
}

RunSetup make_synthetic_context(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunSetup ctx;
  const FeatureKind psi_x =
      cfg.scenario == Scenario::SyntheticFourier ? FeatureKind::Fourier : FeatureKind::Identity;
  ctx.gt = std::make_unique<GroundTruthModel>(
      make_ground_truth(cfg.dims, cfg.conditioning, cfg.kappa, psi_x, FeatureKind::Identity,
                        cfg.sigma, seed, cfg.fourier_scale));
  ctx.sampler = std::make_unique<SyntheticSampler>(*ctx.gt);

  ctx.env.sampler = ctx.sampler.get();
  ctx.env.psi_x = ctx.gt->psi_x;
  ctx.env.psi_w = ctx.gt->psi_w;
  ctx.env.dims = cfg.dims;
  ctx.env.source_space = TaskSpace::source_ball(cfg.dims);
  ctx.env.target_space = TaskSpace::full_ball(cfg.dims.d_w);
  ctx.env.target = resolve_target(cfg, ctx.gt.get());

  ctx.options = cfg.learner;
  ctx.options.master_seed = seed;

  const GroundTruthModel* gt = ctx.gt.get();
  const TargetSpec target = ctx.env.target;
  const int n_test = cfg.n_test;
  Eigen::MatrixXd target_cov = Eigen::MatrixXd::Zero(cfg.dims.d_w, cfg.dims.d_w);
  for (Eigen::Index i = 0; i < target.targets.cols(); ++i)
    target_cov.noalias() +=
        target.weights(i) * target.targets.col(i) * target.targets.col(i).transpose();

  ctx.env.snapshot = [gt, target, n_test, target_cov](
                         const ModelEstimate& est,
                         const std::vector<std::pair<Eigen::VectorXd, long long>>& counts,
                         Rng& rng) {
    MetricsSnapshot snap;
    if (est.b_x_hat.size() == 0) {
      snap.er = snap.test_mse = snap.sin_angle = snap.dis_similarity = snap.design_trace = kNan;
      return snap;
    }
    const EvalResult eval = excess_risk(est.b_x_hat, *gt, target, n_test, rng);
    snap.er = eval.er;
    snap.test_mse = eval.test_mse;
    snap.sin_angle = sin_angle(est.b_x_hat, gt->b_x);
    snap.dis_similarity = dis_similarity(gt->b_x, est.b_x_hat);
    std::vector<std::pair<Eigen::VectorXd, double>> weighted;
    weighted.reserve(counts.size());
    for (const auto& [w, n] : counts) weighted.emplace_back(w, static_cast<double>(n));
    snap.design_trace = design_trace(gt->b_w, weighted, target_cov).value;
    return snap;
  };
  return ctx;
}

RunSetup make_pendulum_context(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunSetup ctx;
  auto sampler = std::make_unique<PendulumSampler>(
      cfg.target.pendulum_actual, cfg.pendulum.label_sigma, cfg.pendulum.mass,
      cfg.pendulum.length, cfg.pendulum.gravity, cfg.pendulum.dt);
  PendulumSampler* pendulum = sampler.get();
  ctx.sampler = std::move(sampler);

  ctx.env.sampler = ctx.sampler.get();
  Rng feature_rng(seed, Stream::Truth, 1);
  ctx.env.psi_x = FeatureOperator::random_fourier(cfg.dims.d_psi_x, 2, 1.0, feature_rng);
  ctx.env.psi_w = FeatureOperator::pendulum_poly();
  ctx.env.dims = cfg.dims;
  ctx.env.source_space = TaskSpace::source_ball(cfg.dims);  // first 5 coordinates
  ctx.env.target_space = TaskSpace{TaskSpaceKind::DiscreteOneHot, 6, 5, 1};
  ctx.env.target = resolve_target(cfg, nullptr);

  ctx.options = cfg.learner;
  ctx.options.master_seed = seed;

  const TargetSpec target = ctx.env.target;
  const FeatureOperator psi_x = ctx.env.psi_x;
  const int n_test = cfg.n_test;
  const double sigma = cfg.pendulum.label_sigma;
  ctx.env.snapshot = [pendulum, target, psi_x, n_test, sigma](
                         const ModelEstimate& est,
                         const std::vector<std::pair<Eigen::VectorXd, long long>>&, Rng& rng) {
    MetricsSnapshot snap;
    snap.sin_angle = snap.dis_similarity = snap.design_trace = kNan;
    if (est.b_x_hat.size() == 0) {
      snap.er = snap.test_mse = kNan;
      return snap;
    }
    const TaskSpace space{TaskSpaceKind::DiscreteOneHot, 6, 5, 1};
    const TaskSample fit = pendulum->sample(space, target.targets.col(0), target.n_target, rng);
    const Eigen::VectorXd head =
        finetune_target(est.b_x_hat, psi_x.apply_rows(fit.inputs), fit.labels);
    const TaskSample test = pendulum->sample(space, target.targets.col(0), n_test, rng);
    const Eigen::VectorXd pred = psi_x.apply_rows(test.inputs) * (est.b_x_hat * head);
    snap.test_mse = (pred - test.labels).squaredNorm() / static_cast<double>(n_test);
    snap.er = std::max(0.0, snap.test_mse - sigma * sigma);
    return snap;
  };
  return ctx;
}

std::vector<ResultRow> rows_from_trace(const ExperimentConfig& cfg, Strategy strategy,
                                       std::uint64_t seed, const ExperimentTrace& trace) {
  std::vector<ResultRow> rows;
  int epoch = 0;
  for (const EpochRecord& rec : trace.records) {
    if (!rec.epoch_end) continue;
    ResultRow row;
    row.scenario = to_string(cfg.scenario);
    row.strategy = to_string(strategy);
    row.seed = seed;
    row.epoch = epoch++;
    row.cumulative_budget = rec.metrics.cumulative_budget;
    row.test_mse = rec.metrics.test_mse;
    row.er = rec.metrics.er;
    row.sin_angle = rec.metrics.sin_angle;
    row.dis_similarity = rec.metrics.dis_similarity;
    row.design_trace = rec.metrics.design_trace;
    row.long_term_tasks = rec.metrics.long_term_tasks;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<long long> default_checkpoints(const StageBudgets& budgets) {
  std::vector<long long> grid;
  long long b = budgets.n0;
  const int count = budgets.epochs + 1;
  for (int i = 0; i < count; ++i) {
    grid.push_back(b);
    b *= 2;
    if (budgets.budget_cap > 0 && grid.back() >= budgets.budget_cap) break;
  }
  return grid;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNan;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return kNan;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

RunSetup make_run_setup(const ExperimentConfig& config, std::uint64_t seed) {
  return config.scenario == Scenario::Pendulum ? make_pendulum_context(config, seed)
                                               : make_synthetic_context(config, seed);
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<std::string> strategies;
  for (const auto& row : rows)
    if (std::find(strategies.begin(), strategies.end(), row.strategy) == strategies.end())
      strategies.push_back(row.strategy);

  struct EpochAgg {
    double budget = 0, mse = 0, q25 = 0, q75 = 0, er = 0;
  };
  std::vector<SummaryRow> out;
  std::vector<std::vector<EpochAgg>> per_strategy;

  for (const std::string& strategy : strategies) {
    int max_epoch = -1;
    for (const auto& row : rows)
      if (row.strategy == strategy) max_epoch = std::max(max_epoch, row.epoch);
    std::vector<EpochAgg> aggs;
    for (int e = 0; e <= max_epoch; ++e) {
      std::vector<double> budget, mse, er;
      for (const auto& row : rows)
        if (row.strategy == strategy && row.epoch == e) {
          budget.push_back(static_cast<double>(row.cumulative_budget));
          mse.push_back(row.test_mse);
          er.push_back(row.er);
        }
      if (budget.empty()) continue;
      EpochAgg agg;
      agg.budget = median(budget);
      agg.mse = median(mse);
      agg.q25 = quantile(mse, 0.25);
      agg.q75 = quantile(mse, 0.75);
      agg.er = median(er);
      aggs.push_back(agg);
    }
    per_strategy.push_back(std::move(aggs));
  }

  // Budget ratio against the passive run's final median loss.
  double passive_final_mse = kNan, passive_final_budget = kNan;
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    if (strategies[s] == "passive" && !per_strategy[s].empty()) {
      passive_final_mse = per_strategy[s].back().mse;
      passive_final_budget = per_strategy[s].back().budget;
    }
  }

  for (std::size_t s = 0; s < strategies.size(); ++s) {
    double ratio = kNan;
    if (std::isfinite(passive_final_mse)) {
      ratio = kInf;
      for (const EpochAgg& agg : per_strategy[s]) {
        if (agg.mse <= passive_final_mse) {
          ratio = agg.budget / passive_final_budget;
          break;
        }
      }
    }
    for (std::size_t e = 0; e < per_strategy[s].size(); ++e) {
      const EpochAgg& agg = per_strategy[s][e];
      SummaryRow row;
      row.strategy = strategies[s];
      row.epoch = static_cast<int>(e);
      row.median_budget = agg.budget;
      row.median_test_mse = agg.mse;
      row.q25_test_mse = agg.q25;
      row.q75_test_mse = agg.q75;
      row.median_er = agg.er;
      row.budget_ratio = ratio;
      out.push_back(std::move(row));
    }
  }
  return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& config) {
  if (config.seeds.empty()) throw std::invalid_argument("run_experiment: empty seed list");
  if (config.strategies.empty())
    throw std::invalid_argument("run_experiment: empty strategy list");

  ExperimentOutput output;
  const bool has_aware = std::find(config.strategies.begin(), config.strategies.end(),
                                   Strategy::TargetAware) != config.strategies.end();

  for (std::uint64_t seed : config.seeds) {
    std::vector<long long> checkpoints = default_checkpoints(config.learner.budgets);
    std::vector<std::pair<Strategy, std::vector<ResultRow>>> seed_rows;

    // Target-aware runs first so the passive baseline can be evaluated on the
    // same cumulative-budget grid.
    std::vector<Strategy> order = config.strategies;
    std::stable_sort(order.begin(), order.end(), [](Strategy a, Strategy b) {
      return (a == Strategy::TargetAware) > (b == Strategy::TargetAware);
    });

    for (Strategy strategy : order) {
      try {
        RunSetup ctx = make_run_setup(config, seed);
        RunResult result;
        switch (strategy) {
          case Strategy::TargetAware:
            result = run_target_aware(ctx.env, ctx.options);
            if (has_aware) {
              checkpoints.clear();
              for (const EpochRecord& rec : result.trace.records)
                if (rec.epoch_end) checkpoints.push_back(rec.metrics.cumulative_budget);
            }
            break;
          case Strategy::TargetAgnostic:
            result = run_target_agnostic(ctx.env, ctx.options);
            break;
          case Strategy::Passive:
            result = run_passive(ctx.env, ctx.options, checkpoints);
            break;
        }
        seed_rows.emplace_back(strategy, rows_from_trace(config, strategy, seed, result.trace));
      } catch (const std::exception& err) {
        output.failures.push_back({to_string(strategy), seed, err.what()});
      }
    }

    // Emit rows in the configured strategy order regardless of run order.
    for (Strategy strategy : config.strategies)
      for (auto& [s, rows] : seed_rows)
        if (s == strategy)
          output.rows.insert(output.rows.end(), rows.begin(), rows.end());
  }

  std::filesystem::create_directories(config.out_dir);
  output.results_path = config.out_dir + "/results.csv";
  output.summary_path = config.out_dir + "/summary.csv";
  write_results_csv(output.results_path, output.rows);
  write_summary_csv(output.summary_path, summarize(output.rows));
  if (!output.failures.empty()) {
    std::ofstream out(config.out_dir + "/failures.csv");
    out << "strategy,seed,message\n";
    for (const auto& failure : output.failures)
      out << failure.strategy << "," << failure.seed << ",\"" << failure.message << "\"\n";
  }
  return output;
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# schema=" << kResultsSchema << "\n";
  out << "scenario,strategy,seed,epoch,cumulative_budget,test_mse,er,sin_angle,"
         "dis_similarity,design_trace,long_term_tasks\n";
  for (const ResultRow& row : rows) {
    out << row.scenario << ',' << row.strategy << ',' << row.seed << ',' << row.epoch << ','
        << row.cumulative_budget << ',' << fmt(row.test_mse) << ',' << fmt(row.er) << ','
        << fmt(row.sin_angle) << ',' << fmt(row.dis_similarity) << ','
        << fmt(row.design_trace) << ',' << row.long_term_tasks << '\n';
  }
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != std::string("# schema=") + kResultsSchema)
    throw std::runtime_error("results csv: unknown schema in " + path);
  std::getline(in, line);  // header
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    ResultRow row;
    std::getline(ss, row.scenario, ',');
    std::getline(ss, row.strategy, ',');
    std::getline(ss, field, ',');
    row.seed = std::stoull(field);
    std::getline(ss, field, ',');
    row.epoch = std::stoi(field);
    std::getline(ss, field, ',');
    row.cumulative_budget = std::stoll(field);
    std::getline(ss, field, ',');
    row.test_mse = std::stod(field);
    std::getline(ss, field, ',');
    row.er = std::stod(field);
    std::getline(ss, field, ',');
    row.sin_angle = std::stod(field);
    std::getline(ss, field, ',');
    row.dis_similarity = std::stod(field);
    std::getline(ss, field, ',');
    row.design_trace = std::stod(field);
    std::getline(ss, field, ',');
    row.long_term_tasks = std::stoll(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# schema=" << kSummarySchema << "\n";
  out << "strategy,epoch,median_budget,median_test_mse,q25_test_mse,q75_test_mse,median_er,"
         "budget_ratio\n";
  for (const SummaryRow& row : rows) {
    out << row.strategy << ',' << row.epoch << ',' << fmt(row.median_budget) << ','
        << fmt(row.median_test_mse) << ',' << fmt(row.q25_test_mse) << ','
        << fmt(row.q75_test_mse) << ',' << fmt(row.median_er) << ',' << fmt(row.budget_ratio)
        << '\n';
  }
}

}  // namespace almt

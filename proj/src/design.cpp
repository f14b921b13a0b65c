#include "almt/design.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace almt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd moment_matrix(const Eigen::MatrixXd& features, const Eigen::VectorXd& weights) {
  return features * weights.asDiagonal() * features.transpose();
}

// lambda_max(M^{-1} A) with the top generalized eigenvector; +inf if M is
// numerically singular.
double gen_lambda_max(const Eigen::MatrixXd& target_mat, const Eigen::MatrixXd& moment,
                      Eigen::VectorXd* top_vec = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> chk(moment);
  const double lmax = chk.eigenvalues().maxCoeff();
  if (lmax <= 0 || chk.eigenvalues().minCoeff() <= 1e-12 * lmax) return kInf;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(target_mat, moment);
  const Eigen::Index last = solver.eigenvalues().size() - 1;
  if (top_vec) *top_vec = solver.eigenvectors().col(last);
  return solver.eigenvalues()(last);
}

}  // namespace

ClippedEig clip_target_covariance(const Eigen::MatrixXd& sigma_hat, double gamma) {
  if (sigma_hat.rows() != sigma_hat.cols())
    throw std::invalid_argument("clip_target_covariance: matrix must be square");
  const double asym = (sigma_hat - sigma_hat.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8)
    throw std::invalid_argument("clip_target_covariance: matrix is not symmetric");
  if (gamma < 0) throw std::invalid_argument("clip_target_covariance: gamma must be >= 0");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      0.5 * (sigma_hat + sigma_hat.transpose()));
  const Eigen::VectorXd& vals = solver.eigenvalues();  // ascending
  const Eigen::Index k = vals.size();
  int kept = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    if (vals(i) >= gamma) ++kept;

  ClippedEig out;
  out.gamma = gamma;
  out.vectors.resize(k, kept);
  out.values.resize(kept);
  for (int m = 0; m < kept; ++m) {
    const Eigen::Index src = k - 1 - m;  // descending order
    out.values(m) = vals(src);
    out.vectors.col(m) = solver.eigenvectors().col(src);
  }
  return out;
}

double default_clip_threshold(int k, int d_w, int d_x, long long n1) {
  const double kd = static_cast<double>(k) * d_w;
  return 8.0 * std::pow(kd, 1.5) * std::sqrt(static_cast<double>(d_x) / n1);
}

BallDesign solve_ball_closed_form(const Eigen::MatrixXd& b_hat_source,
                                  const ClippedEig& clipped, double rank_tol_factor) {
  const Eigen::Index k = b_hat_source.rows();
  const Eigen::Index d = b_hat_source.cols();
  if (clipped.vectors.rows() != k)
    throw std::invalid_argument("solve_ball_closed_form: eigenvector dim != rows of B");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b_hat_source,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (svd.singularValues().size() < k || smin <= rank_tol_factor * smax)
    throw std::runtime_error(
        "solve_ball_closed_form: rank-deficient source estimate (sigma_min " +
        std::to_string(smin) + "); collect more exploration data");

  const int m = clipped.count();
  BallDesign out;
  out.w_prime.resize(d, m);
  out.tasks.resize(d, m);
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd rhs = clipped.vectors.col(i) * std::sqrt(clipped.values(i));
    // w' = B^T (B B^T)^{-1} rhs = V S^{-1} U^T rhs
    const Eigen::VectorXd w_prime =
        svd.matrixV() *
        (svd.singularValues().array().inverse().matrix().asDiagonal() *
         (svd.matrixU().transpose() * rhs));
    const double residual = (b_hat_source * w_prime - rhs).norm();
    if (residual > 1e-8 * (1.0 + rhs.norm()))
      throw std::runtime_error("solve_ball_closed_form: constraint residual too large");
    out.w_prime.col(i) = w_prime;
    const double norm = w_prime.norm();
    out.tasks.col(i) = norm > 1.0 ? (w_prime / norm).eval() : w_prime;
  }
  return out;
}

double design_objective(const Eigen::MatrixXd& features, const Eigen::VectorXd& weights,
                        const Eigen::MatrixXd& target_mat) {
  return gen_lambda_max(target_mat, moment_matrix(features, weights));
}

Eigen::VectorXd frank_wolfe_design(const Eigen::MatrixXd& features,
                                   const Eigen::MatrixXd& target_mat, int iters,
                                   std::vector<double>* objective_history) {
  const Eigen::Index n = features.cols();
  if (n < 1) throw std::invalid_argument("frank_wolfe_design: no candidates");
  if (iters < 1) throw std::invalid_argument("frank_wolfe_design: iters must be >= 1");

  Eigen::VectorXd q = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd moment = moment_matrix(features, q);
  double obj = gen_lambda_max(target_mat, moment);
  if (!std::isfinite(obj)) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(features);
    throw std::runtime_error("frank_wolfe_design: singular moment matrix at uniform start "
                             "(candidate rank " + std::to_string(qr.rank()) + ")");
  }
  if (objective_history) objective_history->assign(1, obj);

  // Line-search grid approaching both endpoints.
  std::vector<double> gammas;
  for (int t = 1; t <= 20; ++t) gammas.push_back(std::pow(0.5, t));
  for (int t = 1; t <= 20; ++t) gammas.push_back(1.0 - std::pow(0.5, t));

  auto objective_of = [&](const Eigen::MatrixXd& m) { return gen_lambda_max(target_mat, m); };

  const int fw_iters = std::max(1, iters / 2);
  for (int it = 0; it < fw_iters; ++it) {
    // Subgradient scores. The objective is a max over generalized eigenpairs;
    // near-tied top eigenvalues are averaged so the step direction descends
    // each active piece instead of oscillating between them.
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(target_mat, moment);
    const Eigen::Index k = solver.eigenvalues().size();
    const double top = solver.eigenvalues()(k - 1);
    Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
    for (Eigen::Index t = k - 1; t >= 0; --t) {
      if (solver.eigenvalues()(t) < 0.98 * top) break;
      scores += (features.transpose() * solver.eigenvectors().col(t)).cwiseAbs2();
    }

    // Line search over the few best-scored candidates.
    std::array<Eigen::Index, 3> picks{-1, -1, -1};
    Eigen::VectorXd masked = scores;
    for (auto& pick : picks) {
      if (masked.maxCoeff(&pick) <= 0) pick = -1;
      if (pick >= 0) masked(pick) = -1;
    }
    double best_obj = obj, best_gamma = 0.0;
    Eigen::Index best_j = -1;
    for (Eigen::Index j : picks) {
      if (j < 0) continue;
      const Eigen::MatrixXd rank1 = features.col(j) * features.col(j).transpose();
      for (double g : gammas) {
        const double val = objective_of((1.0 - g) * moment + g * rank1);
        if (val < best_obj) {
          best_obj = val;
          best_gamma = g;
          best_j = j;
        }
      }
    }
    if (best_j < 0) break;  // no descent step on the grid
    q *= (1.0 - best_gamma);
    q(best_j) += best_gamma;
    moment = (1.0 - best_gamma) * moment +
             best_gamma * features.col(best_j) * features.col(best_j).transpose();
    obj = best_obj;
    if (objective_history) objective_history->push_back(obj);
  }

  // Pairwise exchange polish: move probability mass between support and
  // candidate atoms whenever that lowers the objective. This clears the
  // stalls the pure vertex steps leave behind at nonsmooth optima.
  const int polish_iters = iters - fw_iters;
  const std::array<double, 4> deltas{0.2, 0.05, 0.01, 0.002};
  for (int it = 0; it < polish_iters; ++it) {
    double best_obj = obj;
    Eigen::Index best_from = -1, best_to = -1;
    double best_delta = 0.0;
    for (Eigen::Index from = 0; from < n; ++from) {
      if (q(from) <= 0) continue;
      for (double delta_frac : deltas) {
        const double delta = delta_frac * q(from);
        if (delta <= 0) continue;
        const Eigen::MatrixXd drained =
            moment - delta * features.col(from) * features.col(from).transpose();
        for (Eigen::Index to = 0; to < n; ++to) {
          if (to == from) continue;
          const double val =
              objective_of(drained + delta * features.col(to) * features.col(to).transpose());
          if (val < best_obj) {
            best_obj = val;
            best_from = from;
            best_to = to;
            best_delta = delta;
          }
        }
      }
    }
    if (best_from < 0) break;
    q(best_from) -= best_delta;
    q(best_to) += best_delta;
    moment = moment_matrix(features, q);
    obj = objective_of(moment);
    if (objective_history) objective_history->push_back(obj);
  }
  return q;
}

Eigen::VectorXd frank_wolfe_design(const DesignProblem& problem,
                                   const std::vector<Eigen::VectorXd>& candidates, int iters) {
  if (candidates.empty()) throw std::invalid_argument("frank_wolfe_design: no candidates");
  const Eigen::Index k = problem.target_mat.rows();
  Eigen::MatrixXd features(k, static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i)
    features.col(static_cast<Eigen::Index>(i)) = problem.f_map(candidates[i]);
  return frank_wolfe_design(features, problem.target_mat, iters);
}

namespace {

// Shared state for the grid search: whitened rank-one terms and the best
// support/weights seen. The objective lambda_max(M^{-1}A) equals
// 1/lambda_min(sum q_i g_i g_i^T) with g_i = L^{-1} f_i, A = L L^T.
struct GridContext {
  std::vector<Eigen::MatrixXd> outer;  // whitened f f^T per candidate
  Eigen::Index k = 0;
  int steps = 0;
};

double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() == 2) {
    const double a = m(0, 0), b = m(1, 1), c = m(0, 1);
    const double tr = a + b;
    const double disc = (a - b) * (a - b) + 4.0 * c * c;
    return 0.5 * (tr - std::sqrt(disc));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  return solver.eigenvalues().minCoeff();
}

struct GridBest {
  double lmin = -1.0;
  std::array<int, 3> support{-1, -1, -1};
  std::array<int, 3> ticks{0, 0, 0};

  // Deterministic order: larger lmin first, lexicographic tie-break.
  bool better_than(const GridBest& o) const {
    if (lmin != o.lmin) return lmin > o.lmin;
    if (support != o.support) return support < o.support;
    return ticks < o.ticks;
  }
};

// Best weighting over the pair (i, j) on the tick grid.
void scan_pair(const GridContext& ctx, int i, int j, GridBest& best) {
  if (ctx.k == 2) {
    const auto& pi = ctx.outer[i];
    const auto& pj = ctx.outer[j];
    const double d11 = pi(0, 0) - pj(0, 0), d12 = pi(0, 1) - pj(0, 1),
                 d22 = pi(1, 1) - pj(1, 1);
    for (int t = 1; t < ctx.steps; ++t) {
      const double w = static_cast<double>(t) / ctx.steps;
      const double m11 = pj(0, 0) + w * d11;
      const double m22 = pj(1, 1) + w * d22;
      if (std::min(m11, m22) <= best.lmin) continue;  // interlacing bound
      const double m12 = pj(0, 1) + w * d12;
      const double disc = (m11 - m22) * (m11 - m22) + 4.0 * m12 * m12;
      const double lmin = 0.5 * ((m11 + m22) - std::sqrt(disc));
      if (lmin > best.lmin) best = GridBest{lmin, {i, j, -1}, {t, 0, 0}};
    }
    return;
  }
  for (int t = 1; t < ctx.steps; ++t) {
    const double w = static_cast<double>(t) / ctx.steps;
    const double lmin = min_eigenvalue(w * ctx.outer[i] + (1.0 - w) * ctx.outer[j]);
    if (lmin > best.lmin) best = GridBest{lmin, {i, j, -1}, {t, 0, 0}};
  }
}

// Best weighting over the triple (i, j, l); interior grid points only, the
// pair scans cover the edges.
void scan_triple(const GridContext& ctx, int i, int j, int l, GridBest& best) {
  if (ctx.k == 2) {
    const auto& pi = ctx.outer[i];
    const auto& pj = ctx.outer[j];
    const auto& pl = ctx.outer[l];
    const double a11 = pi(0, 0) - pl(0, 0), a12 = pi(0, 1) - pl(0, 1),
                 a22 = pi(1, 1) - pl(1, 1);
    const double b11 = pj(0, 0) - pl(0, 0), b12 = pj(0, 1) - pl(0, 1),
                 b22 = pj(1, 1) - pl(1, 1);
    const double inv = 1.0 / ctx.steps;
    for (int t1 = 1; t1 < ctx.steps - 1; ++t1) {
      const double w1 = t1 * inv;
      const double base11 = pl(0, 0) + w1 * a11;
      const double base12 = pl(0, 1) + w1 * a12;
      const double base22 = pl(1, 1) + w1 * a22;
      for (int t2 = 1; t2 < ctx.steps - t1; ++t2) {
        const double w2 = t2 * inv;
        const double m11 = base11 + w2 * b11;
        const double m22 = base22 + w2 * b22;
        if (std::min(m11, m22) <= best.lmin) continue;
        const double m12 = base12 + w2 * b12;
        const double disc = (m11 - m22) * (m11 - m22) + 4.0 * m12 * m12;
        const double lmin = 0.5 * ((m11 + m22) - std::sqrt(disc));
        if (lmin > best.lmin) best = GridBest{lmin, {i, j, l}, {t1, t2, 0}};
      }
    }
    return;
  }
  for (int t1 = 1; t1 < ctx.steps - 1; ++t1)
    for (int t2 = 1; t2 < ctx.steps - t1; ++t2) {
      const double w1 = static_cast<double>(t1) / ctx.steps;
      const double w2 = static_cast<double>(t2) / ctx.steps;
      const double lmin = min_eigenvalue(w1 * ctx.outer[i] + w2 * ctx.outer[j] +
                                         (1.0 - w1 - w2) * ctx.outer[l]);
      if (lmin > best.lmin) best = GridBest{lmin, {i, j, l}, {t1, t2, 0}};
    }
}

GridContext make_grid_context(const Eigen::MatrixXd& features, const Eigen::MatrixXd& target_mat,
                              int max_support, double resolution) {
  if (max_support < 1 || max_support > 3)
    throw std::invalid_argument("grid_search_design: max_support must be in [1, 3]");
  if (resolution <= 0 || resolution > 0.5)
    throw std::invalid_argument("grid_search_design: bad resolution");
  Eigen::LLT<Eigen::MatrixXd> llt(target_mat);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("grid_search_design: target matrix must be positive definite");

  GridContext ctx;
  ctx.k = features.rows();
  ctx.steps = static_cast<int>(std::lround(1.0 / resolution));
  const Eigen::Index n = features.cols();
  ctx.outer.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd g = llt.matrixL().solve(features.col(i));
    ctx.outer.push_back(g * g.transpose());
  }
  return ctx;
}

GridDesign finish_grid(const GridContext& ctx, const GridBest& best, Eigen::Index n) {
  GridDesign out;
  out.weights = Eigen::VectorXd::Zero(n);
  if (best.lmin <= 0) {
    out.objective = kInf;
    return out;
  }
  out.objective = 1.0 / best.lmin;
  const double inv = 1.0 / ctx.steps;
  if (best.support[2] >= 0) {
    const double w1 = best.ticks[0] * inv, w2 = best.ticks[1] * inv;
    out.weights(best.support[0]) = w1;
    out.weights(best.support[1]) = w2;
    out.weights(best.support[2]) = 1.0 - w1 - w2;
  } else if (best.support[1] >= 0) {
    const double w = best.ticks[0] * inv;
    out.weights(best.support[0]) = w;
    out.weights(best.support[1]) = 1.0 - w;
  } else if (best.support[0] >= 0) {
    out.weights(best.support[0]) = 1.0;
  }
  return out;
}

}  // namespace

GridDesign grid_search_design_serial(const Eigen::MatrixXd& features,
                                     const Eigen::MatrixXd& target_mat, int max_support,
                                     double resolution) {
  GridContext ctx = make_grid_context(features, target_mat, max_support, resolution);
  const int n = static_cast<int>(features.cols());
  GridBest best;
  for (int i = 0; i < n; ++i) {
    const double lmin = min_eigenvalue(ctx.outer[i]);
    GridBest cand{lmin, {i, -1, -1}, {0, 0, 0}};
    if (cand.better_than(best)) best = cand;
  }
  if (max_support >= 2)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) scan_pair(ctx, i, j, best);
  if (max_support >= 3)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int l = j + 1; l < n; ++l) scan_triple(ctx, i, j, l, best);
  return finish_grid(ctx, best, features.cols());
}

GridDesign grid_search_design(const Eigen::MatrixXd& features,
                              const Eigen::MatrixXd& target_mat, int max_support,
                              double resolution) {
  GridContext ctx = make_grid_context(features, target_mat, max_support, resolution);
  const int n = static_cast<int>(features.cols());
  GridBest best;
  for (int i = 0; i < n; ++i) {
    const double lmin = min_eigenvalue(ctx.outer[i]);
    GridBest cand{lmin, {i, -1, -1}, {0, 0, 0}};
    if (cand.better_than(best)) best = cand;
  }
  if (max_support >= 2) {
#pragma omp parallel
    {
      GridBest local = best;
#pragma omp for schedule(dynamic, 1) nowait
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) scan_pair(ctx, i, j, local);
#pragma omp critical
      if (local.better_than(best)) best = local;
    }
  }
  if (max_support >= 3) {
#pragma omp parallel
    {
      GridBest local = best;
#pragma omp for schedule(dynamic, 1) nowait
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          for (int l = j + 1; l < n; ++l) scan_triple(ctx, i, j, l, local);
#pragma omp critical
      if (local.better_than(best)) best = local;
    }
  }
  return finish_grid(ctx, best, features.cols());
}

Eigen::VectorXd adaptive_source_search(const FeatureOperator& psi_w,
                                       const Eigen::MatrixXd& b_hat,
                                       const Eigen::VectorXd& target_vec,
                                       const TaskSpace& space, int rounds, int pool, Rng& rng) {
  if (rounds < 1 || pool < 1)
    throw std::invalid_argument("adaptive_source_search: rounds and pool must be >= 1");
  if (b_hat.cols() != psi_w.output_dim)
    throw std::invalid_argument("adaptive_source_search: b_hat/psi_w dim mismatch");
  if (b_hat.rows() != target_vec.size())
    throw std::invalid_argument("adaptive_source_search: target dim mismatch");

  const int active = space.axis_count;
  Eigen::VectorXd center = Eigen::VectorXd::Zero(active);
  Eigen::VectorXd best_w = Eigen::VectorXd::Zero(space.d_w);
  double best_obj = kInf;
  double radius = 1.0;

  for (int round = 0; round < rounds; ++round) {
    for (int p = 0; p < pool; ++p) {
      Eigen::VectorXd point = center + radius * rng.ball(active);
      const double norm = point.norm();
      if (norm > 1.0) point /= norm;
      Eigen::VectorXd w = Eigen::VectorXd::Zero(space.d_w);
      w.segment(space.axis_begin, active) = point;
      const double obj = (b_hat * psi_w.apply(w) - target_vec).norm();
      if (obj < best_obj) {
        best_obj = obj;
        best_w = w;
      }
    }
    center = best_w.segment(space.axis_begin, active);
    radius *= 0.5;
  }
  return best_w;
}

long long budget_target_aware(const Eigen::MatrixXd& w_prime_cols, double eps_j, double beta3) {
  if (eps_j <= 0) throw std::invalid_argument("budget_target_aware: eps must be > 0");
  const Eigen::Index m = w_prime_cols.cols();
  if (m == 0) return 0;
  const double max_sq = w_prime_cols.colwise().squaredNorm().maxCoeff();
  const double raw = static_cast<double>(m) * beta3 * max_sq / (eps_j * eps_j);
  return static_cast<long long>(std::ceil(raw - 1e-12));
}

SamplingPlan SamplingPlan::uniform(const Eigen::MatrixXd& tasks, long long total_budget) {
  SamplingPlan plan;
  plan.tasks = tasks;
  const Eigen::Index m = tasks.cols();
  plan.weights = Eigen::VectorXd::Constant(m, m > 0 ? 1.0 / static_cast<double>(m) : 0.0);
  plan.total_budget = total_budget;
  if (m > 0) {
    const long long per = (total_budget + m - 1) / m;
    plan.per_task.assign(static_cast<std::size_t>(m), per);
  }
  return plan;
}

}  // namespace almt

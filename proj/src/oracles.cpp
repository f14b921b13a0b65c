#include "almt/oracles.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "almt/parallel.hpp"

namespace almt {

namespace {

// Thin-QR orthonormalization with a deterministic sign convention and a rank
// check on the diagonal of R.
Eigen::MatrixXd orthonormalize_columns(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(m.cols(), m.cols());
  const double scale = r.cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (std::abs(r(j, j)) <= 1e-12 * std::max(scale, 1.0))
      throw std::runtime_error("orthonormalize: rank collapse during QR");
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

long long total_samples(const std::vector<TaskData>& tasks) {
  long long n = 0;
  for (const auto& t : tasks) n += t.labels.size();
  return n;
}

}  // namespace

Eigen::VectorXd fit_task_head(const Eigen::MatrixXd& b_x_hat, const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& labels, double ridge) {
  if (features.rows() != labels.size())
    throw std::invalid_argument("fit_task_head: features/labels size mismatch");
  if (features.cols() != b_x_hat.rows())
    throw std::invalid_argument("fit_task_head: feature dim != rows of b_x_hat");
  const Eigen::MatrixXd design = features * b_x_hat;  // n x k
  if (ridge > 0.0) {
    const Eigen::Index k = design.cols();
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += ridge;
    return gram.ldlt().solve(design.transpose() * labels);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols())
    throw std::runtime_error("fit_task_head: singular Gram matrix with ridge = 0");
  return qr.solve(labels);
}

Eigen::MatrixXd assemble_bw(const std::vector<Eigen::VectorXd>& heads,
                            const Eigen::MatrixXd& basis) {
  const Eigen::Index t = basis.cols();
  if (static_cast<Eigen::Index>(heads.size()) != t)
    throw std::invalid_argument("assemble_bw: heads/basis count mismatch");
  if (t == 0) throw std::invalid_argument("assemble_bw: empty basis");
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  if ((gram - Eigen::MatrixXd::Identity(t, t)).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("assemble_bw: basis is not orthonormal");
  const Eigen::Index k = heads[0].size();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, basis.rows());
  for (Eigen::Index i = 0; i < t; ++i) b += heads[i] * basis.col(i).transpose();
  return b;
}

Eigen::MatrixXd fit_bw_spanning(const std::vector<Eigen::VectorXd>& heads,
                                const Eigen::MatrixXd& spanning, double ridge) {
  const Eigen::Index t = spanning.cols();
  if (static_cast<Eigen::Index>(heads.size()) != t || t == 0)
    throw std::invalid_argument("fit_bw_spanning: heads/spanning count mismatch");
  const Eigen::Index k = heads[0].size();
  Eigen::MatrixXd w_hat(k, t);
  for (Eigen::Index i = 0; i < t; ++i) w_hat.col(i) = heads[i];
  // Min-norm B with B spanning = w_hat: B = W S^T (S S^T + ridge I)^{-1} via
  // the thin SVD of S.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(spanning, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  Eigen::VectorXd inv = svd.singularValues();
  for (Eigen::Index i = 0; i < inv.size(); ++i) {
    const double s = svd.singularValues()(i);
    inv(i) = ridge > 0 ? s / (s * s + ridge)
                       : (s > 1e-10 * smax ? 1.0 / s : 0.0);
  }
  return w_hat * svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd alt_min_representation(const std::vector<TaskData>& tasks, int k,
                                       const TrainConfig& cfg) {
  if (static_cast<int>(tasks.size()) < 1)
    throw std::invalid_argument("alt_min_representation: no tasks");
  const Eigen::Index d = tasks[0].features.cols();
  const int t = static_cast<int>(tasks.size());
  const long long n_total = total_samples(tasks);

  // Moment init: top-k eigenvectors of (1/N) sum y^2 phi phi^T.
  Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(d, d);
  for (const auto& task : tasks)
    moment.noalias() +=
        task.features.transpose() * task.labels.cwiseAbs2().asDiagonal() * task.features;
  moment /= static_cast<double>(n_total);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(moment);
  Eigen::MatrixXd b(d, k);
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const double top = std::max(evals(d - 1), 1e-300);
  const double gap = d > k ? (evals(d - k) - evals(d - k - 1)) / top : 1.0;
  if (gap < cfg.init_gap_tol) {
    std::cerr << "alt_min_representation: spectral gap " << gap
              << " below tolerance; falling back to random init\n";
    Rng rng(cfg.seed, Stream::Training, 0x616d);
    b = random_orthonormal(d, k, rng);
  } else {
    for (int j = 0; j < k; ++j) b.col(j) = solver.eigenvectors().col(d - 1 - j);
  }

  // Cached per-task Gram blocks; they do not change across iterations.
  std::vector<Eigen::MatrixXd> gram(tasks.size());
  std::vector<Eigen::VectorXd> cross(tasks.size());
  par::for_each_index(static_cast<std::ptrdiff_t>(tasks.size()), [&](std::ptrdiff_t i) {
    gram[i] = tasks[i].features.transpose() * tasks[i].features;
    cross[i] = tasks[i].features.transpose() * tasks[i].labels;
  });

  std::vector<Eigen::VectorXd> heads(tasks.size());
  for (int iter = 0; iter < cfg.am_iters; ++iter) {
    // Heads given b: per-task least squares (independent across tasks).
    par::for_each_index(static_cast<std::ptrdiff_t>(tasks.size()), [&](std::ptrdiff_t i) {
      Eigen::MatrixXd g = b.transpose() * gram[i] * b;
      if (cfg.ridge > 0) g.diagonal().array() += cfg.ridge;
      heads[i] = g.ldlt().solve(b.transpose() * cross[i]);
    });

    // b given heads: normal equations of the stacked least squares,
    // sum_i (w_i w_i^T kron G_i) vec(B) = vec(sum_i F_i^T y_i w_i^T).
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d * k, d * k);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(d, k);
    for (int i = 0; i < t; ++i) {
      const Eigen::VectorXd& w = heads[i];
      for (int c = 0; c < k; ++c)
        for (int r = 0; r < k; ++r)
          h.block(r * d, c * d, d, d).noalias() += w(r) * w(c) * gram[i];
      rhs.noalias() += cross[i] * w.transpose();
    }
    if (cfg.ridge > 0) h.diagonal().array() += cfg.ridge;
    Eigen::VectorXd vec_b = h.ldlt().solve(Eigen::Map<Eigen::VectorXd>(rhs.data(), d * k));
    b = orthonormalize_columns(Eigen::Map<Eigen::MatrixXd>(vec_b.data(), d, k));
  }
  return b;
}

JointLoss joint_loss_and_grad(const std::vector<TaskData>& tasks, const Eigen::MatrixXd& b,
                              const std::vector<Eigen::VectorXd>& heads) {
  const long long n_total = total_samples(tasks);
  const double scale = 1.0 / static_cast<double>(n_total);
  JointLoss out;
  out.grad_b = Eigen::MatrixXd::Zero(b.rows(), b.cols());
  out.grad_w.resize(tasks.size());

  std::vector<Eigen::MatrixXd> partial_b(tasks.size());
  std::vector<double> partial_loss(tasks.size());
  par::for_each_index(static_cast<std::ptrdiff_t>(tasks.size()), [&](std::ptrdiff_t i) {
    const Eigen::VectorXd resid = tasks[i].features * (b * heads[i]) - tasks[i].labels;
    partial_loss[i] = resid.squaredNorm();
    const Eigen::VectorXd ftr = tasks[i].features.transpose() * resid;
    partial_b[i] = 2.0 * scale * ftr * heads[i].transpose();
    out.grad_w[i] = 2.0 * scale * (b.transpose() * ftr);
  });
  // Fixed-order reduction keeps the result independent of the thread count.
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    out.loss += partial_loss[i];
    out.grad_b += partial_b[i];
  }
  out.loss *= scale;
  return out;
}

ModelEstimate joint_erm(const std::vector<TaskData>& tasks, const ModelEstimate* init, int k,
                        const TrainConfig& cfg) {
  if (tasks.empty()) throw std::invalid_argument("joint_erm: no tasks");
  const Eigen::Index d = tasks[0].features.cols();

  ModelEstimate est;
  if (init) est = *init;
  Eigen::MatrixXd b;
  if (init && init->b_x_hat.size() > 0) {
    b = init->b_x_hat;
  } else {
    Rng rng(cfg.seed, Stream::Training, 0x6572);
    b = random_orthonormal(d, k, rng);
  }

  std::vector<Eigen::VectorXd> heads(tasks.size());
  par::for_each_index(static_cast<std::ptrdiff_t>(tasks.size()), [&](std::ptrdiff_t i) {
    heads[i] = fit_task_head(b, tasks[i].features, tasks[i].labels,
                             std::max(cfg.ridge, 1e-10));
  });

  // Mini-batch mode resamples row subsets per step from the training stream.
  Rng batch_rng(cfg.seed, Stream::Training, 0x6273);
  auto subsample = [&](const std::vector<TaskData>& full) {
    std::vector<TaskData> sub(full.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
      const Eigen::Index n = full[i].labels.size();
      const Eigen::Index m = std::min<Eigen::Index>(cfg.batch, n);
      sub[i].w = full[i].w;
      sub[i].features.resize(m, full[i].features.cols());
      sub[i].labels.resize(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto row = static_cast<Eigen::Index>(batch_rng.bits() % n);
        sub[i].features.row(r) = full[i].features.row(row);
        sub[i].labels(r) = full[i].labels(row);
      }
    }
    return sub;
  };

  JointLoss state = joint_loss_and_grad(tasks, b, heads);
  const double initial_loss = state.loss;
  for (int step = 0; step < cfg.gd_steps; ++step) {
    if (cfg.batch > 0) {
      const std::vector<TaskData> sub = subsample(tasks);
      state = joint_loss_and_grad(sub, b, heads);
    }
    b -= cfg.gd_lr * state.grad_b;
    for (std::size_t i = 0; i < tasks.size(); ++i) heads[i] -= cfg.gd_lr * state.grad_w[i];
    if (cfg.batch == 0) {
      state = joint_loss_and_grad(tasks, b, heads);
      if (initial_loss > 0 && state.loss > 10.0 * initial_loss)
        throw std::runtime_error("joint_erm: divergence detected at step " +
                                 std::to_string(step) + " (loss " + std::to_string(state.loss) +
                                 " vs initial " + std::to_string(initial_loss) + ")");
    }
  }
  if (cfg.batch > 0) {
    state = joint_loss_and_grad(tasks, b, heads);
    if (initial_loss > 0 && state.loss > 10.0 * initial_loss)
      throw std::runtime_error("joint_erm: divergence detected (final loss " +
                               std::to_string(state.loss) + " vs initial " +
                               std::to_string(initial_loss) + ")");
  }
  est.b_x_hat = orthonormalize_columns(b);
  return est;
}

Eigen::VectorXd finetune_target(const Eigen::MatrixXd& b_x_hat,
                                const Eigen::MatrixXd& target_features,
                                const Eigen::VectorXd& target_labels, double ridge) {
  return fit_task_head(b_x_hat, target_features, target_labels, ridge);
}

}  // namespace almt

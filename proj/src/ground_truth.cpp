#include "almt/ground_truth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace almt {

namespace {

// Rotates row pairs of g (left multiplication by Givens rotations) until every
// row norm equals sqrt(mean row norm^2). Left rotations preserve g^T g, hence
// the singular values. At most rows-1 rotations; each one pins a row exactly.
void equalize_row_norms(Eigen::MatrixXd& g) {
  const Eigen::Index d = g.rows();
  const double target = g.squaredNorm() / static_cast<double>(d);
  Eigen::VectorXd sq = g.rowwise().squaredNorm();
  for (int pass = 0; pass < static_cast<int>(d); ++pass) {
    Eigen::Index hi = -1, lo = -1;
    double hi_val = target, lo_val = target;
    const double tol = 1e-14 * std::max(target, 1.0);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (sq(i) > hi_val + tol) { hi_val = sq(i); hi = i; }
      if (sq(i) < lo_val - tol) { lo_val = sq(i); lo = i; }
    }
    if (hi < 0 || lo < 0) break;
    // Find theta with ||sin(t) g_hi + cos(t) g_lo||^2 = target.
    const double a = sq(hi), b = sq(lo);
    const double c = g.row(hi).dot(g.row(lo));
    // (a - b) sin^2 t + 2 c sin t cos t + b = target
    // Parameterize u = tan(t): ((a - target) u^2 + 2 c u + (b - target)) = 0.
    const double qa = a - target, qb = 2.0 * c, qc = b - target;
    double u;
    const double disc = qb * qb - 4.0 * qa * qc;  // >= 0 since b <= target <= a
    const double sd = std::sqrt(std::max(disc, 0.0));
    // Stable quadratic root selection.
    if (qb >= 0)
      u = (2.0 * qc) / (-qb - sd);
    else
      u = (-qb + sd) / (2.0 * qa);
    const double cos_t = 1.0 / std::sqrt(1.0 + u * u);
    const double sin_t = u * cos_t;
    Eigen::RowVectorXd row_hi = g.row(hi), row_lo = g.row(lo);
    g.row(lo) = sin_t * row_hi + cos_t * row_lo;
    g.row(hi) = cos_t * row_hi - sin_t * row_lo;
    sq(lo) = g.row(lo).squaredNorm();
    sq(hi) = g.row(hi).squaredNorm();
  }
}

// k x d block with prescribed singular values and all column norms equal to
// sqrt(sum(s^2)/d).
Eigen::MatrixXd synthesize_block(int k, int d, const Eigen::VectorXd& spectrum, Rng& rng) {
  const int r = static_cast<int>(spectrum.size());
  Eigen::MatrixXd v = random_orthonormal(d, r, rng);      // d x r
  Eigen::MatrixXd g = v * spectrum.asDiagonal();          // d x r, row norms vary
  equalize_row_norms(g);
  Eigen::MatrixXd p = random_orthonormal(k, r, rng);      // k x r
  return p * g.transpose();                               // k x d
}

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
}

Eigen::MatrixXd read_matrix(std::ifstream& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      m(i, j) = v;
    }
  if (!in) throw std::runtime_error("ground truth: truncated binary file");
  return m;
}

const char* kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::Identity: return "identity";
    case FeatureKind::Fourier: return "fourier";
    case FeatureKind::PendulumPoly: return "pendulum-poly";
  }
  return "?";
}

FeatureKind kind_from_name(const std::string& s) {
  if (s == "identity") return FeatureKind::Identity;
  if (s == "fourier") return FeatureKind::Fourier;
  if (s == "pendulum-poly") return FeatureKind::PendulumPoly;
  throw std::runtime_error("ground truth: unknown feature kind " + s);
}

}  // namespace

GroundTruthModel make_ground_truth(const Dimensions& dims, Conditioning conditioning,
                                   double kappa, FeatureKind psi_x_kind, FeatureKind psi_w_kind,
                                   double sigma, std::uint64_t seed, double fourier_scale) {
  dims.validate();
  if (kappa < 1.0) throw std::invalid_argument("make_ground_truth: kappa must be >= 1");
  if (sigma < 0.0) throw std::invalid_argument("make_ground_truth: sigma must be >= 0");
  if (conditioning == Conditioning::Well) kappa = 1.0;

  GroundTruthModel gt;
  gt.dims = dims;
  gt.noise_sigma = sigma;
  gt.seed = seed;

  Rng rng(seed, Stream::Truth, 0);
  gt.b_x = random_orthonormal(dims.d_psi_x, dims.k, rng);

  // Source block spectrum. Well: all sqrt(d_ws/k). Ill(kappa): geometric with
  // end ratio kappa, scaled so the equalized columns have norm exactly 1.
  const int d_ws = dims.d_w_source;
  const int r_s = std::min(dims.k, d_ws);
  Eigen::VectorXd s(r_s);
  if (conditioning == Conditioning::Well || r_s == 1) {
    s.setConstant(std::sqrt(static_cast<double>(d_ws) / r_s));
  } else {
    for (int i = 0; i < r_s; ++i)
      s(i) = std::pow(kappa, -static_cast<double>(i) / (r_s - 1));
    s *= std::sqrt(static_cast<double>(d_ws) / s.squaredNorm());
  }
  Eigen::MatrixXd source = synthesize_block(dims.k, d_ws, s, rng);

  gt.b_w.resize(dims.k, dims.d_psi_w);
  gt.b_w.leftCols(d_ws) = source;
  const int d_t = dims.d_psi_w - d_ws;
  if (d_t > 0) {
    const int r_t = std::min(dims.k, d_t);
    Eigen::VectorXd st = Eigen::VectorXd::Constant(r_t, std::sqrt(static_cast<double>(d_t) / r_t));
    gt.b_w.rightCols(d_t) = synthesize_block(dims.k, d_t, st, rng);
  }

  if (psi_x_kind == FeatureKind::Identity) {
    if (dims.d_psi_x != dims.d_x)
      throw std::invalid_argument("make_ground_truth: identity psi_x needs d_psi_x == d_x");
    gt.psi_x = FeatureOperator::identity(dims.d_x);
  } else if (psi_x_kind == FeatureKind::Fourier) {
    gt.psi_x = FeatureOperator::random_fourier(dims.d_psi_x, dims.d_x, fourier_scale, rng);
  } else {
    throw std::invalid_argument("make_ground_truth: psi_x must be identity or fourier");
  }

  if (psi_w_kind == FeatureKind::Identity) {
    if (dims.d_psi_w != dims.d_w)
      throw std::invalid_argument("make_ground_truth: identity psi_w needs d_psi_w == d_w");
    gt.psi_w = FeatureOperator::identity(dims.d_w);
  } else if (psi_w_kind == FeatureKind::PendulumPoly) {
    if (dims.d_w != 6 || dims.d_psi_w != 13)
      throw std::invalid_argument("make_ground_truth: pendulum psi_w needs d_w=6, d_psi_w=13");
    gt.psi_w = FeatureOperator::pendulum_poly();
  } else {
    throw std::invalid_argument("make_ground_truth: psi_w must be identity or pendulum-poly");
  }
  return gt;
}

TaskSample sample_task(const GroundTruthModel& gt, const TaskSpace& space,
                       const Eigen::VectorXd& w, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_task: n must be >= 1");
  if (!space.contains(w)) throw std::invalid_argument("sample_task: w outside task space");

  TaskSample sample;
  sample.w = w;
  sample.inputs = rng.gaussian(n, gt.dims.d_x);
  const Eigen::VectorXd coeff = gt.task_coeff(w);               // k
  const Eigen::VectorXd dir = gt.b_x * coeff;                   // d_psi_x
  const Eigen::MatrixXd lifted = gt.psi_x.apply_rows(sample.inputs);
  sample.labels = lifted * dir;
  if (gt.noise_sigma > 0)
    for (int i = 0; i < n; ++i) sample.labels(i) += gt.noise_sigma * rng.normal();
  return sample;
}

void save_ground_truth(const GroundTruthModel& gt, const std::string& prefix) {
  {
    std::ofstream meta(prefix + ".meta");
    if (!meta) throw std::runtime_error("cannot write " + prefix + ".meta");
    meta << "format=almt-truth-v1\n";
    meta << "d_x=" << gt.dims.d_x << "\nd_psi_x=" << gt.dims.d_psi_x
         << "\nd_w=" << gt.dims.d_w << "\nd_w_source=" << gt.dims.d_w_source
         << "\nd_psi_w=" << gt.dims.d_psi_w << "\nk=" << gt.dims.k << "\n";
    char sigma_buf[64];
    std::snprintf(sigma_buf, sizeof sigma_buf, "%.17g", gt.noise_sigma);
    meta << "sigma=" << sigma_buf << "\nseed=" << gt.seed << "\n";
    meta << "psi_x=" << kind_name(gt.psi_x.kind) << "\npsi_w=" << kind_name(gt.psi_w.kind)
         << "\n";
  }
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + prefix + ".bin");
  write_matrix(bin, gt.b_x);
  write_matrix(bin, gt.b_w);
  if (gt.psi_x.kind == FeatureKind::Fourier) {
    write_matrix(bin, gt.psi_x.fourier_a);
    write_matrix(bin, gt.psi_x.fourier_b);
  }
}

GroundTruthModel load_ground_truth(const std::string& prefix) {
  std::ifstream meta(prefix + ".meta");
  if (!meta) throw std::runtime_error("cannot read " + prefix + ".meta");
  GroundTruthModel gt;
  std::string psi_x_name, psi_w_name, line;
  while (std::getline(meta, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "format" && val != "almt-truth-v1")
      throw std::runtime_error("ground truth: unknown format " + val);
    else if (key == "d_x") gt.dims.d_x = std::stoi(val);
    else if (key == "d_psi_x") gt.dims.d_psi_x = std::stoi(val);
    else if (key == "d_w") gt.dims.d_w = std::stoi(val);
    else if (key == "d_w_source") gt.dims.d_w_source = std::stoi(val);
    else if (key == "d_psi_w") gt.dims.d_psi_w = std::stoi(val);
    else if (key == "k") gt.dims.k = std::stoi(val);
    else if (key == "sigma") gt.noise_sigma = std::stod(val);
    else if (key == "seed") gt.seed = std::stoull(val);
    else if (key == "psi_x") psi_x_name = val;
    else if (key == "psi_w") psi_w_name = val;
  }
  gt.dims.validate();

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + prefix + ".bin");
  gt.b_x = read_matrix(bin, gt.dims.d_psi_x, gt.dims.k);
  gt.b_w = read_matrix(bin, gt.dims.k, gt.dims.d_psi_w);

  FeatureKind px = kind_from_name(psi_x_name);
  if (px == FeatureKind::Identity) {
    gt.psi_x = FeatureOperator::identity(gt.dims.d_x);
  } else if (px == FeatureKind::Fourier) {
    Eigen::MatrixXd a = read_matrix(bin, gt.dims.d_psi_x, gt.dims.d_x);
    Eigen::VectorXd b = read_matrix(bin, gt.dims.d_psi_x, 1);
    gt.psi_x = FeatureOperator::fourier(std::move(a), std::move(b));
  } else {
    throw std::runtime_error("ground truth: unsupported psi_x in file");
  }

  FeatureKind pw = kind_from_name(psi_w_name);
  gt.psi_w = pw == FeatureKind::Identity ? FeatureOperator::identity(gt.dims.d_w)
                                         : FeatureOperator::pendulum_poly();
  return gt;
}

}  // namespace almt

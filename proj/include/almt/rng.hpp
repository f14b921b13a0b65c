#ifndef ALMT_RNG_HPP
#define ALMT_RNG_HPP

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace almt {

// Named substreams split off one master seed. A (master, stream, counter)
// triple maps to one independent generator, so parallel callers never share
// state and results do not depend on scheduling order.
enum class Stream : std::uint64_t {
  Truth = 1,
  Sampling = 2,
  Training = 3,
  Eval = 4,
  Search = 5,
};

// SplitMix64 finalizer over (master, stream, counter).
std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t counter);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  Rng(std::uint64_t master, Stream stream, std::uint64_t counter)
      : gen_(derive_seed(master, stream, counter)) {}

  double normal() { return normal_(gen_); }
  double uniform() { return uniform_(gen_); }  // [0, 1)
  std::uint64_t bits() { return gen_(); }

  Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols);
  Eigen::VectorXd gaussian_vec(Eigen::Index n);
  // Uniform draw from the unit ball in R^n.
  Eigen::VectorXd ball(Eigen::Index n);

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Orthonormal columns from a QR factorization of a standard Gaussian draw.
Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

}  // namespace almt

#endif

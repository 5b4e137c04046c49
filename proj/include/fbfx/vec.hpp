#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace fbfx {

using Vec = Eigen::VectorXd;

inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// Deterministic scalar stream used for noise synthesis, probe vectors and
/// power-iteration starts. Normals come from the Box-Muller transform on top
/// of mt19937_64: per pair, u1 in (0,1] is drawn first, u2 in [0,1) second,
/// and the cosine branch is returned before the sine branch.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform in [0,1), 53-bit resolution
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // uniform in (0,1], safe as a log argument
  double uniform_open0() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  double normal();

  Vec uniform_vec(int n, double lo, double hi);
  Vec normal_vec(int n);

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fbfx

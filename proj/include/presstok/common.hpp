#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace presstok {

using Eigen::MatrixXf;
using Eigen::VectorXf;

// A time sequence of 2-D pressure maps. Each frame is stored as one
// row-major (rows x cols) grid flattened into a row of `frames`, so the
// whole signal is an (N x rows*cols) matrix. Values live in [0, 1].
struct PressureDynamics {
  int rows = 80;
  int cols = 28;
  float rate_hz = 30.0f;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> frames;

  int frame_count() const { return static_cast<int>(frames.rows()); }
  int cells() const { return rows * cols; }

  float& at(int frame, int r, int c) { return frames(frame, r * cols + c); }
  float at(int frame, int r, int c) const { return frames(frame, r * cols + c); }
};

inline PressureDynamics make_dynamics(int frames, int rows, int cols, float rate_hz) {
  PressureDynamics d;
  d.rows = rows;
  d.cols = cols;
  d.rate_hz = rate_hz;
  d.frames.setZero(frames, rows * cols);
  return d;
}

// FNV-1a, used for config hashes and weight fingerprints.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const uint8_t*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string hex64(uint64_t v);

// Deterministic RNG wrapper. All sampling in the project goes through
// explicit instances of this; there is no global random state.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t raw() { return eng_(); }

  // Uniform in [0, n).
  int64_t uniform_int(int64_t n) {
    return static_cast<int64_t>(eng_() % static_cast<uint64_t>(n));
  }

  double uniform(double lo = 0.0, double hi = 1.0) {
    // 53-bit mantissa draw; avoids distribution objects so the stream is
    // stable across standard library implementations.
    double u = static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0);
    return lo + u * (hi - lo);
  }

  float gaussian(float stddev = 1.0f) {
    // Box-Muller on two uniform draws.
    double u1 = uniform(1e-12, 1.0);
    double u2 = uniform();
    return static_cast<float>(stddev * std::sqrt(-2.0 * std::log(u1)) *
                              std::cos(2.0 * 3.14159265358979323846 * u2));
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), order arbitrary but deterministic.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::mt19937_64 eng_;
};

}  // namespace presstok

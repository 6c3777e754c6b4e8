#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gauss {

// Clamp floor used inside every logarithm in losses and metrics.
inline constexpr double kLogEps = 1e-7;

// Input data is invalid or inconsistent (bad file, shape mismatch,
// violated invariant). CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A computation produced NaN/Inf or an otherwise unusable number.
// CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// All randomness in the project flows from one root seed; subsystems get
// child seeds derived from fixed labels so adding a consumer never shifts
// the stream of another.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t label) {
  return splitmix64(root ^ splitmix64(label));
}

namespace seed_label {
inline constexpr std::uint64_t kInitAn = 0x01;
inline constexpr std::uint64_t kInitUn = 0x02;
inline constexpr std::uint64_t kInitMn = 0x03;
inline constexpr std::uint64_t kStageAn = 0x10;
inline constexpr std::uint64_t kStageUn = 0x11;
inline constexpr std::uint64_t kStageMn = 0x12;
inline constexpr std::uint64_t kStageBlindEncoder = 0x13;
inline constexpr std::uint64_t kStageBlindDecoder = 0x14;
inline constexpr std::uint64_t kSynthAbundance = 0x20;
inline constexpr std::uint64_t kSynthNoise = 0x21;
inline constexpr std::uint64_t kKmeans = 0x30;
}  // namespace seed_label

// Deterministic RNG used everywhere. std::mt19937_64 gives a portable bit
// stream, but the standard distributions do not, so the draw methods are
// implemented here from raw 64-bit outputs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0xd1b54a32d192ed03ULL)) {}

  std::uint64_t next_u64() {
    // xorshift* layered over splitmix-scrambled state; portable and fast.
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dULL;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-shift; bias is < n / 2^64.
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller (one value per call, cached pair).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gauss

// Small shared utilities: error type, entropy helpers, deterministic RNG.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcap {

// All recoverable failures (bad input files, invalid models, solver
// preconditions) surface as QcapError; callers that want exit codes catch it.
class QcapError : public std::runtime_error {
 public:
  explicit QcapError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr double kLog2E = 1.4426950408889634074;  // 1/ln(2)

// x*log2(x) with the usual 0*log(0)=0 convention.
inline double xlog2x(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

// Binary entropy in bits.
inline double h2(double x) { return -xlog2x(x) - xlog2x(1.0 - x); }

// Entropy in bits of an unnormalized nonnegative vector interpreted as a pmf.
inline double entropy_bits(const std::vector<double>& p) {
  double tot = 0.0, acc = 0.0;
  for (double v : p) tot += v;
  if (tot <= 0.0) return 0.0;
  for (double v : p) acc -= xlog2x(v / tot);
  return acc;
}

// Counter-based pseudo-random generator (splitmix64 over seed+counter).
// Every stochastic component takes an explicit seed so runs replay exactly;
// distinct streams are derived by hashing a stream id into the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : base_(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1))), ctr_(0) {}

  std::uint64_t next_u64() {
    std::uint64_t z = base_ + 0x9e3779b97f4a7c15ULL * ++ctr_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in (0,1); never returns 0 so logs are safe.
  double next_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Dirichlet(1,...,1) sample of length n (uniform on the simplex).
  std::vector<double> next_simplex(int n) {
    std::vector<double> v(n);
    double tot = 0.0;
    for (int i = 0; i < n; ++i) {
      v[i] = -std::log(next_double());
      tot += v[i];
    }
    for (int i = 0; i < n; ++i) v[i] /= tot;
    return v;
  }

 private:
  std::uint64_t base_;
  std::uint64_t ctr_;
};

}  // namespace qcap

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pw {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Matrix = Eigen::MatrixXd;

// Precondition violations on caller-supplied values.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent data (files, configs, topology).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or degenerate numerics detected at runtime.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_str(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent seed for a named sub-stream. All randomness in the
// pipeline flows through this so runs are reproducible from one root seed.
inline uint64_t subseed(uint64_t root, const std::string& purpose, uint64_t a = 0, uint64_t b = 0) {
  uint64_t h = splitmix64(root ^ hash_str(purpose));
  h = splitmix64(h ^ (a + 0x9e3779b97f4a7c15ULL));
  h = splitmix64(h ^ (b + 0x7f4a7c159e3779b9ULL));
  return h;
}

using Rng = std::mt19937_64;

// Number of worker threads. Reads PW_THREADS once; defaults to the hardware
// count. Every parallel loop in the library writes disjoint output slots and
// all reductions happen sequentially afterwards, so results do not depend on
// the thread count.
int thread_count();
void set_thread_count(int n);

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn);

// Convenience per-index form.
void parallel_for_each(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pw

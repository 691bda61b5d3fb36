#pragma once

#include <complex>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace qstab {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using Vector3c = Eigen::Vector3cd;

/// Bad user input: malformed config, violated precondition.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical stage failed (solver stagnation, non-contraction, ...).
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A built object violates one of its stated invariants.
struct invariant_error : std::runtime_error {
  explicit invariant_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw config_error(msg);
}

// FNV-1a, used for content keys of cached artifacts.
struct Hasher {
  std::uint64_t state = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      state ^= b[i];
      state *= 1099511628211ull;
    }
  }
  void add(double x) { bytes(&x, sizeof x); }
  void add(std::int64_t x) { bytes(&x, sizeof x); }
  void add(const std::string& s) { bytes(s.data(), s.size()); }
  void add(const VectorXcd& v) { bytes(v.data(), sizeof(cplx) * v.size()); }
  void add(const VectorXd& v) { bytes(v.data(), sizeof(double) * v.size()); }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state));
    return buf;
  }
};

/// Chunked parallel loop with deterministic work assignment. Results must be
/// written to disjoint, index-addressed slots; reductions happen afterwards
/// in index order.
inline void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int nt = static_cast<int>(std::min<std::int64_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::exception_ptr err;
  std::mutex err_mutex;
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (std::int64_t i = t; i < n; i += nt) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

/// Single RNG type used everywhere; seeded from the experiment config.
using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace qstab

#pragma once

#include <fftw3.h>

#include <map>
#include <tuple>

#include "qstab/core.hpp"

namespace qstab {

/// Serialized access to FFTW planning plus a small plan cache. Plans are
/// created with FFTW_ESTIMATE (deterministic plan selection) and own their
/// work buffer; execution copies through it, which is negligible next to the
/// transform itself.
class Fft3 {
 public:
  /// In-place 3D transform of an n^3 cube stored lexicographically
  /// (x slowest), sign = FFTW_FORWARD (-1) or FFTW_BACKWARD (+1). Unscaled.
  static void transform(VectorXcd& data, int n, int sign) {
    auto& self = instance();
    std::lock_guard<std::mutex> lock(self.mutex_);
    Plan& p = self.plan(n, sign);
    std::memcpy(p.buf, data.data(), sizeof(cplx) * data.size());
    fftw_execute(p.plan);
    std::memcpy(data.data(), p.buf, sizeof(cplx) * data.size());
  }

 private:
  struct Plan {
    fftw_complex* buf = nullptr;
    fftw_plan plan = nullptr;
    ~Plan() {
      if (plan) fftw_destroy_plan(plan);
      if (buf) fftw_free(buf);
    }
  };
  std::mutex mutex_;
  std::map<std::pair<int, int>, Plan> plans_;

  static Fft3& instance() {
    static Fft3 self;
    return self;
  }
  Plan& plan(int n, int sign) {
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    Plan& p = plans_[key];
    const std::size_t total = static_cast<std::size_t>(n) * n * n;
    p.buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
    p.plan = fftw_plan_dft_3d(n, n, n, p.buf, p.buf, sign, FFTW_ESTIMATE);
    if (!p.plan) throw numerical_error("fftw: plan creation failed");
    return p;
  }
};

/// Signed lattice index for FFT bin i of an n-point transform.
inline int signed_mode(int i, int n) { return i <= n / 2 ? i : i - n; }

}  // namespace qstab

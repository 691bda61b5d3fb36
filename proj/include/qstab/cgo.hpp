#pragma once

#include <optional>

#include "qstab/fft.hpp"
#include "qstab/potential.hpp"

namespace qstab {

/// Complex frequency pair zeta_1/2 = -xi/2 +- (b omega_1 + i a omega_2) with
/// b = sqrt(k^2 + a^2 - |xi|^2/4), so that zeta.zeta = k^2, zeta_1+zeta_2 = -xi
/// and |zeta|^2 = k^2 + 2 a^2.
struct ZetaPair {
  Vector3d xi = Vector3d::Zero();
  double k = 0;
  double a = 0;
  Vector3d omega1 = Vector3d::UnitX();
  Vector3d omega2 = Vector3d::UnitY();
  Vector3c zeta1 = Vector3c::Zero();
  Vector3c zeta2 = Vector3c::Zero();
};

inline ZetaPair make_zeta_pair(const Vector3d& xi, double k, double a,
                               std::optional<std::pair<Vector3d, Vector3d>> frame = {}) {
  require(k >= 0 && a >= 0, "make_zeta_pair: k and a must be nonnegative");
  const double disc = k * k + a * a - 0.25 * xi.squaredNorm();
  require(disc >= 0, "make_zeta_pair: need k^2 + a^2 >= |xi|^2/4");

  ZetaPair p;
  p.xi = xi;
  p.k = k;
  p.a = a;
  if (frame) {
    p.omega1 = frame->first;
    p.omega2 = frame->second;
  } else if (xi.norm() == 0) {
    p.omega1 = Vector3d::UnitX();
    p.omega2 = Vector3d::UnitY();
  } else {
    // Gram-Schmidt of the coordinate directions against xi, keeping the two
    // smallest-index ones that survive
    std::vector<Vector3d> kept;
    const Vector3d xin = xi.normalized();
    for (int d = 0; d < 3 && kept.size() < 2; ++d) {
      Vector3d v = Vector3d::Unit(d);
      v -= v.dot(xin) * xin;
      for (const auto& w : kept) v -= v.dot(w) * w;
      if (v.norm() > 1e-10) kept.push_back(v.normalized());
    }
    require(kept.size() == 2, "make_zeta_pair: failed to build an orthonormal frame");
    p.omega1 = kept[0];
    p.omega2 = kept[1];
  }
  require(std::abs(p.omega1.dot(xi)) <= 1e-12 * std::max(1.0, xi.norm()) &&
              std::abs(p.omega2.dot(xi)) <= 1e-12 * std::max(1.0, xi.norm()) &&
              std::abs(p.omega1.dot(p.omega2)) <= 1e-13 &&
              std::abs(p.omega1.norm() - 1) <= 1e-13 && std::abs(p.omega2.norm() - 1) <= 1e-13,
          "make_zeta_pair: frame is not orthonormal to xi");

  const double b = std::sqrt(disc);
  for (int d = 0; d < 3; ++d) {
    p.zeta1[d] = cplx(-0.5 * xi[d] + b * p.omega1[d], a * p.omega2[d]);
    p.zeta2[d] = cplx(-0.5 * xi[d] - b * p.omega1[d], -a * p.omega2[d]);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Periodic cells

/// Cubic period cell [origin, origin + side)^3 sampled on an n^3 lattice.
struct PeriodCell {
  double origin = 0;
  double side = 0;
  int n = 0;

  double spacing() const { return side / n; }
  std::int64_t size() const { return static_cast<std::int64_t>(n) * n * n; }
  Vector3d point(int i, int j, int k) const {
    const double h = spacing();
    return {origin + i * h, origin + j * h, origin + k * h};
  }
  std::int64_t idx(int i, int j, int k) const { return (static_cast<std::int64_t>(i) * n + j) * n + k; }
};

namespace detail {

inline bool fft_friendly(int n) {
  for (int f : {2, 3, 5, 7})
    while (n % f == 0) n /= f;
  return n == 1;
}

}  // namespace detail

/// A period cell aligned with (and at the spacing of) the given grid, at
/// least twice its extent on every side. Grid nodes coincide with cell
/// lattice points, so fields move between the two without interpolation.
inline PeriodCell aligned_cell(const Grid& g) {
  const double h = g.spacing();
  int K = 2 * (g.n - 1);
  while (!detail::fft_friendly(K)) ++K;
  PeriodCell c;
  c.n = K;
  c.side = K * h;
  const int lead = (K - (g.n - 1)) / 2;
  c.origin = g.origin - lead * h;
  return c;
}

template <class F>
VectorXcd sample_on_cell(const PeriodCell& c, F&& f) {
  VectorXcd v(c.size());
  for (int i = 0; i < c.n; ++i)
    for (int j = 0; j < c.n; ++j)
      for (int k = 0; k < c.n; ++k) v[c.idx(i, j, k)] = f(c.point(i, j, k));
  return v;
}

/// Zero-extension of a grid potential onto an aligned cell.
inline VectorXcd sample_grid_potential_on_cell(const Grid& g, const Potential& q,
                                               const PeriodCell& c) {
  const double h = g.spacing();
  require(std::abs(c.spacing() - h) < 1e-12 * h, "cell is not at the grid spacing");
  const double off = (g.origin - c.origin) / h;
  const int m = static_cast<int>(std::llround(off));
  require(std::abs(off - m) < 1e-9, "cell lattice is not aligned with the grid");
  require(m >= 0 && m + g.n <= c.n, "grid does not fit inside the cell");
  VectorXcd v = VectorXcd::Zero(c.size());
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k) v[c.idx(i + m, j + m, k + m)] = q.values[g.id(i, j, k)];
  return v;
}

// ---------------------------------------------------------------------------
// CGO remainder fixed point

struct CgoOptions {
  double tol = 1e-10;       // relative update stopping threshold
  int max_iter = 200;
  double c0 = 2.0;          // admissibility a >= max(c0 * M, 1)
  double min_symbol = 1e-12;
};

struct CGOSolution {
  Vector3c zeta = Vector3c::Zero();
  PeriodCell cell;
  VectorXcd r;             // remainder samples on the cell lattice
  double residual_l2 = 0;  // relative equation residual on the cell
  double r_l2 = 0;         // L2 of r over the measurement box (or the cell)
  double r_linf = 0;
  int iterations = 0;
  Vector3d shift = Vector3d::Zero();  // frequency-lattice shift
};

/// Solve (-lap - 2 i zeta . grad) r = -q (1 + r) on the period cell by the
/// contraction r <- -G[q(1+r)], where G is the Fourier multiplier with symbol
/// 1/(|m|^2 + 2 zeta . m) on a frequency lattice shifted by half a step along
/// Im(zeta)/|Im zeta|. The shift keeps |Im symbol| >= a*(2pi/side) whenever
/// the imaginary direction is a lattice axis; the magnitude is checked and the
/// call rejected if the symbol comes close to vanishing.
inline CGOSolution cgo_remainder(const VectorXcd& q_cell, double q_linf, const Vector3c& zeta,
                                 const PeriodCell& cell, const CgoOptions& opts = {},
                                 std::optional<std::pair<Vector3d, Vector3d>> measure_box = {}) {
  require(q_cell.size() == cell.size(), "cgo_remainder: potential samples do not match the cell");
  const Vector3d im = zeta.imag();
  const double a = im.norm();
  require(a >= std::max(opts.c0 * q_linf, 1.0) * (1 - 1e-12),
          "cgo_remainder: need |Im zeta| >= max(c0*M, 1), got a=" + std::to_string(a));
  if (measure_box)
    require(cell.side >= 2.0 * (measure_box->second - measure_box->first).maxCoeff() * (1 - 1e-12),
            "cgo_remainder: cell must be at least twice the measurement box");

  const int n = cell.n;
  const double kappa = 2 * M_PI / cell.side;
  const Vector3d shift = 0.5 * kappa * (im / a);

  // 1/symbol on the shifted lattice
  VectorXcd inv_p(cell.size());
  double min_abs = std::numeric_limits<double>::infinity();
  {
    std::int64_t t = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k, ++t) {
          const Vector3d m(kappa * signed_mode(i, n) + shift[0],
                           kappa * signed_mode(j, n) + shift[1],
                           kappa * signed_mode(k, n) + shift[2]);
          const cplx p = cplx(m.squaredNorm(), 0) +
                         2.0 * (zeta[0] * m[0] + zeta[1] * m[1] + zeta[2] * m[2]);
          min_abs = std::min(min_abs, std::abs(p));
          inv_p[t] = 1.0 / p;
        }
  }
  if (min_abs < opts.min_symbol)
    throw numerical_error("cgo_remainder: multiplier symbol nearly vanishes (min |p| = " +
                          std::to_string(min_abs) + "); shift misconfigured for this frame");

  // modulation that moves the shifted expansion onto the integer lattice
  VectorXcd mod(cell.size());
  {
    std::int64_t t = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k, ++t) mod[t] = std::exp(cplx(0, -shift.dot(cell.point(i, j, k))));
  }

  auto apply_g = [&](const VectorXcd& f) {
    VectorXcd w = f.cwiseProduct(mod);
    Fft3::transform(w, n, FFTW_FORWARD);
    w = w.cwiseProduct(inv_p);
    Fft3::transform(w, n, FFTW_BACKWARD);
    w /= double(cell.size());
    return w.cwiseQuotient(mod).eval();
  };

  CGOSolution sol;
  sol.zeta = zeta;
  sol.cell = cell;
  sol.shift = shift;
  sol.r = VectorXcd::Zero(cell.size());
  double prev_update = std::numeric_limits<double>::infinity();
  int growth_streak = 0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    VectorXcd rhs = q_cell.cwiseProduct(VectorXcd::Constant(cell.size(), 1.0) + sol.r);
    VectorXcd next = -apply_g(rhs);
    const double update = (next - sol.r).norm();
    const double scale = std::max(next.norm(), 1e-300);
    sol.r = std::move(next);
    sol.iterations = it;
    if (update > prev_update * (1 + 1e-14)) {
      if (++growth_streak >= 3)
        throw numerical_error(
            "cgo_remainder: fixed point is not contracting; raise a (|Im zeta|)");
    } else {
      growth_streak = 0;
    }
    prev_update = update;
    if (update <= opts.tol * scale) break;
  }

  // spectral residual of (-lap - 2 i zeta.grad) r + q (1 + r)
  {
    VectorXcd w = sol.r.cwiseProduct(mod);
    Fft3::transform(w, n, FFTW_FORWARD);
    for (std::int64_t t = 0; t < cell.size(); ++t) w[t] /= inv_p[t];
    Fft3::transform(w, n, FFTW_BACKWARD);
    w /= double(cell.size());
    w = w.cwiseQuotient(mod);
    VectorXcd rhs = q_cell.cwiseProduct(VectorXcd::Constant(cell.size(), 1.0) + sol.r);
    const double denom = std::max(rhs.norm(), 1e-300);
    sol.residual_l2 = (w + rhs).norm() / denom;
  }

  const double h3 = std::pow(cell.spacing(), 3);
  if (measure_box) {
    double acc = 0, linf = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const Vector3d x = cell.point(i, j, k);
          bool in = true;
          for (int d = 0; d < 3; ++d)
            in = in && x[d] >= measure_box->first[d] - 1e-12 && x[d] <= measure_box->second[d] + 1e-12;
          if (!in) continue;
          const double v = std::abs(sol.r[cell.idx(i, j, k)]);
          acc += v * v;
          linf = std::max(linf, v);
        }
    sol.r_l2 = std::sqrt(acc * h3);
    sol.r_linf = linf;
  } else {
    sol.r_l2 = std::sqrt(sol.r.squaredNorm() * h3);
    sol.r_linf = sol.r.cwiseAbs().maxCoeff();
  }
  return sol;
}

/// e^{i zeta . x} (1 + r(x)) sampled on grid nodes. Uses the exact lattice
/// lookup when the grid is aligned with the cell and trigonometric
/// interpolation (tensor contraction over the cell spectrum) otherwise.
inline Field cgo_field(const CGOSolution& sol, const Grid& g) {
  const PeriodCell& c = sol.cell;
  Field u = Field::zeros_full(g);

  const double off = (g.origin - c.origin) / c.spacing();
  const int m0 = static_cast<int>(std::llround(off));
  const bool aligned = std::abs(c.spacing() - g.spacing()) < 1e-12 * g.spacing() &&
                       std::abs(off - m0) < 1e-9 && m0 >= 0 && m0 + g.n <= c.n;

  VectorXcd r_on_grid(g.size());
  if (aligned) {
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        for (int k = 0; k < g.n; ++k)
          r_on_grid[g.id(i, j, k)] = sol.r[c.idx(i + m0, j + m0, k + m0)];
  } else {
    // spectrum of the periodic part
    VectorXcd coef = sol.r;
    {
      std::int64_t t = 0;
      for (int i = 0; i < c.n; ++i)
        for (int j = 0; j < c.n; ++j)
          for (int k = 0; k < c.n; ++k, ++t)
            coef[t] *= std::exp(cplx(0, -sol.shift.dot(c.point(i, j, k))));
    }
    Fft3::transform(coef, c.n, FFTW_FORWARD);
    coef /= double(c.size());
    const double kappa = 2 * M_PI / c.side;
    // per-axis evaluation matrices e^{i kappa m x~}
    MatrixXcd e(c.n, g.n);
    for (int mm = 0; mm < c.n; ++mm)
      for (int t = 0; t < g.n; ++t) {
        const double xt = g.origin + t * g.spacing() - c.origin;
        e(mm, t) = std::exp(cplx(0, kappa * signed_mode(mm, c.n) * xt));
      }
    const int N = c.n, T = g.n;
    // contract the z axis, then y, then x; cells are small enough on the
    // non-aligned path that plain loops suffice
    std::vector<cplx> t1(static_cast<std::size_t>(N) * N * T);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        const cplx* row = coef.data() + (static_cast<std::int64_t>(i) * N + j) * N;
        for (int t = 0; t < T; ++t) {
          cplx acc = 0;
          for (int mm = 0; mm < N; ++mm) acc += row[mm] * e(mm, t);
          t1[(static_cast<std::size_t>(i) * N + j) * T + t] = acc;
        }
      }
    std::vector<cplx> t2(static_cast<std::size_t>(N) * T * T);
    for (int i = 0; i < N; ++i)
      for (int t3 = 0; t3 < T; ++t3)
        for (int t2i = 0; t2i < T; ++t2i) {
          cplx acc = 0;
          for (int mm = 0; mm < N; ++mm)
            acc += t1[(static_cast<std::size_t>(i) * N + mm) * T + t3] * e(mm, t2i);
          t2[(static_cast<std::size_t>(i) * T + t2i) * T + t3] = acc;
        }
    for (int t1i = 0; t1i < T; ++t1i)
      for (int t2i = 0; t2i < T; ++t2i)
        for (int t3 = 0; t3 < T; ++t3) {
          cplx acc = 0;
          for (int mm = 0; mm < N; ++mm)
            acc += t2[(static_cast<std::size_t>(mm) * T + t2i) * T + t3] * e(mm, t1i);
          r_on_grid[g.id(t1i, t2i, t3)] = acc;
        }
    for (std::int64_t id = 0; id < g.size(); ++id) {
      const Vector3d x = g.coord(static_cast<int>(id));
      r_on_grid[id] *= std::exp(cplx(0, sol.shift.dot(x)));
    }
  }

  for (std::int64_t id = 0; id < g.size(); ++id) {
    const Vector3d x = g.coord(static_cast<int>(id));
    const cplx phase = std::exp(cplx(0, 1) * (sol.zeta[0] * x[0] + sol.zeta[1] * x[1] +
                                              sol.zeta[2] * x[2]));
    u.values[id] = phase * (1.0 + r_on_grid[id]);
  }
  return u;
}

}  // namespace qstab

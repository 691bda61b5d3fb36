#pragma once

#include <Eigen/IterativeLinearSolvers>

#include <limits>

#include "qstab/norms.hpp"
#include "qstab/potential.hpp"

namespace qstab {

struct SolverOptions {
  double tol = 1e-10;            // relative residual, iterative path
  int max_iter = 0;              // 0 -> 10 * unknowns^(1/3) * 100
  int direct_threshold = 40 * 40 * 40;  // direct factorization below this many unknowns
  double max_k_h = 0.6;          // pollution guard on k * spacing
  bool override_pollution = false;
  double a2_c = 0.01;            // constant in the spectral-gap admissibility test
  bool override_gap = false;     // solve even when the gap test fails
  int gap_eigs = 8;              // how many nearby eigenvalues to resolve
  int gap_lanczos_iters = 80;

  int resolved_max_iter(std::int64_t unknowns) const {
    return max_iter > 0 ? max_iter
                        : static_cast<int>(10.0 * std::cbrt(double(unknowns)) * 100.0);
  }
};

struct SpectralGapReport {
  double k = 0;
  double gap = 0;        // dist(k^2, nearby discrete eigenvalues of -lap + q)
  double threshold = 0;  // c * k^(2-n), n = 3
  bool pass = false;
  bool converged = true;  // eigen-iteration health; pass=false when not converged
  std::vector<double> nearest;
};

/// Factorized (or iterative) discrete Helmholtz operator -lap - k^2 + q on the
/// interior nodes of a grid, with a fast real-arithmetic path for real
/// potentials. One context serves many right-hand sides.
class HelmholtzContext {
 public:
  HelmholtzContext(const Grid& grid, const Potential& q, double k, SolverOptions opts = {})
      : grid_(grid), q_(q), k_(k), opts_(opts) {
    require(q.values.size() == grid.size(), "helmholtz: potential does not match the grid");
    if (k * grid.spacing() > opts.max_k_h && !opts.override_pollution)
      throw config_error("helmholtz: k*h = " + std::to_string(k * grid.spacing()) +
                         " exceeds the pollution bound " + std::to_string(opts.max_k_h) +
                         " (about ten points per wavelength); override to proceed");
    build_index();
    real_path_ = q.is_real(0.0);
    const std::int64_t unknowns = static_cast<std::int64_t>(interior_.size());
    iterative_ = unknowns >= opts.direct_threshold;
    if (real_path_)
      assemble_real();
    else
      assemble_complex();
    if (!iterative_) factorize();
  }

  const Grid& grid() const { return grid_; }
  const Potential& potential() const { return q_; }
  double k() const { return k_; }
  const SolverOptions& options() const { return opts_; }
  bool real_path() const { return real_path_; }
  int interior_count() const { return static_cast<int>(interior_.size()); }
  int interior_node(int idx) const { return interior_[idx]; }
  int interior_index(int node) const { return int_index_[node]; }

  /// x = A^{-1} rhs on interior unknowns.
  VectorXcd solve_interior(const VectorXcd& rhs) const {
    if (real_path_) {
      VectorXd xr = solve_real(rhs.real());
      VectorXd xi = solve_real(rhs.imag());
      VectorXcd x(rhs.size());
      x.real() = xr;
      x.imag() = xi;
      return x;
    }
    return solve_complex(rhs);
  }

  /// Real solve, available on the real path only (used by column assembly).
  VectorXd solve_interior_real(const VectorXd& rhs) const {
    require(real_path_, "helmholtz: real solve requested on a complex operator");
    return solve_real(rhs);
  }

  /// Distance from k^2 to the nearby spectrum of -lap + q, reusing this
  /// context's factorization (the system matrix is exactly the shifted one).
  SpectralGapReport spectral_gap() const {
    SpectralGapReport rep;
    rep.k = k_;
    rep.threshold = opts_.a2_c * std::pow(k_, 2.0 - 3.0);
    if (!real_path_ || iterative_) {
      // conservative: resolve the gap with a dedicated real operator on Re(q)
      rep = spectral_gap_dedicated();
      return rep;
    }
    try {
      auto solve = [this](const VectorXd& b) { return solve_real(b); };
      rep.nearest = shift_invert_eigenvalues(interior_count(), k_ * k_, solve, opts_.gap_eigs,
                                             opts_.gap_lanczos_iters);
    } catch (const std::exception&) {
      rep.converged = false;
      rep.pass = false;
      return rep;
    }
    if (rep.nearest.empty()) {
      rep.converged = false;
      rep.pass = false;
      return rep;
    }
    rep.gap = std::abs(rep.nearest.front() - k_ * k_);
    rep.pass = rep.gap > rep.threshold;
    return rep;
  }

 private:
  const Grid& grid_;
  Potential q_;
  double k_;
  SolverOptions opts_;
  bool real_path_ = false;
  bool iterative_ = false;
  std::vector<int> interior_;
  std::vector<int> int_index_;
  SparseD a_real_;
  SparseC a_cplx_;
  Eigen::SparseLU<SparseD> lu_real_;
  Eigen::SparseLU<SparseC> lu_cplx_;

  void build_index() {
    int_index_.assign(grid_.size(), -1);
    for (std::int64_t id = 0; id < grid_.size(); ++id)
      if (!grid_.on_boundary(static_cast<int>(id))) {
        int_index_[id] = static_cast<int>(interior_.size());
        interior_.push_back(static_cast<int>(id));
      }
  }

  template <class Scalar>
  Eigen::SparseMatrix<Scalar> assemble(const std::function<Scalar(std::int64_t)>& qval) const {
    const double h = grid_.spacing();
    const double ih2 = 1.0 / (h * h);
    std::vector<Eigen::Triplet<Scalar>> trip;
    trip.reserve(interior_.size() * 7);
    for (std::size_t r = 0; r < interior_.size(); ++r) {
      const int node = interior_[r];
      const auto a = grid_.ijk(node);
      trip.emplace_back(static_cast<int>(r), static_cast<int>(r),
                        Scalar(6.0 * ih2 - k_ * k_) + qval(node));
      for (int axis = 0; axis < 3; ++axis)
        for (int dir = -1; dir <= 1; dir += 2) {
          int b[3] = {a[0], a[1], a[2]};
          b[axis] += dir;
          const int nb = grid_.id(b[0], b[1], b[2]);
          const int c = int_index_[nb];
          if (c >= 0) trip.emplace_back(static_cast<int>(r), c, Scalar(-ih2));
        }
    }
    Eigen::SparseMatrix<Scalar> m(interior_.size(), interior_.size());
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
  }

  void assemble_real() {
    a_real_ = assemble<double>([this](std::int64_t id) { return q_.values[id].real(); });
  }
  void assemble_complex() {
    a_cplx_ = assemble<cplx>([this](std::int64_t id) { return q_.values[id]; });
  }

  void factorize() {
    if (real_path_) {
      lu_real_.analyzePattern(a_real_);
      lu_real_.factorize(a_real_);
      if (lu_real_.info() != Eigen::Success)
        throw numerical_error("helmholtz: sparse factorization failed (k^2 on the spectrum?)");
    } else {
      lu_cplx_.analyzePattern(a_cplx_);
      lu_cplx_.factorize(a_cplx_);
      if (lu_cplx_.info() != Eigen::Success)
        throw numerical_error("helmholtz: sparse factorization failed (k^2 on the spectrum?)");
    }
  }

  VectorXd solve_real(const VectorXd& rhs) const {
    if (!iterative_) return lu_real_.solve(rhs);
    Eigen::BiCGSTAB<SparseD, Eigen::IncompleteLUT<double>> it;
    it.setTolerance(opts_.tol);
    it.setMaxIterations(opts_.resolved_max_iter(interior_.size()));
    it.compute(a_real_);
    VectorXd x = it.solve(rhs);
    if (it.info() != Eigen::Success)
      throw numerical_error("helmholtz: iterative solver did not converge after " +
                            std::to_string(it.iterations()) +
                            " iterations, residual = " + std::to_string(it.error()));
    return x;
  }
  VectorXcd solve_complex(const VectorXcd& rhs) const {
    if (!iterative_) return lu_cplx_.solve(rhs);
    Eigen::BiCGSTAB<SparseC, Eigen::IncompleteLUT<cplx>> it;
    it.setTolerance(opts_.tol);
    it.setMaxIterations(opts_.resolved_max_iter(interior_.size()));
    it.compute(a_cplx_);
    VectorXcd x = it.solve(rhs);
    if (it.info() != Eigen::Success)
      throw numerical_error("helmholtz: iterative solver did not converge after " +
                            std::to_string(it.iterations()) +
                            " iterations, residual = " + std::to_string(it.error()));
    return x;
  }

  SpectralGapReport spectral_gap_dedicated() const {
    // build a real operator from Re(q) and factor it separately
    Potential qr = q_;
    for (std::int64_t i = 0; i < qr.values.size(); ++i)
      qr.values[i] = cplx(qr.values[i].real(), 0.0);
    SolverOptions o = opts_;
    o.direct_threshold = std::numeric_limits<int>::max();  // force direct
    o.override_pollution = true;
    HelmholtzContext ctx(grid_, qr, k_, o);
    return ctx.spectral_gap();
  }
};

/// Admissibility check: dist(k^2, nearby discrete spectrum of -lap+q) must
/// exceed c * k^(2-n).
inline SpectralGapReport spectral_gap(const Grid& g, const Potential& q, double k,
                                      SolverOptions opts = {}) {
  opts.override_pollution = true;  // the gap probe itself needs no wave resolution
  HelmholtzContext ctx(g, q, k, opts);
  return ctx.spectral_gap();
}

namespace detail {

inline void check_gap_or_throw(const HelmholtzContext& ctx) {
  if (ctx.options().override_gap) return;
  SpectralGapReport rep = ctx.spectral_gap();
  if (!rep.pass)
    throw numerical_error(
        "helmholtz: spectral-gap admissibility failed (gap=" + std::to_string(rep.gap) +
        ", threshold=" + std::to_string(rep.threshold) + "); override to proceed");
}

}  // namespace detail

/// Interior right-hand side produced by Dirichlet data f on the surface.
inline VectorXcd dirichlet_rhs(const HelmholtzContext& ctx, const Field& f) {
  const Grid& g = ctx.grid();
  require(f.kind == FieldKind::boundary, "solve_dirichlet: boundary trace expected");
  require(f.values.size() == static_cast<std::int64_t>(g.surface.size()),
          "solve_dirichlet: trace length mismatch");
  const double ih2 = 1.0 / (g.spacing() * g.spacing());
  VectorXcd rhs = VectorXcd::Zero(ctx.interior_count());
  for (int r = 0; r < ctx.interior_count(); ++r) {
    const auto a = g.ijk(ctx.interior_node(r));
    for (int axis = 0; axis < 3; ++axis)
      for (int dir = -1; dir <= 1; dir += 2) {
        int b[3] = {a[0], a[1], a[2]};
        b[axis] += dir;
        const int nb = g.id(b[0], b[1], b[2]);
        const int s = g.surface_index[nb];
        if (s >= 0) rhs[r] += ih2 * f.values[s];
      }
  }
  return rhs;
}

inline Field assemble_full(const HelmholtzContext& ctx, const VectorXcd& interior,
                           const Field* f_boundary) {
  const Grid& g = ctx.grid();
  Field u = Field::zeros_full(g);
  for (int r = 0; r < ctx.interior_count(); ++r) u.values[ctx.interior_node(r)] = interior[r];
  if (f_boundary)
    for (std::size_t s = 0; s < g.surface.size(); ++s)
      u.values[g.surface[s]] = f_boundary->values[s];
  return u;
}

/// Solution of (-lap - k^2 + q) u = 0 with u = f on the surface.
inline Field solve_dirichlet(const HelmholtzContext& ctx, const Field& f, bool skip_gap_check = false) {
  if (!skip_gap_check) detail::check_gap_or_throw(ctx);
  VectorXcd x = ctx.solve_interior(dirichlet_rhs(ctx, f));
  return assemble_full(ctx, x, &f);
}

/// Solution of (-lap - k^2 + q) u = src with zero Dirichlet data.
inline Field solve_source(const HelmholtzContext& ctx, const Field& src, bool skip_gap_check = false) {
  const Grid& g = ctx.grid();
  require(src.kind == FieldKind::full, "solve_source: full-grid source expected");
  for (int s : g.surface)
    require(src.values[s] == cplx(0, 0), "solve_source: source must be supported on interior nodes");
  if (!skip_gap_check) detail::check_gap_or_throw(ctx);
  VectorXcd rhs(ctx.interior_count());
  for (int r = 0; r < ctx.interior_count(); ++r) rhs[r] = src.values[ctx.interior_node(r)];
  VectorXcd x = ctx.solve_interior(rhs);
  return assemble_full(ctx, x, nullptr);
}

/// (-lap_h - k^2 + q) u evaluated on interior nodes (boundary entries zero);
/// the residual diagnostic for fields that claim to solve the equation.
inline Field apply_operator(const Grid& g, const Potential& q, double k, const Field& u) {
  require(u.kind == FieldKind::full, "apply_operator: full field expected");
  const double ih2 = 1.0 / (g.spacing() * g.spacing());
  Field out = Field::zeros_full(g);
  for (std::int64_t id = 0; id < g.size(); ++id) {
    if (g.on_boundary(static_cast<int>(id))) continue;
    const auto a = g.ijk(static_cast<int>(id));
    cplx acc = (6.0 * ih2 - k * k + q.values[id]) * u.values[id];
    for (int axis = 0; axis < 3; ++axis)
      for (int dir = -1; dir <= 1; dir += 2) {
        int b[3] = {a[0], a[1], a[2]};
        b[axis] += dir;
        acc -= ih2 * u.values[g.id(b[0], b[1], b[2])];
      }
    out.values[id] = acc;
  }
  return out;
}

/// Outward normal derivative on face-interior surface nodes by the one-sided
/// second-order three-point difference; edge and corner nodes carry zero.
inline Field normal_trace(const Grid& g, const Field& u) {
  require(u.kind == FieldKind::full, "normal_trace: full field expected");
  Field t{FieldKind::normal_trace, VectorXcd::Zero(static_cast<std::int64_t>(g.surface.size()))};
  const double h = g.spacing();
  for (std::size_t s = 0; s < g.surface.size(); ++s) {
    const int node = g.surface[s];
    if (g.extreme_count(node) != 1) continue;
    const auto a = g.ijk(node);
    int axis = 0, dir = 0;
    for (int d = 0; d < 3; ++d) {
      if (a[d] == 0) { axis = d; dir = 1; }
      if (a[d] == g.n - 1) { axis = d; dir = -1; }
    }
    int p1[3] = {a[0], a[1], a[2]}, p2[3] = {a[0], a[1], a[2]};
    p1[axis] += dir;
    p2[axis] += 2 * dir;
    // derivative along the inward direction, negated to point outward
    t.values[s] = (3.0 * u.values[node] - 4.0 * u.values[g.id(p1[0], p1[1], p1[2])] +
                   u.values[g.id(p2[0], p2[1], p2[2])]) /
                  (2.0 * h);
  }
  return t;
}

/// || u ||_H1(inner) / ((1+k) || u ||_L2(outer)) for a solution living on an
/// enlarged, grid-aligned box; bounded uniformly in k for true solutions.
inline double regularity_ratio(const Grid& inner, const Grid& outer, double k, const Field& u_outer) {
  require(u_outer.kind == FieldKind::full && u_outer.values.size() == outer.size(),
          "regularity_ratio: full field on the enlarged grid expected");
  VectorXcd restricted(inner.size());
  for (std::int64_t id = 0; id < inner.size(); ++id)
    restricted[id] = u_outer.values[embed_id(inner, outer, static_cast<int>(id))];
  const double h1 = grid_sobolev_norm(inner, restricted, 1);
  const double l2 = grid_l2_norm(outer, u_outer.values);
  return h1 / ((1.0 + k) * l2);
}

}  // namespace qstab

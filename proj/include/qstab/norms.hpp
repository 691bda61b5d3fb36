#pragma once

#include "qstab/fft.hpp"
#include "qstab/field.hpp"
#include "qstab/linalg.hpp"

namespace qstab {

// ---------------------------------------------------------------------------
// H^{-1} on a periodic embedding box

/// A grid field copied into a zero-padded periodic box of side
/// L = pad_factor * extent, sampled at the grid spacing. Fourier coefficients
/// are stored as Fourier-series coefficients (forward FFT / N^3).
struct PeriodicEmbedding {
  int N = 0;      // lattice points per axis
  double L = 0;   // period
  VectorXcd coeffs;

  /// Lattice frequency of FFT bin (a,b,c).
  Vector3d xi(int a, int b, int c) const {
    const double base = 2 * M_PI / L;
    return {base * signed_mode(a, N), base * signed_mode(b, N), base * signed_mode(c, N)};
  }
};

namespace detail {

/// Zero-padded transform without the support checks; used for error fields
/// that legitimately reach the box surface.
inline PeriodicEmbedding periodic_embedding_unchecked(const Grid& g, const VectorXcd& values,
                                                      int pad_factor) {
  PeriodicEmbedding e;
  e.N = pad_factor * (g.n - 1);
  e.L = pad_factor * g.extent;
  e.coeffs = VectorXcd::Zero(static_cast<std::int64_t>(e.N) * e.N * e.N);
  const int ncopy = (pad_factor == 1) ? g.n - 1 : g.n;
  for (int i = 0; i < ncopy; ++i)
    for (int j = 0; j < ncopy; ++j)
      for (int k = 0; k < ncopy; ++k)
        e.coeffs[(static_cast<std::int64_t>(i) * e.N + j) * e.N + k] = values[g.id(i, j, k)];
  Fft3::transform(e.coeffs, e.N, FFTW_FORWARD);
  e.coeffs /= double(e.N) * e.N * e.N;
  return e;
}

}  // namespace detail

inline PeriodicEmbedding periodic_embedding(const Grid& g, const VectorXcd& values,
                                            int pad_factor) {
  require(pad_factor >= 1, "periodic_embedding: pad factor must be >= 1");
  require(values.size() == g.size(), "periodic_embedding: full grid field expected");
  const int n = g.n;
  const double scale = values.cwiseAbs().maxCoeff();
  if (pad_factor == 1) {
    // the box itself is the period cell; opposing faces must agree
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int ax = 0; ax < 3; ++ax) {
          int lo[3] = {a, b, 0}, hi[3] = {a, b, 0};
          // rotate (a,b) into the two non-fixed axes
          int idx_lo[3], idx_hi[3];
          int t = 0;
          for (int d = 0; d < 3; ++d) {
            if (d == ax) {
              idx_lo[d] = 0;
              idx_hi[d] = n - 1;
            } else {
              idx_lo[d] = idx_hi[d] = (t == 0 ? a : b);
              ++t;
            }
          }
          (void)lo;
          (void)hi;
          const cplx dlo = values[g.id(idx_lo[0], idx_lo[1], idx_lo[2])];
          const cplx dhi = values[g.id(idx_hi[0], idx_hi[1], idx_hi[2])];
          if (std::abs(dlo - dhi) > 1e-10 * std::max(1.0, scale))
            throw config_error("periodic_embedding: field is not periodic-compatible (pad=1)");
        }
  } else {
    for (int s : g.surface)
      if (std::abs(values[s]) > 1e-12 * std::max(1.0, scale))
        throw config_error("periodic_embedding: field must vanish on the boundary layer");
  }

  return detail::periodic_embedding_unchecked(g, values, pad_factor);
}

inline double hminus1_from_coeffs(const PeriodicEmbedding& e) {
  double acc = 0;
  const double base = 2 * M_PI / e.L;
  std::int64_t idx = 0;
  for (int a = 0; a < e.N; ++a) {
    const double xa = base * signed_mode(a, e.N);
    for (int b = 0; b < e.N; ++b) {
      const double xb = base * signed_mode(b, e.N);
      for (int c = 0; c < e.N; ++c, ++idx) {
        const double xc = base * signed_mode(c, e.N);
        acc += std::norm(e.coeffs[idx]) / (1.0 + xa * xa + xb * xb + xc * xc);
      }
    }
  }
  return std::sqrt(acc);
}

/// || g ||_{H^-1}: sum over the padded FFT lattice of |g_hat|^2 / (1+|xi|^2).
inline double h_minus1_norm(const Grid& g, const VectorXcd& values, int pad_factor = 2) {
  return hminus1_from_coeffs(periodic_embedding(g, values, pad_factor));
}

// ---------------------------------------------------------------------------
// Grid Sobolev norms

namespace detail {

template <class Fn>
void for_axis_edges(const Grid& g, int axis, Fn&& fn) {
  // visits (node, node+step) pairs along `axis` with the transverse trapezoid
  // weight (the along-axis midpoint rule has weight 1)
  const int n = g.n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        int a[3] = {i, j, k};
        if (a[axis] >= n - 1) continue;
        double w = 1;
        for (int d = 0; d < 3; ++d)
          if (d != axis) w *= (a[d] == 0 || a[d] == n - 1) ? 0.5 : 1.0;
        int b[3] = {i, j, k};
        b[axis] += 1;
        fn(g.id(a[0], a[1], a[2]), g.id(b[0], b[1], b[2]), w);
      }
}

}  // namespace detail

inline double grid_l2_norm(const Grid& g, const VectorXcd& u) {
  const double v =
      volume_integral(g, [&](int id) { return cplx(std::norm(u[id]), 0); }).real();
  return std::sqrt(std::max(0.0, v));
}

inline double grid_h1_seminorm_sq(const Grid& g, const VectorXcd& u) {
  const double h = g.spacing();
  double acc = 0;
  for (int axis = 0; axis < 3; ++axis)
    detail::for_axis_edges(g, axis, [&](int a, int b, double w) {
      acc += w * std::norm(u[b] - u[a]);
    });
  return acc * h;  // (|du|/h)^2 * h^3 * w = |du|^2 * h * w
}

inline double grid_h2_seminorm_sq(const Grid& g, const VectorXcd& u) {
  const double h = g.spacing();
  const int n = g.n;
  double acc = 0;
  // pure second differences, central where defined
  for (int axis = 0; axis < 3; ++axis)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          int a[3] = {i, j, k};
          if (a[axis] < 1 || a[axis] > n - 2) continue;
          double w = 1;
          for (int d = 0; d < 3; ++d)
            if (d != axis) w *= (a[d] == 0 || a[d] == n - 1) ? 0.5 : 1.0;
          int lo[3] = {i, j, k}, hi[3] = {i, j, k};
          lo[axis] -= 1;
          hi[axis] += 1;
          const cplx d2 = u[g.id(hi[0], hi[1], hi[2])] - 2.0 * u[g.id(i, j, k)] +
                          u[g.id(lo[0], lo[1], lo[2])];
          acc += w * std::norm(d2);
        }
  double acc_mixed = 0;
  // mixed second differences on cell faces (forward-forward)
  for (int d = 0; d < 3; ++d)
    for (int e = d + 1; e < 3; ++e)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            int a[3] = {i, j, k};
            if (a[d] >= n - 1 || a[e] >= n - 1) continue;
            int other = 3 - d - e;
            const double w = (a[other] == 0 || a[other] == n - 1) ? 0.5 : 1.0;
            int pd[3] = {i, j, k}, pe[3] = {i, j, k}, pde[3] = {i, j, k};
            pd[d] += 1;
            pe[e] += 1;
            pde[d] += 1;
            pde[e] += 1;
            const cplx m = u[g.id(pde[0], pde[1], pde[2])] - u[g.id(pd[0], pd[1], pd[2])] -
                           u[g.id(pe[0], pe[1], pe[2])] + u[g.id(i, j, k)];
            acc_mixed += w * std::norm(m);
          }
  return (acc + 2 * acc_mixed) / h;  // |d2 u|^2/h^4 * h^3
}

/// L2 / H1 / H2 norm of a full-grid field (order 0, 1, 2).
inline double grid_sobolev_norm(const Grid& g, const VectorXcd& u, int order) {
  require(order >= 0 && order <= 2, "grid_sobolev_norm: order must be 0, 1 or 2");
  double sq = grid_l2_norm(g, u);
  sq *= sq;
  if (order >= 1) sq += grid_h1_seminorm_sq(g, u);
  if (order >= 2) sq += grid_h2_seminorm_sq(g, u);
  return std::sqrt(sq);
}

inline double grid_sobolev_norm(const Grid& g, const Field& u, int order) {
  require(u.kind == FieldKind::full, "grid_sobolev_norm: full field expected");
  return grid_sobolev_norm(g, u.values, order);
}

/// L2 norm restricted to a node set (uniform h^3 weights).
inline double l2_on_set(const Grid& g, const VectorXcd& u, const NodeSet& set) {
  double acc = 0;
  for (int id : set.ids) acc += std::norm(u[id]);
  return std::sqrt(acc * std::pow(g.spacing(), 3));
}

/// H1 norm restricted to a node set; differences counted when both endpoints
/// belong to the set.
inline double h1_on_set(const Grid& g, const VectorXcd& u, const NodeSet& set) {
  const double h = g.spacing();
  double acc = 0;
  for (int id : set.ids) acc += std::norm(u[id]) * h * h * h;
  for (int axis = 0; axis < 3; ++axis)
    detail::for_axis_edges(g, axis, [&](int a, int b, double) {
      if (set.contains(a) && set.contains(b)) acc += std::norm(u[b] - u[a]) * h;
    });
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Fractional boundary norms via the surface graph Laplacian

/// Spectral surrogate for H^{+-1/2} trace norms on a patch (or the whole
/// surface): generalized eigenpairs of the combinatorial surface stiffness
/// against the patch quadrature mass. ||f||^2_s = sum (1+lambda_j)^s |<f,phi_j>_W|^2.
struct BoundaryNormOperator {
  std::vector<int> nodes;            // surface nodes carrying dofs
  std::vector<int> node_pos;         // grid node id -> position in nodes, or -1
  VectorXd weights;                  // diagonal L2 mass
  VectorXd evals;                    // ascending, >= 0
  MatrixXd evecs;                    // W-orthonormal columns
  std::string grid_hash;
  bool full_surface = false;

  std::int64_t dim() const { return static_cast<std::int64_t>(nodes.size()); }
};

inline BoundaryNormOperator build_boundary_norm_operator(const Grid& g, const BoundaryPatch& patch,
                                                         int eig_count = 0) {
  BoundaryNormOperator op;
  op.nodes = patch.nodes;
  op.weights = patch.weights;
  op.grid_hash = g.hash();
  op.full_surface = patch.full_surface;
  op.node_pos.assign(g.size(), -1);
  const int m = static_cast<int>(op.nodes.size());
  for (int i = 0; i < m; ++i) op.node_pos[op.nodes[i]] = i;

  // combinatorial stiffness over grid-neighbor pairs inside the node set
  // (edge weight 1 approximates the surface Dirichlet form on a uniform quad
  // mesh; seam edges between faces are included automatically)
  MatrixXd k = MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const auto a = g.ijk(op.nodes[i]);
    for (int axis = 0; axis < 3; ++axis) {
      int b[3] = {a[0], a[1], a[2]};
      b[axis] += 1;
      if (b[axis] >= g.n) continue;
      const int nb = g.id(b[0], b[1], b[2]);
      const int j = op.node_pos[nb];
      if (j < 0) continue;
      k(i, i) += 1;
      k(j, j) += 1;
      k(i, j) -= 1;
      k(j, i) -= 1;
    }
  }
  VectorXd wsqrt = op.weights.cwiseSqrt();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) k(i, j) /= wsqrt[i] * wsqrt[j];
  SymEig eig = sym_eig(std::move(k));
  const int keep = (eig_count > 0 && eig_count < m) ? eig_count : m;
  op.evals = eig.values.head(keep).cwiseMax(0.0);
  op.evecs.resize(m, keep);
  for (int j = 0; j < keep; ++j) op.evecs.col(j) = eig.vectors.col(j).cwiseQuotient(wsqrt);
  return op;
}

/// Trace coefficients <f, phi_j>_W for a vector aligned with op.nodes.
inline VectorXcd boundary_coefficients(const BoundaryNormOperator& op, const VectorXcd& f) {
  require(f.size() == op.dim(), "boundary norm: trace length does not match the operator patch");
  return op.evecs.transpose() * op.weights.asDiagonal() * f;
}

/// ||f||_{order} with order = +1/2 or -1/2 (any real exponent accepted).
inline double boundary_norm(const BoundaryNormOperator& op, const VectorXcd& f, double order) {
  VectorXcd c = boundary_coefficients(op, f);
  double acc = 0;
  for (std::int64_t j = 0; j < c.size(); ++j)
    acc += std::pow(1.0 + op.evals[j], order) * std::norm(c[j]);
  return std::sqrt(acc);
}

/// Weighted L2 pairing on the operator's patch.
inline cplx boundary_pairing(const BoundaryNormOperator& op, const VectorXcd& f,
                             const VectorXcd& gvec) {
  return (f.conjugate().cwiseProduct(gvec).cwiseProduct(op.weights.cast<cplx>())).sum();
}

/// Gram application y = W Phi D^order Phi^T W x (x aligned with op.nodes).
inline VectorXcd apply_boundary_gram(const BoundaryNormOperator& op, const VectorXcd& x,
                                     double order) {
  VectorXcd c = boundary_coefficients(op, x);
  for (std::int64_t j = 0; j < c.size(); ++j) c[j] *= std::pow(1.0 + op.evals[j], order);
  return op.weights.asDiagonal() * (op.evecs * c);
}

/// Inverse Gram application; with Phi W-orthonormal, G^-1 = Phi D^-order Phi^T.
inline VectorXcd solve_boundary_gram(const BoundaryNormOperator& op, const VectorXcd& y,
                                     double order) {
  require(op.evecs.cols() == op.dim(), "solve_boundary_gram: truncated basis cannot be inverted");
  VectorXcd z = op.evecs.transpose() * y;
  for (std::int64_t j = 0; j < z.size(); ++j) z[j] /= std::pow(1.0 + op.evals[j], order);
  return op.evecs * z;
}

}  // namespace qstab

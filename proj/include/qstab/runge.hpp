#pragma once

#include "qstab/dtn.hpp"

namespace qstab {

struct RungeOptions {
  int dense_threshold = 24 * 24 * 24;  // matrix-free normal equations above this many unknowns
  bool force_matrix_free = false;
  double cg_tol = 1e-10;
  int cg_max_iter = 500;
};

struct RungeResult {
  Field f;                  // boundary data, zero outside Gamma_D
  Field u;                  // global solution carrying that data
  double eps_achieved = 0;  // ||u - v||_L2(Omega1) / ||v||_H1(Omega~1)
  double data_cost = 0;     // zero-extension H^{1/2} norm of f
  double lambda = 0;
};

namespace detail {

struct RungeSets {
  NodeSet omega1;        // depth >  w1 (outside the closure of O1)
  NodeSet omega_tilde1;  // depth >  w2 (outside the closure of O2)
};

inline RungeSets runge_sets(const Grid& g, const NeighborhoodChain& chain) {
  std::vector<int> o1, ot1;
  for (std::int64_t id = 0; id < g.size(); ++id) {
    const int d = g.depth(static_cast<int>(id));
    if (d > chain.widths[1]) o1.push_back(static_cast<int>(id));
    if (d > chain.widths[2]) ot1.push_back(static_cast<int>(id));
  }
  RungeSets s;
  s.omega1 = NodeSet::from_ids(std::move(o1), g.size());
  s.omega_tilde1 = NodeSet::from_ids(std::move(ot1), g.size());
  return s;
}

/// Restricted zero-extension Gram on the active Gamma_D nodes.
inline MatrixXd domain_gram(const BoundaryPatch& gd, const BoundaryNormOperator& surface_op) {
  const int nd = gd.active_count();
  MatrixXd y(nd, surface_op.evecs.cols());
  for (int i = 0; i < nd; ++i) {
    const int pos = surface_op.node_pos[gd.active[i]];
    require(pos >= 0, "runge: Gamma_D node missing from the surface operator");
    y.row(i) = surface_op.evecs.row(pos) * surface_op.weights[pos];
  }
  for (std::int64_t j = 0; j < y.cols(); ++j)
    y.col(j) *= std::pow(1.0 + surface_op.evals[j], 0.25);
  return y * y.transpose();
}

}  // namespace detail

/// Best global solution with data supported in Gamma_D approximating a local
/// solution v outside the O2 layer: Tikhonov-regularized least squares
///   min || S f - v ||^2_{L2(Omega1)} + lambda || f ||^2_{H~1/2(Gamma_D)}
/// over nodal data on the patch, solved through the normal equations.
inline RungeResult runge_approximate(const HelmholtzContext& ctx, const NeighborhoodChain& chain,
                                     const Field& v, const BoundaryPatch& gd,
                                     const BoundaryNormOperator& surface_op, double lambda,
                                     const RungeOptions& opts = {}) {
  const Grid& g = ctx.grid();
  require(v.kind == FieldKind::full && v.values.size() == g.size(),
          "runge_approximate: target must be a full-grid field");
  require(lambda > 0, "runge_approximate: lambda must be positive");
  detail::check_gap_or_throw(ctx);

  const auto sets = detail::runge_sets(g, chain);
  const int nd = gd.active_count();
  const std::int64_t n1 = static_cast<std::int64_t>(sets.omega1.size());
  const double h3 = std::pow(g.spacing(), 3);
  const double ih2 = 1.0 / (g.spacing() * g.spacing());

  VectorXcd v_on_omega1(n1);
  for (std::int64_t i = 0; i < n1; ++i) v_on_omega1[i] = v.values[sets.omega1.ids[i]];

  MatrixXd gram = detail::domain_gram(gd, surface_op);

  VectorXcd coeffs;  // nodal values of f on gd.active
  const bool dense = !opts.force_matrix_free && ctx.interior_count() <= opts.dense_threshold;
  if (dense) {
    MatrixXcd s(n1, nd);
    for (int j = 0; j < nd; ++j) {
      VectorXcd rhs = VectorXcd::Zero(ctx.interior_count());
      rhs[ctx.interior_index(detail::inward_neighbor(g, gd.active[j], gd.active_face[j]))] = ih2;
      VectorXcd col = ctx.solve_interior(rhs);
      for (std::int64_t i = 0; i < n1; ++i)
        s(i, j) = col[ctx.interior_index(sets.omega1.ids[i])];
    }
    MatrixXcd normal = (s.adjoint() * s) * h3 + lambda * gram.cast<cplx>();
    VectorXcd rhs = s.adjoint() * v_on_omega1 * h3;
    coeffs = Eigen::LDLT<MatrixXcd>(normal).solve(rhs);
  } else {
    // matrix-free CG on (S^H W S + lambda G) f = S^H W v
    auto apply_s = [&](const VectorXcd& f) {
      VectorXcd rhs = VectorXcd::Zero(ctx.interior_count());
      for (int j = 0; j < nd; ++j)
        rhs[ctx.interior_index(detail::inward_neighbor(g, gd.active[j], gd.active_face[j]))] +=
            ih2 * f[j];
      VectorXcd sol = ctx.solve_interior(rhs);
      VectorXcd out(n1);
      for (std::int64_t i = 0; i < n1; ++i) out[i] = sol[ctx.interior_index(sets.omega1.ids[i])];
      return out;
    };
    auto apply_sh = [&](const VectorXcd& w) {
      VectorXcd rhs = VectorXcd::Zero(ctx.interior_count());
      for (std::int64_t i = 0; i < n1; ++i) rhs[ctx.interior_index(sets.omega1.ids[i])] = w[i];
      // adjoint solve of a complex-symmetric operator
      VectorXcd sol = ctx.solve_interior(rhs.conjugate()).conjugate();
      VectorXcd out(nd);
      for (int j = 0; j < nd; ++j)
        out[j] = ih2 * sol[ctx.interior_index(
                     detail::inward_neighbor(g, gd.active[j], gd.active_face[j]))];
      return out;
    };
    auto apply_normal = [&](const VectorXcd& f) {
      VectorXcd y = apply_sh(apply_s(f)) * h3;
      y += lambda * (gram * f);
      return y;
    };
    VectorXcd b = apply_sh(v_on_omega1) * h3;
    coeffs = VectorXcd::Zero(nd);
    VectorXcd res = b, p = b;
    double rho = res.squaredNorm();
    const double b2 = std::max(b.squaredNorm(), 1e-300);
    std::string history;
    bool converged = rho <= opts.cg_tol * opts.cg_tol * b2;
    for (int it = 0; it < opts.cg_max_iter && !converged; ++it) {
      VectorXcd ap = apply_normal(p);
      const cplx denom = p.dot(ap);
      if (std::abs(denom) == 0.0) break;
      const cplx alpha = rho / denom;
      coeffs += alpha * p;
      res -= alpha * ap;
      const double rho_next = res.squaredNorm();
      if (it % 25 == 0) history += std::to_string(std::sqrt(rho_next / b2)) + " ";
      if (rho_next <= opts.cg_tol * opts.cg_tol * b2) {
        converged = true;
        break;
      }
      p = res + (rho_next / rho) * p;
      rho = rho_next;
    }
    if (!converged && std::sqrt(rho / b2) > 1e-6)
      throw numerical_error("runge_approximate: normal-equation CG stagnated; residuals: " +
                            history + "-> " + std::to_string(std::sqrt(rho / b2)));
  }

  RungeResult out;
  out.lambda = lambda;
  out.f = Field::zeros_boundary(g);
  for (int j = 0; j < nd; ++j) out.f.values[g.surface_index[gd.active[j]]] = coeffs[j];
  out.u = solve_dirichlet(ctx, out.f, /*skip_gap_check=*/true);

  const double vnorm = h1_on_set(g, v.values, sets.omega_tilde1);
  const double mis = l2_on_set(g, (out.u.values - v.values).eval(), sets.omega1);
  out.eps_achieved = vnorm > 0 ? mis / vnorm : 0.0;

  VectorXcd extended = VectorXcd::Zero(surface_op.dim());
  for (int j = 0; j < nd; ++j) extended[surface_op.node_pos[gd.active[j]]] = coeffs[j];
  out.data_cost = boundary_norm(surface_op, extended, 0.5);
  return out;
}

/// Slope of log(data_cost) against log(1/eps) over a sweep, with the fit R^2.
inline std::pair<double, double> fit_runge_exponent(const std::vector<RungeResult>& sweep) {
  require(sweep.size() >= 5, "fit_runge_exponent: need at least 5 sweep points");
  double emin = std::numeric_limits<double>::infinity(), emax = 0;
  for (const auto& r : sweep) {
    require(r.eps_achieved > 0 && r.data_cost > 0, "fit_runge_exponent: degenerate sweep point");
    emin = std::min(emin, r.eps_achieved);
    emax = std::max(emax, r.eps_achieved);
  }
  require(emax / emin >= 100, "fit_runge_exponent: sweep must span at least two decades of eps");
  const int n = static_cast<int>(sweep.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (const auto& r : sweep) {
    const double x = std::log(1.0 / r.eps_achieved), y = std::log(r.data_cost);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double mu = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double r_num = (n * sxy - sx * sy);
  const double r_den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  const double r2 = r_den > 0 ? (r_num / r_den) * (r_num / r_den) : 1.0;
  return {mu, r2};
}

}  // namespace qstab

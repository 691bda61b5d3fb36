#pragma once

#include "qstab/forward.hpp"

namespace qstab {

/// Discrete partial DtN map. Rows run over the Gamma_N patch nodes, columns
/// over the Gamma_D patch nodes (nodal hat data, zero-extended). Entries at
/// box-edge/corner nodes are zero: such data never couples to the interior in
/// the 7-point stencil and no normal direction is defined there.
struct DtNMatrix {
  MatrixXcd entries;
  double k = 0;
  BoundaryPatch gd, gn;
  std::string q_tag;
  std::string q_hash;
  std::string grid_hash;
};

namespace detail {

struct TraceStencil {
  int p1 = -1, p2 = -1;  // first and second interior nodes along the inward normal
};

inline TraceStencil trace_stencil(const Grid& g, int node, int face) {
  const auto a = g.ijk(node);
  const auto s = face_normal_step(face);
  TraceStencil t;
  t.p1 = g.id(a[0] - s[0], a[1] - s[1], a[2] - s[2]);
  t.p2 = g.id(a[0] - 2 * s[0], a[1] - 2 * s[1], a[2] - 2 * s[2]);
  return t;
}

/// Interior node adjacent to a face-interior boundary node.
inline int inward_neighbor(const Grid& g, int node, int face) {
  return trace_stencil(g, node, face).p1;
}

}  // namespace detail

/// One forward solve per Gamma_D node; the column is the one-sided
/// second-order normal-derivative trace restricted to Gamma_N.
inline DtNMatrix assemble_partial_dtn(const HelmholtzContext& ctx, const BoundaryPatch& gd,
                                      const BoundaryPatch& gn) {
  const Grid& g = ctx.grid();
  require(gd.grid_hash == g.hash() && gn.grid_hash == g.hash(),
          "assemble_partial_dtn: patches were built for a different grid");
  detail::check_gap_or_throw(ctx);

  DtNMatrix m;
  m.k = ctx.k();
  m.gd = gd;
  m.gn = gn;
  m.q_tag = ctx.potential().tag;
  m.q_hash = ctx.potential().hash();
  m.grid_hash = g.hash();
  m.entries = MatrixXcd::Zero(gn.nodes.size(), gd.nodes.size());

  std::vector<int> gd_pos(g.size(), -1), gn_pos(g.size(), -1);
  for (std::size_t i = 0; i < gd.nodes.size(); ++i) gd_pos[gd.nodes[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < gn.nodes.size(); ++i) gn_pos[gn.nodes[i]] = static_cast<int>(i);

  const double h = g.spacing();
  const double ih2 = 1.0 / (h * h);
  for (int cj = 0; cj < gd.active_count(); ++cj) {
    const int col_node = gd.active[cj];
    const int col = gd_pos[col_node];
    const int src = detail::inward_neighbor(g, col_node, gd.active_face[cj]);
    VectorXcd rhs = VectorXcd::Zero(ctx.interior_count());
    rhs[ctx.interior_index(src)] = ih2;
    VectorXcd u;
    try {
      u = ctx.solve_interior(rhs);
    } catch (const std::exception& e) {
      throw numerical_error("assemble_partial_dtn: forward solve failed at column " +
                            std::to_string(col) + ": " + e.what());
    }
    for (int ri = 0; ri < gn.active_count(); ++ri) {
      const int row_node = gn.active[ri];
      const auto ts = detail::trace_stencil(g, row_node, gn.active_face[ri]);
      cplx val = -4.0 * u[ctx.interior_index(ts.p1)] + u[ctx.interior_index(ts.p2)];
      if (row_node == col_node) val += 3.0;  // the hat datum itself
      m.entries(gn_pos[row_node], col) = val / (2.0 * h);
    }
  }
  return m;
}

/// Difference map Lambda_q1 - Lambda_q2, assembled through the support of
/// q1 - q2: the resolvent identity routes every column through the
/// perturbation nodes, so the cost is one solve per support node and
/// potential instead of one per boundary node. Entries agree with the
/// difference of the individually assembled maps to solver tolerance.
inline DtNMatrix assemble_dtn_difference(const HelmholtzContext& ctx1,
                                         const HelmholtzContext& ctx2, const BoundaryPatch& gd,
                                         const BoundaryPatch& gn) {
  const Grid& g = ctx1.grid();
  require(&ctx1.grid() == &ctx2.grid(), "assemble_dtn_difference: contexts share one grid");
  require(ctx1.k() == ctx2.k(), "assemble_dtn_difference: contexts share one frequency");
  detail::check_gap_or_throw(ctx1);
  detail::check_gap_or_throw(ctx2);

  const VectorXcd& q1 = ctx1.potential().values;
  const VectorXcd& q2 = ctx2.potential().values;
  std::vector<int> support;
  for (std::int64_t id = 0; id < g.size(); ++id)
    if (q1[id] != q2[id]) {
      require(!g.on_boundary(static_cast<int>(id)),
              "assemble_dtn_difference: potentials differ on the boundary");
      support.push_back(static_cast<int>(id));
    }

  DtNMatrix m;
  m.k = ctx1.k();
  m.gd = gd;
  m.gn = gn;
  m.q_tag = ctx1.potential().tag + "-" + ctx2.potential().tag;
  m.q_hash = ctx1.potential().hash() + ctx2.potential().hash();
  m.grid_hash = g.hash();
  m.entries = MatrixXcd::Zero(gn.nodes.size(), gd.nodes.size());
  if (support.empty()) return m;

  const int s = static_cast<int>(support.size());
  const double h = g.spacing();
  const double ih2 = 1.0 / (h * h);

  // X(i, sigma) = trace combination of A1^{-1} e_sigma at the Gamma_N rows;
  // Y(j, sigma) = (A2^{-1} e_sigma)(inward(b_j)) / h^2 via symmetry of A2.
  MatrixXcd x(gn.active_count(), s), y(gd.active_count(), s);
  for (int c = 0; c < s; ++c) {
    VectorXcd e = VectorXcd::Zero(ctx1.interior_count());
    e[ctx1.interior_index(support[c])] = 1.0;
    const VectorXcd w1 = ctx1.solve_interior(e);
    const VectorXcd w2 = ctx2.solve_interior(e);
    for (int ri = 0; ri < gn.active_count(); ++ri) {
      const auto ts = detail::trace_stencil(g, gn.active[ri], gn.active_face[ri]);
      x(ri, c) = (-4.0 * w1[ctx1.interior_index(ts.p1)] + w1[ctx1.interior_index(ts.p2)]) /
                 (2.0 * h);
    }
    for (int cj = 0; cj < gd.active_count(); ++cj) {
      const int src = detail::inward_neighbor(g, gd.active[cj], gd.active_face[cj]);
      y(cj, c) = w2[ctx2.interior_index(src)] * ih2;
    }
  }
  VectorXcd d(s);
  for (int c = 0; c < s; ++c) d[c] = q2[support[c]] - q1[support[c]];

  std::vector<int> gd_pos(g.size(), -1), gn_pos(g.size(), -1);
  for (std::size_t i = 0; i < gd.nodes.size(); ++i) gd_pos[gd.nodes[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < gn.nodes.size(); ++i) gn_pos[gn.nodes[i]] = static_cast<int>(i);
  MatrixXcd block = x * d.asDiagonal() * y.transpose();  // gn_active x gd_active
  for (int ri = 0; ri < gn.active_count(); ++ri)
    for (int cj = 0; cj < gd.active_count(); ++cj)
      m.entries(gn_pos[gn.active[ri]], gd_pos[gd.active[cj]]) = block(ri, cj);
  return m;
}

/// Apply the map to Dirichlet data given on the Gamma_D patch nodes.
inline VectorXcd apply_dtn(const DtNMatrix& m, const VectorXcd& f) {
  require(f.size() == static_cast<std::int64_t>(m.gd.nodes.size()),
          "apply_dtn: data length does not match Gamma_D");
  return m.entries * f;
}

/// Operator norm of a (difference) map between the zero-extension H^{1/2}
/// space on Gamma_D and the H^{-1/2} surrogate on Gamma_N: its largest
/// generalized singular value with respect to the two Gram matrices.
/// `domain_op` must be the full-surface operator (zero-extension semantics);
/// `range_op` the Gamma_N patch operator.
inline double dtn_operator_norm(const DtNMatrix& d, const BoundaryNormOperator& domain_op,
                                const BoundaryNormOperator& range_op) {
  require(range_op.nodes == d.gn.nodes, "dtn norm: range operator patch mismatch");
  require(domain_op.full_surface, "dtn norm: domain operator must cover the full surface");

  const MatrixXcd& diff = d.entries;
  if (diff.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  const std::int64_t nd = static_cast<std::int64_t>(d.gd.nodes.size());
  // positions of the Gamma_D nodes inside the full-surface operator
  std::vector<int> embed(nd);
  for (std::int64_t i = 0; i < nd; ++i) {
    embed[i] = domain_op.node_pos[d.gd.nodes[i]];
    require(embed[i] >= 0, "dtn norm: Gamma_D node missing from the domain operator");
  }
  const bool gd_full = d.gd.full_surface;

  // For a partial Gamma_D the restricted Gram must be factored densely.
  Eigen::LLT<MatrixXd> llt;
  if (!gd_full) {
    MatrixXd ysc = MatrixXd::Zero(nd, domain_op.evecs.cols());
    for (std::int64_t i = 0; i < nd; ++i)
      ysc.row(i) = domain_op.evecs.row(embed[i]) * domain_op.weights[embed[i]];
    for (std::int64_t j = 0; j < ysc.cols(); ++j)
      ysc.col(j) *= std::sqrt(std::sqrt(1.0 + domain_op.evals[j]));
    llt.compute(ysc * ysc.transpose());
    if (llt.info() != Eigen::Success)
      throw numerical_error("dtn norm: domain Gram factorization failed");
  }

  auto apply_b = [&](const VectorXcd& v) { return (diff * v).eval(); };
  auto apply_bh = [&](const VectorXcd& v) { return (diff.adjoint() * v).eval(); };
  auto apply_n = [&](const VectorXcd& v) { return apply_boundary_gram(range_op, v, -0.5); };
  auto solve_d = [&](const VectorXcd& v) -> VectorXcd {
    if (gd_full) {
      VectorXcd full = VectorXcd::Zero(domain_op.dim());
      for (std::int64_t i = 0; i < nd; ++i) full[embed[i]] = v[i];
      VectorXcd sol = solve_boundary_gram(domain_op, full, 0.5);
      VectorXcd out(nd);
      for (std::int64_t i = 0; i < nd; ++i) out[i] = sol[embed[i]];
      return out;
    }
    VectorXcd out(v.size());
    out.real() = llt.solve(v.real().eval());
    out.imag() = llt.solve(v.imag().eval());
    return out;
  };
  return generalized_largest_singular(nd, apply_b, apply_bh, apply_n, solve_d);
}

/// Measurement distance between two assembled maps sharing frequency and
/// patches.
inline double dtn_distance(const DtNMatrix& a, const DtNMatrix& b,
                           const BoundaryNormOperator& domain_op,
                           const BoundaryNormOperator& range_op) {
  require(a.k == b.k, "dtn_distance: frequency mismatch");
  require(a.grid_hash == b.grid_hash, "dtn_distance: grid mismatch");
  require(a.gd.descriptor == b.gd.descriptor && a.gn.descriptor == b.gn.descriptor,
          "dtn_distance: patch mismatch");
  require(a.entries.rows() == b.entries.rows() && a.entries.cols() == b.entries.cols(),
          "dtn_distance: shape mismatch");
  DtNMatrix d = a;
  d.entries = a.entries - b.entries;
  d.q_tag = a.q_tag + "-" + b.q_tag;
  return dtn_operator_norm(d, domain_op, range_op);
}

}  // namespace qstab

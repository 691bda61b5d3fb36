#pragma once

#include "qstab/forward.hpp"

namespace qstab {

/// Observation-cap weight: psi grows quadratically along the normal
/// coordinate of the cap face from the opposite face, with an exterior
/// virtual center at depth `depth` behind it. The lateral curvature is
/// dropped (the "correction"), so the outward slope vanishes on the four
/// tangential faces exactly and is negative on the opposite face.
struct CarlemanWeight {
  VectorXd psi;   // >= 0, zero on the face opposite the cap
  VectorXd phi;   // exp(gamma * psi)
  double gamma = 0;
  BoundaryPatch gn;
  Vector3d x0 = Vector3d::Zero();  // virtual center
  double scale = 1;                // normalization of psi
};

namespace detail {

/// Outward normal slope of a nodal field at an active surface node.
inline double normal_slope(const Grid& g, const VectorXd& f, int node, int face) {
  const auto a = g.ijk(node);
  const auto s = face_normal_step(face);
  const int p1 = g.id(a[0] - s[0], a[1] - s[1], a[2] - s[2]);
  const int p2 = g.id(a[0] - 2 * s[0], a[1] - 2 * s[1], a[2] - 2 * s[2]);
  return (3.0 * f[node] - 4.0 * f[p1] + f[p2]) / (2.0 * g.spacing());
}

inline int face_of_active(const Grid& g, int node) {
  const auto a = g.ijk(node);
  for (int d = 0; d < 3; ++d) {
    if (a[d] == 0) return 2 * d;
    if (a[d] == g.n - 1) return 2 * d + 1;
  }
  return -1;
}

}  // namespace detail

inline CarlemanWeight build_weight(const Grid& g, const BoundaryPatch& gn, double gamma,
                                   double depth = 3.0) {
  require(!gn.nodes.empty(), "build_weight: observation patch is empty");
  require(gamma > 0, "build_weight: gamma must be positive");
  require(depth > 0, "build_weight: exterior center depth must be positive");
  // the cap must live on a single face
  require(gn.active_count() > 0, "build_weight: patch has no face-interior nodes");
  const int face = gn.active_face[0];
  for (int f : gn.active_face)
    require(f == face, "build_weight: observation cap must lie on a single box face");

  CarlemanWeight w;
  w.gamma = gamma;
  w.gn = gn;
  const int axis = face_axis(face);
  const double d = depth * g.extent;
  const double lo = g.origin, hi = g.origin + g.extent;
  w.x0 = Vector3d::Constant(g.origin + 0.5 * g.extent);
  w.x0[axis] = face_side(face) == 1 ? lo - d : hi + d;
  w.scale = (g.extent + d) * (g.extent + d) - d * d;

  w.psi.resize(g.size());
  for (std::int64_t id = 0; id < g.size(); ++id) {
    const Vector3d x = g.coord(static_cast<int>(id));
    // distance from the face opposite the cap, along the cap normal
    const double t = face_side(face) == 1 ? x[axis] - lo : hi - x[axis];
    w.psi[id] = ((t + d) * (t + d) - d * d) / w.scale;
  }
  w.phi = (gamma * w.psi).array().exp();

  // node-wise verification of the stated weight properties
  std::vector<int> violations;
  const double tol = 1e-10;
  for (std::int64_t id = 0; id < g.size(); ++id)
    if (w.psi[id] < -tol) violations.push_back(static_cast<int>(id));
  // discrete gradient magnitude (forward/backward differences as available)
  const double h = g.spacing();
  for (int i = 0; i < g.n && violations.size() < 50; ++i)
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k) {
        const int id = g.id(i, j, k);
        double grad2 = 0;
        const int a[3] = {i, j, k};
        for (int ax = 0; ax < 3; ++ax) {
          int p[3] = {i, j, k}, m[3] = {i, j, k};
          p[ax] = std::min(a[ax] + 1, g.n - 1);
          m[ax] = std::max(a[ax] - 1, 0);
          const double dpsi = (w.psi[g.id(p[0], p[1], p[2])] - w.psi[g.id(m[0], m[1], m[2])]) /
                              ((p[ax] - m[ax]) * h);
          grad2 += dpsi * dpsi;
        }
        if (grad2 <= tol) violations.push_back(id);
      }
  // outward slope <= 0 away from the cap
  std::vector<std::uint8_t> in_gn(g.size(), 0);
  for (int node : gn.nodes) in_gn[node] = 1;
  double min_off_cap = std::numeric_limits<double>::infinity();
  for (int s : g.surface) {
    if (g.extreme_count(s) != 1 || in_gn[s]) continue;
    if (detail::normal_slope(g, w.psi, s, detail::face_of_active(g, s)) > tol)
      violations.push_back(s);
    min_off_cap = std::min(min_off_cap, w.psi[s]);
  }
  if (min_off_cap > tol)
    violations.push_back(-1);  // psi fails to reach zero off the cap
  if (!violations.empty()) {
    std::string msg = "build_weight: weight verification failed at nodes [";
    for (std::size_t i = 0; i < violations.size() && i < 8; ++i)
      msg += std::to_string(violations[i]) + (i + 1 < violations.size() ? "," : "");
    msg += violations.size() > 8 ? ",...]" : "]";
    msg += " (" + std::to_string(violations.size()) + " total); unsupported cap geometry";
    throw invariant_error(msg);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Carleman inequality evaluation

enum class CarlemanForm { lemma31, lemma32 };

struct CarlemanCheck {
  double h = 0, E = 0;
  double lhs = 0, rhs = 0, ratio = 0;
  bool degenerate = false;
  double log_shift = 0;  // exponent subtracted in the weighted form
};

/// Evaluate both sides of the weighted inequality for a test function
/// vanishing on the boundary. lemma31 is the conjugated estimate on
/// v = e^{Phi/h} u; lemma32 the exponentially weighted estimate on u itself,
/// computed in shifted log-space.
inline CarlemanCheck carleman_ratio(const Grid& g, const CarlemanWeight& w, const Field& v,
                                    double h, double E, CarlemanForm form) {
  require(v.kind == FieldKind::full && v.values.size() == g.size(),
          "carleman_ratio: full-grid field expected");
  require(h > 0 && h <= 1, "carleman_ratio: need 0 < h <= 1");
  require(E >= 0 && E <= 1, "carleman_ratio: need 0 <= E <= 1");
  const double vmax = v.values.cwiseAbs().maxCoeff();
  for (int s : g.surface)
    require(std::abs(v.values[s]) <= 1e-13 * std::max(1.0, vmax),
            "carleman_ratio: field must vanish on the boundary");

  CarlemanCheck out;
  out.h = h;
  out.E = E;
  const double hg = g.spacing();
  const double gamma = w.gamma;
  const double h3 = hg * hg * hg;

  if (v.values.cwiseAbs().maxCoeff() == 0.0) {
    out.degenerate = true;
    return out;
  }

  if (form == CarlemanForm::lemma31) {
    double vol_v = 0, vol_grad = 0;
    for (std::int64_t id = 0; id < g.size(); ++id)
      vol_v += std::pow(w.phi[id], 3) * std::norm(v.values[id]);
    for (int axis = 0; axis < 3; ++axis)
      detail::for_axis_edges(g, axis, [&](int a, int b, double) {
        const double phim = 0.5 * (w.phi[a] + w.phi[b]);
        vol_grad += phim * std::norm(v.values[b] - v.values[a]) / (hg * hg);
      });
    out.lhs = h * (std::pow(gamma, 4) * vol_v * h3 +
                   gamma * gamma * (h * h) * vol_grad * h3);

    // | e^{Phi/h} P(h,E) e^{-Phi/h} v |^2, stencil-wise with exponent
    // differences so nothing overflows
    double conj_term = 0;
    for (std::int64_t id = 0; id < g.size(); ++id) {
      if (g.on_boundary(static_cast<int>(id))) continue;
      const auto a = g.ijk(static_cast<int>(id));
      cplx acc = 6.0 * v.values[id];
      for (int axis = 0; axis < 3; ++axis)
        for (int dir = -1; dir <= 1; dir += 2) {
          int b[3] = {a[0], a[1], a[2]};
          b[axis] += dir;
          const int nb = g.id(b[0], b[1], b[2]);
          acc -= std::exp((w.phi[id] - w.phi[nb]) / h) * v.values[nb];
        }
      const cplx pv = (h * h / (hg * hg)) * acc - E * v.values[id];
      conj_term += std::norm(pv);
    }
    double bt = 0;
    for (std::size_t s = 0; s < g.surface.size(); ++s) {
      const int node = g.surface[s];
      if (g.extreme_count(node) != 1) continue;
      const int face = detail::face_of_active(g, node);
      const auto st = face_normal_step(face);
      const auto a = g.ijk(node);
      const int p1 = g.id(a[0] - st[0], a[1] - st[1], a[2] - st[2]);
      const int p2 = g.id(a[0] - 2 * st[0], a[1] - 2 * st[1], a[2] - 2 * st[2]);
      const cplx dnv = (-4.0 * v.values[p1] + v.values[p2]) / (2.0 * hg);
      const double dpsi = detail::normal_slope(g, w.psi, node, face);
      bt += hg * hg * w.phi[node] * dpsi * std::norm(h * dnv);
    }
    out.rhs = conj_term * h3 + h * gamma * bt;
  } else {
    // shift exponents by the largest weight so the sums stay finite
    const double shift = 2.0 * w.phi.maxCoeff() / h;
    out.log_shift = shift;
    auto wexp = [&](double phi_val) { return std::exp(2.0 * phi_val / h - shift); };

    double vol = 0;
    for (std::int64_t id = 0; id < g.size(); ++id)
      vol += wexp(w.phi[id]) * std::norm(v.values[id]);
    double grad = 0;
    for (int axis = 0; axis < 3; ++axis)
      detail::for_axis_edges(g, axis, [&](int a, int b, double) {
        grad += 0.5 * (wexp(w.phi[a]) + wexp(w.phi[b])) * std::norm(v.values[b] - v.values[a]) /
                (hg * hg);
      });
    out.lhs = h * (vol + h * h * grad) * h3;

    double peu = 0;
    for (std::int64_t id = 0; id < g.size(); ++id) {
      if (g.on_boundary(static_cast<int>(id))) continue;
      const auto a = g.ijk(static_cast<int>(id));
      cplx acc = 6.0 * v.values[id];
      for (int axis = 0; axis < 3; ++axis)
        for (int dir = -1; dir <= 1; dir += 2) {
          int b[3] = {a[0], a[1], a[2]};
          b[axis] += dir;
          acc -= v.values[g.id(b[0], b[1], b[2])];
        }
      const cplx pv = (h * h / (hg * hg)) * acc - E * v.values[id];
      peu += wexp(w.phi[id]) * std::norm(pv);
    }
    double bt = 0;
    std::vector<int> pos(g.size(), -1);
    for (std::size_t i = 0; i < w.gn.nodes.size(); ++i) pos[w.gn.nodes[i]] = static_cast<int>(i);
    for (int ai = 0; ai < w.gn.active_count(); ++ai) {
      const int node = w.gn.active[ai];
      const auto st = face_normal_step(w.gn.active_face[ai]);
      const auto a = g.ijk(node);
      const int p1 = g.id(a[0] - st[0], a[1] - st[1], a[2] - st[2]);
      const int p2 = g.id(a[0] - 2 * st[0], a[1] - 2 * st[1], a[2] - 2 * st[2]);
      const cplx dnv = (-4.0 * v.values[p1] + v.values[p2]) / (2.0 * hg);
      bt += w.gn.weights[pos[node]] * wexp(w.phi[node]) * std::norm(dnv);
    }
    out.rhs = peu * h3 + h * h * h * bt;
  }
  out.ratio = out.rhs / out.lhs;
  return out;
}

// ---------------------------------------------------------------------------
// Quantitative unique continuation

struct UcpRow {
  double h = 0, lhs = 0, rhs = 0;
};

struct UcpReport {
  std::vector<UcpRow> rows;
  double alpha1 = 0, alpha2 = 0;        // fitted exponents
  double alpha1_pred = 0, alpha2_pred = 0;  // weight-derived predictions
  double m0 = 0;
  double interior_norm = 0;   // ||u||_H1(Omega)
  double cauchy_factor = 0;   // ||u||_H2^{1/2} ||dn u||_{H-1/2(Gamma_N)}^{1/2}
  bool degenerate = false;
};

/// Test function for the unique-continuation check: a global homogeneous-
/// Dirichlet solve driven by a source supported in the core, so the equation
/// holds exactly throughout the boundary layer.
inline Field make_ucp_test_function(const HelmholtzContext& ctx, const NeighborhoodChain& chain,
                                    double amplitude = 1.0) {
  const Grid& g = ctx.grid();
  Potential src_pot = windowed_in_core(
      g, chain,
      gaussian_bump(g, Vector3d::Constant(g.origin + 0.5 * g.extent), 0.18 * g.extent, amplitude,
                    "ucp-src"));
  Field src{FieldKind::full, src_pot.values};
  for (int s : g.surface) src.values[s] = 0;
  return solve_source(ctx, src, /*skip_gap_check=*/true);
}

/// Evaluate the two sides of the layer estimate over an h-sweep and fit the
/// smallest two-exponential envelope that dominates the layer norm.
inline UcpReport ucp_check(const Grid& g, const NeighborhoodChain& chain, const Potential& q,
                           double k, const BoundaryPatch& gn,
                           const BoundaryNormOperator& gn_op, const Field& u,
                           const std::vector<double>& h_sweep, double h0 = 1.0,
                           double residual_tol = 1e-8) {
  require(!h_sweep.empty(), "ucp_check: empty h sweep");
  for (double h : h_sweep)
    require(h > 0 && h <= h0 / k + 1e-15, "ucp_check: sweep values must lie in (0, h0/k]");
  require(u.kind == FieldKind::full && u.values.size() == g.size(),
          "ucp_check: full-grid field expected");
  for (int s : g.surface)
    require(std::abs(u.values[s]) == 0.0, "ucp_check: field must vanish on the boundary");

  // the equation must hold through the boundary layer
  Field res = apply_operator(g, q, k, u);
  double res_norm = 0, u_norm = 0;
  for (int id : chain.outer().ids) {
    if (g.on_boundary(id)) continue;
    res_norm += std::norm(res.values[id]);
    u_norm += std::norm(u.values[id]);
  }
  const double uscale = std::max(std::sqrt(u_norm), 1e-300);
  if (std::sqrt(res_norm) > residual_tol * std::max(1.0, uscale) &&
      u.values.cwiseAbs().maxCoeff() > 0)
    throw config_error("ucp_check: field does not solve the equation in the boundary layer "
                       "(residual " + std::to_string(std::sqrt(res_norm) / uscale) + ")");

  UcpReport rep;
  if (u.values.cwiseAbs().maxCoeff() == 0.0) {
    rep.degenerate = true;
    for (double h : h_sweep) rep.rows.push_back({h, 0.0, 0.0});
    return rep;
  }

  NodeSet annulus = set_difference(chain.layers[2], chain.layers[3]);
  const double lhs = h1_on_set(g, u.values, annulus);
  rep.interior_norm = grid_sobolev_norm(g, u.values, 1);
  Field dn = normal_trace(g, u);
  VectorXcd dn_on_gn(gn.nodes.size());
  for (std::size_t i = 0; i < gn.nodes.size(); ++i)
    dn_on_gn[i] = dn.values[g.surface_index[gn.nodes[i]]];
  const double h2n = grid_sobolev_norm(g, u.values, 2);
  rep.cauchy_factor = std::sqrt(h2n) * std::sqrt(boundary_norm(gn_op, dn_on_gn, -0.5));

  // constrained log-space fit of rhs(h) = e^{-a1/h} N1 + e^{a2/h} N2 >= lhs
  const double n1 = rep.interior_norm, n2 = rep.cauchy_factor;
  auto rhs_at = [&](double a1, double a2, double h) {
    return std::exp(-a1 / h) * n1 + std::exp(a2 / h) * n2;
  };
  auto admissible = [&](double a1, double a2) {
    for (double h : h_sweep)
      if (rhs_at(a1, a2, h) < lhs) return false;
    return true;
  };
  auto objective = [&](double a1, double a2) {
    double acc = 0;
    for (double h : h_sweep) {
      const double d = std::log(rhs_at(a1, a2, h)) - std::log(lhs);
      acc += d * d;
    }
    return acc;
  };
  double best1 = 0, best2 = 0, best = std::numeric_limits<double>::infinity();
  std::vector<double> grid1{0.0}, grid2{0.0};
  const double hmin = *std::min_element(h_sweep.begin(), h_sweep.end());
  for (int i = 0; i <= 48; ++i) {
    grid1.push_back(std::pow(10.0, -4.0 + i * (std::log10(4.0 * hmin * 50) + 4.0) / 48));
    grid2.push_back(grid1.back());
  }
  for (double a1 : grid1)
    for (double a2 : grid2) {
      if (!admissible(a1, a2)) continue;
      const double obj = objective(a1, a2);
      if (obj < best) {
        best = obj;
        best1 = a1;
        best2 = a2;
      }
    }
  // one local refinement pass
  for (int round = 0; round < 2; ++round) {
    const double s1 = best1 > 0 ? best1 : 1e-4, s2 = best2 > 0 ? best2 : 1e-4;
    for (int i = -6; i <= 6; ++i)
      for (int j = -6; j <= 6; ++j) {
        const double a1 = std::max(0.0, s1 * std::pow(1.35, i));
        const double a2 = std::max(0.0, s2 * std::pow(1.35, j));
        if (!admissible(a1, a2)) continue;
        const double obj = objective(a1, a2);
        if (obj < best) {
          best = obj;
          best1 = a1;
          best2 = a2;
        }
      }
  }
  rep.alpha1 = best1;
  rep.alpha2 = best2;
  for (double h : h_sweep) rep.rows.push_back({h, lhs, rhs_at(best1, best2, h)});

  // predictions from a weight on the same cap, reported without assertion
  try {
    CarlemanWeight w = build_weight(g, gn, 1.0);
    double m0 = std::numeric_limits<double>::infinity();
    for (int id : annulus.ids) m0 = std::min(m0, w.psi[id] / 2);
    rep.m0 = m0;
    const double alpha = w.gamma;
    rep.alpha1_pred = std::exp(2 * m0 * alpha) - std::exp(m0 * alpha);
    rep.alpha2_pred = std::exp(alpha * w.psi.maxCoeff()) - std::exp(2 * m0 * alpha);
  } catch (const std::exception&) {
    rep.alpha1_pred = rep.alpha2_pred = 0;  // unsupported cap geometry
  }
  return rep;
}

}  // namespace qstab

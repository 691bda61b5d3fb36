#include <catch2/catch_amalgamated.hpp>

#include "qstab/carleman.hpp"

using namespace qstab;

namespace {

Field boundary_vanishing_sine(const Grid& g) {
  Field v = sample_field(g, [](Vector3d x) {
    return cplx(std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]) * std::sin(M_PI * x[2]), 0);
  });
  for (int s : g.surface) v.values[s] = 0;
  return v;
}

Field random_boundary_vanishing(const Grid& g, Rng& rng) {
  Field v = Field::zeros_full(g);
  // smooth random combination of low sine modes
  for (int m1 = 1; m1 <= 2; ++m1)
    for (int m2 = 1; m2 <= 2; ++m2)
      for (int m3 = 1; m3 <= 2; ++m3) {
        const cplx c(uniform(rng, -1, 1), uniform(rng, -1, 1));
        for (std::int64_t id = 0; id < g.size(); ++id) {
          const Vector3d x = g.coord(static_cast<int>(id));
          v.values[id] += c * std::sin(m1 * M_PI * x[0]) * std::sin(m2 * M_PI * x[1]) *
                          std::sin(m3 * M_PI * x[2]);
        }
      }
  for (int s : g.surface) v.values[s] = 0;
  return v;
}

// independent long-double evaluation of the lemma32 sides (direct
// exponentials, no shifting); valid while 2*max(Phi)/h stays within range
std::pair<double, double> lemma32_oracle(const Grid& g, const CarlemanWeight& w, const Field& v,
                                         double h, double E) {
  const double hg = g.spacing();
  long double vol = 0, grad = 0, peu = 0, bt = 0;
  for (std::int64_t id = 0; id < g.size(); ++id)
    vol += expl(2.0L * w.phi[id] / h) * (long double)(std::norm(v.values[id]));
  for (int axis = 0; axis < 3; ++axis)
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        for (int k = 0; k < g.n; ++k) {
          int a[3] = {i, j, k};
          if (a[axis] >= g.n - 1) continue;
          int b[3] = {i, j, k};
          b[axis] += 1;
          const int ia = g.id(i, j, k), ib = g.id(b[0], b[1], b[2]);
          const long double wm = 0.5L * (expl(2.0L * w.phi[ia] / h) + expl(2.0L * w.phi[ib] / h));
          grad += wm * (long double)std::norm(v.values[ib] - v.values[ia]) / (hg * hg);
        }
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
    peu += expl(2.0L * w.phi[id] / h) * (long double)std::norm(pv);
  }
  std::vector<int> pos(g.size(), -1);
  for (std::size_t i = 0; i < w.gn.nodes.size(); ++i) pos[w.gn.nodes[i]] = static_cast<int>(i);
  for (int ai = 0; ai < w.gn.active_count(); ++ai) {
    const int node = w.gn.active[ai];
    const auto st = face_normal_step(w.gn.active_face[ai]);
    const auto a = g.ijk(node);
    const int p1 = g.id(a[0] - st[0], a[1] - st[1], a[2] - st[2]);
    const int p2 = g.id(a[0] - 2 * st[0], a[1] - 2 * st[1], a[2] - 2 * st[2]);
    const cplx dnv = (-4.0 * v.values[p1] + v.values[p2]) / (2.0 * hg);
    bt += (long double)w.gn.weights[pos[node]] * expl(2.0L * w.phi[node] / h) *
          (long double)std::norm(dnv);
  }
  const long double h3 = (long double)hg * hg * hg;
  const long double lhs = h * (vol + h * h * grad) * h3;
  const long double rhs = peu * h3 + (long double)h * h * h * bt;
  return {double(rhs / lhs), double(lhs)};
}

}  // namespace

TEST_CASE("weight construction on a full-face cap") {
  Grid g = build_grid(16, 1.0);
  BoundaryPatch cap = build_patch(g, PatchSpec::rect(5, 0.0, 1.0, 0.0, 1.0));  // face z = 1
  CarlemanWeight w = build_weight(g, cap, 1.5);

  CHECK(w.psi.minCoeff() >= 0.0);
  for (std::int64_t id = 0; id < g.size(); ++id)
    CHECK(w.phi[id] == Catch::Approx(std::exp(1.5 * w.psi[id])).epsilon(1e-14));

  // doubling gamma squares the exponential weight pointwise
  CarlemanWeight w2 = build_weight(g, cap, 3.0);
  for (std::int64_t id = 0; id < g.size(); ++id)
    CHECK(w2.phi[id] == Catch::Approx(w.phi[id] * w.phi[id]).epsilon(1e-12));

  // outward slope nonpositive away from the cap, positive on it
  for (int s : g.surface) {
    if (g.extreme_count(s) != 1) continue;
    const int face = detail::face_of_active(g, s);
    const double slope = detail::normal_slope(g, w.psi, s, face);
    if (face == 5)
      CHECK(slope > 0);
    else
      CHECK(slope <= 1e-10);
  }
}

TEST_CASE("unsupported cap geometries are rejected honestly") {
  Grid g = build_grid(16, 1.0);
  // a strict sub-rectangle leaves cap-face nodes with positive outward slope
  BoundaryPatch sub = build_patch(g, PatchSpec::rect(5, 0.2, 0.8, 0.2, 0.8));
  CHECK_THROWS_AS(build_weight(g, sub, 1.5), invariant_error);
  CHECK_THROWS_AS(build_weight(g, BoundaryPatch{}, 1.5), config_error);
}

TEST_CASE("lemma31 form: positivity, oracle cross-check, homogeneity") {
  Grid g = build_grid(14, 1.0);
  BoundaryPatch cap = build_patch(g, PatchSpec::rect(5, 0.0, 1.0, 0.0, 1.0));
  CarlemanWeight w = build_weight(g, cap, 1.2);
  Field v = boundary_vanishing_sine(g);

  CarlemanCheck c = carleman_ratio(g, w, v, 0.1, 0.0, CarlemanForm::lemma31);
  CHECK_FALSE(c.degenerate);
  CHECK(c.lhs > 0);
  CHECK(std::isfinite(c.ratio));

  // scaling v -> 2v multiplies both sides by 4 and leaves the ratio fixed
  Field v2{FieldKind::full, 2.0 * v.values};
  CarlemanCheck c2 = carleman_ratio(g, w, v2, 0.1, 0.0, CarlemanForm::lemma31);
  CHECK(c2.lhs == Catch::Approx(4 * c.lhs).epsilon(1e-13));
  CHECK(c2.rhs == Catch::Approx(4 * c.rhs).epsilon(1e-13));
  CHECK(c2.ratio == Catch::Approx(c.ratio).epsilon(1e-13));
}

TEST_CASE("lemma32 matches a long-double direct evaluation") {
  Grid g = build_grid(12, 1.0);
  BoundaryPatch cap = build_patch(g, PatchSpec::rect(5, 0.0, 1.0, 0.0, 1.0));
  CarlemanWeight w = build_weight(g, cap, 1.2);
  Field v = boundary_vanishing_sine(g);
  for (double h : {0.25, 0.1, 0.05}) {
    CarlemanCheck c = carleman_ratio(g, w, v, h, 0.3, CarlemanForm::lemma32);
    auto [oracle_ratio, oracle_lhs] = lemma32_oracle(g, w, v, h, 0.3);
    CHECK(c.ratio == Catch::Approx(oracle_ratio).epsilon(1e-9));
    // the shifted evaluation reports the shift it used
    CHECK(c.log_shift == Catch::Approx(2 * w.phi.maxCoeff() / h).epsilon(1e-14));
    CHECK(c.lhs * std::exp(c.log_shift) == Catch::Approx(oracle_lhs).epsilon(1e-9));
  }
}

TEST_CASE("degenerate and invalid inputs") {
  Grid g = build_grid(12, 1.0);
  BoundaryPatch cap = build_patch(g, PatchSpec::rect(5, 0.0, 1.0, 0.0, 1.0));
  CarlemanWeight w = build_weight(g, cap, 1.0);
  CarlemanCheck c = carleman_ratio(g, w, Field::zeros_full(g), 0.1, 0.0, CarlemanForm::lemma31);
  CHECK(c.degenerate);
  Field bad = sample_field(g, [](Vector3d) { return cplx(1, 0); });
  CHECK_THROWS_AS(carleman_ratio(g, w, bad, 0.1, 0.0, CarlemanForm::lemma31), config_error);
  Field v = boundary_vanishing_sine(g);
  CHECK_THROWS_AS(carleman_ratio(g, w, v, 1.5, 0.0, CarlemanForm::lemma31), config_error);
  CHECK_THROWS_AS(carleman_ratio(g, w, v, 0.1, 2.0, CarlemanForm::lemma31), config_error);
}

TEST_CASE("empirical constants stay bounded as h decreases") {
  Grid g = build_grid(14, 1.0);
  BoundaryPatch cap = build_patch(g, PatchSpec::rect(5, 0.0, 1.0, 0.0, 1.0));
  CarlemanWeight w = build_weight(g, cap, 1.2);
  Rng rng(5);
  std::vector<Field> family;
  for (int t = 0; t < 5; ++t) family.push_back(random_boundary_vanishing(g, rng));
  const double h0 = 0.2;
  std::vector<double> min_ratio;
  for (double h : {h0, h0 / 2, h0 / 4, h0 / 8}) {
    double mr = std::numeric_limits<double>::infinity();
    for (const auto& v : family) {
      mr = std::min(mr, carleman_ratio(g, w, v, h, 0.0, CarlemanForm::lemma31).ratio);
      mr = std::min(mr, carleman_ratio(g, w, v, h, 0.0, CarlemanForm::lemma32).ratio);
    }
    min_ratio.push_back(mr);
  }
  CHECK(min_ratio.back() > 0);
  CHECK(min_ratio.back() >= 0.5 * min_ratio.front());
}

TEST_CASE("gamma drives the conjugated lower bound at fourth order") {
  Grid g = build_grid(14, 1.0);
  BoundaryPatch cap = build_patch(g, PatchSpec::rect(5, 0.0, 1.0, 0.0, 1.0));
  Field v = boundary_vanishing_sine(g);
  const double gamma = 2.5, h = 0.1;
  CarlemanWeight w1 = build_weight(g, cap, gamma);
  CarlemanWeight w2 = build_weight(g, cap, 2 * gamma);
  const double l1 = carleman_ratio(g, w1, v, h, 0.0, CarlemanForm::lemma31).lhs;
  const double l2 = carleman_ratio(g, w2, v, h, 0.0, CarlemanForm::lemma31).lhs;
  CHECK(l2 / l1 >= 8.0);
}

TEST_CASE("unique continuation sweep: envelope dominates the layer norm") {
  Grid g = build_grid(24, 1.0);
  NeighborhoodChain chain = build_neighborhoods(g, {5, 4, 3, 2});
  Potential q = windowed_in_core(g, chain, gaussian_bump(g, {0.5, 0.5, 0.5}, 0.15, 0.8, "q"));
  const double k = 2.0;
  HelmholtzContext ctx(g, q, k);
  Field u = make_ucp_test_function(ctx, chain);

  BoundaryPatch cap = build_patch(g, PatchSpec::rect(5, 0.0, 1.0, 0.0, 1.0));
  BoundaryNormOperator cap_op = build_boundary_norm_operator(g, cap);
  const double h0 = 0.5;
  std::vector<double> sweep;
  for (int j = 0; j < 6; ++j) sweep.push_back(h0 / k / std::pow(1.6, j));

  UcpReport rep = ucp_check(g, chain, q, k, cap, cap_op, u, sweep, h0);
  REQUIRE(rep.rows.size() == sweep.size());
  for (const auto& row : rep.rows) {
    CHECK(row.rhs >= row.lhs * (1 - 1e-12));
    CHECK(row.lhs > 0);
  }
  CHECK(rep.alpha1 >= 0);
  CHECK(rep.alpha2 >= 0);
  CHECK(rep.alpha1_pred > 0);
  CHECK(rep.alpha2_pred > 0);

  // homogeneity: doubling u doubles the layer norm and both envelope factors,
  // leaving the fitted exponents unchanged
  Field u2{FieldKind::full, 2.0 * u.values};
  UcpReport rep2 = ucp_check(g, chain, q, k, cap, cap_op, u2, sweep, h0);
  CHECK(rep2.rows.front().lhs == Catch::Approx(2 * rep.rows.front().lhs).epsilon(1e-12));
  CHECK(rep2.interior_norm == Catch::Approx(2 * rep.interior_norm).epsilon(1e-12));
  CHECK(rep2.cauchy_factor == Catch::Approx(2 * rep.cauchy_factor).epsilon(1e-12));
  CHECK(rep2.alpha1 == Catch::Approx(rep.alpha1).epsilon(1e-9));
  CHECK(rep2.alpha2 == Catch::Approx(rep.alpha2).epsilon(1e-9));

  // degenerate input is reported, not computed
  UcpReport repz = ucp_check(g, chain, q, k, cap, cap_op, Field::zeros_full(g), sweep, h0);
  CHECK(repz.degenerate);

  // a field that does not solve the equation in the layer is rejected
  Field junk = boundary_vanishing_sine(g);
  CHECK_THROWS_AS(ucp_check(g, chain, q, k, cap, cap_op, junk, sweep, h0), config_error);
}

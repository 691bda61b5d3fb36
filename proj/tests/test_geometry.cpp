#include <catch2/catch_amalgamated.hpp>

#include "qstab/geometry.hpp"
#include "qstab/potential.hpp"

using namespace qstab;

TEST_CASE("grid construction and node classification") {
  Grid g = build_grid(8, 1.0);
  REQUIRE(g.size() == 512);
  REQUIRE(g.surface.size() == 296);  // 8^3 - 6^3 by direct enumeration
  int interior = 0;
  for (int id = 0; id < g.size(); ++id)
    if (!g.on_boundary(id)) ++interior;
  REQUIRE(interior == 6 * 6 * 6);

  CHECK_THROWS_AS(build_grid(2, 1.0), config_error);
  CHECK_THROWS_AS(build_grid(7, 1.0), config_error);

  Grid g32 = build_grid(32, 1.0);
  CHECK(g32.spacing() == Catch::Approx(1.0 / 31).epsilon(1e-15));
}

TEST_CASE("grid ordering is lexicographic and interior nodes have 6 neighbors") {
  Grid g = build_grid(8, 1.0);
  REQUIRE(g.id(0, 0, 1) == 1);   // z fastest
  REQUIRE(g.id(0, 1, 0) == 8);   // then y
  REQUIRE(g.id(1, 0, 0) == 64);  // x slowest
  const auto a = g.ijk(g.id(3, 4, 5));
  CHECK(a[0] == 3);
  CHECK(a[1] == 4);
  CHECK(a[2] == 5);
}

TEST_CASE("full-surface patch weighs to the cube area") {
  Grid g = build_grid(16, 1.0);
  BoundaryPatch p = build_patch(g, PatchSpec::full());
  CHECK(p.area() == Catch::Approx(6.0).margin(1e-12));
  CHECK(p.full_surface);
  CHECK(p.nodes.size() == g.surface.size());
  // active nodes exclude box edges: 6 (n-2)^2 of them
  CHECK(p.active_count() == 6 * 14 * 14);
}

TEST_CASE("face sub-rectangle patch area within quadrature error") {
  Grid g = build_grid(32, 1.0);
  BoundaryPatch p = build_patch(g, PatchSpec::rect(0, 0.0, 0.5, 0.0, 0.5));
  CHECK(std::abs(p.area() - 0.25) <= 2 * g.spacing());
  // weights sum exactly to the snapped cell area
  const int cells = 15 * 15;  // cells with upper corner <= 0.5 on both axes
  CHECK(p.area() == Catch::Approx(cells * g.spacing() * g.spacing()).epsilon(1e-12));
}

TEST_CASE("empty patch selections are rejected") {
  Grid g = build_grid(16, 1.0);
  CHECK_THROWS_AS(build_patch(g, PatchSpec::rect(0, 0.4, 0.41, 0.4, 0.41)), config_error);
  CHECK_THROWS_AS(build_patch(g, PatchSpec::list({})), config_error);
}

TEST_CASE("patch quadrature converges at second order for a smooth function") {
  auto integrate = [](int n) {
    Grid g = build_grid(n, 1.0);
    BoundaryPatch p = build_patch(g, PatchSpec::rect(4, 0.0, 1.0, 0.0, 1.0));  // face z=0
    double acc = 0;
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
      const Vector3d x = g.coord(p.nodes[i]);
      acc += p.weights[i] * std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]);
    }
    return acc;
  };
  const double exact = 4.0 / (M_PI * M_PI);
  const double e16 = std::abs(integrate(17) - exact);
  const double e32 = std::abs(integrate(33) - exact);
  CHECK(e16 / e32 > 3.0);
  CHECK(e16 / e32 < 5.0);
}

TEST_CASE("neighborhood chain nesting is strict") {
  Grid g = build_grid(32, 1.0);
  NeighborhoodChain c = build_neighborhoods(g, {8, 6, 4, 2});
  for (int j = 0; j < 3; ++j) {
    CHECK(c.layers[j + 1].subset_of(c.layers[j]));
    CHECK(c.layers[j + 1].size() < c.layers[j].size());
  }
  // every boundary node belongs to every layer
  for (int s : g.surface)
    for (int j = 0; j < 4; ++j) CHECK(c.layers[j].contains(s));
  // the interface avoids the box surface
  for (int id : c.gamma_sharp.ids) CHECK_FALSE(g.on_boundary(id));

  CHECK_THROWS_AS(build_neighborhoods(g, {4, 4, 3, 2}), config_error);
  Grid g16 = build_grid(16, 1.0);
  CHECK_THROWS_AS(build_neighborhoods(g16, {5, 4, 3, 2}), config_error);
}

TEST_CASE("cutoffs honor node-exact support conditions") {
  Grid g = build_grid(32, 1.0);
  NeighborhoodChain c = build_neighborhoods(g, {8, 6, 4, 2});
  CutoffPair cut = build_cutoffs(g, c, 2);

  for (int id : c.layers[3].ids) CHECK(cut.chi2[id] == 0.0);  // chi2 = 0 on O3
  for (int id = 0; id < g.size(); ++id) {
    CHECK(cut.chi1[id] >= 0.0);
    CHECK(cut.chi1[id] <= 1.0);
    CHECK(cut.chi2[id] >= 0.0);
    CHECK(cut.chi2[id] <= 1.0);
    if (!c.layers[2].contains(id)) CHECK(cut.chi2[id] == 1.0);  // chi2 = 1 outside O2
  }
  for (int id : cut.w_sharp_star.ids) CHECK(cut.chi1[id] == 0.0);
  for (int id = 0; id < g.size(); ++id)
    if (!cut.w_sharp.contains(id) && c.outer().contains(id)) CHECK(cut.chi1[id] == 1.0);

  CHECK(cut.chi2.minCoeff() == 0.0);
  CHECK(cut.chi2.maxCoeff() == 1.0);
  CHECK(cut.chi1.minCoeff() == 0.0);
  CHECK(cut.chi1.maxCoeff() == 1.0);

  CHECK_THROWS_AS(build_cutoffs(g, c, 5), config_error);
  CHECK_THROWS_AS(build_cutoffs(g, c, 1), config_error);
}

TEST_CASE("cutoff gradients live in the stated annuli") {
  Grid g = build_grid(32, 1.0);
  NeighborhoodChain c = build_neighborhoods(g, {8, 6, 4, 2});
  CutoffPair cut = build_cutoffs(g, c, 2);
  NodeSet o2_minus_o3 = set_difference(c.layers[2], c.layers[3]);
  NodeSet ws_minus_wss = set_difference(cut.w_sharp, cut.w_sharp_star);

  // a difference edge lies in an annulus when one of its endpoints does
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k) {
        const int id = g.id(i, j, k);
        for (int axis = 0; axis < 3; ++axis) {
          int b[3] = {i, j, k};
          b[axis] += 1;
          if (b[axis] >= g.n) continue;
          const int nb = g.id(b[0], b[1], b[2]);
          if (cut.chi2[nb] != cut.chi2[id])
            CHECK((o2_minus_o3.contains(id) || o2_minus_o3.contains(nb)));
          if (cut.chi1[nb] != cut.chi1[id])
            CHECK((ws_minus_wss.contains(id) || ws_minus_wss.contains(nb)));
        }
      }
}

TEST_CASE("cutoff discrete curvature bounded by the stated constant") {
  Grid g = build_grid(32, 1.0);
  NeighborhoodChain c = build_neighborhoods(g, {8, 6, 4, 2});
  const int t = 2;
  CutoffPair cut = build_cutoffs(g, c, t);
  const double h = g.spacing();
  const double bound = 16.0 / std::pow(t * h, 2);
  for (int i = 1; i < g.n - 1; ++i)
    for (int j = 1; j < g.n - 1; ++j)
      for (int k = 1; k < g.n - 1; ++k)
        for (int axis = 0; axis < 3; ++axis) {
          int lo[3] = {i, j, k}, hi[3] = {i, j, k};
          lo[axis] -= 1;
          hi[axis] += 1;
          const double d2 = cut.chi2[g.id(hi[0], hi[1], hi[2])] - 2 * cut.chi2[g.id(i, j, k)] +
                            cut.chi2[g.id(lo[0], lo[1], lo[2])];
          CHECK(std::abs(d2) / (h * h) <= bound);
        }
}

TEST_CASE("potential window vanishes through the boundary layer") {
  Grid g = build_grid(32, 1.0);
  NeighborhoodChain c = build_neighborhoods(g, {8, 6, 4, 2});
  Potential q = windowed_in_core(g, c, gaussian_bump(g, {0.5, 0.5, 0.5}, 0.15, 1.0));
  REQUIRE(q.vanishes_in_O);
  validate_potential(g, q, &c);
  for (int id : c.gamma_sharp.ids) CHECK(std::abs(q.values[id]) == 0.0);
}

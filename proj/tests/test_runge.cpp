#include <catch2/catch_amalgamated.hpp>

#include "qstab/cgo.hpp"
#include "qstab/runge.hpp"

using namespace qstab;

namespace {

struct Setup {
  Grid g;
  NeighborhoodChain chain;
  Potential q;
  BoundaryPatch full, face;
  BoundaryNormOperator surf;
  double k = 2.0;

  explicit Setup(int n) : g(build_grid(n, 1.0)) {
    chain = build_neighborhoods(g, {5, 4, 3, 2});
    q = windowed_in_core(g, chain, gaussian_bump(g, {0.5, 0.5, 0.5}, 0.12, 1.0, "q"));
    full = build_patch(g, PatchSpec::full());
    face = build_patch(g, PatchSpec::rect(0, 0.0, 1.0, 0.0, 1.0));
    surf = build_boundary_norm_operator(g, full);
  }
};

Field cgo_target(const Setup& s, double a) {
  Grid tilde = enlarge_grid(s.g, 3);
  PeriodCell cell = aligned_cell(tilde);
  Potential qz = s.q;  // zero extension happens on the cell
  VectorXcd qc = sample_grid_potential_on_cell(s.g, qz, cell);
  ZetaPair p = make_zeta_pair(Vector3d(1.0, 0.5, 0), s.k, a);
  CGOSolution sol = cgo_remainder(qc, s.q.linf_bound, p.zeta1, cell);
  return cgo_field(sol, s.g);
}

}  // namespace

TEST_CASE("global solutions are reproduced as lambda shrinks") {
  Setup s(20);
  HelmholtzContext ctx(s.g, s.q, s.k);
  Field data = sample_boundary(s.g, [&](Vector3d x) {
    return std::exp(cplx(0, s.k * (0.6 * x[0] + 0.8 * x[2])));
  });
  Field v = solve_dirichlet(ctx, data);
  RungeResult r = runge_approximate(ctx, s.chain, v, s.full, s.surf, 1e-12);
  CHECK(r.eps_achieved <= 1e-6);
  // recovered data reproduces the trace where it matters: through the solution
  CHECK(l2_on_set(s.g, (r.u.values - v.values).eval(),
                  detail::runge_sets(s.g, s.chain).omega1) <= 1e-6);
}

TEST_CASE("zero target gives zero data at zero cost") {
  Setup s(20);
  HelmholtzContext ctx(s.g, s.q, s.k);
  RungeResult r = runge_approximate(ctx, s.chain, Field::zeros_full(s.g), s.full, s.surf, 1e-6);
  CHECK(r.f.values.cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(r.eps_achieved == 0.0);
}

TEST_CASE("returned data vanishes outside Gamma_D node-exactly") {
  Setup s(20);
  HelmholtzContext ctx(s.g, s.q, s.k);
  Field v = cgo_target(s, 4.0);
  RungeResult r = runge_approximate(ctx, s.chain, v, s.face, s.surf, 1e-4);
  for (std::size_t i = 0; i < s.g.surface.size(); ++i) {
    const int node = s.g.surface[i];
    bool in_patch = false;
    for (int a : s.face.active) in_patch = in_patch || a == node;
    if (!in_patch) CHECK(r.f.values[i] == cplx(0, 0));
  }
}

TEST_CASE("tikhonov trade-off is monotone along the lambda path") {
  Setup s(20);
  HelmholtzContext ctx(s.g, s.q, s.k);
  Field v = cgo_target(s, 4.0);
  std::vector<RungeResult> sweep;
  for (double lam : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10}) {
    sweep.push_back(runge_approximate(ctx, s.chain, v, s.face, s.surf, lam));
  }
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    CHECK(sweep[i].eps_achieved < sweep[i - 1].eps_achieved);
    CHECK(sweep[i].data_cost > sweep[i - 1].data_cost);
  }
  // the achieved mismatch is exactly the certified approximation factor
  const auto sets = detail::runge_sets(s.g, s.chain);
  for (const auto& r : sweep) {
    const double mis = l2_on_set(s.g, (r.u.values - v.values).eval(), sets.omega1);
    const double bound = r.eps_achieved * h1_on_set(s.g, v.values, sets.omega_tilde1);
    CHECK(mis <= bound * (1 + 1e-12));
  }
}

TEST_CASE("matrix-free path agrees with the dense factorization") {
  Setup s(20);
  HelmholtzContext ctx(s.g, s.q, s.k);
  Field v = cgo_target(s, 4.0);
  RungeResult dense = runge_approximate(ctx, s.chain, v, s.face, s.surf, 1e-4);
  RungeOptions mf;
  mf.force_matrix_free = true;
  RungeResult free = runge_approximate(ctx, s.chain, v, s.face, s.surf, 1e-4, mf);
  CHECK(free.eps_achieved == Catch::Approx(dense.eps_achieved).epsilon(1e-5));
  CHECK(free.data_cost == Catch::Approx(dense.data_cost).epsilon(1e-5));
}

TEST_CASE("exponent fit on synthetic power laws") {
  auto synth = [](double c, double mu, double noise, Rng& rng) {
    std::vector<RungeResult> v;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
      RungeResult r;
      r.eps_achieved = eps;
      r.data_cost = c * std::pow(eps, -mu) * (1 + noise * uniform(rng, -1, 1));
      v.push_back(r);
    }
    return v;
  };
  Rng rng(23);
  auto [mu1, q1] = fit_runge_exponent(synth(1.0, 2.0, 0.0, rng));
  CHECK(mu1 == Catch::Approx(2.0).margin(1e-10));
  CHECK(q1 == Catch::Approx(1.0).margin(1e-12));
  auto [mu2, q2] = fit_runge_exponent(synth(3.0, 1.5, 0.01, rng));
  CHECK(mu2 == Catch::Approx(1.5).margin(0.05));
  CHECK(q2 > 0.99);

  std::vector<RungeResult> narrow;
  for (double eps : {0.5, 0.4, 0.3, 0.2, 0.15}) {
    RungeResult r;
    r.eps_achieved = eps;
    r.data_cost = 1 / eps;
    narrow.push_back(r);
  }
  CHECK_THROWS_AS(fit_runge_exponent(narrow), config_error);
}

#pragma once

#include "qstab/geometry.hpp"

namespace qstab {

enum class FieldKind : std::uint8_t { full = 0, boundary = 1, normal_trace = 2 };

/// Complex grid data. Full fields hold one value per node; boundary traces and
/// normal-derivative traces hold one value per surface node, in surface order.
struct Field {
  FieldKind kind = FieldKind::full;
  VectorXcd values;

  static Field zeros_full(const Grid& g) { return {FieldKind::full, VectorXcd::Zero(g.size())}; }
  static Field zeros_boundary(const Grid& g) {
    return {FieldKind::boundary, VectorXcd::Zero(static_cast<std::int64_t>(g.surface.size()))};
  }
};

/// Boundary trace of a full field, in surface order.
inline Field boundary_trace(const Grid& g, const Field& u) {
  require(u.kind == FieldKind::full, "boundary_trace: full field expected");
  Field t = Field::zeros_boundary(g);
  for (std::size_t s = 0; s < g.surface.size(); ++s) t.values[s] = u.values[g.surface[s]];
  return t;
}

/// Sample a function of position into a full field.
template <class F>
Field sample_field(const Grid& g, F&& f) {
  Field u = Field::zeros_full(g);
  for (std::int64_t id = 0; id < g.size(); ++id) u.values[id] = f(g.coord(static_cast<int>(id)));
  return u;
}

/// Sample a function of position on the surface nodes.
template <class F>
Field sample_boundary(const Grid& g, F&& f) {
  Field u = Field::zeros_boundary(g);
  for (std::size_t s = 0; s < g.surface.size(); ++s) u.values[s] = f(g.coord(g.surface[s]));
  return u;
}

/// Trapezoid volume quadrature of an arbitrary per-node integrand.
template <class F>
cplx volume_integral(const Grid& g, F&& integrand) {
  const double h = g.spacing();
  cplx acc = 0;
  for (int i = 0; i < g.n; ++i) {
    const double wi = (i == 0 || i == g.n - 1) ? 0.5 : 1.0;
    for (int j = 0; j < g.n; ++j) {
      const double wj = (j == 0 || j == g.n - 1) ? 0.5 : 1.0;
      for (int k = 0; k < g.n; ++k) {
        const double wk = (k == 0 || k == g.n - 1) ? 0.5 : 1.0;
        acc += wi * wj * wk * integrand(g.id(i, j, k));
      }
    }
  }
  return acc * (h * h * h);
}

/// Trapezoid weight of a single node (product of per-axis 1/2 rules).
inline double volume_weight(const Grid& g, int node) {
  const auto a = g.ijk(node);
  double w = 1;
  for (int c : a) w *= (c == 0 || c == g.n - 1) ? 0.5 : 1.0;
  return w * std::pow(g.spacing(), 3);
}

}  // namespace qstab

#pragma once

#include <array>
#include <cmath>

#include "qstab/core.hpp"

namespace qstab {

/// Uniform Cartesian discretization of the cube [origin, origin+extent]^3.
/// Nodes are ordered lexicographically (x slowest, z fastest), so that
/// id = (i*n + j)*n + k. Boundary nodes are those with any index in {0, n-1}.
struct Grid {
  int n = 0;          // nodes per axis
  double extent = 1;  // box side length
  double origin = 0;  // coordinate of the low corner (same on all axes)

  std::vector<int> surface;        // boundary node ids, ascending
  std::vector<int> surface_index;  // node id -> position in `surface`, or -1

  double spacing() const { return extent / (n - 1); }
  std::int64_t size() const { return static_cast<std::int64_t>(n) * n * n; }
  int interior_count() const { return (n - 2) * (n - 2) * (n - 2); }

  int id(int i, int j, int k) const { return (i * n + j) * n + k; }
  std::array<int, 3> ijk(int node) const {
    const int k = node % n, j = (node / n) % n, i = node / (n * n);
    return {i, j, k};
  }
  Vector3d coord(int node) const {
    const auto a = ijk(node);
    const double h = spacing();
    return {origin + h * a[0], origin + h * a[1], origin + h * a[2]};
  }
  bool on_boundary(int i, int j, int k) const {
    return i == 0 || i == n - 1 || j == 0 || j == n - 1 || k == 0 || k == n - 1;
  }
  bool on_boundary(int node) const {
    const auto a = ijk(node);
    return on_boundary(a[0], a[1], a[2]);
  }
  /// Chebyshev distance (in cells) to the box surface; boundary nodes are 0.
  int depth(int node) const {
    const auto a = ijk(node);
    int d = n;
    for (int c : a) d = std::min({d, c, n - 1 - c});
    return d;
  }
  /// Number of extreme index coordinates: 1 on open faces, 2 on edges, 3 at corners.
  int extreme_count(int node) const {
    const auto a = ijk(node);
    int c = 0;
    for (int v : a) c += (v == 0 || v == n - 1) ? 1 : 0;
    return c;
  }

  std::string hash() const {
    Hasher h;
    h.add(std::int64_t(n));
    h.add(extent);
    h.add(origin);
    return h.hex();
  }
};

inline Grid build_grid(int n_axis, double extent, double origin = 0.0) {
  require(n_axis >= 8, "build_grid: n_axis must be >= 8 (stencils and nested layers degenerate)");
  require(extent > 0, "build_grid: extent must be positive");
  Grid g;
  g.n = n_axis;
  g.extent = extent;
  g.origin = origin;
  g.surface_index.assign(g.size(), -1);
  for (int i = 0; i < n_axis; ++i)
    for (int j = 0; j < n_axis; ++j)
      for (int k = 0; k < n_axis; ++k)
        if (g.on_boundary(i, j, k)) {
          g.surface_index[g.id(i, j, k)] = static_cast<int>(g.surface.size());
          g.surface.push_back(g.id(i, j, k));
        }
  return g;
}

/// Grid-aligned enlargement: the same spacing, `margin` extra cells on every
/// side. Nodes of the inner grid coincide with nodes of the enlarged one.
inline Grid enlarge_grid(const Grid& g, int margin) {
  require(margin >= 1, "enlarge_grid: margin must be >= 1");
  const double h = g.spacing();
  return build_grid(g.n + 2 * margin, g.extent + 2 * margin * h, g.origin - margin * h);
}

/// Index offset of inner-grid node (i,j,k) inside an enlarged grid.
inline int embed_id(const Grid& inner, const Grid& outer, int node) {
  const auto a = inner.ijk(node);
  const int m = static_cast<int>(std::llround((inner.origin - outer.origin) / inner.spacing()));
  return outer.id(a[0] + m, a[1] + m, a[2] + m);
}

// Box faces are numbered 0..5 as x-,x+,y-,y+,z-,z+.
inline int face_axis(int face) { return face / 2; }
inline int face_side(int face) { return face % 2; }  // 0: low, 1: high

/// Outward normal direction of a face as a node-index step (+/-1 on one axis).
inline std::array<int, 3> face_normal_step(int face) {
  std::array<int, 3> s{0, 0, 0};
  s[face_axis(face)] = face_side(face) == 0 ? -1 : 1;
  return s;
}

}  // namespace qstab

#pragma once

#include <algorithm>
#include <optional>

#include "qstab/grid.hpp"

namespace qstab {

/// Sorted node-id set with O(1) membership.
struct NodeSet {
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;  // sized to grid, 1 if member

  static NodeSet from_ids(std::vector<int> v, std::int64_t grid_size) {
    NodeSet s;
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    s.ids = std::move(v);
    s.mask.assign(grid_size, 0);
    for (int id : s.ids) s.mask[id] = 1;
    return s;
  }
  bool contains(int id) const { return mask[id] != 0; }
  std::size_t size() const { return ids.size(); }
  bool subset_of(const NodeSet& other) const {
    for (int id : ids)
      if (!other.contains(id)) return false;
    return true;
  }
};

/// Nodes of `a` that are not in `b`.
inline NodeSet set_difference(const NodeSet& a, const NodeSet& b) {
  std::vector<int> out;
  for (int id : a.ids)
    if (!b.contains(id)) out.push_back(id);
  return NodeSet::from_ids(std::move(out), a.mask.size());
}

// ---------------------------------------------------------------------------
// Boundary patches

struct PatchSpec {
  enum class Kind { full_surface, face_rect, node_list } kind = Kind::full_surface;
  int face = 0;                      // face_rect only
  double lo0 = 0, hi0 = 0, lo1 = 0, hi1 = 0;  // rectangle in face coordinates
  std::vector<int> nodes;            // node_list only

  static PatchSpec full() { return PatchSpec{}; }
  static PatchSpec rect(int face, double lo0, double hi0, double lo1, double hi1) {
    PatchSpec s;
    s.kind = Kind::face_rect;
    s.face = face;
    s.lo0 = lo0;
    s.hi0 = hi0;
    s.lo1 = lo1;
    s.hi1 = hi1;
    return s;
  }
  static PatchSpec list(std::vector<int> ids) {
    PatchSpec s;
    s.kind = Kind::node_list;
    s.nodes = std::move(ids);
    return s;
  }
  std::string describe() const {
    char buf[160];
    switch (kind) {
      case Kind::full_surface:
        return "full";
      case Kind::face_rect:
        std::snprintf(buf, sizeof buf, "face=%d rect=[%g,%g]x[%g,%g]", face, lo0, hi0, lo1, hi1);
        return buf;
      default:
        std::snprintf(buf, sizeof buf, "list(%zu nodes)", nodes.size());
        return buf;
    }
  }
};

/// A quadrature-weighted set of boundary nodes. Weights come from composing
/// the patch out of whole surface cells (h^2 per cell, split between its four
/// corners), so they sum to the covered area exactly. `active` holds the
/// face-interior members (exactly one extreme coordinate); those are the nodes
/// that carry trace data and normal derivatives.
struct BoundaryPatch {
  std::vector<int> nodes;
  VectorXd weights;       // aligned with nodes
  std::vector<int> active;        // subset of nodes, face-interior only
  std::vector<int> active_face;   // face id per active node
  bool full_surface = false;
  std::string descriptor;
  std::string grid_hash;

  double area() const { return weights.sum(); }
  int active_count() const { return static_cast<int>(active.size()); }
};

namespace detail {

// Per-face cell enumeration: a face is an (n-1)x(n-1) grid of surface cells.
// corner(face, a, b, da, db) returns the node id of a cell corner, where a,b
// index the two tangential axes in ascending axis order.
inline int face_node(const Grid& g, int face, int a, int b) {
  const int ax = face_axis(face);
  const int fixed = face_side(face) == 0 ? 0 : g.n - 1;
  int ijk[3];
  ijk[ax] = fixed;
  const int t0 = ax == 0 ? 1 : 0;
  const int t1 = ax == 2 ? 1 : 2;
  ijk[t0] = a;
  ijk[t1] = b;
  return g.id(ijk[0], ijk[1], ijk[2]);
}

inline BoundaryPatch patch_from_cells(
    const Grid& g, const std::vector<std::array<int, 3>>& cells, const std::string& desc) {
  require(!cells.empty(), "build_patch: selection is empty");
  const double h = g.spacing();
  std::vector<double> acc(g.size(), 0.0);
  for (const auto& c : cells) {
    const auto [face, a, b] = c;
    for (int da = 0; da <= 1; ++da)
      for (int db = 0; db <= 1; ++db) acc[face_node(g, face, a + da, b + db)] += 0.25 * h * h;
  }
  BoundaryPatch p;
  p.descriptor = desc;
  p.grid_hash = g.hash();
  for (std::int64_t id = 0; id < g.size(); ++id)
    if (acc[id] > 0) p.nodes.push_back(static_cast<int>(id));
  p.weights.resize(p.nodes.size());
  for (std::size_t i = 0; i < p.nodes.size(); ++i) p.weights[i] = acc[p.nodes[i]];
  for (int id : p.nodes)
    if (g.extreme_count(id) == 1) {
      p.active.push_back(id);
      const auto a = g.ijk(id);
      int face = -1;
      for (int ax = 0; ax < 3; ++ax) {
        if (a[ax] == 0) face = 2 * ax;
        if (a[ax] == g.n - 1) face = 2 * ax + 1;
      }
      p.active_face.push_back(face);
    }
  return p;
}

}  // namespace detail

inline BoundaryPatch build_patch(const Grid& g, const PatchSpec& spec) {
  std::vector<std::array<int, 3>> cells;
  const double h = g.spacing();
  switch (spec.kind) {
    case PatchSpec::Kind::full_surface: {
      for (int f = 0; f < 6; ++f)
        for (int a = 0; a < g.n - 1; ++a)
          for (int b = 0; b < g.n - 1; ++b) cells.push_back({f, a, b});
      auto p = detail::patch_from_cells(g, cells, spec.describe());
      p.full_surface = true;
      return p;
    }
    case PatchSpec::Kind::face_rect: {
      require(spec.face >= 0 && spec.face < 6, "build_patch: face id must be 0..5");
      const double tol = 1e-12 * g.extent;
      for (int a = 0; a < g.n - 1; ++a)
        for (int b = 0; b < g.n - 1; ++b) {
          const double a0 = g.origin + a * h, a1 = g.origin + (a + 1) * h;
          const double b0 = g.origin + b * h, b1 = g.origin + (b + 1) * h;
          if (a0 >= spec.lo0 - tol && a1 <= spec.hi0 + tol && b0 >= spec.lo1 - tol &&
              b1 <= spec.hi1 + tol)
            cells.push_back({spec.face, a, b});
        }
      return detail::patch_from_cells(g, cells, spec.describe());
    }
    case PatchSpec::Kind::node_list: {
      NodeSet sel = NodeSet::from_ids(spec.nodes, g.size());
      for (int id : sel.ids)
        require(g.on_boundary(id), "build_patch: node list contains a non-boundary node");
      for (int f = 0; f < 6; ++f)
        for (int a = 0; a < g.n - 1; ++a)
          for (int b = 0; b < g.n - 1; ++b) {
            bool all = true;
            for (int da = 0; da <= 1 && all; ++da)
              for (int db = 0; db <= 1 && all; ++db)
                all = sel.contains(detail::face_node(g, f, a + da, b + db));
            if (all) cells.push_back({f, a, b});
          }
      return detail::patch_from_cells(g, cells, spec.describe());
    }
  }
  throw config_error("build_patch: unknown patch kind");
}

// ---------------------------------------------------------------------------
// Nested boundary-layer neighborhoods

/// Four nested neighborhoods of the box surface measured in Chebyshev cell
/// distance, plus the interface separating the outermost one from the core.
/// layer(j) = { depth < widths[j] }, interface = { depth == widths[0] }.
struct NeighborhoodChain {
  std::array<int, 4> widths{};  // strictly decreasing
  std::array<NodeSet, 4> layers;  // O, O1, O2, O3
  NodeSet gamma_sharp;

  const NodeSet& outer() const { return layers[0]; }  // O
  int outer_width() const { return widths[0]; }
};

inline NeighborhoodChain build_neighborhoods(const Grid& g, const std::array<int, 4>& widths) {
  for (int j = 0; j + 1 < 4; ++j)
    require(widths[j] > widths[j + 1], "build_neighborhoods: widths must be strictly decreasing");
  require(widths[3] >= 2, "build_neighborhoods: smallest width must be >= 2 cells");
  require(widths[0] <= g.n / 4.0, "build_neighborhoods: largest width exceeds n_axis/4");

  NeighborhoodChain c;
  c.widths = widths;
  std::array<std::vector<int>, 4> layer_ids;
  std::vector<int> sharp_ids;
  for (std::int64_t id = 0; id < g.size(); ++id) {
    const int d = g.depth(static_cast<int>(id));
    for (int j = 0; j < 4; ++j)
      if (d < widths[j]) layer_ids[j].push_back(static_cast<int>(id));
    if (d == widths[0]) sharp_ids.push_back(static_cast<int>(id));
  }
  for (int j = 0; j < 4; ++j) c.layers[j] = NodeSet::from_ids(std::move(layer_ids[j]), g.size());
  c.gamma_sharp = NodeSet::from_ids(std::move(sharp_ids), g.size());
  return c;
}

// ---------------------------------------------------------------------------
// Cutoff functions

/// Quintic smoothstep; C^2 with s(0)=0, s(1)=1 and vanishing first and second
/// derivatives at both ends.
inline double smoothstep5(double t) {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  return t * t * t * (10 + t * (-15 + 6 * t));
}

/// chi2 vanishes on O3 and is one outside O2; chi1 is one on the O1 side and
/// vanishes near the interface. Both are quintic profiles of the Chebyshev
/// cell depth, transitioning over `transition` cells.
struct CutoffPair {
  VectorXd chi1, chi2;
  NodeSet w_sharp, w_sharp_star;
  int transition = 0;
};

inline CutoffPair build_cutoffs(const Grid& g, const NeighborhoodChain& c, int transition) {
  const int w0 = c.widths[0], w1 = c.widths[1], w2 = c.widths[2], w3 = c.widths[3];
  require(transition >= 2, "build_cutoffs: transition must be >= 2 cells");
  require(transition <= std::min(w0 - w1, w2 - w3),
          "build_cutoffs: transition does not fit between consecutive layers");

  CutoffPair p;
  p.transition = transition;
  p.chi1.resize(g.size());
  p.chi2.resize(g.size());
  std::vector<int> ws, wss;
  for (std::int64_t id = 0; id < g.size(); ++id) {
    const int d = g.depth(static_cast<int>(id));
    p.chi2[id] = smoothstep5(double(d - w3) / transition);
    p.chi1[id] = 1.0 - smoothstep5(double(d - w1) / transition);
    if (d >= w1 && d <= w0 + 1) ws.push_back(static_cast<int>(id));
    if (d >= w1 + transition && d <= w0 + 1) wss.push_back(static_cast<int>(id));
  }
  p.w_sharp = NodeSet::from_ids(std::move(ws), g.size());
  p.w_sharp_star = NodeSet::from_ids(std::move(wss), g.size());
  return p;
}

}  // namespace qstab

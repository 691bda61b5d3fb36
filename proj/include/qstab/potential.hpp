#pragma once

#include "qstab/field.hpp"

namespace qstab {

/// Bounded potential on the grid. Values are stored complex for uniformity
/// with the field layer but are real in every experiment here.
struct Potential {
  VectorXcd values;       // one per node
  double linf_bound = 0;  // M >= sup |values|
  bool vanishes_in_O = false;
  std::string tag;        // identifies the potential in caches and reports

  double max_abs() const {
    double m = 0;
    for (std::int64_t i = 0; i < values.size(); ++i) m = std::max(m, std::abs(values[i]));
    return m;
  }
  bool is_real(double tol = 0.0) const {
    for (std::int64_t i = 0; i < values.size(); ++i)
      if (std::abs(values[i].imag()) > tol) return false;
    return true;
  }
  std::string hash() const {
    Hasher h;
    h.add(values);
    h.add(linf_bound);
    h.add(tag);
    return h.hex();
  }
};

inline void validate_potential(const Grid& g, const Potential& q,
                               const NeighborhoodChain* chain = nullptr) {
  require(q.values.size() == g.size(), "potential: wrong number of node values");
  if (q.max_abs() > q.linf_bound * (1 + 1e-12))
    throw invariant_error("potential: values exceed the declared L-inf bound");
  if (q.vanishes_in_O) {
    require(chain != nullptr, "potential: vanishes_in_O set but no neighborhood chain given");
    for (int id : chain->outer().ids)
      if (std::abs(q.values[id]) != 0.0)
        throw invariant_error("potential: flagged as vanishing in O but nonzero there");
  }
}

inline Potential zero_potential(const Grid& g, const std::string& tag = "zero") {
  return {VectorXcd::Zero(g.size()), 0.0, true, tag};
}

inline Potential constant_potential(const Grid& g, double c, const std::string& tag = "const") {
  Potential q{VectorXcd::Constant(g.size(), cplx(c, 0)), std::abs(c), false, tag};
  return q;
}

/// amplitude * exp(-|x-c|^2 / (2 sigma^2))
inline Potential gaussian_bump(const Grid& g, Vector3d center, double sigma, double amplitude,
                               const std::string& tag = "gauss") {
  Potential q;
  q.tag = tag;
  q.values.resize(g.size());
  for (std::int64_t id = 0; id < g.size(); ++id) {
    const double r2 = (g.coord(static_cast<int>(id)) - center).squaredNorm();
    q.values[id] = amplitude * std::exp(-r2 / (2 * sigma * sigma));
  }
  q.linf_bound = std::abs(amplitude);
  return q;
}

/// Compactly supported C^2 ball bump: amplitude * s5((radius - |x-c|)/trans).
inline Potential ball_bump(const Grid& g, Vector3d center, double radius, double trans,
                           double amplitude, const std::string& tag = "ball") {
  require(trans > 0 && radius > trans, "ball_bump: need 0 < trans < radius");
  Potential q;
  q.tag = tag;
  q.values.resize(g.size());
  for (std::int64_t id = 0; id < g.size(); ++id) {
    const double r = (g.coord(static_cast<int>(id)) - center).norm();
    q.values[id] = amplitude * smoothstep5((radius - r) / trans);
  }
  q.linf_bound = std::abs(amplitude);
  return q;
}

/// Separable standing-wave mode, amplitude * prod_d sin(pi m_d (x_d-origin)/extent).
inline Potential sine_mode(const Grid& g, std::array<int, 3> m, double amplitude,
                           const std::string& tag = "mode") {
  Potential q;
  q.tag = tag;
  q.values.resize(g.size());
  for (std::int64_t id = 0; id < g.size(); ++id) {
    const Vector3d x = g.coord(static_cast<int>(id));
    double v = amplitude;
    for (int d = 0; d < 3; ++d) v *= std::sin(M_PI * m[d] * (x[d] - g.origin) / g.extent);
    q.values[id] = v;
  }
  q.linf_bound = std::abs(amplitude);
  return q;
}

/// Multiply by a C^2 window that vanishes node-exactly on the closure of O
/// (and on the interface shell), so that the result is an admissible
/// difference supported away from the boundary layer. The window rises over
/// `transition` cells starting just inside the interface.
inline Potential windowed_in_core(const Grid& g, const NeighborhoodChain& chain, Potential q,
                                  int transition = 2) {
  const int w0 = chain.outer_width();
  require(transition >= 1, "windowed_in_core: transition must be >= 1");
  for (std::int64_t id = 0; id < g.size(); ++id) {
    const int d = g.depth(static_cast<int>(id));
    q.values[id] *= smoothstep5(double(d - w0) / transition);
  }
  q.vanishes_in_O = true;
  q.linf_bound = q.max_abs();
  q.tag += "|corewin";
  return q;
}

/// q1 + q2 with combined bound and metadata.
inline Potential add_potentials(const Potential& a, const Potential& b, const std::string& tag) {
  Potential q;
  q.values = a.values + b.values;
  q.linf_bound = q.max_abs();
  q.vanishes_in_O = a.vanishes_in_O && b.vanishes_in_O;
  q.tag = tag;
  return q;
}

}  // namespace qstab

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "qstab/core.hpp"

namespace qstab {

using SparseD = Eigen::SparseMatrix<double>;
using SparseC = Eigen::SparseMatrix<cplx>;

struct SymEig {
  VectorXd values;   // ascending
  MatrixXd vectors;  // columns
};

/// Dense symmetric eigendecomposition (Eigen; the system LAPACK returns
/// non-orthogonal eigenvectors for n >~ 100 on this platform, so it is not
/// used).
inline SymEig sym_eig(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw numerical_error("dense symmetric eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Eigenvalues of a real symmetric operator nearest the shift sigma, by
/// shift-invert Lanczos with full reorthogonalization. `solve_shifted` must
/// apply (A - sigma I)^{-1}. Returns up to `count` converged eigenvalues
/// sorted by |lambda - sigma|.
inline std::vector<double> shift_invert_eigenvalues(
    std::int64_t n, double sigma, const std::function<VectorXd(const VectorXd&)>& solve_shifted,
    int count, int max_iter = 80, double tol = 1e-9) {
  const int m = static_cast<int>(std::min<std::int64_t>(max_iter, n));
  MatrixXd v(n, m + 1);
  VectorXd alpha(m), beta(m);
  VectorXd v0(n);  // fixed deterministic start vector
  for (std::int64_t i = 0; i < n; ++i) v0[i] = std::sin(0.7 * double(i + 1)) + 0.3;
  v0.normalize();
  v.col(0) = v0;
  int built = 0;
  for (int j = 0; j < m; ++j) {
    VectorXd w = solve_shifted(v.col(j));
    if (!w.allFinite()) break;
    alpha[j] = v.col(j).dot(w);
    w -= alpha[j] * v.col(j);
    if (j > 0) w -= beta[j - 1] * v.col(j - 1);
    for (int r = 0; r <= j; ++r) w -= v.col(r).dot(w) * v.col(r);  // reorthogonalize
    beta[j] = w.norm();
    built = j + 1;
    if (beta[j] < 1e-14) break;
    v.col(j + 1) = w / beta[j];
  }
  if (built == 0) throw numerical_error("shift_invert_eigenvalues: no Krylov basis built");

  MatrixXd t = MatrixXd::Zero(built, built);
  for (int j = 0; j < built; ++j) {
    t(j, j) = alpha[j];
    if (j + 1 < built) t(j, j + 1) = t(j + 1, j) = beta[j];
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
  std::vector<std::pair<double, double>> ritz;  // (|lambda - sigma|, lambda)
  for (int j = 0; j < built; ++j) {
    const double theta = es.eigenvalues()[j];
    if (std::abs(theta) < 1e-300) continue;
    const double resid = std::abs(beta[built - 1] * es.eigenvectors()(built - 1, j));
    if (resid > tol * std::max(1.0, std::abs(theta))) continue;
    ritz.emplace_back(std::abs(1.0 / theta), sigma + 1.0 / theta);
  }
  std::sort(ritz.begin(), ritz.end());
  std::vector<double> out;
  for (const auto& r : ritz) {
    out.push_back(r.second);
    if (static_cast<int>(out.size()) >= count) break;
  }
  return out;
}

/// Largest eigenvalue of the generalized Hermitian problem
///   (B^H N B) x = lambda * D x
/// given callbacks for y = B x, y = B^H x, y = N x, and x = D^{-1} y, by power
/// iteration with a fixed start vector. Returns sqrt(lambda) (a largest
/// generalized singular value of B between the D- and N-metrics).
template <class ApplyB, class ApplyBH, class ApplyN, class SolveD>
double generalized_largest_singular(std::int64_t dim, ApplyB&& apply_b, ApplyBH&& apply_bh,
                                    ApplyN&& apply_n, SolveD&& solve_d, int max_iter = 200,
                                    double tol = 1e-11) {
  VectorXcd x(dim);
  for (std::int64_t i = 0; i < dim; ++i) x[i] = cplx(1.0 + 0.1 * std::sin(0.31 * double(i)), 0.0);
  x /= x.norm();
  double lambda = 0;
  for (int it = 0; it < max_iter; ++it) {
    VectorXcd y = apply_b(x);
    y = apply_n(y);
    VectorXcd z = apply_bh(y);
    z = solve_d(z);
    const double nz = z.norm();
    if (nz == 0) return 0;
    z /= nz;
    const double prev = lambda;
    lambda = nz;
    x = z;
    if (it > 4 && std::abs(lambda - prev) <= tol * std::max(1.0, lambda)) break;
  }
  // lambda approximates the largest eigenvalue of D^{-1} B^H N B in the
  // D-metric power sense; the singular value is its square root only when the
  // iteration is run on the symmetrized operator, which the D-solve provides.
  return std::sqrt(lambda);
}

}  // namespace qstab

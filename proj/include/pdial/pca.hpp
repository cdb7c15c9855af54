#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pdial/linalg.hpp"

namespace pdial {

/// A location in the 2-D user-facing perspective space.
struct PerspectivePoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const PerspectivePoint&) const = default;
};

struct SymmetricEigen {
  Vector values;        // descending
  Matrix vectors;       // row i is the unit eigenvector for values[i]
  std::size_t sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Each sweep visits
/// the strict upper triangle row by row. Stops once the off-diagonal
/// Frobenius norm is <= rel_tol * |A|_F. Throws NumericError when that does
/// not happen within max_sweeps.
SymmetricEigen jacobi_eigen(const Matrix& a, std::size_t max_sweeps = 100, double rel_tol = 1e-12);

/// Flips each row so that its entry of largest magnitude is positive
/// (first such entry on ties).
void apply_sign_convention(Matrix& rows);

struct PcaModel {
  Vector mean;
  Matrix components;             // out_dim x d, orthonormal rows
  Vector explained_variance;     // out_dim, descending

  std::size_t dimension() const noexcept { return mean.size(); }
  bool operator==(const PcaModel&) const = default;
};

/// Sample covariance (1/(n-1)) of the points about their mean.
Matrix covariance(std::span<const Vector> points, const Vector& mean);

/// Needs at least 3 points of a common dimension >= 2 (and >= out_dim).
PcaModel fit_pca(std::span<const Vector> points, std::size_t out_dim = 2);

/// components * (p - mean), any output dimension.
Vector pca_project(const PcaModel& model, std::span<const double> p);

/// 2-D variant; the model must have exactly two components.
PerspectivePoint pca_transform(const PcaModel& model, std::span<const double> p);

}  // namespace pdial

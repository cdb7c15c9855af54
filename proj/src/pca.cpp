#include "pdial/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pdial/errors.hpp"

namespace pdial {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (i != j) s += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(s);
}

// A <- J^T A J and V <- V J for the rotation that zeroes A(p, q).
void rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = tau >= 0.0 ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                              : -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;
  const std::size_t n = a.rows();
  for (std::size_t k = 0; k < n; ++k) {
    const double akp = a(k, p);
    const double akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double apk = a(p, k);
    const double aqk = a(q, k);
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace

SymmetricEigen jacobi_eigen(const Matrix& input, std::size_t max_sweeps, double rel_tol) {
  const std::size_t n = input.rows();
  if (n == 0 || input.cols() != n) throw InputError("jacobi_eigen: matrix must be square and non-empty");
  if (!all_finite(input.data())) throw NumericError("jacobi_eigen: matrix has non-finite entries");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (input(i, j) != input(j, i)) throw InputError("jacobi_eigen: matrix is not symmetric");
    }
  }

  Matrix a = input;
  Matrix v = Matrix::identity(n);
  const double tol = rel_tol * frobenius_norm(input);
  std::size_t sweeps = 0;
  while (off_diagonal_norm(a) > tol) {
    if (sweeps == max_sweeps) {
      throw NumericError("jacobi_eigen: no convergence after " + std::to_string(max_sweeps) +
                         " sweeps (off-diagonal norm " + std::to_string(off_diagonal_norm(a)) + ")");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) rotate(a, v, p, q);
    }
    ++sweeps;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out{Vector(n), Matrix(n, n), sweeps};
  for (std::size_t r = 0; r < n; ++r) {
    out.values[r] = a(order[r], order[r]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(r, k) = v(k, order[r]);
  }
  return out;
}

void apply_sign_convention(Matrix& rows) {
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    auto row = rows.row(r);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (std::abs(row[k]) > std::abs(row[best])) best = k;
    }
    if (row[best] < 0.0) {
      for (double& x : row) x = -x;
    }
  }
}

Matrix covariance(std::span<const Vector> points, const Vector& mean) {
  const std::size_t d = mean.size();
  Matrix c(d, d);
  Vector centered(d);
  for (const auto& p : points) {
    for (std::size_t k = 0; k < d; ++k) centered[k] = p[k] - mean[k];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) c(i, j) += centered[i] * centered[j];
    }
  }
  const double denom = static_cast<double>(points.size() - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      c(i, j) /= denom;
      c(j, i) = c(i, j);
    }
  }
  return c;
}

PcaModel fit_pca(std::span<const Vector> points, std::size_t out_dim) {
  if (points.size() < 3) {
    throw InputError("fit_pca needs at least 3 points, got " + std::to_string(points.size()));
  }
  const std::size_t d = points.front().size();
  if (d < 2) throw InputError("fit_pca: points must have dimension >= 2");
  if (out_dim == 0 || out_dim > d) {
    throw InputError("fit_pca: output dimension " + std::to_string(out_dim) +
                     " is not in [1, " + std::to_string(d) + "]");
  }
  Vector mean(d, 0.0);
  for (const auto& p : points) {
    if (p.size() != d) throw InputError("fit_pca: points have differing dimensions");
    if (!all_finite(p)) throw NumericError("fit_pca: point contains non-finite values");
    for (std::size_t k = 0; k < d; ++k) mean[k] += p[k];
  }
  for (double& m : mean) m /= static_cast<double>(points.size());

  const auto eig = jacobi_eigen(covariance(points, mean));
  PcaModel model{mean, Matrix(out_dim, d), Vector(out_dim)};
  for (std::size_t r = 0; r < out_dim; ++r) {
    // Round-off can leave a null direction slightly negative.
    model.explained_variance[r] = std::max(0.0, eig.values[r]);
    for (std::size_t k = 0; k < d; ++k) model.components(r, k) = eig.vectors(r, k);
  }
  apply_sign_convention(model.components);
  return model;
}

Vector pca_project(const PcaModel& model, std::span<const double> p) {
  if (p.size() != model.dimension()) {
    throw InputError("pca_transform: point has dimension " + std::to_string(p.size()) +
                     ", model expects " + std::to_string(model.dimension()));
  }
  Vector centered(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) centered[k] = p[k] - model.mean[k];
  return matvec(model.components, centered);
}

PerspectivePoint pca_transform(const PcaModel& model, std::span<const double> p) {
  if (model.components.rows() != 2) {
    throw InputError("pca_transform: model has " + std::to_string(model.components.rows()) +
                     " components, expected 2");
  }
  const auto v = pca_project(model, p);
  return {v[0], v[1]};
}

}  // namespace pdial

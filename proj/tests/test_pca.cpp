#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "pdial/errors.hpp"
#include "pdial/pca.hpp"

using namespace pdial;

namespace {

std::vector<Vector> random_cloud(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Vector> pts(n, Vector(d));
  // Anisotropic scales keep the eigenvalues well separated.
  for (auto& p : pts) {
    for (std::size_t k = 0; k < d; ++k) p[k] = g(rng) * (1.0 + 1.5 * static_cast<double>(d - k));
  }
  return pts;
}

Eigen::MatrixXd to_eigen(const std::vector<Vector>& pts) {
  Eigen::MatrixXd m(pts.size(), pts[0].size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t k = 0; k < pts[0].size(); ++k) m(i, k) = pts[i][k];
  }
  return m;
}

}  // namespace

TEST(Jacobi, DiagonalInputNeedsNoSweep) {
  Matrix a(3, 3);
  a(0, 0) = 1;
  a(1, 1) = 3;
  a(2, 2) = 2;
  const auto e = jacobi_eigen(a);
  EXPECT_EQ(e.values, (Vector{3, 2, 1}));
  EXPECT_EQ(e.sweeps, 0u);
}

TEST(Jacobi, TwoByTwo) {
  const auto e = jacobi_eigen(Matrix(2, 2, {2, 1, 1, 2}));
  EXPECT_NEAR(e.values[0], 3.0, 1e-14);
  EXPECT_NEAR(e.values[1], 1.0, 1e-14);
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(e.vectors(0, 0)), s, 1e-14);
  EXPECT_NEAR(e.vectors(0, 0), e.vectors(0, 1), 1e-14);
}

TEST(Jacobi, NonConvergenceIsNumericError) {
  EXPECT_THROW(jacobi_eigen(Matrix(2, 2, {2, 1, 1, 2}), 0), NumericError);
  EXPECT_THROW(jacobi_eigen(Matrix(2, 3)), InputError);
}

TEST(Jacobi, MatchesEigenSolver) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + t % 7;
    Matrix a(n, n);
    Eigen::MatrixXd ea(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double v = g(rng);
        a(i, j) = a(j, i) = v;
        ea(i, j) = ea(j, i) = v;
      }
    }
    const auto e = jacobi_eigen(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ea);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(e.values[k], es.eigenvalues()(static_cast<Eigen::Index>(n - 1 - k)), 1e-10);
    }
  }
}

TEST(SignConvention, LargestMagnitudePositive) {
  Matrix m(2, 3, {0.1, -0.9, 0.3, -0.5, 0.5, 0.2});
  apply_sign_convention(m);
  EXPECT_EQ(m.row(0)[1], 0.9);
  EXPECT_EQ(m.row(0)[0], -0.1);
  // Tie: the first entry of largest magnitude decides.
  EXPECT_EQ(m.row(1)[0], 0.5);
  EXPECT_EQ(m.row(1)[1], -0.5);
}

TEST(Pca, PointsOnALineGiveRankOne) {
  std::vector<Vector> pts;
  for (int t = -2; t <= 2; ++t) pts.push_back({1.0 + t, 2.0 + 2.0 * t, -1.0 - t});
  const auto m = fit_pca(pts);
  const double s = 1.0 / std::sqrt(6.0);
  EXPECT_NEAR(m.components(0, 0), s, 1e-12);
  EXPECT_NEAR(m.components(0, 1), 2 * s, 1e-12);
  EXPECT_NEAR(m.components(0, 2), -s, 1e-12);
  // Var of t in {-2..2} with 1/(n-1) is 2.5, times |(1,2,-1)|^2 = 6.
  EXPECT_NEAR(m.explained_variance[0], 15.0, 1e-12);
  EXPECT_NEAR(m.explained_variance[1], 0.0, 1e-12);
  EXPECT_GE(m.explained_variance[1], 0.0);
}

TEST(Pca, SquareCornersHaveEqualVariances) {
  const std::vector<Vector> pts{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  const auto m = fit_pca(pts);
  EXPECT_NEAR(m.explained_variance[0], 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(m.explained_variance[1], 4.0 / 3.0, 1e-14);
}

TEST(Pca, MeanAndTransform) {
  const std::vector<Vector> pts{{0, 0, 0}, {2, 0, 0}, {0, 4, 0}, {2, 4, 0}};
  const auto m = fit_pca(pts);
  EXPECT_EQ(m.mean, (Vector{1, 2, 0}));
  const auto c = pca_transform(m, m.mean);
  EXPECT_EQ(c.x, 0.0);
  EXPECT_EQ(c.y, 0.0);
  // Largest variance along y, then x; sign rule makes both components positive.
  const auto p = pca_transform(m, std::vector<double>{2, 4, 0});
  EXPECT_NEAR(p.x, 2.0, 1e-12);
  EXPECT_NEAR(p.y, 1.0, 1e-12);
}

TEST(Pca, MatchesEigenOnRandomCloud) {
  const auto pts = random_cloud(5, 50, 5);
  const auto m = fit_pca(pts, 5);
  const Eigen::MatrixXd x = to_eigen(pts);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mu;
  const Eigen::MatrixXd cov = centered.transpose() * centered / 49.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  for (int k = 0; k < 5; ++k) {
    EXPECT_NEAR(m.explained_variance[k], es.eigenvalues()(4 - k), 1e-8);
    const Eigen::VectorXd v = es.eigenvectors().col(4 - k);
    double sign_dot = 0.0;
    for (int j = 0; j < 5; ++j) sign_dot += v(j) * m.components(k, j);
    const double s = sign_dot < 0 ? -1.0 : 1.0;
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(m.components(k, j), s * v(j), 1e-8);
  }
}

TEST(Pca, ComponentsAreOrthonormalAndPreserveTrace) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t d = 3 + seed % 5;
    const auto pts = random_cloud(100 + seed, 30, d);
    const auto m = fit_pca(pts, d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        EXPECT_NEAR(dot(m.components.row(i), m.components.row(j)), i == j ? 1.0 : 0.0, 1e-12);
      }
    }
    const auto cov = covariance(pts, m.mean);
    double trace = 0.0, sum = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      trace += cov(k, k);
      sum += m.explained_variance[k];
    }
    EXPECT_NEAR(sum, trace, 1e-10 * trace);
    for (std::size_t k = 1; k < d; ++k) {
      EXPECT_GE(m.explained_variance[k - 1], m.explained_variance[k]);
    }
  }
}

TEST(Pca, DeterministicAndSignStable) {
  const auto pts = random_cloud(9, 40, 6);
  const auto a = fit_pca(pts);
  const auto b = fit_pca(pts);
  EXPECT_EQ(a, b);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto row = a.components.row(k);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (std::abs(row[j]) > std::abs(row[arg])) arg = j;
    }
    EXPECT_GT(row[arg], 0.0);
  }
}

TEST(Pca, Errors) {
  EXPECT_THROW(fit_pca(std::vector<Vector>{{1, 2}, {3, 4}}), InputError);
  EXPECT_THROW(fit_pca(std::vector<Vector>{{1}, {2}, {3}}), InputError);
  EXPECT_THROW(fit_pca(std::vector<Vector>{{1, 2}, {3, 4}, {5}}), InputError);
  EXPECT_THROW(fit_pca(random_cloud(1, 10, 3), 4), InputError);
  const auto m = fit_pca(random_cloud(1, 10, 3));
  EXPECT_THROW(pca_transform(m, std::vector<double>{1, 2}), InputError);
  const auto m3 = fit_pca(random_cloud(1, 10, 3), 3);
  EXPECT_THROW(pca_transform(m3, std::vector<double>{1, 2, 3}), InputError);
  EXPECT_EQ(pca_project(m3, std::vector<double>{1, 2, 3}).size(), 3u);
}

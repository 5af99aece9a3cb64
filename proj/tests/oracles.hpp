// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

// Independent reference computations used by the tests. Nothing here calls into the library
// code paths it is compared against; everything is dense, direct and slow on purpose.

#ifndef CERTROM_TESTS_ORACLES_HPP
#define CERTROM_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle
{

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix RandomMatrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                           double lo = -1.0, double hi = 1.0)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; j++)
  {
    for (Eigen::Index i = 0; i < rows; i++)
    {
      m(i, j) = u(rng);
    }
  }
  return m;
}

// Block index of a point of the unit square split into per_axis x per_axis equal blocks.
inline int BlockAt(double x, double y, int per_axis)
{
  const auto cell = [per_axis](double t)
  { return std::clamp(static_cast<int>(std::floor(t * per_axis)), 0, per_axis - 1); };
  return cell(y) * per_axis + cell(x);
}

// 5-point operator with edge coefficient = arithmetic mean of the two endpoint diffusivities.
// Boundary edges connect to a ghost node located on the boundary itself.
inline Matrix DenseDiffusion(int n, int per_axis, const std::vector<double> &diffusivity)
{
  const double h = 1.0 / (n + 1);
  Matrix A = Matrix::Zero(n * n, n * n);
  const auto mu_at = [&](int i, int j)
  { return diffusivity[BlockAt((i + 1) * h, (j + 1) * h, per_axis)]; };
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, 1, -1};
  for (int j = 0; j < n; j++)
  {
    for (int i = 0; i < n; i++)
    {
      const int p = j * n + i;
      for (int e = 0; e < 4; e++)
      {
        const int ni = i + di[e], nj = j + dj[e];
        const double coeff = 0.5 * (mu_at(i, j) + mu_at(ni, nj));
        A(p, p) += coeff;
        if (ni >= 0 && ni < n && nj >= 0 && nj < n)
        {
          A(p, nj * n + ni) -= coeff;
        }
      }
    }
  }
  return A;
}

// Implicit Euler M (u^k - u^{k-1}) / dt + A u^k = l from u^0 = 0, by dense LU.
inline Matrix ImplicitEuler(const Matrix &M, const Matrix &A, const Vector &l, double dt, int steps)
{
  Matrix U = Matrix::Zero(M.rows(), steps + 1);
  const Eigen::FullPivLU<Matrix> lu(M + dt * A);
  for (int k = 1; k <= steps; k++)
  {
    U.col(k) = lu.solve(M * U.col(k - 1) + dt * l);
  }
  return U;
}

// Squared G^{-1} dual norms of the implicit Euler residual of a lifted trajectory U.
inline Vector ResidualDualNorms(const Matrix &M, const Matrix &A, const Matrix &G, const Vector &l,
                                const Matrix &U, double dt)
{
  const Eigen::LDLT<Matrix> g(G);
  Vector out(U.cols() - 1);
  for (Eigen::Index k = 1; k < U.cols(); k++)
  {
    const Vector r = l - M * (U.col(k) - U.col(k - 1)) / dt - A * U.col(k);
    out(k - 1) = r.dot(g.solve(r));
  }
  return out;
}

inline double TwoPassMean(const std::vector<double> &v)
{
  long double s = 0;
  for (double x : v)
  {
    s += x;
  }
  return static_cast<double>(s / v.size());
}

inline double TwoPassVariance(const std::vector<double> &v)
{
  const long double mean = TwoPassMean(v);
  long double ss = 0;
  for (double x : v)
  {
    ss += (x - mean) * (x - mean);
  }
  return static_cast<double>(ss / (v.size() - 1));
}

// f-greedy by brute force: at every step the interpolant on the selected set is recomputed
// from scratch with a dense solve and the unselected point with the largest residual norm is
// taken (lowest index on ties).
inline std::vector<Eigen::Index> BruteForceGreedy(
    const Matrix &X, const Matrix &Y, const std::function<double(const Vector &, const Vector &)> &k,
    Eigen::Index steps)
{
  std::vector<Eigen::Index> chosen;
  const Eigen::Index N = X.rows();
  for (Eigen::Index step = 0; step < std::min(steps, N); step++)
  {
    const auto n = static_cast<Eigen::Index>(chosen.size());
    Matrix coef;
    if (n > 0)
    {
      Matrix K(n, n), Ys(n, Y.cols());
      for (Eigen::Index a = 0; a < n; a++)
      {
        Ys.row(a) = Y.row(chosen[a]);
        for (Eigen::Index b = 0; b < n; b++)
        {
          K(a, b) = k(X.row(chosen[a]).transpose(), X.row(chosen[b]).transpose());
        }
      }
      coef = K.fullPivLu().solve(Ys);
    }
    double best = -1;
    Eigen::Index arg = -1;
    for (Eigen::Index i = 0; i < N; i++)
    {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end())
      {
        continue;
      }
      Vector pred = Vector::Zero(Y.cols());
      for (Eigen::Index a = 0; a < n; a++)
      {
        pred += k(X.row(i).transpose(), X.row(chosen[a]).transpose()) * coef.row(a).transpose();
      }
      const double res = (Y.row(i).transpose() - pred).norm();
      if (res > best)
      {
        best = res;
        arg = i;
      }
    }
    chosen.push_back(arg);
  }
  return chosen;
}

// Leave-one-out error by literally refitting the ridge interpolant without each point.
inline double LooLossByRefit(const std::function<double(const Vector &, const Vector &)> &k,
                             const Matrix &X, const Matrix &Y, double ridge)
{
  const Eigen::Index m = X.rows();
  double loss = 0;
  for (Eigen::Index out = 0; out < m; out++)
  {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < m; i++)
    {
      if (i != out)
      {
        keep.push_back(i);
      }
    }
    const auto n = static_cast<Eigen::Index>(keep.size());
    Matrix K(n, n), Ys(n, Y.cols());
    for (Eigen::Index a = 0; a < n; a++)
    {
      Ys.row(a) = Y.row(keep[a]);
      for (Eigen::Index b = 0; b < n; b++)
      {
        K(a, b) = k(X.row(keep[a]).transpose(), X.row(keep[b]).transpose()) + (a == b ? ridge : 0);
      }
    }
    const Matrix coef = K.ldlt().solve(Ys);
    Vector pred = Vector::Zero(Y.cols());
    for (Eigen::Index a = 0; a < n; a++)
    {
      pred += k(X.row(out).transpose(), X.row(keep[a]).transpose()) * coef.row(a).transpose();
    }
    loss += (Y.row(out).transpose() - pred).squaredNorm();
  }
  return loss / static_cast<double>(m);
}

inline double GaussianKernel(const Vector &x, const Vector &z, double eps)
{
  const double r = eps * (x - z).norm();
  return std::exp(-r * r);
}

inline double MaternKernel(const Vector &x, const Vector &z, double eps)
{
  const double r = eps * (x - z).norm();
  return (1.0 + r + r * r / 3.0) * std::exp(-r);
}

}  // namespace oracle

#endif  // CERTROM_TESTS_ORACLES_HPP

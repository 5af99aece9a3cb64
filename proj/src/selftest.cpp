// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "certrom/driver.hpp"
#include "certrom/fom.hpp"
#include "certrom/kernels.hpp"
#include "certrom/optim.hpp"
#include "certrom/rb.hpp"
#include "certrom/reference.hpp"
#include "certrom/sdkn.hpp"
#include "certrom/vkoga.hpp"

namespace certrom::selftest
{

namespace
{

struct Check
{
  bool pass;
  std::string detail;
};

Matrix Dense(const fom::SparseMatrix &A) { return Matrix(A); }

std::string Num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

Matrix RandomMatrix(Eigen::Index r, Eigen::Index c, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; j++)
  {
    for (Eigen::Index i = 0; i < r; i++)
    {
      m(i, j) = u(rng);
    }
  }
  return m;
}

fom::FomSpec SmallSpec()
{
  fom::FomSpec s;
  s.grid_n = 8;
  s.num_steps = 10;
  return s;
}

param::Parameter SomeParameter()
{
  param::Parameter mu;
  mu.values.resize(6);
  mu.values << 0.7, 2.0, 0.3, 5.0, 0.4, 0.9;
  return mu;
}

Check PartitionOfStiffness()
{
  const fom::FomModel model(SmallSpec());
  fom::SparseMatrix sum = model.stiffness(0);
  for (int b = 1; b < model.blocks(); b++)
  {
    sum += model.stiffness(b);
  }
  const double diff = Dense(sum - model.UnsplitStiffness()).cwiseAbs().maxCoeff();
  return {diff < 1e-12, "max |sum A_b - A| = " + Num(diff)};
}

Check ImplicitEulerDense()
{
  const fom::FomModel model(SmallSpec());
  const auto mu = SomeParameter();
  const auto traj = fom::Solve(model, mu);
  const Matrix M = Dense(model.mass());
  const Matrix A = Dense(model.Operator(mu));
  const Vector l = model.Rhs(mu);
  const Eigen::PartialPivLU<Matrix> lu(M + model.dt() * A);
  Vector u = Vector::Zero(model.dofs());
  double worst = 0;
  for (int k = 1; k <= model.num_steps(); k++)
  {
    u = lu.solve(M * u + model.dt() * l);
    worst = std::max(worst, (u - traj.snapshots.col(k)).cwiseAbs().maxCoeff() /
                                std::max(1.0, u.cwiseAbs().maxCoeff()));
  }
  return {worst < 1e-10, "max scaled deviation = " + Num(worst)};
}

Check ResidualGramDense()
{
  const fom::FomModel model(SmallSpec());
  const auto mu = SomeParameter();
  auto other = mu;
  other.values(0) = 3.0;
  other.values(4) = 0.1;
  auto basis = rb::ExtendBasisHapod(rb::ReducedBasis::Empty(model.dofs()), fom::Solve(model, other),
                                    model, 1e-2);
  const auto rm = rb::ProjectOperators(model, basis);
  const auto red = rb::SolveReduced(rm, mu);
  const Vector fast = rb::ResidualDualNormsSquared(rm, mu, red.coeffs);

  const Matrix U = basis.vectors * red.coeffs;
  const Matrix M = Dense(model.mass());
  const Matrix A = Dense(model.Operator(mu));
  const Matrix G = Dense(model.energy_product());
  const Eigen::LLT<Matrix> g(G);
  const Vector l = model.Rhs(mu);
  double worst = 0;
  for (int k = 1; k <= model.num_steps(); k++)
  {
    const Vector r = l - M * (U.col(k) - U.col(k - 1)) / model.dt() - A * U.col(k);
    const double dense = r.dot(g.solve(r));
    worst = std::max(worst, std::abs(dense - fast(k - 1)) / std::max(dense, 1e-300));
  }
  return {worst < 1e-8, "basis size " + std::to_string(basis.size()) +
                            ", max relative deviation = " + Num(worst)};
}

Check OutputBoundRigor()
{
  const fom::FomModel model(SmallSpec());
  auto train = SomeParameter();
  train.values << 1.0, 1.0, 1.0, 1.0, 0.5, 0.5;
  const auto basis = rb::ExtendBasisHapod(rb::ReducedBasis::Empty(model.dofs()),
                                          fom::Solve(model, train), model, 5e-2);
  const auto rm = rb::ProjectOperators(model, basis);
  const auto mu = SomeParameter();
  const auto red = rb::SolveReduced(rm, mu);
  const double bound = rb::OutputBound(rm, rb::EstimateError(rm, mu, red.coeffs));
  const Vector truth = fom::Output(model, fom::Solve(model, mu));
  const double err = fom::L2TimeNorm(truth - rb::ReducedOutput(rm, red.coeffs), model.dt());
  return {err <= bound, "error " + Num(err) + " <= bound " + Num(bound)};
}

Check GreedyFirstPick()
{
  std::mt19937_64 rng(7);
  const Matrix X = RandomMatrix(30, 3, rng);
  const Matrix Y = RandomMatrix(30, 2, rng);
  const auto kernel = kernels::KernelConfig::Radial(kernels::Family::Gaussian, 1.0, 3);
  const auto model = vkoga::Fit(X, Y, kernel, {5, 1e-12, 1e-12});

  // First two picks by brute force: largest |y_i| / sqrt(k(x_i,x_i)), then the largest residual
  // of the one-point interpolant.
  Eigen::Index first = 0;
  Y.rowwise().norm().maxCoeff(&first);
  Eigen::Index second = 0;
  double best = -1;
  for (Eigen::Index i = 0; i < X.rows(); i++)
  {
    if (i == first)
    {
      continue;
    }
    const double kif = kernels::Eval(kernel, X.row(i).transpose(), X.row(first).transpose());
    const double kff = kernels::Eval(kernel, X.row(first).transpose(), X.row(first).transpose());
    const double res = (Y.row(i) - kif / kff * Y.row(first)).norm();
    if (res > best)
    {
      best = res;
      second = i;
    }
  }
  const bool ok = model.trace.size() >= 2 && model.trace[0].index == first &&
                  model.trace[1].index == second;
  return {ok, "picked " + (model.trace.size() >= 2 ? std::to_string(model.trace[0].index) + "," +
                                                         std::to_string(model.trace[1].index)
                                                   : std::string("<none>")) +
                  " expected " + std::to_string(first) + "," + std::to_string(second)};
}

Check InterpolationAtCenters()
{
  std::mt19937_64 rng(11);
  const Matrix X = RandomMatrix(20, 2, rng);
  const Matrix Y = RandomMatrix(20, 3, rng);
  const auto kernel = kernels::KernelConfig::Radial(kernels::Family::QuadraticMatern, 2.0, 2);
  const auto model = vkoga::Fit(X, Y, kernel, {8, 0.0, 1e-12});
  double worst = 0;
  for (Eigen::Index i = 0; i < model.size(); i++)
  {
    const Vector x = model.centers.row(i).transpose();
    Eigen::Index row = 0;
    (X.rowwise() - x.transpose()).rowwise().squaredNorm().minCoeff(&row);
    worst = std::max(worst, (model.Predict(x) - Y.row(row).transpose()).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-8, "max interpolation error = " + Num(worst)};
}

Check GradientAgainstFd(const std::function<double(const Vector &)> &f, const Vector &p,
                        const Vector &analytic, double tol)
{
  const Vector fd = optim::FdGradient(f, p, 1e-6);
  const double d = optim::ScaledMaxDifference(analytic, fd);
  return {d < tol, "scaled max difference = " + Num(d)};
}

Check LooGradient()
{
  std::mt19937_64 rng(3);
  const Matrix X = RandomMatrix(12, 3, rng);
  const Matrix Y = RandomMatrix(12, 2, rng);
  const Matrix A = Matrix::Identity(3, 3) + 0.2 * RandomMatrix(3, 3, rng);
  const auto fam = kernels::Family::Gaussian;
  const auto res = vkoga::LooLoss(fam, A, X, Y, 1e-8, true);
  const auto f = [&](const Vector &a) {
    return vkoga::LooLoss(fam, Eigen::Map<const Matrix>(a.data(), 3, 3), X, Y, 1e-8, false).loss;
  };
  const Vector p = Eigen::Map<const Vector>(A.data(), 9);
  return GradientAgainstFd(f, p, Eigen::Map<const Vector>(res.grad.data(), 9), 1e-5);
}

Check SdknGradient()
{
  std::mt19937_64 rng(5);
  const Matrix X = RandomMatrix(10, 3, rng);
  const Matrix Y = RandomMatrix(10, 2, rng);
  sdkn::SdknArchitecture arch{{3, 5, 4, 2}, 6, 9};
  const auto model = sdkn::Init(arch, X);
  const auto grad = sdkn::Backward(model, X, Y);
  const auto f = [&](const Vector &p) {
    auto m = model;
    m.SetParameters(p);
    return sdkn::MeanSquaredError(m, X, Y);
  };
  return GradientAgainstFd(f, model.Parameters(), grad.Flatten(), 1e-5);
}

Check WelfordTwoPass()
{
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(1e6, 1.0);
  std::vector<double> v(1000);
  driver::McAccumulator acc;
  for (auto &x : v)
  {
    x = n(rng);
    acc = driver::WelfordUpdate(acc, x);
  }
  double mean = 0;
  for (double x : v)
  {
    mean += x;
  }
  mean /= v.size();
  double ss = 0;
  for (double x : v)
  {
    ss += (x - mean) * (x - mean);
  }
  const double var = ss / (v.size() - 1);
  const double rel = std::abs(*acc.variance() - var) / var;
  return {rel < 1e-9 && std::abs(acc.mean - mean) < 1e-6,
          "relative variance deviation = " + Num(rel)};
}

Check ParallelMatchesSerial()
{
  std::mt19937_64 rng(17);
  const Matrix X = RandomMatrix(200, 4, rng);
  const Matrix Z = RandomMatrix(150, 4, rng);
  const double d = (kernels::GramTransformed(kernels::Family::QuadraticMatern, X, Z) -
                    reference::GramSerial(kernels::Family::QuadraticMatern, X, Z))
                       .cwiseAbs()
                       .maxCoeff();
  return {d == 0.0, "max |parallel - serial| = " + Num(d)};
}

}  // namespace

int Run(std::ostream &out)
{
  const std::vector<std::pair<std::string, std::function<Check()>>> checks{
      {"stiffness_partition", PartitionOfStiffness},
      {"implicit_euler_dense", ImplicitEulerDense},
      {"residual_gram_dense", ResidualGramDense},
      {"output_bound_rigor", OutputBoundRigor},
      {"greedy_first_picks", GreedyFirstPick},
      {"interpolation_at_centers", InterpolationAtCenters},
      {"loo_gradient_fd", LooGradient},
      {"sdkn_gradient_fd", SdknGradient},
      {"welford_two_pass", WelfordTwoPass},
      {"gram_parallel_serial", ParallelMatchesSerial},
  };
  int failures = 0;
  for (const auto &[name, fn] : checks)
  {
    Check c{false, ""};
    try
    {
      c = fn();
    }
    catch (const std::exception &e)
    {
      c = {false, std::string("exception: ") + e.what()};
    }
    failures += c.pass ? 0 : 1;
    out << (c.pass ? "PASS " : "FAIL ") << name << ": " << c.detail << '\n';
  }
  return failures;
}

}  // namespace certrom::selftest

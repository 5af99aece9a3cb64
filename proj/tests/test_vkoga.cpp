// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "oracles.hpp"

#include "certrom/optim.hpp"
#include "certrom/vkoga.hpp"

using namespace certrom;
using kernels::Family;
using kernels::KernelConfig;

namespace
{

double Rmse(const Matrix &a, const Matrix &b)
{
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

}  // namespace

TEST_CASE("single point fit is exact")
{
  Matrix X(1, 2), Y(1, 3);
  X << 0.2, -0.4;
  Y << 1, 2, 3;
  const auto m = vkoga::Fit(X, Y, KernelConfig::Radial(Family::Gaussian, 1.0, 2), {});
  REQUIRE(m.size() == 1);
  CHECK((m.Predict(X.row(0).transpose()) - Y.row(0).transpose()).norm() < 1e-14);
}

TEST_CASE("empty model predicts zero")
{
  vkoga::VkogaModel m;
  m.kernel = KernelConfig::Radial(Family::Gaussian, 1.0, 2);
  m.input_dim = 2;
  m.output_dim = 3;
  m.centers.resize(0, 2);
  m.coef.resize(0, 3);
  CHECK(m.Predict(Vector::Ones(2)).isZero(0.0));
  CHECK(m.Predict(Vector::Ones(2)).size() == 3);
}

TEST_CASE("three collinear points: exact interpolation and brute-force order")
{
  Matrix X(3, 1), Y(3, 1);
  X << 0, 1, 2;
  Y << 0, 1, 0;
  const auto cfg = KernelConfig::Radial(Family::Gaussian, 1.0, 1);
  const auto m = vkoga::Fit(X, Y, cfg, {3, 0.0, 1e-10});
  REQUIRE(m.size() == 3);
  for (Eigen::Index i = 0; i < 3; i++)
  {
    CHECK(std::abs(m.Predict(X.row(i).transpose())(0) - Y(i, 0)) <= 1e-8);
  }
  const auto k = [](const Vector &x, const Vector &z) { return oracle::GaussianKernel(x, z, 1.0); };
  const auto order = oracle::BruteForceGreedy(X, Y, k, 3);
  for (std::size_t i = 0; i < 3; i++)
  {
    CHECK(m.trace[i].index == order[i]);
  }
}

TEST_CASE("greedy trace equals the brute-force reselection oracle")
{
  for (std::uint64_t seed = 1; seed <= 10; seed++)
  {
    const Eigen::Index N = 10 + static_cast<Eigen::Index>(2 * seed);
    const Matrix X = oracle::RandomMatrix(N, 3, seed);
    const Matrix Y = oracle::RandomMatrix(N, 2, seed + 100);
    const double eps = 0.8 + 0.1 * static_cast<double>(seed);
    const auto fam = seed % 2 ? Family::Gaussian : Family::QuadraticMatern;
    const auto m = vkoga::Fit(X, Y, KernelConfig::Radial(fam, eps, 3), {10, 0.0, 1e-10});
    const auto k = [&](const Vector &x, const Vector &z)
    { return fam == Family::Gaussian ? oracle::GaussianKernel(x, z, eps)
                                     : oracle::MaternKernel(x, z, eps); };
    const auto order = oracle::BruteForceGreedy(X, Y, k, static_cast<Eigen::Index>(m.size()));
    REQUIRE(m.size() >= 5);
    for (std::size_t i = 0; i < m.trace.size(); i++)
    {
      CHECK(m.trace[i].index == order[i]);
    }
    Eigen::Index first = 0;
    Y.rowwise().norm().maxCoeff(&first);
    CHECK(m.trace[0].index == first);
  }
}

TEST_CASE("interpolation at every selected center")
{
  const Matrix X = oracle::RandomMatrix(30, 4, 5);
  const Matrix Y = oracle::RandomMatrix(30, 3, 6);
  const auto m = vkoga::Fit(X, Y, KernelConfig::Radial(Family::QuadraticMatern, 1.5, 4),
                            {20, 0.0, 1e-10});
  for (const auto &t : m.trace)
  {
    CHECK((m.Predict(X.row(t.index).transpose()) - Y.row(t.index).transpose())
              .cwiseAbs()
              .maxCoeff() <= 1e-8);
  }
}

TEST_CASE("power function at selected points is non-increasing")
{
  const Matrix X = oracle::RandomMatrix(40, 2, 12);
  const Matrix Y = oracle::RandomMatrix(40, 1, 13);
  const auto m = vkoga::Fit(X, Y, KernelConfig::Radial(Family::Gaussian, 2.0, 2), {25, 0.0, 1e-10});
  // The power function at a fixed point never increases as centers are added; the trace holds
  // its value at each newly selected point, which is bounded by the previous global maximum.
  CHECK(m.trace.front().power == doctest::Approx(1.0));
  for (const auto &t : m.trace)
  {
    CHECK(t.power <= 1.0 + 1e-12);
    CHECK(t.power > 0.0);
  }
}

TEST_CASE("stopping rules")
{
  const Matrix X = oracle::RandomMatrix(25, 2, 1);
  const Matrix Y = oracle::RandomMatrix(25, 1, 2);
  const auto cfg = KernelConfig::Radial(Family::Gaussian, 1.0, 2);
  const auto capped = vkoga::Fit(X, Y, cfg, {7, 0.0, 1e-10});
  CHECK(capped.size() == 7);
  CHECK(capped.stop == vkoga::StopReason::MaxCenters);
  const auto loose = vkoga::Fit(X, Y, cfg, {500, 0.5, 1e-10});
  CHECK(loose.stop == vkoga::StopReason::Tolerance);
  CHECK(loose.size() < 25);
  Matrix Xd(4, 2), Yd(4, 1);
  Xd << 0, 0, 1, 1, 0, 0, 2, 2;
  Yd << 1, 2, 5, 3;
  // The first pick is row 2 (largest |y|); its duplicate row 0 then has the largest residual
  // but a vanishing power function.
  const auto dup = vkoga::Fit(Xd, Yd, cfg, {500, 0.0, 1e-10});
  CHECK(dup.size() == 1);
  CHECK(dup.trace.front().index == 2);
  CHECK(dup.stop == vkoga::StopReason::PowerFunction);
}

TEST_CASE("greedy is deterministic and batch predict equals single predicts")
{
  const Matrix X = oracle::RandomMatrix(30, 3, 3);
  const Matrix Y = oracle::RandomMatrix(30, 2, 4);
  const auto cfg = KernelConfig::Radial(Family::QuadraticMatern, 1.0, 3);
  const auto a = vkoga::Fit(X, Y, cfg, {15, 0.0, 1e-10});
  const auto b = vkoga::Fit(X, Y, cfg, {15, 0.0, 1e-10});
  CHECK(a.centers == b.centers);
  CHECK(a.coef == b.coef);
  const Matrix P = oracle::RandomMatrix(9, 3, 5);
  const Matrix batch = a.PredictBatch(P);
  for (Eigen::Index i = 0; i < P.rows(); i++)
  {
    const Vector single = a.Predict(P.row(i).transpose());
    CHECK((batch.row(i).transpose() - single).norm() <= 1e-12 * std::max(1.0, single.norm()));
  }
}

TEST_CASE("closed-form LOO loss equals refitting without each point")
{
  const Matrix X = oracle::RandomMatrix(12, 3, 21);
  const Matrix Y = oracle::RandomMatrix(12, 2, 22);
  const Matrix A = Matrix::Identity(3, 3) + 0.3 * oracle::RandomMatrix(3, 3, 23);
  const double ridge = 1e-6;
  const auto res = vkoga::LooLoss(Family::Gaussian, A, X, Y, ridge, false);
  const auto k = [&](const Vector &x, const Vector &z)
  { return std::exp(-(A * (x - z)).squaredNorm()); };
  CHECK(res.loss == doctest::Approx(oracle::LooLossByRefit(k, X, Y, ridge)).epsilon(1e-8));
}

TEST_CASE("LOO gradient matches central differences")
{
  int seed = 0;
  for (auto fam : {Family::Gaussian, Family::QuadraticMatern})
  {
    for (int rep = 0; rep < 10; rep++, seed++)
    {
      const Eigen::Index d = 2 + seed % 3;
      const Matrix X = oracle::RandomMatrix(10 + seed % 5, d, 300 + seed);
      const Matrix Y = oracle::RandomMatrix(X.rows(), 2, 400 + seed);
      const Matrix A = Matrix::Identity(d, d) + 0.3 * oracle::RandomMatrix(d, d, 500 + seed);
      const auto res = vkoga::LooLoss(fam, A, X, Y, 1e-8, true);
      REQUIRE(res.ok);
      const auto f = [&](const Vector &a)
      { return vkoga::LooLoss(fam, Eigen::Map<const Matrix>(a.data(), d, d), X, Y, 1e-8, false).loss; };
      const Vector p = Eigen::Map<const Vector>(A.data(), d * d);
      const Vector fd = optim::FdGradient(f, p, 1e-6);
      const Vector g = Eigen::Map<const Vector>(res.grad.data(), d * d);
      CHECK(optim::ScaledMaxDifference(g, fd) <= 1e-5);
    }
  }
}

TEST_CASE("zero epochs leave A at epsilon times identity and match the plain fit")
{
  const Matrix X = oracle::RandomMatrix(40, 3, 8);
  const Matrix Y = oracle::RandomMatrix(40, 1, 9);
  const auto base = KernelConfig::Radial(Family::Gaussian, 1.3, 3);
  vkoga::TwoLayerTrainConfig cfg;
  cfg.epochs = 0;
  const auto report = vkoga::OptimizeTwoLayer(X, Y, base, cfg, 1);
  CHECK(report.inner == 1.3 * Matrix::Identity(3, 3));
  const auto two = vkoga::TwoLayerFit(X, Y, base, cfg, {20, 0.0, 1e-10}, 1);
  const auto plain = vkoga::Fit(X, Y, base, {20, 0.0, 1e-10});
  for (std::size_t i = 0; i < plain.trace.size(); i++)
  {
    CHECK(two.trace[i].index == plain.trace[i].index);
  }
  const Matrix P = oracle::RandomMatrix(10, 3, 10);
  CHECK((two.PredictBatch(P) - plain.PredictBatch(P)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("anisotropic target: 2L does not lose to plain VKOGA")
{
  const Eigen::Index N = 600;
  const Matrix X = oracle::RandomMatrix(N, 6, 31);
  const Matrix T = oracle::RandomMatrix(300, 6, 32);
  const auto target = [](const Matrix &P)
  { return Matrix(P.col(0).unaryExpr([](double t) { return std::sin(4.0 * t); })); };
  const auto base = KernelConfig::Radial(Family::Gaussian, 1.0, 6);
  const vkoga::GreedyOptions opts{60, 1e-10, 1e-10};
  const auto plain = vkoga::Fit(X, target(X), base, opts);
  const auto two = vkoga::TwoLayerFit(X, target(X), base, {}, opts, 7);
  CHECK(Rmse(two.PredictBatch(T), target(T)) <= Rmse(plain.PredictBatch(T), target(T)));
}

TEST_CASE("isotropic target: 2L stays within twice the plain error")
{
  const Eigen::Index N = 400;
  const Matrix X = oracle::RandomMatrix(N, 3, 41);
  const Matrix T = oracle::RandomMatrix(200, 3, 42);
  const auto target = [](const Matrix &P)
  { return Matrix(P.rowwise().squaredNorm().unaryExpr([](double t) { return std::exp(-t); })); };
  const auto base = KernelConfig::Radial(Family::QuadraticMatern, 1.0, 3);
  const vkoga::GreedyOptions opts{50, 1e-10, 1e-10};
  const auto plain = vkoga::Fit(X, target(X), base, opts);
  const auto two = vkoga::TwoLayerFit(X, target(X), base, {}, opts, 3);
  CHECK(Rmse(two.PredictBatch(T), target(T)) <= 2.0 * Rmse(plain.PredictBatch(T), target(T)));
}

TEST_CASE("model JSON round trip")
{
  const Matrix X = oracle::RandomMatrix(15, 2, 50);
  const Matrix Y = oracle::RandomMatrix(15, 2, 51);
  const auto m = vkoga::TwoLayerFit(X, Y, KernelConfig::Radial(Family::Gaussian, 1.0, 2), {},
                                    {10, 0.0, 1e-10}, 2);
  const auto back = vkoga::VkogaModelFromJson(nlohmann::json::parse(vkoga::ToJson(m).dump()));
  const Matrix P = oracle::RandomMatrix(5, 2, 52);
  CHECK(back.PredictBatch(P) == m.PredictBatch(P));
}

TEST_CASE("interpolation survives huge expansion coefficients")
{
  // Thirty noisy values on a 1-D interval: the expansion coefficients reach ~1e10, far beyond
  // what plain double summation can resolve at the 1e-8 level.
  const Matrix X = oracle::RandomMatrix(30, 1, 1004);
  const Matrix Y = oracle::RandomMatrix(30, 1, 1104);
  const auto m = vkoga::Fit(X, Y, KernelConfig::Radial(Family::QuadraticMatern, 1.5, 1),
                            {30, 0.0, 1e-10});
  REQUIRE(m.size() == 30);
  CHECK(m.coef.cwiseAbs().maxCoeff() > 1e8);
  for (Eigen::Index i = 0; i < 30; i++)
  {
    CHECK(std::abs(m.Predict(X.row(i).transpose())(0) - Y(i, 0)) <= 1e-8);
  }
  const auto back = vkoga::VkogaModelFromJson(nlohmann::json::parse(vkoga::ToJson(m).dump()));
  CHECK(back.PredictBatch(X) == m.PredictBatch(X));
}
